//! Derivative-free minimizers and a noisy-objective benchmark harness.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Nelder-Mead settings.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadConfig {
    /// Stop once `max f - min f` over the simplex falls below this.
    pub tol: f64,
    pub max_evals: usize,
    /// Per-coordinate initial steps; defaults to `max(0.05, 0.05 |x0_i|)`.
    pub initial_step: Option<Vec<f64>>,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig { tol: 1e-8, max_evals: 2000, initial_step: None }
    }
}

impl NelderMeadConfig {
    /// Tolerance tied to objective noise: `max(1e-8, eps / 10)`.
    pub fn for_noise(eps: f64, max_evals: usize) -> NelderMeadConfig {
        NelderMeadConfig { tol: (eps / 10.0).max(1e-8), max_evals, initial_step: None }
    }
}

/// Outcome of a minimization. `trace[k] = (k, f(x_k))` for every call made.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<(usize, f64)>,
}

struct Counted<'a, F> {
    f: &'a mut F,
    budget: usize,
    trace: Vec<(usize, f64)>,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.trace.len() >= self.budget {
            return None;
        }
        let raw = (self.f)(x);
        self.trace.push((self.trace.len(), raw));
        let v = if raw.is_nan() { f64::INFINITY } else { raw };
        if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
            self.best = Some((x.to_vec(), v));
        }
        Some(v)
    }
}

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and shrink 1/2.
/// NaN values are treated as `+inf`. The reported best is the minimum over
/// every evaluation made.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    cfg: &NelderMeadConfig,
) -> Result<OptResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidArgument("Nelder-Mead needs at least one parameter".into()));
    }
    if cfg.max_evals == 0 {
        return Err(Error::InvalidArgument("evaluation budget must be positive".into()));
    }
    let steps: Vec<f64> = match &cfg.initial_step {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => {
            return Err(Error::Dimension { expected: n, found: s.len() });
        }
        None => x0.iter().map(|x| (0.05 * x.abs()).max(0.05)).collect(),
    };
    let mut obj = Counted { f: &mut f, budget: cfg.max_evals, trace: Vec::new(), best: None };
    let converged = run_simplex(&mut obj, x0, &steps, cfg.tol);
    let (best_params, best_value) = obj.best.take().expect("at least one evaluation");
    let trace = std::mem::take(&mut obj.trace);
    Ok(OptResult { best_params, best_value, evaluations: trace.len(), converged, trace })
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    x0: &[f64],
    steps: &[f64],
    tol: f64,
) -> bool {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    for p in &pts {
        match obj.eval(p) {
            Some(v) => vals.push(v),
            None => return false,
        }
    }
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&k| pts[k].clone()).collect();
        vals = order.iter().map(|&k| vals[k]).collect();
        if vals[n] - vals[0] < tol {
            // A simplex straddling the minimum symmetrically has zero spread;
            // accept convergence only if its barycenter is no better.
            let bary: Vec<f64> =
                (0..n).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / (n + 1) as f64).collect();
            let Some(fb) = obj.eval(&bary) else { return false };
            if fb >= vals[0] - tol {
                return true;
            }
            pts[n] = bary;
            vals[n] = fb;
            continue;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let Some(fr) = obj.eval(&xr) else { return false };
        if fr < vals[0] {
            let xe = along(2.0);
            let Some(fe) = obj.eval(&xe) else { return false };
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, accept_at) = if fr < vals[n] { (along(0.5), fr) } else { (along(-0.5), vals[n]) };
        let Some(fc) = obj.eval(&xc) else { return false };
        if fc <= accept_at {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let Some(v) = obj.eval(&p) else { return false };
            pts[i] = p;
            vals[i] = v;
        }
    }
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2u64;
    while out.len() < k {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `count` Halton points in the unit cube, shifted modulo 1 by `shift`.
pub fn shifted_halton(count: usize, shift: &[f64]) -> Vec<Vec<f64>> {
    let primes = first_primes(shift.len());
    (1..=count as u64)
        .map(|i| {
            primes.iter().zip(shift).map(|(&b, s)| (radical_inverse(i, b) + s).fract()).collect()
        })
        .collect()
}

/// Nelder-Mead from `n_starts` randomly shifted Halton points in the box.
/// Trace indices run over all inner evaluations in order.
pub fn multistart<F, R>(
    mut f: F,
    bounds: &[(f64, f64)],
    n_starts: usize,
    inner: &NelderMeadConfig,
    rng: &mut R,
) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if n_starts == 0 {
        return Err(Error::InvalidArgument("multistart needs at least one start".into()));
    }
    if bounds.is_empty() {
        return Err(Error::InvalidArgument("empty search box".into()));
    }
    if let Some(b) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::InvalidArgument(format!("invalid bound {b:?}")));
    }
    let shift: Vec<f64> = bounds.iter().map(|_| rng.random::<f64>()).collect();
    let mut best: Option<OptResult> = None;
    let mut trace = Vec::new();
    for u in shifted_halton(n_starts, &shift) {
        let x0: Vec<f64> = u.iter().zip(bounds).map(|(t, (lo, hi))| lo + t * (hi - lo)).collect();
        let run = nelder_mead(&mut f, &x0, inner)?;
        let offset = trace.len();
        trace.extend(run.trace.iter().map(|(k, v)| (k + offset, *v)));
        if best.as_ref().is_none_or(|b| run.best_value < b.best_value) {
            best = Some(run);
        }
    }
    let best = best.expect("n_starts >= 1");
    Ok(OptResult {
        best_params: best.best_params,
        best_value: best.best_value,
        evaluations: trace.len(),
        converged: best.converged,
        trace,
    })
}

/// Optimizer choices for the benchmark harness.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerSpec {
    NelderMead { max_evals: usize },
    Multistart { n_starts: usize, bounds: Vec<(f64, f64)>, max_evals_per_start: usize },
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::NelderMead { .. } => "nelder_mead",
            OptimizerSpec::Multistart { .. } => "multistart",
        }
    }
}

impl fmt::Display for OptimizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Noiseless energy as a function of the parameters.
pub type EnergyFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Exact energy landscape plus its known minimum.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub energy: EnergyFn,
    pub x0: Vec<f64>,
    pub exact_minimum: f64,
}

/// One optimization run of the study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub optimizer: String,
    pub epsilon: f64,
    pub rep: usize,
    pub final_error: f64,
    pub evals: usize,
    pub seed: u64,
}

/// Aggregate over repetitions for one `(epsilon, optimizer)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudySummary {
    pub optimizer: String,
    pub epsilon: f64,
    pub reps: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_evals: f64,
    pub std_evals: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<StudySummary>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Runs `reps` seeded optimizations per `(epsilon, optimizer)` cell with
/// additive Gaussian noise of standard deviation `epsilon` on every objective
/// call. The final error is `|E(best_params) - exact_minimum|` using the
/// noiseless energy. Cells run in parallel; each uses its own generator stream.
pub fn noisy_benchmark(
    problem: &BenchmarkProblem,
    eps_grid: &[f64],
    reps: usize,
    optimizers: &[OptimizerSpec],
    seed: u64,
) -> Result<StudyTable> {
    if reps < 2 {
        return Err(Error::InvalidArgument("benchmark needs at least two repetitions".into()));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid noise level {e}")));
    }
    let cells: Vec<(usize, usize, usize)> = (0..eps_grid.len())
        .flat_map(|e| (0..optimizers.len()).flat_map(move |o| (0..reps).map(move |r| (e, o, r))))
        .collect();
    let rows: Vec<StudyRow> = cells
        .par_iter()
        .map(|&(e, o, r)| {
            let eps = eps_grid[e];
            let stream = ((e * optimizers.len() + o) * reps + r) as u64;
            let mut rng = stream_rng(seed, stream);
            let noise = Normal::new(0.0, eps).map_err(|err| Error::InvalidArgument(err.to_string()))?;
            let mut noise_rng = stream_rng(seed, stream | 1 << 63);
            let energy = problem.energy.clone();
            let objective = |x: &[f64]| energy(x) + noise.sample(&mut noise_rng);
            let result = match &optimizers[o] {
                OptimizerSpec::NelderMead { max_evals } => {
                    nelder_mead(objective, &problem.x0, &NelderMeadConfig::for_noise(eps, *max_evals))?
                }
                OptimizerSpec::Multistart { n_starts, bounds, max_evals_per_start } => multistart(
                    objective,
                    bounds,
                    *n_starts,
                    &NelderMeadConfig::for_noise(eps, *max_evals_per_start),
                    &mut rng,
                )?,
            };
            Ok(StudyRow {
                optimizer: optimizers[o].name().to_string(),
                epsilon: eps,
                rep: r,
                final_error: ((problem.energy)(&result.best_params) - problem.exact_minimum).abs(),
                evals: result.evaluations,
                seed: stream,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    for &eps in eps_grid {
        for opt in optimizers {
            let cell: Vec<&StudyRow> =
                rows.iter().filter(|r| r.epsilon == eps && r.optimizer == opt.name()).collect();
            let errs: Vec<f64> = cell.iter().map(|r| r.final_error).collect();
            let evals: Vec<f64> = cell.iter().map(|r| r.evals as f64).collect();
            let (mean_error, std_error) = mean_std(&errs);
            let (mean_evals, std_evals) = mean_std(&evals);
            summary.push(StudySummary {
                optimizer: opt.name().to_string(),
                epsilon: eps,
                reps,
                mean_error,
                std_error,
                mean_evals,
                std_evals,
            });
        }
    }
    Ok(StudyTable { rows, summary })
}

impl StudyTable {
    /// Columns: `optimizer,epsilon,rep,final_error,evals,seed`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("optimizer,epsilon,rep,final_error,evals,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.optimizer,
                crate::fmt_f64(r.epsilon),
                r.rep,
                crate::fmt_f64(r.final_error),
                r.evals,
                r.seed
            ));
        }
        out
    }

    /// Columns: `optimizer,epsilon,reps,mean_error,std_error,mean_evals,std_evals`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("optimizer,epsilon,reps,mean_error,std_error,mean_evals,std_evals\n");
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.optimizer,
                crate::fmt_f64(s.epsilon),
                s.reps,
                crate::fmt_f64(s.mean_error),
                crate::fmt_f64(s.std_error),
                crate::fmt_f64(s.mean_evals),
                crate::fmt_f64(s.std_evals)
            ));
        }
        out
    }
}
