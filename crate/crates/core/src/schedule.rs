//! Annealing paths `g(t)` in `[0, 1]` with `H(g) = (1 - g) H_i + g H_p`.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::optimize::{nelder_mead, NelderMeadConfig};
use crate::pauli::PauliSum;
use crate::simulator::{
    evolve_schedule, evolve_schedule_observed, exact_eigensystem, expectation, StateVector,
};

/// Knot abscissae of the spline family, as fractions of the total time.
pub const SPLINE_KNOTS: [f64; 4] = [0.0, 0.15, 0.85, 1.0];
/// Default number of integration steps.
pub const DEFAULT_STEPS: usize = 1000;
/// Smallest target gap accepted by [`success_probability`].
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
enum Path {
    Linear { rate: f64 },
    Spline { ordinates: [f64; 4], curvature: [f64; 4] },
    BangBang { switches: Vec<f64>, start_high: bool },
}

/// A path over `[0, tau]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    tau: f64,
    path: Path,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {tau}")));
    }
    Ok(())
}

impl Schedule {
    /// `g = min(1, rate t)`; requires `rate >= 1/tau` so the path reaches 1.
    pub fn linear(tau: f64, rate: f64) -> Result<Schedule> {
        check_tau(tau)?;
        if !(rate.is_finite() && rate * tau >= 1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "linear rate {rate} must be at least 1/tau = {}",
                1.0 / tau
            )));
        }
        Ok(Schedule { tau, path: Path::Linear { rate } })
    }

    /// Natural cubic spline through `(0,0), (0.15,a), (0.85,b), (1,1)` in `s = t/tau`.
    /// Ordinates are clamped to `[0,1]` and so is the evaluated value.
    pub fn spline(tau: f64, a: f64, b: f64) -> Result<Schedule> {
        check_tau(tau)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument("spline ordinates must be finite".into()));
        }
        let y = [0.0, a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), 1.0];
        Ok(Schedule { tau, path: Path::Spline { ordinates: y, curvature: natural_curvature(&y) } })
    }

    /// Piecewise-constant path toggling between 0 and 1 at each switch time.
    /// No switches gives a frozen path.
    pub fn bang_bang(tau: f64, mut switches: Vec<f64>, start_high: bool) -> Result<Schedule> {
        check_tau(tau)?;
        if switches.iter().any(|t| !(0.0..=tau).contains(t)) {
            return Err(Error::InvalidArgument("switch times must lie in [0, tau]".into()));
        }
        switches.sort_by(f64::total_cmp);
        Ok(Schedule { tau, path: Path::BangBang { switches, start_high } })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Free parameters in the order accepted by [`Family::build`].
    pub fn params(&self) -> Vec<f64> {
        match &self.path {
            Path::Linear { rate } => vec![*rate],
            Path::Spline { ordinates, .. } => vec![ordinates[1], ordinates[2]],
            Path::BangBang { switches, .. } => switches.iter().map(|t| t / self.tau).collect(),
        }
    }

    /// `g(t)` for `t` in `[0, tau]`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", self.tau)));
        }
        Ok(match &self.path {
            Path::Linear { rate } => (rate * t).min(1.0),
            Path::Spline { ordinates, curvature } => {
                spline_value(ordinates, curvature, t / self.tau).clamp(0.0, 1.0)
            }
            Path::BangBang { switches, start_high } => {
                let flips = switches.iter().filter(|&&s| t >= s).count();
                if (flips % 2 == 1) != *start_high {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

// Second derivatives at the knots with zero end curvature.
fn natural_curvature(y: &[f64; 4]) -> [f64; 4] {
    let x = SPLINE_KNOTS;
    let h = [x[1] - x[0], x[2] - x[1], x[3] - x[2]];
    let r1 = 6.0 * ((y[2] - y[1]) / h[1] - (y[1] - y[0]) / h[0]);
    let r2 = 6.0 * ((y[3] - y[2]) / h[2] - (y[2] - y[1]) / h[1]);
    let (a11, a12, a21, a22) = (2.0 * (h[0] + h[1]), h[1], h[1], 2.0 * (h[1] + h[2]));
    let det = a11 * a22 - a12 * a21;
    [0.0, (r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det, 0.0]
}

fn spline_value(y: &[f64; 4], m: &[f64; 4], s: f64) -> f64 {
    let x = SPLINE_KNOTS;
    let i = if s < x[1] {
        0
    } else if s < x[2] {
        1
    } else {
        2
    };
    let h = x[i + 1] - x[i];
    let (a, b) = ((x[i + 1] - s) / h, (s - x[i]) / h);
    a * y[i] + b * y[i + 1] + ((a.powi(3) - a) * m[i] + (b.powi(3) - b) * m[i + 1]) * h * h / 6.0
}

/// Schedule family with its free-parameter layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// One parameter: the rate.
    Linear,
    /// Two parameters: the interior ordinates.
    Spline,
    /// `switches` parameters: switch times as fractions of `tau`.
    BangBang { switches: usize, start_high: bool },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Spline => "spline",
            Family::BangBang { .. } => "bang_bang",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Family::Linear => 1,
            Family::Spline => 2,
            Family::BangBang { switches, .. } => *switches,
        }
    }

    /// Parameters reproducing the linear path (evenly spaced switches for bang-bang).
    pub fn initial_params(&self, tau: f64) -> Vec<f64> {
        match self {
            Family::Linear => vec![1.0 / tau],
            Family::Spline => vec![SPLINE_KNOTS[1], SPLINE_KNOTS[2]],
            Family::BangBang { switches, .. } => {
                (1..=*switches).map(|k| k as f64 / (*switches + 1) as f64).collect()
            }
        }
    }

    /// Builds a schedule, projecting parameters onto the family's feasible set.
    pub fn build(&self, tau: f64, params: &[f64]) -> Result<Schedule> {
        check_dim(self.n_params(), params.len())?;
        match self {
            Family::Linear => Schedule::linear(tau, params[0].max(1.0 / tau)),
            Family::Spline => Schedule::spline(tau, params[0], params[1]),
            Family::BangBang { start_high, .. } => Schedule::bang_bang(
                tau,
                params.iter().map(|p| p.clamp(0.0, 1.0) * tau).collect(),
                *start_high,
            ),
        }
    }
}

/// Eigenvalues of `A h_i + (1 - A) h_p` for each `A`, ascending.
pub fn spectrum_along_path(h_i: &PauliSum, h_p: &PauliSum, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    h_i.require_hermitian()?;
    h_p.require_hermitian()?;
    check_dim(h_i.n_qubits(), h_p.n_qubits())?;
    let mi = h_i.to_matrix()?;
    let mp = h_p.to_matrix()?;
    grid.iter()
        .map(|&a| {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidArgument(format!("path coordinate {a} outside [0,1]")));
            }
            let m = &mi * num_complex::Complex64::new(a, 0.0) + &mp * num_complex::Complex64::new(1.0 - a, 0.0);
            let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            Ok(v)
        })
        .collect()
}

/// `(A, gap)` at the grid point with the smallest lowest gap.
pub fn minimum_gap(grid: &[f64], spectra: &[Vec<f64>]) -> Option<(f64, f64)> {
    grid.iter()
        .zip(spectra)
        .filter(|(_, s)| s.len() >= 2)
        .map(|(a, s)| (*a, s[1] - s[0]))
        .min_by(|x, y| x.1.total_cmp(&y.1))
}

fn unique_ground(h: &PauliSum, label: &str) -> Result<StateVector> {
    let e = exact_eigensystem(h)?;
    if e.gap() <= DEGENERACY_TOLERANCE {
        return Err(Error::Degenerate(format!("{label} ground state gap {}", e.gap())));
    }
    Ok(e.vectors[0].clone())
}

/// Evolves the ground state of `h_i` under the schedule and returns its squared
/// overlap with the ground state of `h_p`.
pub fn success_probability(sched: &Schedule, h_i: &PauliSum, h_p: &PauliSum, steps: usize) -> Result<f64> {
    let start = unique_ground(h_i, "initial Hamiltonian")?;
    let target = unique_ground(h_p, "problem Hamiltonian")?;
    let out = evolve_schedule(&start, sched, h_i, h_p, steps)?;
    Ok(out.overlap(&target)?.clamp(0.0, 1.0))
}

/// What [`optimize_path`] minimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PathObjective {
    /// Final `<h_p>`.
    #[default]
    FinalEnergy,
    /// `1 - success probability`.
    Infidelity,
}

/// One evaluated schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub tau: f64,
    pub family: String,
    pub params: Vec<f64>,
    pub success: f64,
    /// `(s, overlap with the target ground state)` samples.
    pub trajectory: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathStudyResult {
    pub records: Vec<PathRecord>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Evaluates a schedule and samples the overlap trajectory at `samples + 1` points.
pub fn path_record(
    family: Family,
    sched: &Schedule,
    h_i: &PauliSum,
    h_p: &PauliSum,
    steps: usize,
    samples: usize,
) -> Result<PathRecord> {
    let start = unique_ground(h_i, "initial Hamiltonian")?;
    let target = unique_ground(h_p, "problem Hamiltonian")?;
    let every = (steps / samples.max(1)).max(1);
    let mut trajectory = vec![(0.0, start.overlap(&target)?)];
    let mut k = 0usize;
    let tau = sched.tau();
    let out = evolve_schedule_observed(&start, sched, h_i, h_p, steps, |t, s| {
        k += 1;
        if k.is_multiple_of(every) || k == steps {
            let ov = s.inner(&target).map(|c| c.norm_sqr() / s.norm().powi(2)).unwrap_or(f64::NAN);
            if trajectory.last().is_none_or(|(last, _)| *last < t / tau) {
                trajectory.push((t / tau, ov));
            }
        }
    })?;
    Ok(PathRecord {
        tau,
        family: family.name().to_string(),
        params: sched.params(),
        success: out.overlap(&target)?.clamp(0.0, 1.0),
        trajectory,
    })
}

/// Minimizes the objective over the family's parameters with Nelder-Mead,
/// starting from [`Family::initial_params`].
pub fn optimize_path(
    family: Family,
    h_i: &PauliSum,
    h_p: &PauliSum,
    tau: f64,
    steps: usize,
    optimizer: &NelderMeadConfig,
    objective: PathObjective,
) -> Result<(Vec<f64>, PathStudyResult)> {
    if family.n_params() == 0 {
        return Err(Error::InvalidArgument("family has no free parameters".into()));
    }
    let start = unique_ground(h_i, "initial Hamiltonian")?;
    let target = unique_ground(h_p, "problem Hamiltonian")?;
    let mut failure: Option<Error> = None;
    let result = nelder_mead(
        |x| {
            let value = family.build(tau, x).and_then(|sched| {
                let out = evolve_schedule(&start, &sched, h_i, h_p, steps)?;
                match objective {
                    PathObjective::FinalEnergy => expectation(&out, h_p),
                    PathObjective::Infidelity => Ok(1.0 - out.overlap(&target)?),
                }
            });
            value.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &family.initial_params(tau),
        optimizer,
    )?;
    if let Some(e) = failure {
        return Err(Error::Contract(format!("path objective failed during optimization: {e}")));
    }
    let sched = family.build(tau, &result.best_params)?;
    let record = path_record(family, &sched, h_i, h_p, steps, 100)?;
    let params = record.params.clone();
    Ok((
        params,
        PathStudyResult { records: vec![record], evaluations: result.evaluations, converged: result.converged },
    ))
}

/// The one-qubit pair `H_i = (I - Z)/2 + eps X`, `H_p = (I + Z)/2`.
pub fn avoided_crossing_pair(eps: f64) -> Result<(PauliSum, PauliSum)> {
    Ok((
        PauliSum::from_real_terms(1, &[(0.5, "I"), (-0.5, "Z"), (eps, "X")])?,
        PauliSum::from_real_terms(1, &[(0.5, "I"), (0.5, "Z")])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let tau = 8.0;
        assert_eq!(Schedule::linear(tau, 1.0 / tau).unwrap().evaluate(tau / 2.0).unwrap(), 0.5);
        assert!(Schedule::linear(tau, 0.5 / tau).is_err());
        let sp = Schedule::spline(tau, 0.15, 0.85).unwrap();
        for k in 0..=100 {
            let t = tau * k as f64 / 100.0;
            assert!((sp.evaluate(t).unwrap() - t / tau).abs() < 1e-14);
        }
        let bb = Schedule::bang_bang(tau, vec![tau / 2.0], false).unwrap();
        assert_eq!(bb.evaluate(tau / 4.0).unwrap(), 0.0);
        assert_eq!(bb.evaluate(3.0 * tau / 4.0).unwrap(), 1.0);
        assert!(bb.evaluate(tau + 0.1).is_err());
        assert!(bb.evaluate(-0.1).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let (hi, hp) = avoided_crossing_pair(0.1).unwrap();
        let s = spectrum_along_path(&hi, &hp, &[0.5, 0.0, 1.0]).unwrap();
        assert!((s[0][0] - 0.45).abs() < 1e-12 && (s[0][1] - 0.55).abs() < 1e-12);
        assert!(s[1][0].abs() < 1e-14 && (s[1][1] - 1.0).abs() < 1e-14);
        let r = (1.0f64 + 0.04).sqrt();
        assert!((s[2][0] - (1.0 - r) / 2.0).abs() < 1e-12);
        assert!((s[2][1] - (1.0 + r) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_gap_on_grid() {
        let (hi, hp) = avoided_crossing_pair(0.1).unwrap();
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let spectra = spectrum_along_path(&hi, &hp, &grid).unwrap();
        for (a, s) in grid.iter().zip(&spectra) {
            let want = 2.0 * (((1.0 - 2.0 * a) / 2.0).powi(2) + (0.1 * a).powi(2)).sqrt();
            assert!((s[1] - s[0] - want).abs() < 1e-12);
        }
        // The off-diagonal term scales with A, so the minimum sits just below A = 1/2.
        let (a_min, gap) = minimum_gap(&grid, &spectra).unwrap();
        assert_eq!(a_min, 0.495);
        assert!((gap - 0.099_503_8).abs() < 1e-6);
        let at_half = &spectra[500];
        assert!((at_half[1] - at_half[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn success_examples() {
        let (hi, hp) = avoided_crossing_pair(0.1).unwrap();
        let frozen = Schedule::bang_bang(5.0, vec![], false).unwrap();
        let p0 = success_probability(&frozen, &hi, &hp, 50).unwrap();
        let gi = exact_eigensystem(&hi).unwrap().vectors[0].clone();
        let gp = exact_eigensystem(&hp).unwrap().vectors[0].clone();
        let static_overlap = gi.overlap(&gp).unwrap();
        assert!((p0 - static_overlap).abs() < 1e-12);
        assert!((static_overlap - 0.0097).abs() < 5e-5, "{static_overlap}");

        let quick = Schedule::linear(1e-4, 1e4).unwrap();
        assert!((success_probability(&quick, &hi, &hp, 10).unwrap() - static_overlap).abs() < 1e-6);

        let slow = Schedule::linear(1000.0, 1e-3).unwrap();
        assert!(success_probability(&slow, &hi, &hp, 10_000).unwrap() >= 0.99);

        let degenerate = PauliSum::identity(1, 1.0).unwrap();
        assert!(matches!(success_probability(&slow, &hi, &degenerate, 10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn optimized_spline_beats_linear_at_short_time() {
        let (hi, hp) = avoided_crossing_pair(0.1).unwrap();
        let tau = 20.0;
        let linear = success_probability(&Schedule::linear(tau, 1.0 / tau).unwrap(), &hi, &hp, 1000).unwrap();
        let cfg = NelderMeadConfig { tol: 1e-6, max_evals: 150, initial_step: None };
        let (params, study) = optimize_path(Family::Spline, &hi, &hp, tau, 1000, &cfg, PathObjective::FinalEnergy).unwrap();
        assert_eq!(params.len(), 2);
        assert!(study.records[0].success >= linear, "{} < {linear}", study.records[0].success);
        assert!(study.records[0].trajectory.len() > 10);
    }

    #[test]
    fn optimized_matches_linear_in_adiabatic_regime() {
        let (hi, hp) = avoided_crossing_pair(0.1).unwrap();
        let tau = 1000.0;
        let linear = success_probability(&Schedule::linear(tau, 1.0 / tau).unwrap(), &hi, &hp, 4000).unwrap();
        let cfg = NelderMeadConfig { tol: 1e-6, max_evals: 40, initial_step: None };
        let (_, study) = optimize_path(Family::Spline, &hi, &hp, tau, 4000, &cfg, PathObjective::Infidelity).unwrap();
        let opt = study.records[0].success;
        assert!(linear > 0.99 && opt >= linear - 1e-9 && opt - linear <= 0.01, "{linear} {opt}");
    }

    #[test]
    fn family_round_trip() {
        let f = Family::BangBang { switches: 2, start_high: true };
        let s = f.build(10.0, &[0.3, 0.7]).unwrap();
        assert_eq!(s.params(), vec![0.3, 0.7]);
        assert_eq!(s.evaluate(1.0).unwrap(), 1.0);
        assert_eq!(s.evaluate(5.0).unwrap(), 0.0);
        assert_eq!(s.evaluate(9.0).unwrap(), 1.0);
        assert!(f.build(10.0, &[0.3]).is_err());
        assert_eq!(Family::Linear.build(10.0, &[0.01]).unwrap().params(), vec![0.1]);
    }

    proptest! {
        #[test]
        fn paths_stay_in_range(a in -2.0f64..3.0, b in -2.0f64..3.0, tau in 0.1f64..100.0, sw in proptest::collection::vec(0.0f64..1.0, 0..5)) {
            let spline = Schedule::spline(tau, a, b).unwrap();
            let lin = Schedule::linear(tau, (a.abs() + 1.0) / tau).unwrap();
            let bang = Schedule::bang_bang(tau, sw.iter().map(|s| s * tau).collect(), false).unwrap();
            for s in [&spline, &lin] {
                prop_assert_eq!(s.evaluate(0.0).unwrap(), 0.0);
                prop_assert!((s.evaluate(tau).unwrap() - 1.0).abs() < 1e-12);
            }
            for k in 0..=200 {
                let t = (tau * k as f64 / 200.0).min(tau);
                for s in [&spline, &lin, &bang] {
                    let g = s.evaluate(t).unwrap();
                    prop_assert!((0.0..=1.0).contains(&g));
                }
                let g = bang.evaluate(t).unwrap();
                prop_assert!(g == 0.0 || g == 1.0);
            }
        }

        #[test]
        fn spectrum_is_continuous(eps in 0.01f64..0.5) {
            let (hi, hp) = avoided_crossing_pair(eps).unwrap();
            let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
            let s = spectrum_along_path(&hi, &hp, &grid).unwrap();
            let norm = 1.0 + eps;
            for w in s.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    prop_assert!((a - b).abs() < 10.0 * 1e-3 * norm);
                }
            }
        }
    }
}
