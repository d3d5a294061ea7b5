//! Hamiltonian averaging from simulated projective measurements.
//!
//! Terms are measured in commuting groups. Each group keeps one estimator of
//! its coefficient-weighted value `q = sum h_k x_k`, and the reported mean is
//! the sum of group means plus the identity coefficient.

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous};

use crate::error::{check_dim, Error, Result};
use crate::pauli::{commutes_unchecked, PauliString, PauliSum};
use crate::simulator::{expectation_and_variance, sample_group, StateVector};

/// Shots taken before a frequentist variance is trusted.
pub const MIN_SHOTS: u64 = 1000;
/// Shots between stopping-rule checks.
pub const BATCH_SIZE: u64 = 100;
/// Default pilot shots per commuting pair for covariance planning.
pub const PILOT_SHOTS: u64 = 500;
/// Added covariance treated as zero when grouping.
pub const COVARIANCE_TOLERANCE: f64 = 1e-12;
/// Allowed normalization drift of a convolved density.
pub const GRID_DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Frequentist,
    Bayesian,
}

#[derive(Clone, Debug, PartialEq)]
enum Moments {
    Frequentist { n: u64, mean: f64, sum_sq: f64 },
    Bayesian { alpha: f64, beta: f64 },
}

/// Statistics for one observable with two outcomes `m1` and `m2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TermEstimator {
    m1: f64,
    m2: f64,
    moments: Moments,
}

impl TermEstimator {
    pub fn frequentist(m1: f64, m2: f64) -> TermEstimator {
        TermEstimator { m1, m2, moments: Moments::Frequentist { n: 0, mean: 0.0, sum_sq: 0.0 } }
    }

    /// Uniform prior `Beta(1, 1)` on the probability of `m1`.
    pub fn bayesian(m1: f64, m2: f64) -> TermEstimator {
        TermEstimator::bayesian_with_prior(m1, m2, 1.0, 1.0).expect("unit prior is valid")
    }

    pub fn bayesian_with_prior(m1: f64, m2: f64, alpha: f64, beta: f64) -> Result<TermEstimator> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArgument(format!("prior ({alpha}, {beta}) must be positive")));
        }
        Ok(TermEstimator { m1, m2, moments: Moments::Bayesian { alpha, beta } })
    }

    pub fn mode(&self) -> EstimatorMode {
        match self.moments {
            Moments::Frequentist { .. } => EstimatorMode::Frequentist,
            Moments::Bayesian { .. } => EstimatorMode::Bayesian,
        }
    }

    pub fn outcomes(&self) -> (f64, f64) {
        (self.m1, self.m2)
    }

    /// Welford update with one measured value.
    pub fn update_frequentist(&mut self, x: f64) -> Result<()> {
        match &mut self.moments {
            Moments::Frequentist { n, mean, sum_sq } => {
                *n += 1;
                let d = x - *mean;
                *mean += d / *n as f64;
                *sum_sq += d * (x - *mean);
                Ok(())
            }
            _ => Err(Error::ModeMismatch { expected: "frequentist" }),
        }
    }

    /// Adds `n_new` outcomes of which `r` were `m1`.
    pub fn update_bayesian(&mut self, n_new: u64, r: u64) -> Result<()> {
        if r > n_new {
            return Err(Error::InvalidArgument(format!("{r} successes exceed {n_new} trials")));
        }
        match &mut self.moments {
            Moments::Bayesian { alpha, beta } => {
                *alpha += r as f64;
                *beta += (n_new - r) as f64;
                Ok(())
            }
            _ => Err(Error::ModeMismatch { expected: "bayesian" }),
        }
    }

    pub fn count(&self) -> Option<u64> {
        match self.moments {
            Moments::Frequentist { n, .. } => Some(n),
            Moments::Bayesian { .. } => None,
        }
    }

    pub fn beta_parameters(&self) -> Option<(f64, f64)> {
        match self.moments {
            Moments::Bayesian { alpha, beta } => Some((alpha, beta)),
            Moments::Frequentist { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self.moments {
            Moments::Frequentist { mean, .. } => mean,
            Moments::Bayesian { alpha, beta } => posterior_moments(alpha, beta, self.m1, self.m2).map_or(f64::NAN, |m| m.0),
        }
    }

    /// Unbiased sample variance; `+inf` until two samples exist.
    pub fn sample_variance(&self) -> Result<f64> {
        match self.moments {
            Moments::Frequentist { n, sum_sq, .. } => Ok(if n < 2 { f64::INFINITY } else { sum_sq / (n - 1) as f64 }),
            _ => Err(Error::ModeMismatch { expected: "frequentist" }),
        }
    }

    /// Variance of the mean estimate.
    pub fn estimator_variance(&self) -> f64 {
        match self.moments {
            Moments::Frequentist { n, sum_sq, .. } => {
                if n < 2 {
                    f64::INFINITY
                } else {
                    sum_sq / (n - 1) as f64 / n as f64
                }
            }
            Moments::Bayesian { alpha, beta } => {
                posterior_moments(alpha, beta, self.m1, self.m2).map_or(f64::INFINITY, |m| m.1)
            }
        }
    }
}

/// Beta posterior moments mapped onto the outcomes: returns
/// `(<p> m1 + (1 - <p>) m2, (m1 - m2)^2 Var[p])`.
pub fn posterior_moments(alpha: f64, beta: f64, m1: f64, m2: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("Beta parameters ({alpha}, {beta}) must be positive")));
    }
    Ok(posterior_moments_in(alpha, beta, m1, m2))
}

/// Same formulas over any field, so they can be checked in exact arithmetic.
pub fn posterior_moments_in<T>(alpha: T, beta: T, m1: T, m2: T) -> (T, T)
where
    T: Copy + One + Zero + std::ops::Sub<Output = T> + std::ops::Div<Output = T>,
{
    let total = alpha + beta;
    let p = alpha / total;
    let var_p = alpha * beta / (total * total * (total + T::one()));
    let spread = m1 - m2;
    (p * m1 + (T::one() - p) * m2, spread * spread * var_p)
}

/// Commuting groups over the non-identity term indices of a sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementPlan {
    pub groups: Vec<Vec<usize>>,
    /// Estimator-variance target per group; `None` splits `epsilon^2` evenly.
    pub per_group_variance_target: Option<f64>,
    /// Whether grouping decisions used covariance estimates.
    pub covariance_aware: bool,
}

impl MeasurementPlan {
    /// Checks that `groups` partitions the non-identity terms into commuting sets.
    pub fn from_groups(h: &PauliSum, groups: Vec<Vec<usize>>) -> Result<MeasurementPlan> {
        let plan = MeasurementPlan { groups, per_group_variance_target: None, covariance_aware: false };
        plan.validate(h)?;
        Ok(plan)
    }

    pub fn singletons(h: &PauliSum) -> MeasurementPlan {
        let groups = measured_terms(h).into_iter().map(|i| vec![i]).collect();
        MeasurementPlan { groups, per_group_variance_target: None, covariance_aware: false }
    }

    pub fn validate(&self, h: &PauliSum) -> Result<()> {
        let mut seen = vec![false; h.len()];
        for g in &self.groups {
            if g.is_empty() {
                return Err(Error::InvalidArgument("empty measurement group".into()));
            }
            for (a, &i) in g.iter().enumerate() {
                let t = h.terms().get(i).ok_or_else(|| Error::InvalidArgument(format!("term index {i} out of range")))?;
                if t.string.is_identity() {
                    return Err(Error::InvalidArgument(format!("identity term {i} is not measured")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument(format!("term {i} appears twice")));
                }
                for &j in &g[a + 1..] {
                    if j < h.len() && !commutes_unchecked(&t.string, &h.terms()[j].string) {
                        return Err(Error::InvalidArgument(format!("terms {i} and {j} do not commute")));
                    }
                }
            }
        }
        for i in measured_terms(h) {
            if !seen[i] {
                return Err(Error::InvalidArgument(format!("term {i} is not covered")));
            }
        }
        Ok(())
    }

    /// Splits a total estimator-variance budget evenly across groups.
    pub fn with_variance_budget(mut self, total: f64) -> MeasurementPlan {
        self.per_group_variance_target = Some(total / self.groups.len().max(1) as f64);
        self
    }

    pub fn group_target(&self, epsilon: f64) -> f64 {
        self.per_group_variance_target.unwrap_or(epsilon * epsilon / self.groups.len().max(1) as f64)
    }

    /// One group per line: `index:coefficient*string` entries.
    pub fn dump(&self, h: &PauliSum) -> String {
        let mut out = String::new();
        for g in &self.groups {
            let line: Vec<String> = g
                .iter()
                .map(|&i| {
                    let t = &h.terms()[i];
                    format!("{i}:{}*{}", t.coeff.re, t.string)
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

fn measured_terms(h: &PauliSum) -> Vec<usize> {
    (0..h.len()).filter(|&i| !h.terms()[i].string.is_identity()).collect()
}

fn identity_offset(h: &PauliSum) -> f64 {
    h.terms().iter().filter(|t| t.string.is_identity()).fold(0.0, |acc, t| acc + t.coeff.re)
}

/// Exact covariances `Cov(h_a s_a, h_b s_b)` of the weighted terms.
pub fn covariance_matrix(state: &StateVector, h: &PauliSum) -> Result<DMatrix<f64>> {
    h.require_hermitian()?;
    check_dim(state.n_qubits(), h.n_qubits())?;
    let amps = state.amplitudes();
    let applied: Vec<Vec<num_complex::Complex64>> = h
        .terms()
        .iter()
        .map(|t| {
            let mut out = vec![num_complex::Complex64::new(0.0, 0.0); amps.len()];
            for (b, a) in amps.iter().enumerate() {
                let (b2, ph) = t.string.apply_to_basis(b);
                out[b2] = ph * a * t.coeff;
            }
            out
        })
        .collect();
    let means: Vec<f64> = applied
        .iter()
        .map(|v| amps.iter().zip(v).map(|(a, b)| (a.conj() * b).re).sum())
        .collect();
    let m = h.len();
    Ok(DMatrix::from_fn(m, m, |a, b| {
        let joint: f64 = applied[a].iter().zip(&applied[b]).map(|(x, y)| (x.conj() * y).re).sum();
        joint - means[a] * means[b]
    }))
}

/// Sample covariances of commuting term pairs from `shots` joint measurements
/// per pair; non-commuting pairs are left at zero.
pub fn pilot_covariance<F, R>(prep: &mut F, h: &PauliSum, shots: u64, rng: &mut R) -> Result<DMatrix<f64>>
where
    F: FnMut() -> Result<StateVector>,
    R: Rng + ?Sized,
{
    h.require_hermitian()?;
    if shots < 2 {
        return Err(Error::InvalidArgument("pilot needs at least two shots".into()));
    }
    let idx = measured_terms(h);
    let mut cov = DMatrix::zeros(h.len(), h.len());
    for (k, &a) in idx.iter().enumerate() {
        for &b in &idx[k..] {
            let (sa, sb) = (h.terms()[a].string, h.terms()[b].string);
            if !commutes_unchecked(&sa, &sb) {
                continue;
            }
            let (ca, cb) = (h.terms()[a].coeff.re, h.terms()[b].coeff.re);
            let (mut mx, mut my, mut cxy) = (0.0, 0.0, 0.0);
            for n in 1..=shots {
                let s = prep()?;
                let rec = sample_group(&s, &[sa, sb], rng)?;
                let x = ca * rec.outcomes[0] as f64;
                let y = cb * rec.outcomes[1] as f64;
                let dx = x - mx;
                mx += dx / n as f64;
                my += (y - my) / n as f64;
                cxy += dx * (y - my);
            }
            let c = cxy / (shots - 1) as f64;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    Ok(cov)
}

/// Greedy grouping in term order. With covariances, a term joins the
/// compatible group with the smallest added covariance `2 sum Cov`, provided
/// that is not positive (ties go to the most recent group); otherwise it opens
/// a new group. Without covariances, it joins the most recent compatible group.
pub fn build_groups(h: &PauliSum, cov: Option<&DMatrix<f64>>) -> Result<MeasurementPlan> {
    if let Some(c) = cov {
        check_dim(h.len(), c.nrows())?;
        check_dim(h.len(), c.ncols())?;
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in measured_terms(h) {
        let s = h.terms()[i].string;
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in groups.iter().enumerate() {
            if !g.iter().all(|&j| commutes_unchecked(&s, &h.terms()[j].string)) {
                continue;
            }
            let added = cov.map_or(0.0, |c| 2.0 * g.iter().map(|&j| c[(i, j)]).sum::<f64>());
            if cov.is_some() && added > COVARIANCE_TOLERANCE {
                continue;
            }
            if best.is_none_or(|(_, b)| added <= b + COVARIANCE_TOLERANCE) {
                best = Some((gi, added));
            }
        }
        match best {
            Some((gi, _)) => groups[gi].push(i),
            None => groups.push(vec![i]),
        }
    }
    Ok(MeasurementPlan { groups, per_group_variance_target: None, covariance_aware: cov.is_some() })
}

fn group_operator(h: &PauliSum, group: &[usize]) -> Result<PauliSum> {
    PauliSum::from_terms(h.n_qubits(), group.iter().map(|&i| h.terms()[i]).collect())
}

/// `(#groups) * sum_i Var[Q_i] / epsilon^2` with exact group variances.
pub fn expected_preparations(plan: &MeasurementPlan, state: &StateVector, h: &PauliSum, epsilon: f64) -> Result<f64> {
    plan.validate(h)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut total = 0.0;
    for g in &plan.groups {
        total += expectation_and_variance(state, &group_operator(h, g)?)?.1;
    }
    Ok(plan.groups.len() as f64 * total / (epsilon * epsilon))
}

/// Result of dropping the smallest terms under a bias budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub retained: PauliSum,
    /// Indices of removed terms in the input sum.
    pub removed: Vec<usize>,
    pub k_star: usize,
    /// Sum of removed `|h|`, an upper bound on the bias.
    pub bias_bound: f64,
    /// `(1 - C^2) epsilon^2 / (M - k*)`, infinite when every term is removed.
    pub per_term_target: f64,
}

/// Removes the largest prefix (ascending `|h|`) whose magnitude sum stays below
/// `C epsilon`. Identity terms are never removed or counted.
pub fn truncate_terms(h: &PauliSum, epsilon: f64, c: f64) -> Result<Truncation> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidArgument(format!("C = {c} must lie in [0, 1)")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut order = measured_terms(h);
    let m = order.len();
    order.sort_by(|&a, &b| h.terms()[a].coeff.norm().total_cmp(&h.terms()[b].coeff.norm()).then(a.cmp(&b)));
    let mut k_star = 0;
    let mut partial = 0.0;
    for &i in &order {
        let next = partial + h.terms()[i].coeff.norm();
        if next < c * epsilon {
            partial = next;
            k_star += 1;
        } else {
            break;
        }
    }
    let mut removed: Vec<usize> = order[..k_star].to_vec();
    removed.sort_unstable();
    let retained = PauliSum::from_terms(
        h.n_qubits(),
        (0..h.len()).filter(|i| removed.binary_search(i).is_err()).map(|i| h.terms()[i]).collect(),
    )?;
    let per_term_target = if m == k_star { f64::INFINITY } else { (1.0 - c * c) * epsilon * epsilon / (m - k_star) as f64 };
    Ok(Truncation { retained, removed, k_star, bias_bound: partial, per_term_target })
}

/// Sampling controls for `estimate_expectation`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOptions {
    pub mode: EstimatorMode,
    pub min_shots: u64,
    pub batch: u64,
    pub max_preparations: Option<u64>,
    /// Credible-interval mass reported in Bayesian mode.
    pub credible_level: f64,
}

impl EstimateOptions {
    pub fn new(mode: EstimatorMode) -> EstimateOptions {
        EstimateOptions { mode, min_shots: MIN_SHOTS, batch: BATCH_SIZE, max_preparations: None, credible_level: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupReport {
    pub terms: Vec<usize>,
    pub mean: f64,
    pub variance: f64,
    pub preparations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mode: EstimatorMode,
    pub value: f64,
    pub variance_of_estimator: f64,
    pub total_preparations: u64,
    pub groups: Vec<GroupReport>,
    pub credible_interval: Option<(f64, f64)>,
}

impl EstimateReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Symmetric Dirichlet posterior (total prior mass 2) over the joint sign
/// patterns of a multi-term group. Only the first two moments of `q` over the
/// observed patterns are needed; the prior contributes mean 0 and second moment
/// `sum h^2` because the full sign cube is symmetric.
#[derive(Clone, Debug)]
struct PatternPosterior {
    prior_mass: f64,
    prior_sq: f64,
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl PatternPosterior {
    fn new(coeffs: &[f64]) -> PatternPosterior {
        PatternPosterior { prior_mass: 2.0, prior_sq: 2.0 * coeffs.iter().map(|c| c * c).sum::<f64>(), n: 0, sum: 0.0, sum_sq: 0.0 }
    }

    fn update(&mut self, q: f64) {
        self.n += 1;
        self.sum += q;
        self.sum_sq += q * q;
    }

    fn moments(&self) -> (f64, f64) {
        let a0 = self.prior_mass + self.n as f64;
        let mean = self.sum / a0;
        let second = (self.prior_sq + self.sum_sq) / a0;
        (mean, ((second - mean * mean) / (a0 + 1.0)).max(0.0))
    }
}

enum GroupEstimator {
    Term(TermEstimator),
    Pattern(PatternPosterior),
}

impl GroupEstimator {
    fn new(mode: EstimatorMode, coeffs: &[f64]) -> GroupEstimator {
        match (mode, coeffs) {
            (EstimatorMode::Frequentist, _) => {
                let s: f64 = coeffs.iter().map(|c| c.abs()).sum();
                GroupEstimator::Term(TermEstimator::frequentist(s, -s))
            }
            (EstimatorMode::Bayesian, [c]) => GroupEstimator::Term(TermEstimator::bayesian(*c, -*c)),
            (EstimatorMode::Bayesian, _) => GroupEstimator::Pattern(PatternPosterior::new(coeffs)),
        }
    }

    fn record(&mut self, outcomes: &[i8], coeffs: &[f64]) -> Result<()> {
        let q: f64 = outcomes.iter().zip(coeffs).map(|(&x, c)| c * x as f64).sum();
        match self {
            GroupEstimator::Term(t) if t.mode() == EstimatorMode::Frequentist => t.update_frequentist(q),
            GroupEstimator::Term(t) => t.update_bayesian(1, u64::from(outcomes[0] > 0)),
            GroupEstimator::Pattern(p) => {
                p.update(q);
                Ok(())
            }
        }
    }

    fn moments(&self) -> (f64, f64) {
        match self {
            GroupEstimator::Term(t) => (t.mean(), t.estimator_variance()),
            GroupEstimator::Pattern(p) => p.moments(),
        }
    }

    /// Posterior density of the group mean on a grid with the given step.
    fn density(&self, step: f64) -> Result<GridDensity> {
        match self {
            GroupEstimator::Term(t) => match t.beta_parameters() {
                Some((a, b)) => beta_value_density(a, b, t.m1, t.m2, step),
                None => Err(Error::ModeMismatch { expected: "bayesian" }),
            },
            GroupEstimator::Pattern(p) => {
                let (mean, var) = p.moments();
                normal_density(mean, var.sqrt(), step)
            }
        }
    }
}

/// Samples every group until its estimator variance falls below the plan's
/// target. Frequentist groups first take `min_shots`; all groups then sample
/// in batches of `batch` between checks.
pub fn estimate_expectation<F, R>(
    prep: &mut F,
    h: &PauliSum,
    plan: &MeasurementPlan,
    epsilon: f64,
    opts: &EstimateOptions,
    rng: &mut R,
) -> Result<EstimateReport>
where
    F: FnMut() -> Result<StateVector>,
    R: Rng + ?Sized,
{
    h.require_hermitian()?;
    plan.validate(h)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if opts.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let target = plan.group_target(epsilon);
    let floor = match opts.mode {
        EstimatorMode::Frequentist => opts.min_shots.max(2),
        EstimatorMode::Bayesian => 0,
    };
    let mut total = 0u64;
    let mut reports = Vec::with_capacity(plan.groups.len());
    let mut posteriors = Vec::new();
    let mut value = identity_offset(h);
    let mut variance = 0.0;
    for g in &plan.groups {
        let strings: Vec<PauliString> = g.iter().map(|&i| h.terms()[i].string).collect();
        let coeffs: Vec<f64> = g.iter().map(|&i| h.terms()[i].coeff.re).collect();
        let mut est = GroupEstimator::new(opts.mode, &coeffs);
        let mut shots = 0u64;
        loop {
            if shots >= floor && est.moments().1 < target {
                break;
            }
            for _ in 0..opts.batch {
                if opts.max_preparations.is_some_and(|m| total >= m) {
                    return Err(Error::BudgetExhausted { shots: total });
                }
                let s = prep()?;
                let rec = sample_group(&s, &strings, rng)?;
                est.record(&rec.outcomes, &coeffs)?;
                shots += 1;
                total += 1;
            }
        }
        let (mean, var) = est.moments();
        value += mean;
        variance += var;
        if opts.mode == EstimatorMode::Bayesian {
            posteriors.push(est);
        }
        reports.push(GroupReport { terms: g.clone(), mean, variance: var, preparations: shots });
    }
    let credible_interval = if posteriors.is_empty() {
        None
    } else {
        // One shared step so the convolution needs no resampling.
        let sds: Vec<f64> = posteriors.iter().map(|e| e.moments().1.sqrt()).collect();
        let finest = sds.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
        let step = if finest.is_finite() { (finest / 20.0).max(24.0 * sds.iter().sum::<f64>() / 20000.0) } else { 1.0 };
        let densities = posteriors.iter().map(|e| e.density(step)).collect::<Result<Vec<_>>>()?;
        let d = convolve_posteriors(&densities)?;
        let off = identity_offset(h);
        let (lo, hi) = d.credible_interval(opts.credible_level)?;
        Some((lo + off, hi + off))
    };
    Ok(EstimateReport {
        mode: opts.mode,
        value,
        variance_of_estimator: variance,
        total_preparations: total,
        groups: reports,
        credible_interval,
    })
}

/// Density sampled on a uniform grid `lo + k * step`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl GridDensity {
    /// Rejects negative values and masses off 1 by more than the drift tolerance.
    pub fn new(lo: f64, step: f64, values: Vec<f64>) -> Result<GridDensity> {
        if !(step > 0.0) || values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("density needs a positive step and non-negative values".into()));
        }
        let d = GridDensity { lo, step, values };
        let drift = (d.mass() - 1.0).abs();
        if drift > GRID_DRIFT_TOLERANCE {
            return Err(Error::GridTooCoarse { drift });
        }
        Ok(d)
    }

    /// Samples `f` on `n` points spanning `[lo, hi]` and normalizes.
    pub fn from_fn<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> Result<GridDensity> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument("grid needs two points and hi > lo".into()));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|k| f(lo + k as f64 * step)).collect();
        let mass: f64 = values.iter().sum::<f64>() * step;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument("density has no finite mass on the grid".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        GridDensity::new(lo, step, values)
    }

    /// Unit mass at `x`.
    pub fn point(x: f64) -> GridDensity {
        GridDensity { lo: x, step: 1.0, values: vec![1.0] }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.lo + k as f64 * self.step)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step
    }

    pub fn mean(&self) -> f64 {
        self.grid().zip(&self.values).map(|(x, v)| x * v).sum::<f64>() * self.step
    }

    fn is_point(&self) -> bool {
        self.values.len() == 1
    }

    fn span(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Linear interpolation onto step `h`, starting at `lo`.
    fn resample(&self, h: f64) -> Vec<f64> {
        let n = (self.span() / h).floor() as usize + 1;
        (0..n)
            .map(|k| {
                let pos = k as f64 * h / self.step;
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                let a = self.values[i.min(self.values.len() - 1)];
                let b = self.values.get(i + 1).copied().unwrap_or(0.0);
                a + (b - a) * frac
            })
            .collect()
    }

    /// Equal-tailed interval holding `level` of the mass, by linear
    /// interpolation of the cumulative sum.
    pub fn credible_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {level} must lie in (0, 1)")));
        }
        if self.is_point() {
            return Ok((self.lo, self.lo));
        }
        let tail = (1.0 - level) / 2.0;
        Ok((self.quantile(tail), self.quantile(1.0 - tail)))
    }

    /// Quantile of the piecewise-linear interpolant of the sampled density.
    fn quantile(&self, q: f64) -> f64 {
        let total = self.mass();
        let mut acc = 0.0;
        for k in 0..self.values.len() - 1 {
            let (a, b) = (self.values[k], self.values[k + 1]);
            let cell = 0.5 * (a + b) * self.step;
            if acc + cell >= q * total && cell > 0.0 {
                // Solve the quadratic CDF inside the cell.
                let need = q * total - acc;
                let slope = (b - a) / self.step;
                let dx = if slope.abs() < 1e-300 {
                    need / a
                } else {
                    (-a + (a * a + 2.0 * slope * need).max(0.0).sqrt()) / slope
                };
                return self.lo + k as f64 * self.step + dx.clamp(0.0, self.step);
            }
            acc += cell;
        }
        self.lo + self.span()
    }
}

fn grid_points(lo: f64, hi: f64, step: f64) -> usize {
    ((hi - lo) / step).ceil() as usize + 1
}

/// Density of `m2 + (m1 - m2) p` for `p ~ Beta(alpha, beta)` on a grid with
/// the given step over `+-12` posterior standard deviations (clipped to the
/// support). Collapses to a point mass when the window is under three steps.
pub fn beta_value_density(alpha: f64, beta: f64, m1: f64, m2: f64, step: f64) -> Result<GridDensity> {
    let dist = Beta::new(alpha, beta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let (mean, var) = posterior_moments(alpha, beta, m1, m2)?;
    let spread = m1 - m2;
    let p_mean = alpha / (alpha + beta);
    let p_sd = (alpha * beta / ((alpha + beta).powi(2) * (alpha + beta + 1.0))).sqrt();
    let (p_lo, p_hi) = ((p_mean - 12.0 * p_sd).max(0.0), (p_mean + 12.0 * p_sd).min(1.0));
    let (lo, hi) = if spread > 0.0 { (m2 + spread * p_lo, m2 + spread * p_hi) } else { (m2 + spread * p_hi, m2 + spread * p_lo) };
    let n = grid_points(lo, hi, step);
    if var == 0.0 || n < 3 {
        return Ok(GridDensity::point(mean));
    }
    GridDensity::from_fn(lo, lo + (n - 1) as f64 * step, n, |v| {
        let p = (v - m2) / spread;
        if !(0.0..=1.0).contains(&p) {
            return 0.0;
        }
        let d = dist.pdf(p);
        if d.is_finite() {
            d
        } else {
            0.0
        }
    })
}

/// Gaussian density over `mean +- 10 sd` on a grid with the given step.
pub fn normal_density(mean: f64, sd: f64, step: f64) -> Result<GridDensity> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let lo = mean - 10.0 * sd;
    let n = grid_points(lo, mean + 10.0 * sd, step);
    if !(sd > 0.0) || n < 3 {
        return Ok(GridDensity::point(mean));
    }
    GridDensity::from_fn(lo, lo + (n - 1) as f64 * step, n, |x| (-0.5 * ((x - mean) / sd).powi(2)).exp())
}

/// Density of the sum of independent variables. Inputs are resampled onto a
/// common step (the finest input step, coarsened so the result stays under
/// roughly 20000 points); a resampled input that loses more than the drift
/// tolerance of its mass means the common grid is too coarse.
pub fn convolve_posteriors(pdfs: &[GridDensity]) -> Result<GridDensity> {
    if pdfs.is_empty() {
        return Err(Error::InvalidArgument("no densities to convolve".into()));
    }
    let shift: f64 = pdfs.iter().filter(|d| d.is_point()).map(|d| d.lo).sum();
    let spread: Vec<&GridDensity> = pdfs.iter().filter(|d| !d.is_point()).collect();
    if spread.is_empty() {
        return Ok(GridDensity::point(shift));
    }
    if spread.len() == 1 {
        let d = spread[0];
        return Ok(GridDensity { lo: d.lo + shift, step: d.step, values: d.values.clone() });
    }
    let total_span: f64 = spread.iter().map(|d| d.span()).sum();
    let finest = spread.iter().map(|d| d.step).fold(f64::INFINITY, f64::min);
    let coarsest = spread.iter().map(|d| d.step).fold(0.0, f64::max);
    let h = if coarsest - finest <= 1e-9 * finest { finest } else { finest.max(total_span / 20000.0) };
    let mut lo = shift;
    let mut acc: Option<Vec<f64>> = None;
    for d in spread {
        let r = if (d.step - h).abs() <= 1e-9 * h { d.values.clone() } else { d.resample(h) };
        let drift = (r.iter().sum::<f64>() * h - 1.0).abs();
        if drift > GRID_DRIFT_TOLERANCE {
            return Err(Error::GridTooCoarse { drift });
        }
        lo += d.lo;
        acc = Some(match acc {
            None => r,
            Some(a) => {
                let mut out = vec![0.0; a.len() + r.len() - 1];
                for (i, x) in a.iter().enumerate() {
                    if *x == 0.0 {
                        continue;
                    }
                    for (j, y) in r.iter().enumerate() {
                        out[i + j] += x * y * h;
                    }
                }
                out
            }
        });
    }
    let mut values = acc.expect("at least two densities");
    let mass: f64 = values.iter().sum::<f64>() * h;
    let drift = (mass - 1.0).abs();
    if drift > GRID_DRIFT_TOLERANCE {
        return Err(Error::GridTooCoarse { drift });
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(GridDensity { lo, step: h, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn two_spin() -> PauliSum {
        PauliSum::from_real_terms(2, &[(-1.0, "XX"), (-1.0, "YY"), (1.0, "ZZ"), (1.0, "ZI"), (1.0, "IZ")]).unwrap()
    }

    fn ket01() -> StateVector {
        // Qubit 0 is |1>, qubit 1 is |0>.
        StateVector::basis(2, 0b01).unwrap()
    }

    #[test]
    fn frequentist_updates() {
        let mut e = TermEstimator::frequentist(1.0, -1.0);
        assert_eq!(e.estimator_variance(), f64::INFINITY);
        e.update_frequentist(1.0).unwrap();
        assert_eq!(e.sample_variance().unwrap(), f64::INFINITY);
        for x in [-1.0, 1.0, 1.0] {
            e.update_frequentist(x).unwrap();
        }
        assert_eq!(e.mean(), 0.5);
        assert!((e.sample_variance().unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(e.update_bayesian(1, 1), Err(Error::ModeMismatch { .. })));
        let mut k = TermEstimator::frequentist(1.0, -1.0);
        for _ in 0..10 {
            k.update_frequentist(0.25).unwrap();
        }
        assert_eq!(k.sample_variance().unwrap(), 0.0);
    }

    #[test]
    fn bayesian_updates() {
        let mut e = TermEstimator::bayesian(1.0, -1.0);
        e.update_bayesian(0, 0).unwrap();
        assert_eq!(e.beta_parameters(), Some((1.0, 1.0)));
        e.update_bayesian(10, 10).unwrap();
        assert_eq!(e.beta_parameters(), Some((11.0, 1.0)));
        let mut f = TermEstimator::bayesian_with_prior(1.0, -1.0, 2.0, 3.0).unwrap();
        f.update_bayesian(4, 1).unwrap();
        assert_eq!(f.beta_parameters(), Some((3.0, 6.0)));
        assert!(f.update_bayesian(2, 3).is_err());
        assert!(matches!(f.update_frequentist(1.0), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn posterior_moment_examples() {
        let (m, v) = posterior_moments(1.0, 1.0, 1.0, -1.0).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let (m, v) = posterior_moments(11.0, 1.0, 1.0, -1.0).unwrap();
        assert!((m - 5.0 / 6.0).abs() < 1e-15);
        assert!((v - 4.0 * 11.0 / (144.0 * 13.0)).abs() < 1e-15);
        assert_eq!(posterior_moments(3.0, 7.0, 0.4, 0.4).unwrap().1, 0.0);
        assert!(posterior_moments(0.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn expected_preparation_counts() {
        let h = two_spin();
        let s = ket01();
        let eps = 0.1;
        let g1 = MeasurementPlan::singletons(&h);
        let g2 = MeasurementPlan::from_groups(&h, vec![vec![0], vec![1, 2], vec![3, 4]]).unwrap();
        let g3 = MeasurementPlan::from_groups(&h, vec![vec![0, 1, 2], vec![3, 4]]).unwrap();
        let n = |p: &MeasurementPlan| expected_preparations(p, &s, &h, eps).unwrap() * eps * eps;
        assert!((n(&g1) - 10.0).abs() < 1e-12);
        assert!((n(&g2) - 6.0).abs() < 1e-12);
        assert!((n(&g3) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_grouping_example() {
        let h = two_spin();
        let cov = covariance_matrix(&ket01(), &h).unwrap();
        let plan = build_groups(&h, Some(&cov)).unwrap();
        assert_eq!(plan.groups, vec![vec![0], vec![1, 2], vec![3, 4]]);
        assert!(plan.covariance_aware);
        assert_eq!(plan.dump(&h).lines().count(), 3);
        let blind = build_groups(&h, None).unwrap();
        assert!(!blind.covariance_aware);
        blind.validate(&h).unwrap();
    }

    #[test]
    fn pilot_covariance_approximates_exact() {
        let h = two_spin();
        let s = ket01();
        let mut rng = stream_rng(11, 0);
        let pilot = pilot_covariance(&mut || Ok(s.clone()), &h, 4000, &mut rng).unwrap();
        let exact = covariance_matrix(&s, &h).unwrap();
        assert!((pilot[(0, 1)] - exact[(0, 1)]).abs() < 0.1);
        assert!((pilot[(1, 2)] - exact[(1, 2)]).abs() < 0.1);
        assert_eq!(build_groups(&h, Some(&pilot)).unwrap().groups, vec![vec![0], vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn grouping_edge_cases() {
        let anti = PauliSum::from_real_terms(1, &[(1.0, "X"), (1.0, "Y"), (1.0, "Z")]).unwrap();
        let cov = covariance_matrix(&StateVector::zero_state(1).unwrap(), &anti).unwrap();
        assert_eq!(build_groups(&anti, Some(&cov)).unwrap().groups.len(), 3);
        let zs = PauliSum::from_real_terms(3, &[(0.5, "IIZ"), (0.2, "IZI"), (0.1, "ZII"), (2.0, "III")]).unwrap();
        let prod = StateVector::product(&[(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)); 3]).unwrap();
        let cov = covariance_matrix(&prod, &zs).unwrap();
        let plan = build_groups(&zs, Some(&cov)).unwrap();
        assert_eq!(plan.groups, vec![vec![0, 1, 2]]);
        assert!(cov[(0, 1)].abs() < 1e-15 && cov[(1, 2)].abs() < 1e-15);
        assert!(MeasurementPlan::from_groups(&zs, vec![vec![0, 1, 2, 3]]).is_err());
        assert!(MeasurementPlan::from_groups(&zs, vec![vec![0, 1]]).is_err());
        assert!(MeasurementPlan::from_groups(&anti, vec![vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn truncation_examples() {
        let h = PauliSum::from_real_terms(2, &[(0.5, "XX"), (0.3, "ZZ"), (0.05, "ZI"), (-0.04, "IZ"), (3.0, "II")]).unwrap();
        let t = truncate_terms(&h, 0.1, 0.0).unwrap();
        assert_eq!(t.k_star, 0);
        assert!((t.per_term_target - 0.01 / 4.0).abs() < 1e-18);
        let t = truncate_terms(&h, 0.1, 0.5).unwrap();
        assert_eq!(t.k_star, 1);
        assert_eq!(t.removed, vec![3]);
        assert!((t.per_term_target - 0.0025).abs() < 1e-15);
        assert_eq!(t.retained.len(), 4);
        assert!(truncate_terms(&h, 0.1, 1.0).is_err());
        let tiny = PauliSum::from_real_terms(2, &[(1.0, "XX"), (1e-9, "ZI"), (1e-9, "IZ")]).unwrap();
        let t = truncate_terms(&tiny, 0.1, 0.999_999).unwrap();
        assert_eq!(t.k_star, 2);
        assert!(t.bias_bound < 0.999_999 * 0.1);
    }

    #[test]
    fn deterministic_term_after_floor() {
        let h = PauliSum::from_real_terms(1, &[(0.7, "Z")]).unwrap();
        let plan = MeasurementPlan::singletons(&h);
        let s = StateVector::zero_state(1).unwrap();
        let mut rng = stream_rng(1, 0);
        let r = estimate_expectation(&mut || Ok(s.clone()), &h, &plan, 0.01, &EstimateOptions::new(EstimatorMode::Frequentist), &mut rng).unwrap();
        assert_eq!(r.value, 0.7);
        assert_eq!(r.variance_of_estimator, 0.0);
        assert_eq!(r.total_preparations, MIN_SHOTS);
    }

    #[test]
    fn bayesian_near_eigenstate_is_finite() {
        let h = PauliSum::from_real_terms(1, &[(1.0, "Z")]).unwrap();
        let plan = MeasurementPlan::singletons(&h);
        let s = StateVector::zero_state(1).unwrap();
        let mut rng = stream_rng(2, 0);
        let r = estimate_expectation(&mut || Ok(s.clone()), &h, &plan, 0.1, &EstimateOptions::new(EstimatorMode::Bayesian), &mut rng).unwrap();
        assert!(r.variance_of_estimator.is_finite() && r.variance_of_estimator > 0.0);
        assert!(r.variance_of_estimator < 0.01);
        let (lo, hi) = r.credible_interval.unwrap();
        assert!(lo < r.value && r.value <= hi && hi <= 1.0);
    }

    #[test]
    fn two_spin_runs_land_near_exact() {
        let h = two_spin();
        let s = ket01();
        let plan = MeasurementPlan::from_groups(&h, vec![vec![0], vec![1, 2], vec![3, 4]]).unwrap();
        let opts = EstimateOptions::new(EstimatorMode::Frequentist);
        let mut hits = 0;
        for seed in 0..200 {
            let mut rng = stream_rng(seed, 0);
            let r = estimate_expectation(&mut || Ok(s.clone()), &h, &plan, 0.1, &opts, &mut rng).unwrap();
            assert!(r.total_preparations >= 3 * MIN_SHOTS);
            if (r.value + 1.0).abs() <= 0.2 {
                hits += 1;
            }
        }
        assert!(hits >= 190, "{hits}");
    }

    #[test]
    fn budget_is_enforced() {
        let h = two_spin();
        let s = ket01();
        let plan = MeasurementPlan::singletons(&h);
        let mut opts = EstimateOptions::new(EstimatorMode::Frequentist);
        opts.max_preparations = Some(1500);
        let mut rng = stream_rng(3, 0);
        let err = estimate_expectation(&mut || Ok(s.clone()), &h, &plan, 0.1, &opts, &mut rng).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { shots: 1500 }));
    }

    #[test]
    fn preparation_failure_propagates() {
        let h = two_spin();
        let plan = MeasurementPlan::singletons(&h);
        let mut rng = stream_rng(3, 0);
        let mut prep = || Err(Error::Contract("no state".into()));
        let err = estimate_expectation(&mut prep, &h, &plan, 0.1, &EstimateOptions::new(EstimatorMode::Bayesian), &mut rng);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn report_serializes() {
        let h = two_spin();
        let s = ket01();
        let plan = MeasurementPlan::singletons(&h);
        let mut rng = stream_rng(5, 0);
        let r = estimate_expectation(&mut || Ok(s.clone()), &h, &plan, 0.2, &EstimateOptions::new(EstimatorMode::Bayesian), &mut rng).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json_string().unwrap()).unwrap();
        assert_eq!(v["mode"], "bayesian");
        assert_eq!(v["groups"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn pattern_posterior_matches_beta_for_one_term() {
        let mut p = PatternPosterior::new(&[0.3]);
        let mut t = TermEstimator::bayesian(0.3, -0.3);
        for x in [1, 1, -1, 1, -1, 1, 1] {
            p.update(0.3 * x as f64);
            t.update_bayesian(1, u64::from(x > 0)).unwrap();
        }
        let (m, v) = p.moments();
        assert!((m - t.mean()).abs() < 1e-15);
        assert!((v - t.estimator_variance()).abs() < 1e-15);
    }

    #[test]
    fn convolution_identities() {
        let d = beta_value_density(3.0, 5.0, 1.0, -1.0, 0.002).unwrap();
        assert_eq!(convolve_posteriors(std::slice::from_ref(&d)).unwrap(), d);
        let a = normal_density(0.3, 0.1, 0.002).unwrap();
        let b = normal_density(-1.2, 0.2, 0.002).unwrap();
        let c = convolve_posteriors(&[a, b]).unwrap();
        assert!((c.mass() - 1.0).abs() < 1e-8);
        let v = c.values();
        let n = v.len();
        for k in 0..n / 2 {
            assert!((v[k] - v[n - 1 - k]).abs() < 1e-9 * v.iter().cloned().fold(0.0, f64::max));
        }
        let centre = c.lo() + (n - 1) as f64 * c.step() / 2.0;
        assert!((centre - (0.3 - 1.2)).abs() < 1e-12);
        let (lo, hi) = c.credible_interval(0.95).unwrap();
        let sd = (0.01f64 + 0.04).sqrt();
        assert!((hi - lo - 2.0 * 1.959964 * sd).abs() < 1e-3);
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let wide = GridDensity::from_fn(-1000.0, 1000.0, 3, |_| 1.0).unwrap();
        let narrow = normal_density(0.0, 1e-6, 2e-7).unwrap();
        assert!(matches!(convolve_posteriors(&[wide, narrow]), Err(Error::GridTooCoarse { .. })));
        assert!(matches!(GridDensity::new(0.0, 0.1, vec![1.0, 1.0]), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn many_beta_terms_approach_normal_width() {
        let mut rng = stream_rng(21, 0);
        let params: Vec<(f64, f64, f64)> = (0..12)
            .map(|_| (rng.random_range(2.0..40.0), rng.random_range(2.0..40.0), rng.random_range(0.1..1.0)))
            .collect();
        let dens: Vec<GridDensity> = params.iter().map(|&(a, b, h)| beta_value_density(a, b, h, -h, 1e-3).unwrap()).collect();
        let conv = convolve_posteriors(&dens).unwrap();
        let (lo, hi) = conv.credible_interval(0.95).unwrap();
        // Monte Carlo oracle: sample each Beta directly and sum.
        let betas: Vec<rand_distr::Beta<f64>> = params.iter().map(|&(a, b, _)| rand_distr::Beta::new(a, b).unwrap()).collect();
        let mut sums: Vec<f64> = (0..200_000)
            .map(|_| params.iter().zip(&betas).map(|(&(_, _, h), d)| h * (2.0 * rng.sample(d) - 1.0)).sum())
            .collect();
        sums.sort_by(f64::total_cmp);
        let mc = (sums[(0.025 * sums.len() as f64) as usize], sums[(0.975 * sums.len() as f64) as usize]);
        assert!((lo - mc.0).abs() < 0.01 && (hi - mc.1).abs() < 0.01, "{lo} {hi} {mc:?}");
        let var: f64 = params.iter().map(|&(a, b, h)| posterior_moments(a, b, h, -h).unwrap().1).sum();
        let normal_width = 2.0 * 1.959964 * var.sqrt();
        assert!(((hi - lo) / normal_width - 1.0).abs() < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn welford_matches_two_pass(xs in proptest::collection::vec(-5.0f64..5.0, 2..60)) {
            let mut e = TermEstimator::frequentist(5.0, -5.0);
            for &x in &xs {
                e.update_frequentist(x).unwrap();
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((e.mean() - mean).abs() < 1e-12);
            prop_assert!((e.sample_variance().unwrap() - var).abs() < 1e-10);
            prop_assert!(e.estimator_variance() >= 0.0);
        }

        #[test]
        fn truncation_bias_within_budget(seed in any::<u64>(), c in 0.0f64..0.95, eps in 0.01f64..0.5) {
            let mut rng = stream_rng(seed, 0);
            let terms: Vec<(f64, String)> = (0..20)
                .map(|_| {
                    let s: String = (0..3).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                    (rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-3.0..0.0)), s)
                })
                .collect();
            let refs: Vec<(f64, &str)> = terms.iter().map(|(c, s)| (*c, s.as_str())).collect();
            let h = PauliSum::from_real_terms(3, &refs).unwrap();
            let amps: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let s = StateVector::from_amplitudes_normalized(amps).unwrap();
            let t = truncate_terms(&h, eps, c).unwrap();
            let full = crate::simulator::expectation(&s, &h).unwrap();
            let kept = crate::simulator::expectation(&s, &t.retained).unwrap();
            prop_assert!((full - kept).abs() <= t.bias_bound + 1e-12);
            prop_assert!(t.bias_bound < c * eps || t.k_star == 0);
            let m = h.terms().iter().filter(|t| !t.string.is_identity()).count();
            if t.k_star < m {
                let mse = c * c * eps * eps + (m - t.k_star) as f64 * t.per_term_target;
                prop_assert!(mse <= eps * eps * (1.0 + 1e-12));
            }
        }
    }
}
