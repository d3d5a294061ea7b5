//! Accuracy certificates from a measured mean and variance, plus the folded
//! spectrum and penalty transforms.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::pauli::PauliSum;

/// Measured moments and prior spectral knowledge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub mean: f64,
    pub variance: f64,
    /// Lower bound on the relevant spectral gap.
    pub gap: f64,
    /// Lower bound on the dominant eigenvector weight, in `(0.5, 1]`.
    pub alpha: Option<f64>,
}

impl BoundInputs {
    pub fn new(mean: f64, variance: f64, gap: f64, alpha: Option<f64>) -> Result<BoundInputs> {
        if !(variance >= 0.0) || !mean.is_finite() {
            return Err(Error::InvalidArgument(format!("variance {variance} must be non-negative")));
        }
        if !(gap > 0.0) {
            return Err(Error::InvalidArgument(format!("gap {gap} must be positive")));
        }
        if let Some(a) = alpha {
            if !(a > 0.5 && a <= 1.0) {
                return Err(Error::InvalidArgument(format!("alpha {a} must lie in (0.5, 1]")));
            }
        }
        Ok(BoundInputs { mean, variance, gap, alpha })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `mean -+ sqrt(variance)`, which contains the eigenvalue nearest the mean.
pub fn weinstein_interval(b: &BoundInputs) -> (f64, f64) {
    let s = b.std_dev();
    (b.mean - s, b.mean + s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapTarget {
    Ground,
    Excited,
}

/// Lower bound on the weight of the target eigenvector, clamped to `[0, 1]`.
///
/// Ground: `(gap - sd) / gap`, requiring `sd < gap`. The bound also assumes the
/// ground eigenvalue is not below `mean - sd`, which holds when it is the
/// eigenvalue nearest the mean.
///
/// Excited: `(g - var) / g` with `g = (gap + sd)^2`. This assumes every other
/// eigenvalue lies at least `gap + sd` from the mean.
pub fn overlap_bound(b: &BoundInputs, which: OverlapTarget) -> Result<f64> {
    let s = b.std_dev();
    let raw = match which {
        OverlapTarget::Ground => {
            if s >= b.gap {
                return Err(Error::BoundInapplicable(format!(
                    "standard deviation {s} is not below the gap {}",
                    b.gap
                )));
            }
            (b.gap - s) / b.gap
        }
        OverlapTarget::Excited => {
            let g = (b.gap + s).powi(2);
            (g - b.variance) / g
        }
    };
    Ok(raw.clamp(0.0, 1.0))
}

/// Which dispersion multiplies the moment factor in the Delos-Blinder bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DelosBlinderForm {
    /// `mean - sqrt(1/alpha^2 - 1) * variance`.
    #[default]
    Variance,
    /// `mean - sqrt(1/alpha^2 - 1) * sqrt(variance)`.
    StdDev,
}

/// Lower bound on the dominant eigenvalue given `alpha`.
pub fn delos_blinder(b: &BoundInputs, form: DelosBlinderForm) -> Result<f64> {
    let a = b
        .alpha
        .ok_or_else(|| Error::BoundInapplicable("no dominance bound alpha was given".into()))?;
    if a <= 0.5 {
        return Err(Error::BoundInapplicable(format!("alpha {a} does not exceed 0.5")));
    }
    let factor = (1.0 / (a * a) - 1.0).max(0.0).sqrt();
    let spread = match form {
        DelosBlinderForm::Variance => b.variance,
        DelosBlinderForm::StdDev => b.std_dev(),
    };
    Ok(b.mean - factor * spread)
}

/// Every certificate that applies to the inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub inputs: BoundInputs,
    pub weinstein: (f64, f64),
    pub ground_overlap: Option<f64>,
    pub excited_overlap: f64,
    pub delos_blinder: Option<f64>,
    pub delos_blinder_std_dev: Option<f64>,
    pub notes: Vec<String>,
}

pub fn certify(b: &BoundInputs) -> Certificate {
    let mut notes = Vec::new();
    let ground_overlap = match overlap_bound(b, OverlapTarget::Ground) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let excited_overlap = overlap_bound(b, OverlapTarget::Excited).expect("excited bound has no precondition");
    let (db, db_sd) = match b.alpha {
        Some(_) => (
            delos_blinder(b, DelosBlinderForm::Variance).ok(),
            delos_blinder(b, DelosBlinderForm::StdDev).ok(),
        ),
        None => {
            notes.push("no alpha given; Delos-Blinder bound skipped".into());
            (None, None)
        }
    };
    Certificate {
        inputs: *b,
        weinstein: weinstein_interval(b),
        ground_overlap,
        excited_overlap,
        delos_blinder: db,
        delos_blinder_std_dev: db_sd,
        notes,
    }
}

fn shifted_square(op: &PauliSum, shift: f64) -> Result<PauliSum> {
    let d = op.try_add(&PauliSum::identity(op.n_qubits(), -shift)?)?.simplify();
    Ok(d.try_mul(&d)?.simplify())
}

/// `(H - gamma I)^2`, whose ground state is the eigenvector of `H` nearest `gamma`.
pub fn folded_spectrum(h: &PauliSum, gamma: f64) -> Result<PauliSum> {
    h.require_hermitian()?;
    shifted_square(h, gamma)
}

/// Penalty term `multiplier * (operator - target I)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryConstraint {
    pub operator: PauliSum,
    pub target: f64,
    pub multiplier: f64,
}

/// `H + sum_i lambda_i (S_i - s_i I)^2`.
pub fn penalty_lagrangian(h: &PauliSum, constraints: &[SymmetryConstraint]) -> Result<PauliSum> {
    h.require_hermitian()?;
    let mut out = h.clone();
    for c in constraints {
        if !(c.multiplier >= 0.0) {
            return Err(Error::InvalidArgument(format!("multiplier {} must be non-negative", c.multiplier)));
        }
        c.operator.require_hermitian()?;
        check_dim(h.n_qubits(), c.operator.n_qubits())?;
        if c.multiplier == 0.0 {
            continue;
        }
        let sq = shifted_square(&c.operator, c.target)?;
        out = out.try_add(&sq.scale(Complex64::new(c.multiplier, 0.0)))?;
    }
    Ok(out.simplify())
}
