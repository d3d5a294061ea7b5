//! Dense state-vector simulation.
//!
//! Basis index bit `q` is the computational value of qubit `q`, so the ket
//! `|b_{n-1} ... b_0>` has index `sum b_q 2^q`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::pauli::{commutes_unchecked, PauliString, PauliSum, DEFAULT_MATRIX_LIMIT};
use crate::schedule::Schedule;

/// Norm tolerance for states accepted from callers.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Largest register the simulator will allocate.
pub const MAX_SIM_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Normalized amplitudes over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
        StateVector::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<StateVector> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Accepts amplitudes whose norm is already 1 within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<StateVector> {
        let n = register_of(amps.len())?;
        let norm = l2(&amps);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Normalizes the given amplitudes; rejects the zero vector.
    pub fn from_amplitudes_normalized(mut amps: Vec<Complex64>) -> Result<StateVector> {
        let n = register_of(amps.len())?;
        let norm = l2(&amps);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Tensor product of single-qubit states; `pairs[q] = (c0, c1)` for qubit `q`.
    pub fn product(pairs: &[(Complex64, Complex64)]) -> Result<StateVector> {
        check_register(pairs.len())?;
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for (q, (c0, c1)) in pairs.iter().enumerate() {
            let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidArgument(format!("qubit {q} pair has norm {n}")));
            }
            let mut next = Vec::with_capacity(amps.len() * 2);
            next.extend(amps.iter().map(|a| a * c0));
            next.extend(amps.iter().map(|a| a * c1));
            amps = next;
        }
        Ok(StateVector { n_qubits: pairs.len(), amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Born probability of each basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn renormalize(&mut self) {
        let n = l2(&self.amps);
        for a in &mut self.amps {
            *a /= n;
        }
    }

    /// `P|s>` for a single string.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        check_dim(self.n_qubits, p.n_qubits())?;
        let mut out = vec![ZERO; self.dim()];
        for (b, a) in self.amps.iter().enumerate() {
            let (b2, ph) = p.apply_to_basis(b);
            out[b2] = ph * a;
        }
        self.amps = out;
        Ok(())
    }

    /// `exp(i theta P)|s> = cos(theta)|s> + i sin(theta) P|s>`.
    pub fn apply_pauli_exponential(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        check_dim(self.n_qubits, p.n_qubits())?;
        let (s, c) = theta.sin_cos();
        let is = Complex64::new(0.0, s);
        let old = std::mem::take(&mut self.amps);
        self.amps = old.iter().map(|a| a * c).collect();
        for (b, a) in old.iter().enumerate() {
            let (b2, ph) = p.apply_to_basis(b);
            self.amps[b2] += is * ph * a;
        }
        Ok(())
    }

    /// Applies a full `2^n x 2^n` matrix, then renormalizes to absorb rounding.
    pub fn apply_matrix(&mut self, u: &DMatrix<Complex64>) -> Result<()> {
        check_dim(self.dim(), u.nrows())?;
        check_dim(self.dim(), u.ncols())?;
        let v = u * DVector::from_column_slice(&self.amps);
        self.amps = v.as_slice().to_vec();
        self.renormalize();
        Ok(())
    }

    /// Applies a `2^k x 2^k` unitary to the listed qubits; `qubits[j]` is bit `j`
    /// of the local index.
    pub fn apply_local(&mut self, qubits: &[usize], u: &DMatrix<Complex64>) -> Result<()> {
        let k = qubits.len();
        check_dim(1usize << k, u.nrows())?;
        check_dim(1usize << k, u.ncols())?;
        let mut mask = 0usize;
        for &q in qubits {
            if q >= self.n_qubits || mask & (1 << q) != 0 {
                return Err(Error::InvalidArgument(format!("invalid target qubit {q}")));
            }
            mask |= 1 << q;
        }
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|l| qubits.iter().enumerate().filter(|(j, _)| l >> j & 1 == 1).map(|(_, q)| 1 << q).sum())
            .collect();
        let mut local = vec![ZERO; offsets.len()];
        for base in (0..self.dim()).filter(|b| b & mask == 0) {
            for (l, off) in offsets.iter().enumerate() {
                local[l] = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, a) in local.iter().enumerate() {
                    acc += u[(r, c)] * a;
                }
                self.amps[base | off] = acc;
            }
        }
        Ok(())
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("register must have at least one qubit".into()));
    }
    if n_qubits > MAX_SIM_QUBITS {
        return Err(Error::Capacity { requested: n_qubits, limit: MAX_SIM_QUBITS });
    }
    Ok(())
}

fn register_of(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "amplitude count {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_register(n)?;
    Ok(n)
}

/// Functional form of [`StateVector::apply_pauli_exponential`].
pub fn apply_pauli_exponential(s: &StateVector, p: &PauliString, theta: f64) -> Result<StateVector> {
    let mut out = s.clone();
    out.apply_pauli_exponential(p, theta)?;
    Ok(out)
}

/// Mean and variance of a Hermitian sum. The variance is clamped at zero after
/// checking it is not below `-1e-10`.
pub fn expectation_and_variance(s: &StateVector, o: &PauliSum) -> Result<(f64, f64)> {
    o.require_hermitian()?;
    check_dim(s.n_qubits, o.n_qubits())?;
    let os = o.apply(&s.amps)?;
    let mean_c: Complex64 = s.amps.iter().zip(&os).map(|(a, b)| a.conj() * b).sum();
    let second: f64 = os.iter().map(|a| a.norm_sqr()).sum();
    let var = second - mean_c.re * mean_c.re;
    if var < -1e-10 * second.max(1.0) {
        return Err(Error::Contract(format!("negative variance {var}")));
    }
    Ok((mean_c.re, var.max(0.0)))
}

/// Mean of a Hermitian sum.
pub fn expectation(s: &StateVector, o: &PauliSum) -> Result<f64> {
    o.require_hermitian()?;
    check_dim(s.n_qubits, o.n_qubits())?;
    let os = o.apply(&s.amps)?;
    Ok(s.amps.iter().zip(&os).map(|(a, b)| (a.conj() * b).re).sum())
}

/// Outcomes of one sequential measurement of a commuting set.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub outcomes: Vec<i8>,
    pub post_state: StateVector,
}

/// Measures each string in order, projecting and renormalizing after each outcome.
pub fn sample_group<R: Rng + ?Sized>(
    s: &StateVector,
    group: &[PauliString],
    rng: &mut R,
) -> Result<MeasurementRecord> {
    for (i, a) in group.iter().enumerate() {
        check_dim(s.n_qubits, a.n_qubits())?;
        for b in &group[i + 1..] {
            if !commutes_unchecked(a, b) {
                return Err(Error::Contract(format!("{a} and {b} do not commute")));
            }
        }
    }
    let mut state = s.clone();
    let mut outcomes = Vec::with_capacity(group.len());
    let mut ps = vec![ZERO; state.dim()];
    for p in group {
        if p.is_identity() {
            outcomes.push(1);
            continue;
        }
        for (b, a) in state.amps.iter().enumerate() {
            let (b2, ph) = p.apply_to_basis(b);
            ps[b2] = ph * a;
        }
        let mean: f64 = state.amps.iter().zip(&ps).map(|(a, b)| (a.conj() * b).re).sum();
        let p_plus = ((1.0 + mean) / 2.0).clamp(0.0, 1.0);
        let plus = rng.random::<f64>() < p_plus;
        let sign = if plus { 1.0 } else { -1.0 };
        for (a, pa) in state.amps.iter_mut().zip(&ps) {
            *a = (*a + pa * sign) * 0.5;
        }
        state.renormalize();
        outcomes.push(if plus { 1 } else { -1 });
    }
    Ok(MeasurementRecord { outcomes, post_state: state })
}

/// Ascending eigenvalues with matching normalized eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl Eigensystem {
    /// Smallest eigenvalue.
    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn ground_state(&self) -> &StateVector {
        &self.vectors[0]
    }

    /// `lambda_1 - lambda_0`; zero for a one-dimensional space.
    pub fn gap(&self) -> f64 {
        if self.values.len() < 2 {
            0.0
        } else {
            self.values[1] - self.values[0]
        }
    }
}

/// Dense diagonalization of a Hermitian sum on at most `DEFAULT_MATRIX_LIMIT` qubits.
pub fn exact_eigensystem(o: &PauliSum) -> Result<Eigensystem> {
    o.require_hermitian()?;
    let m = o.to_matrix_with_limit(DEFAULT_MATRIX_LIMIT)?;
    let (values, vecs) = hermitian_eigen(m);
    let vectors = vecs
        .into_iter()
        .map(StateVector::from_amplitudes_normalized)
        .collect::<Result<Vec<_>>>()?;
    Ok(Eigensystem { values, vectors })
}

/// Eigenvalues only.
pub fn eigenvalues(o: &PauliSum) -> Result<Vec<f64>> {
    o.require_hermitian()?;
    let m = o.to_matrix_with_limit(DEFAULT_MATRIX_LIMIT)?;
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Ascending eigenpairs of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    (values, vectors)
}

/// `exp(-i t H)` for a Hermitian matrix `H`.
pub fn hermitian_propagator(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| Complex64::from_polar(1.0, -l * t)),
    ));
    v * phases * v.adjoint()
}

/// Integrates `i d/dt |psi> = H(t/tau) |psi>` with `H(g) = (1-g) h_i + g h_p` and
/// `g` from the schedule, using `steps` midpoint steps with exact per-step exponentials.
pub fn evolve_schedule(
    s0: &StateVector,
    sched: &Schedule,
    h_i: &PauliSum,
    h_p: &PauliSum,
    steps: usize,
) -> Result<StateVector> {
    evolve_schedule_observed(s0, sched, h_i, h_p, steps, |_, _| {})
}

/// As [`evolve_schedule`], calling `observe(t, state)` after every step.
pub fn evolve_schedule_observed<F: FnMut(f64, &StateVector)>(
    s0: &StateVector,
    sched: &Schedule,
    h_i: &PauliSum,
    h_p: &PauliSum,
    steps: usize,
    mut observe: F,
) -> Result<StateVector> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    h_i.require_hermitian()?;
    h_p.require_hermitian()?;
    check_dim(h_i.n_qubits(), h_p.n_qubits())?;
    check_dim(s0.n_qubits, h_i.n_qubits())?;
    let mi = h_i.to_matrix()?;
    let mp = h_p.to_matrix()?;
    let tau = sched.tau();
    let dt = tau / steps as f64;
    let mut state = DVector::from_column_slice(&s0.amps);
    let mut cached: Option<(f64, DMatrix<Complex64>)> = None;
    let mut out = s0.clone();
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let g = sched.evaluate(t_mid)?;
        let reuse = matches!(&cached, Some((gc, _)) if *gc == g);
        if !reuse {
            let h = &mi * Complex64::new(1.0 - g, 0.0) + &mp * Complex64::new(g, 0.0);
            cached = Some((g, hermitian_propagator(&h, dt)));
        }
        let u = &cached.as_ref().expect("propagator cached").1;
        state = u * state;
        out.amps.copy_from_slice(state.as_slice());
        observe((k + 1) as f64 * dt, &out);
    }
    out.renormalize();
    Ok(out)
}
