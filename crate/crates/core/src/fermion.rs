//! Second-quantized fermion operators, integral ingestion and the
//! Jordan-Wigner map onto Pauli sums.
//!
//! Mode `p` maps to qubit `p`. Occupied means bit `p` of the basis index is 1,
//! and `a_p^dag = (prod_{m<p} Z_m) (X_p - iY_p)/2`.

use std::collections::BTreeMap;
use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::pauli::{PauliString, PauliSum, PauliTerm, Pauli, ZERO_TOLERANCE};
use crate::simulator::StateVector;

/// Tolerance for integral symmetry validation.
pub const INTEGRAL_SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A single creation (`dagger`) or annihilation operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LadderOp {
    pub mode: usize,
    pub dagger: bool,
}

impl LadderOp {
    pub fn create(mode: usize) -> LadderOp {
        LadderOp { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> LadderOp {
        LadderOp { mode, dagger: false }
    }

    pub fn adjoint(self) -> LadderOp {
        LadderOp { mode: self.mode, dagger: !self.dagger }
    }
}

// Normal order: creators before annihilators, ascending mode within each block.
impl Ord for LadderOp {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dagger.cmp(&self.dagger).then(self.mode.cmp(&other.mode))
    }
}

impl PartialOrd for LadderOp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LadderOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dagger {
            write!(f, "a+{}", self.mode)
        } else {
            write!(f, "a{}", self.mode)
        }
    }
}

/// Sum of coefficient-weighted ladder-operator products, kept in normal order.
///
/// Two operators compare equal iff their canonical forms match exactly; use
/// [`FermionOperator::approx_eq`] for floating-point comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct FermionOperator {
    n_modes: usize,
    terms: BTreeMap<Vec<LadderOp>, Complex64>,
}

impl FermionOperator {
    pub fn zero(n_modes: usize) -> Result<FermionOperator> {
        if n_modes == 0 {
            return Err(Error::InvalidArgument("operator needs at least one mode".into()));
        }
        Ok(FermionOperator { n_modes, terms: BTreeMap::new() })
    }

    pub fn identity(n_modes: usize, c: f64) -> Result<FermionOperator> {
        FermionOperator::product(n_modes, Complex64::new(c, 0.0), &[])
    }

    /// `coeff * ops[0] ops[1] ...`, normal-ordered.
    pub fn product(n_modes: usize, coeff: Complex64, ops: &[LadderOp]) -> Result<FermionOperator> {
        let mut out = FermionOperator::zero(n_modes)?;
        out.add_product(coeff, ops)?;
        Ok(out)
    }

    /// `c * a_p^dag a_q`.
    pub fn hopping(n_modes: usize, c: f64, p: usize, q: usize) -> Result<FermionOperator> {
        FermionOperator::product(
            n_modes,
            Complex64::new(c, 0.0),
            &[LadderOp::create(p), LadderOp::annihilate(q)],
        )
    }

    /// Total particle number `sum_p a_p^dag a_p`.
    pub fn number(n_modes: usize) -> Result<FermionOperator> {
        let mut out = FermionOperator::zero(n_modes)?;
        for p in 0..n_modes {
            out.add_product(Complex64::new(1.0, 0.0), &[LadderOp::create(p), LadderOp::annihilate(p)])?;
        }
        Ok(out)
    }

    pub fn add_product(&mut self, coeff: Complex64, ops: &[LadderOp]) -> Result<()> {
        if let Some(op) = ops.iter().find(|o| o.mode >= self.n_modes) {
            return Err(Error::InvalidArgument(format!(
                "mode {} out of range for {} modes",
                op.mode, self.n_modes
            )));
        }
        if !(coeff.re.is_finite() && coeff.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        for (c, canon) in normal_order(coeff, ops.to_vec()) {
            *self.terms.entry(canon).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        self.prune();
        Ok(())
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= ZERO_TOLERANCE);
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Canonical terms in lexicographic normal order.
    pub fn terms(&self) -> impl Iterator<Item = (&[LadderOp], Complex64)> {
        self.terms.iter().map(|(k, c)| (k.as_slice(), *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> FermionOperator {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune();
        out
    }

    pub fn try_add(&self, other: &FermionOperator) -> Result<FermionOperator> {
        check_dim(self.n_modes, other.n_modes)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out.prune();
        Ok(out)
    }

    pub fn try_sub(&self, other: &FermionOperator) -> Result<FermionOperator> {
        self.try_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn try_mul(&self, other: &FermionOperator) -> Result<FermionOperator> {
        check_dim(self.n_modes, other.n_modes)?;
        let mut out = FermionOperator::zero(self.n_modes)?;
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let mut ops = ka.clone();
                ops.extend_from_slice(kb);
                for (c, canon) in normal_order(ca * cb, ops) {
                    *out.terms.entry(canon).or_insert(Complex64::new(0.0, 0.0)) += c;
                }
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn adjoint(&self) -> FermionOperator {
        let mut out = FermionOperator { n_modes: self.n_modes, terms: BTreeMap::new() };
        for (k, c) in &self.terms {
            let ops: Vec<LadderOp> = k.iter().rev().map(|o| o.adjoint()).collect();
            for (c2, canon) in normal_order(c.conj(), ops) {
                *out.terms.entry(canon).or_insert(Complex64::new(0.0, 0.0)) += c2;
            }
        }
        out.prune();
        out
    }

    pub fn approx_eq(&self, other: &FermionOperator, tol: f64) -> bool {
        match self.try_sub(other) {
            Ok(d) => d.terms.values().all(|c| c.norm() <= tol),
            Err(_) => false,
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.approx_eq(&self.adjoint(), tol)
    }

    /// Largest coefficient magnitude; zero for the empty operator.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Applies the operator directly in the occupation-number basis.
    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        check_dim(1usize << self.n_modes, amps.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (ops, c) in &self.terms {
            for (b, a) in amps.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                if let Some((b2, sign)) = apply_ops_to_basis(ops, b) {
                    out[b2] += c * a * sign;
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FermionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (ops, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for o in ops {
                write!(f, " {o}")?;
            }
        }
        Ok(())
    }
}

/// `[a, b] = ab - ba`, normal-ordered.
pub fn commutator(a: &FermionOperator, b: &FermionOperator) -> Result<FermionOperator> {
    a.try_mul(b)?.try_sub(&b.try_mul(a)?)
}

/// Rewrites a product in normal order using `a_p a_q^dag = delta_pq - a_q^dag a_p`.
/// Products containing a repeated creator or annihilator vanish.
fn normal_order(coeff: Complex64, ops: Vec<LadderOp>) -> Vec<(Complex64, Vec<LadderOp>)> {
    let mut out = Vec::new();
    let mut stack = vec![(coeff, ops)];
    while let Some((c, mut ops)) = stack.pop() {
        let mut sign = 1.0;
        let mut vanished = false;
        'sort: loop {
            let mut swapped = false;
            for i in 0..ops.len().saturating_sub(1) {
                let (a, b) = (ops[i], ops[i + 1]);
                match a.cmp(&b) {
                    Ordering::Equal => {
                        vanished = true;
                        break 'sort;
                    }
                    Ordering::Greater => {
                        if !a.dagger && b.dagger && a.mode == b.mode {
                            let mut contracted = ops.clone();
                            contracted.drain(i..i + 2);
                            stack.push((c * sign, contracted));
                        }
                        ops.swap(i, i + 1);
                        sign = -sign;
                        swapped = true;
                    }
                    Ordering::Less => {}
                }
            }
            if !swapped {
                break;
            }
        }
        if !vanished {
            out.push((c * sign, ops));
        }
    }
    out
}

/// Action of `ops` (rightmost first) on occupation basis state `b`.
pub(crate) fn apply_ops_to_basis(ops: &[LadderOp], mut b: usize) -> Option<(usize, f64)> {
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let bit = 1usize << op.mode;
        let occupied = b & bit != 0;
        if occupied == op.dagger {
            return None;
        }
        if (b & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b ^= bit;
    }
    Some((b, sign))
}

fn jw_ladder(n_modes: usize, op: LadderOp) -> Result<PauliSum> {
    let mut z_string: Vec<(usize, Pauli)> = (0..op.mode).map(|m| (m, Pauli::Z)).collect();
    z_string.push((op.mode, Pauli::X));
    let x = PauliString::from_sites(n_modes, &z_string)?;
    z_string.pop();
    z_string.push((op.mode, Pauli::Y));
    let y = PauliString::from_sites(n_modes, &z_string)?;
    let y_coeff = if op.dagger { -0.5 } else { 0.5 };
    PauliSum::from_terms(
        n_modes,
        vec![
            PauliTerm::new(Complex64::new(0.5, 0.0), x),
            PauliTerm::new(Complex64::new(0.0, y_coeff), y),
        ],
    )
}

/// Jordan-Wigner image of `f` on `f.n_modes()` qubits, simplified. Hermitian
/// inputs yield exactly real coefficients.
pub fn jordan_wigner(f: &FermionOperator) -> Result<PauliSum> {
    let n = f.n_modes;
    let mut ladder: BTreeMap<LadderOp, PauliSum> = BTreeMap::new();
    let mut acc = PauliSum::zero(n)?;
    let mut terms = Vec::new();
    for (ops, c) in &f.terms {
        let mut prod = PauliSum::identity(n, 1.0)?.scale(*c);
        for op in ops {
            if !ladder.contains_key(op) {
                ladder.insert(*op, jw_ladder(n, *op)?);
            }
            prod = prod.try_mul(&ladder[op])?;
        }
        terms.extend_from_slice(prod.terms());
    }
    for t in terms {
        acc.push(t.coeff, t.string)?;
    }
    let mut out = acc.simplify();
    if f.is_hermitian(1e-10 * f.max_abs_coeff().max(1.0)) {
        let real: Vec<PauliTerm> = out
            .terms()
            .iter()
            .map(|t| PauliTerm::new(Complex64::new(t.coeff.re, 0.0), t.string))
            .collect();
        out = PauliSum::from_terms(n, real)?.simplify();
    }
    Ok(out)
}

/// One- and two-body integrals with a scalar core energy (Hartree).
///
/// `two_body(p, q, r, s)` multiplies `a_p^dag a_q^dag a_r a_s` with a prefactor
/// of one half in [`build_hamiltonian`].
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    n_modes: usize,
    one_body: Vec<f64>,
    two_body: Vec<f64>,
    core_energy: f64,
}

impl IntegralSet {
    pub fn new(n_modes: usize, core_energy: f64) -> Result<IntegralSet> {
        if n_modes == 0 {
            return Err(Error::Validation("integral set declares zero modes".into()));
        }
        Ok(IntegralSet {
            n_modes,
            one_body: vec![0.0; n_modes * n_modes],
            two_body: vec![0.0; n_modes.pow(4)],
            core_energy,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    fn i1(&self, p: usize, q: usize) -> usize {
        p * self.n_modes + q
    }

    fn i2(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let m = self.n_modes;
        ((p * m + q) * m + r) * m + s
    }

    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        self.one_body[self.i1(p, q)]
    }

    pub fn two_body(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body[self.i2(p, q, r, s)]
    }

    pub fn set_one_body(&mut self, p: usize, q: usize, v: f64) {
        let k = self.i1(p, q);
        self.one_body[k] = v;
    }

    pub fn set_two_body(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let k = self.i2(p, q, r, s);
        self.two_body[k] = v;
    }

    /// Row-major one-body array.
    pub fn one_body_array(&self) -> &[f64] {
        &self.one_body
    }

    /// Row-major two-body array indexed `[p][q][r][s]`.
    pub fn two_body_array(&self) -> &[f64] {
        &self.two_body
    }

    /// Checks `h_pq = h_qp`, `h_pqrs = h_qpsr` and `h_pqrs = h_srqp`.
    pub fn validate(&self) -> Result<()> {
        let m = self.n_modes;
        let tol = INTEGRAL_SYMMETRY_TOLERANCE;
        for p in 0..m {
            for q in 0..m {
                let (a, b) = (self.one_body(p, q), self.one_body(q, p));
                if !a.is_finite() || (a - b).abs() > tol {
                    return Err(Error::Validation(format!(
                        "one-body h[{p}][{q}] = {a} but h[{q}][{p}] = {b}"
                    )));
                }
            }
        }
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = self.two_body(p, q, r, s);
                        if !v.is_finite() {
                            return Err(Error::Validation(format!(
                                "two-body h[{p}][{q}][{r}][{s}] is not finite"
                            )));
                        }
                        for (label, w) in [
                            ("pair exchange", self.two_body(q, p, s, r)),
                            ("hermiticity", self.two_body(s, r, q, p)),
                        ] {
                            if (v - w).abs() > tol {
                                return Err(Error::Validation(format!(
                                    "two-body h[{p}][{q}][{r}][{s}] = {v} violates {label} ({w})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        if !self.core_energy.is_finite() {
            return Err(Error::Validation("core energy is not finite".into()));
        }
        Ok(())
    }

    /// `core + sum h_pq D1[p][q] + 1/2 sum h_pqrs D2[p][q][r][s]`.
    pub fn energy_from_rdm(&self, rdm: &RdmPair) -> Result<f64> {
        let half: Vec<f64> = self.two_body.iter().map(|v| 0.5 * v).collect();
        Ok(self.core_energy + assemble_observable(rdm, &self.one_body, &half)?)
    }
}

/// Parses the integral text format.
///
/// The first line is `M <modes> CORE <energy>`. Each further non-blank line is
/// `value p q r s` with 1-based indices; `r = s = 0` marks a one-body entry.
/// Lines starting with `#` are ignored. Absent entries are zero.
pub fn parse_integrals(text: &str) -> Result<IntegralSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (hline, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
    let perr = |line: usize, message: String| Error::Parse { line: line + 1, message };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "M" || fields[2] != "CORE" {
        return Err(perr(hline, "expected header `M <int> CORE <real>`".into()));
    }
    let n_modes: usize = fields[1]
        .parse()
        .map_err(|_| perr(hline, format!("invalid mode count {:?}", fields[1])))?;
    let core: f64 = fields[3]
        .parse()
        .map_err(|_| perr(hline, format!("invalid core energy {:?}", fields[3])))?;
    let mut ints = IntegralSet::new(n_modes, core)?;
    let mut seen = std::collections::HashSet::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(perr(ln, format!("expected 5 fields, found {}", f.len())));
        }
        let value: f64 = f[0].parse().map_err(|_| perr(ln, format!("invalid value {:?}", f[0])))?;
        let mut idx = [0usize; 4];
        for k in 0..4 {
            idx[k] = f[k + 1]
                .parse()
                .map_err(|_| perr(ln, format!("invalid index {:?}", f[k + 1])))?;
            if idx[k] > n_modes {
                return Err(perr(ln, format!("index {} exceeds {} modes", idx[k], n_modes)));
            }
        }
        if !seen.insert(idx) {
            return Err(perr(ln, "duplicate entry".into()));
        }
        match idx {
            [p, q, 0, 0] if p > 0 && q > 0 => ints.set_one_body(p - 1, q - 1, value),
            [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => {
                ints.set_two_body(p - 1, q - 1, r - 1, s - 1, value)
            }
            _ => return Err(perr(ln, "indices must be 1-based".into())),
        }
    }
    ints.validate()?;
    Ok(ints)
}

pub fn load_integrals(path: impl AsRef<Path>) -> Result<IntegralSet> {
    parse_integrals(&std::fs::read_to_string(path)?)
}

/// `sum h_pq a_p^dag a_q + 1/2 sum h_pqrs a_p^dag a_q^dag a_r a_s + core`.
pub fn build_hamiltonian(ints: &IntegralSet) -> Result<FermionOperator> {
    ints.validate()?;
    let m = ints.n_modes;
    let mut h = FermionOperator::identity(m, ints.core_energy)?;
    for p in 0..m {
        for q in 0..m {
            let v = ints.one_body(p, q);
            if v != 0.0 {
                h.add_product(Complex64::new(v, 0.0), &[LadderOp::create(p), LadderOp::annihilate(q)])?;
            }
        }
    }
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let v = ints.two_body(p, q, r, s);
                    if v != 0.0 {
                        h.add_product(
                            Complex64::new(0.5 * v, 0.0),
                            &[
                                LadderOp::create(p),
                                LadderOp::create(q),
                                LadderOp::annihilate(r),
                                LadderOp::annihilate(s),
                            ],
                        )?;
                    }
                }
            }
        }
    }
    Ok(h)
}

/// One- and two-particle reduced density matrices:
/// `d1[i][p] = <a_i^dag a_p>` and `d2[i][j][p][q] = <a_i^dag a_j^dag a_p a_q>`.
#[derive(Clone, Debug, PartialEq)]
pub struct RdmPair {
    n_modes: usize,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

impl RdmPair {
    pub fn new(n_modes: usize, d1: Vec<Complex64>, d2: Vec<Complex64>) -> Result<RdmPair> {
        check_dim(n_modes * n_modes, d1.len())?;
        check_dim(n_modes.pow(4), d2.len())?;
        Ok(RdmPair { n_modes, d1, d2 })
    }

    /// Exact RDMs of a state over `state.n_qubits()` modes.
    pub fn from_state(state: &StateVector) -> Result<RdmPair> {
        let m = state.n_qubits();
        let amps = state.amplitudes();
        let single: Vec<Vec<Complex64>> =
            (0..m).map(|p| apply_product(&[LadderOp::annihilate(p)], amps)).collect();
        // pair[p*m+q] = a_p a_q |psi>
        let pair: Vec<Vec<Complex64>> = (0..m * m)
            .map(|k| apply_product(&[LadderOp::annihilate(k / m), LadderOp::annihilate(k % m)], amps))
            .collect();
        let mut d1 = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for p in 0..m {
                d1[i * m + p] = inner(&single[i], &single[p]);
            }
        }
        let mut d2 = vec![Complex64::new(0.0, 0.0); m.pow(4)];
        for i in 0..m {
            for j in 0..m {
                for p in 0..m {
                    for q in 0..m {
                        // <psi| a_i^dag a_j^dag a_p a_q |psi> = <a_j a_i psi | a_p a_q psi>
                        d2[((i * m + j) * m + p) * m + q] = inner(&pair[j * m + i], &pair[p * m + q]);
                    }
                }
            }
        }
        RdmPair::new(m, d1, d2)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn d1(&self, i: usize, p: usize) -> Complex64 {
        self.d1[i * self.n_modes + p]
    }

    pub fn d2(&self, i: usize, j: usize, p: usize, q: usize) -> Complex64 {
        let m = self.n_modes;
        self.d2[((i * m + j) * m + p) * m + q]
    }

    pub fn to_json(&self) -> RdmJson {
        let m = self.n_modes;
        let pair = |c: Complex64| [c.re, c.im];
        RdmJson {
            n_modes: m,
            d1: (0..m).map(|i| (0..m).map(|p| pair(self.d1(i, p))).collect()).collect(),
            d2: (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            (0..m)
                                .map(|p| (0..m).map(|q| pair(self.d2(i, j, p, q))).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(j: &RdmJson) -> Result<RdmPair> {
        let m = j.n_modes;
        let bad = || Error::InvalidArgument("RDM arrays do not match n_modes".into());
        let c = |v: &[f64; 2]| Complex64::new(v[0], v[1]);
        if j.d1.len() != m || j.d2.len() != m {
            return Err(bad());
        }
        let mut d1 = Vec::with_capacity(m * m);
        for row in &j.d1 {
            if row.len() != m {
                return Err(bad());
            }
            d1.extend(row.iter().map(c));
        }
        let mut d2 = Vec::with_capacity(m.pow(4));
        for a in &j.d2 {
            if a.len() != m {
                return Err(bad());
            }
            for b in a {
                if b.len() != m {
                    return Err(bad());
                }
                for row in b {
                    if row.len() != m {
                        return Err(bad());
                    }
                    d2.extend(row.iter().map(c));
                }
            }
        }
        RdmPair::new(m, d1, d2)
    }
}

/// Serialized RDM pair; every entry is a `[real, imag]` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdmJson {
    pub n_modes: usize,
    pub d1: Vec<Vec<[f64; 2]>>,
    pub d2: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn apply_product(ops: &[LadderOp], amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (b, a) in amps.iter().enumerate() {
        if let Some((b2, sign)) = apply_ops_to_basis(ops, b) {
            out[b2] += a * sign;
        }
    }
    out
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `sum f[i][p] d1[i][p] + sum g[i][j][p][q] d2[i][j][p][q]` for row-major `f`
/// (`M*M`) and `g` (`M^4`). Returns the real part; the imaginary part must be
/// below `1e-10` relative to the magnitude of the sum.
pub fn assemble_observable(rdm: &RdmPair, f: &[f64], g: &[f64]) -> Result<f64> {
    check_dim(rdm.n_modes * rdm.n_modes, f.len())?;
    check_dim(rdm.n_modes.pow(4), g.len())?;
    let total: Complex64 = f.iter().zip(&rdm.d1).map(|(a, d)| d * *a).sum::<Complex64>()
        + g.iter().zip(&rdm.d2).map(|(a, d)| d * *a).sum::<Complex64>();
    if total.im.abs() > 1e-10 * total.norm().max(1.0) {
        return Err(Error::NotHermitian(format!(
            "observable has imaginary expectation {}",
            total.im
        )));
    }
    Ok(total.re)
}
