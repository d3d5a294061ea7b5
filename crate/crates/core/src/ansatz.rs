//! Cluster-operator ansatz families and Trotterized state preparation.
//!
//! Every generator is an anti-Hermitian Pauli sum `G`, applied as `exp(theta G)`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::fermion::{jordan_wigner, FermionOperator, LadderOp};
use crate::pauli::{commutes_unchecked, Pauli, PauliString, PauliSum, PauliTerm};
use crate::simulator::{hermitian_propagator, StateVector};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Identifies a generator. Labels order lexicographically, which fixes the
/// application order inside a Trotter slice.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorLabel {
    /// `i sigma^{b_1}_{s_1} ... sigma^{b_k}_{s_k}` with ascending sites.
    Spin { sites: Vec<usize>, bases: Vec<Pauli> },
    /// `a_i^dag a_p - a_p^dag a_i`.
    Single { occupied: usize, unoccupied: usize },
    /// `E - E^dag` with `E = a_{i1}^dag a_{p1} a_{i2}^dag a_{p2}`.
    Double { occupied: [usize; 2], unoccupied: [usize; 2] },
    /// `i (a_p^dag a_q + a_q^dag a_p)`, `p <= q`.
    Symmetric { p: usize, q: usize },
    /// `a_p^dag a_q - a_q^dag a_p`, `p < q`.
    Antisymmetric { p: usize, q: usize },
    /// Anti-Hermitian part of a product of first-order generators (by index).
    Product(Vec<usize>),
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorLabel::Spin { sites, bases } => {
                write!(f, "spin")?;
                for (s, b) in sites.iter().zip(bases) {
                    write!(f, " {}{}", b.to_char(), s)?;
                }
                Ok(())
            }
            GeneratorLabel::Single { occupied, unoccupied } => write!(f, "single {occupied}->{unoccupied}"),
            GeneratorLabel::Double { occupied, unoccupied } => write!(
                f,
                "double {},{}->{},{}",
                occupied[0], occupied[1], unoccupied[0], unoccupied[1]
            ),
            GeneratorLabel::Symmetric { p, q } => write!(f, "sym {p},{q}"),
            GeneratorLabel::Antisymmetric { p, q } => write!(f, "asym {p},{q}"),
            GeneratorLabel::Product(idx) => {
                write!(f, "product")?;
                for k in idx {
                    write!(f, " {k}")?;
                }
                Ok(())
            }
        }
    }
}

/// Anti-Hermitian generators sorted by label.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    n_qubits: usize,
    labels: Vec<GeneratorLabel>,
    generators: Vec<PauliSum>,
}

impl GeneratorSet {
    /// Sorts by label and rejects duplicate labels or non-anti-Hermitian generators.
    pub fn new(n_qubits: usize, entries: Vec<(GeneratorLabel, PauliSum)>) -> Result<GeneratorSet> {
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate generator label {}", w[0].0)));
            }
        }
        for (label, g) in &entries {
            check_dim(n_qubits, g.n_qubits())?;
            if !g.is_anti_hermitian() {
                return Err(Error::InvalidArgument(format!("generator {label} is not anti-Hermitian")));
            }
        }
        let (labels, generators) = entries.into_iter().unzip();
        Ok(GeneratorSet { n_qubits, labels, generators })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn labels(&self) -> &[GeneratorLabel] {
        &self.labels
    }

    pub fn generators(&self) -> &[PauliSum] {
        &self.generators
    }
}

fn spin_label_string(n: usize, sites: &[usize], bases: &[Pauli]) -> Result<PauliString> {
    let pairs: Vec<(usize, Pauli)> = sites.iter().copied().zip(bases.iter().copied()).collect();
    PauliString::from_sites(n, &pairs)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All `i sigma^{b_1}_{s_1} ... sigma^{b_j}_{s_j}` for `1 <= j <= order`,
/// ascending sites and bases in `{X, Y, Z}`.
pub fn spin_cluster_generators(n_qubits: usize, order: usize) -> Result<GeneratorSet> {
    if order == 0 || order > n_qubits {
        return Err(Error::InvalidArgument(format!(
            "order {order} must lie in 1..={n_qubits}"
        )));
    }
    let mut entries = Vec::new();
    for k in 1..=order {
        for sites in combinations(n_qubits, k) {
            for code in 0..3usize.pow(k as u32) {
                let bases: Vec<Pauli> = (0..k)
                    .map(|j| [Pauli::X, Pauli::Y, Pauli::Z][code / 3usize.pow((k - 1 - j) as u32) % 3])
                    .collect();
                let s = spin_label_string(n_qubits, &sites, &bases)?;
                let g = PauliSum::from_terms(n_qubits, vec![PauliTerm::new(I, s)])?;
                entries.push((GeneratorLabel::Spin { sites: sites.clone(), bases }, g));
            }
        }
    }
    GeneratorSet::new(n_qubits, entries)
}

fn ladder(ops: &[(usize, bool)]) -> Vec<LadderOp> {
    ops.iter().map(|&(mode, dagger)| LadderOp { mode, dagger }).collect()
}

/// Excitation operator `E` before antisymmetrization, for a fermionic label.
pub fn excitation_operator(n_modes: usize, label: &GeneratorLabel) -> Result<FermionOperator> {
    let ops = match label {
        GeneratorLabel::Single { occupied, unoccupied } => ladder(&[(*occupied, true), (*unoccupied, false)]),
        GeneratorLabel::Double { occupied, unoccupied } => ladder(&[
            (occupied[0], true),
            (unoccupied[0], false),
            (occupied[1], true),
            (unoccupied[1], false),
        ]),
        _ => return Err(Error::InvalidArgument(format!("{label} is not an excitation label"))),
    };
    FermionOperator::product(n_modes, Complex64::new(1.0, 0.0), &ops)
}

/// Reference-specific fermionic cluster generators, Jordan-Wigner mapped on
/// `max index + 1` qubits. Order 2 includes the order-1 set.
pub fn fermionic_ucc_generators(occupied: &[usize], unoccupied: &[usize], order: usize) -> Result<GeneratorSet> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("fermionic cluster order {order} must be 1 or 2")));
    }
    let occ: BTreeSet<usize> = occupied.iter().copied().collect();
    let virt: BTreeSet<usize> = unoccupied.iter().copied().collect();
    if occ.len() != occupied.len() || virt.len() != unoccupied.len() {
        return Err(Error::InvalidArgument("index sets contain repeats".into()));
    }
    if !occ.is_disjoint(&virt) {
        return Err(Error::InvalidArgument("occupied and unoccupied sets overlap".into()));
    }
    let n_modes = occ
        .iter()
        .chain(&virt)
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| Error::InvalidArgument("empty index sets".into()))?;
    let mut entries = Vec::new();
    for &i in &occ {
        for &p in &virt {
            let label = GeneratorLabel::Single { occupied: i, unoccupied: p };
            let e = excitation_operator(n_modes, &label)?;
            entries.push((label, jordan_wigner(&e.try_sub(&e.adjoint())?)?));
        }
    }
    if order == 2 {
        let occ_v: Vec<usize> = occ.iter().copied().collect();
        let virt_v: Vec<usize> = virt.iter().copied().collect();
        for io in combinations(occ_v.len(), 2) {
            for pv in combinations(virt_v.len(), 2) {
                let label = GeneratorLabel::Double {
                    occupied: [occ_v[io[0]], occ_v[io[1]]],
                    unoccupied: [virt_v[pv[0]], virt_v[pv[1]]],
                };
                let e = excitation_operator(n_modes, &label)?;
                entries.push((label, jordan_wigner(&e.try_sub(&e.adjoint())?)?));
            }
        }
    }
    GeneratorSet::new(n_modes, entries)
}

/// Reference-agnostic generators on `n_modes` modes. Order 1 gives the `M^2`
/// symmetric and antisymmetric hopping generators; order `k` adds the
/// anti-Hermitian parts of all `k`-fold products (with repetition), dropping
/// vanishing and duplicate operators.
pub fn suquca_generators(n_modes: usize, order: usize) -> Result<GeneratorSet> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let mut first: Vec<(GeneratorLabel, FermionOperator)> = Vec::new();
    for p in 0..n_modes {
        for q in p..n_modes {
            let hop = FermionOperator::product(n_modes, Complex64::new(1.0, 0.0), &ladder(&[(p, true), (q, false)]))?;
            let sym = hop.try_add(&hop.adjoint())?.scale(I);
            first.push((GeneratorLabel::Symmetric { p, q }, sym));
            if p < q {
                first.push((GeneratorLabel::Antisymmetric { p, q }, hop.try_sub(&hop.adjoint())?));
            }
        }
    }
    first.sort_by(|a, b| a.0.cmp(&b.0));
    let mut entries: Vec<(GeneratorLabel, PauliSum)> = Vec::new();
    for (label, op) in &first {
        entries.push((label.clone(), jordan_wigner(op)?));
    }
    let mut seen: Vec<FermionOperator> = first.iter().map(|(_, op)| op.clone()).collect();
    for k in 2..=order {
        for idx in multisets(first.len(), k) {
            let mut prod = first[idx[0]].1.clone();
            for &j in &idx[1..] {
                prod = prod.try_mul(&first[j].1)?;
            }
            let part = prod.try_sub(&prod.adjoint())?.scale(Complex64::new(0.5, 0.0));
            if part.max_abs_coeff() < 1e-12 || seen.iter().any(|s| s.approx_eq(&part, 1e-12)) {
                continue;
            }
            entries.push((GeneratorLabel::Product(idx), jordan_wigner(&part)?));
            seen.push(part);
        }
    }
    GeneratorSet::new(n_modes, entries)
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Generator set plus the Trotter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzConfig {
    pub generators: GeneratorSet,
    pub trotter_slices: usize,
    /// Independent parameters per slice; each slice applies one dense
    /// exponential per maximal-support block.
    pub relaxed: bool,
}

impl AnsatzConfig {
    pub fn new(generators: GeneratorSet, trotter_slices: usize, relaxed: bool) -> Result<AnsatzConfig> {
        if trotter_slices == 0 {
            return Err(Error::InvalidArgument("at least one Trotter slice is required".into()));
        }
        Ok(AnsatzConfig { generators, trotter_slices, relaxed })
    }

    pub fn n_params(&self) -> usize {
        if self.relaxed {
            self.trotter_slices * self.generators.len()
        } else {
            self.generators.len()
        }
    }
}

/// Starting state of a preparation.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceState {
    Basis { n_qubits: usize, index: usize },
    /// `pairs[q] = (c0, c1)` for qubit `q`.
    Product(Vec<(Complex64, Complex64)>),
}

impl ReferenceState {
    pub fn n_qubits(&self) -> usize {
        match self {
            ReferenceState::Basis { n_qubits, .. } => *n_qubits,
            ReferenceState::Product(p) => p.len(),
        }
    }

    /// Basis state with the listed modes occupied.
    pub fn occupied(n_qubits: usize, modes: &[usize]) -> Result<ReferenceState> {
        let mut index = 0usize;
        for &m in modes {
            if m >= n_qubits {
                return Err(Error::InvalidArgument(format!("mode {m} out of range")));
            }
            index |= 1 << m;
        }
        Ok(ReferenceState::Basis { n_qubits, index })
    }

    pub fn to_state(&self) -> Result<StateVector> {
        match self {
            ReferenceState::Basis { n_qubits, index } => StateVector::basis(*n_qubits, *index),
            ReferenceState::Product(pairs) => StateVector::product(pairs),
        }
    }
}

fn support_qubits(mask: u64) -> Vec<usize> {
    (0..64).filter(|q| mask >> q & 1 == 1).collect()
}

/// Restricts strings supported inside `qubits` to a local register.
fn localize(op: &PauliSum, qubits: &[usize]) -> Result<PauliSum> {
    let k = qubits.len();
    let mut terms = Vec::with_capacity(op.len());
    for t in op.terms() {
        let (mut x, mut z) = (0u64, 0u64);
        for (j, &q) in qubits.iter().enumerate() {
            x |= (t.string.x_mask() >> q & 1) << j;
            z |= (t.string.z_mask() >> q & 1) << j;
        }
        terms.push(PauliTerm::new(t.coeff, PauliString::from_masks(k, x, z)?));
    }
    PauliSum::from_terms(k, terms)
}

/// `exp(A)` for an anti-Hermitian local sum.
fn local_exponential(a: &PauliSum) -> Result<DMatrix<Complex64>> {
    // exp(A) = exp(-i H) with H = iA Hermitian.
    let h = a.scale(I).to_matrix()?;
    Ok(hermitian_propagator(&h, 1.0))
}

fn support_of(op: &PauliSum) -> u64 {
    op.terms().iter().fold(0, |m, t| m | t.string.support())
}

fn terms_commute(op: &PauliSum) -> bool {
    let t = op.terms();
    (0..t.len()).all(|i| (i + 1..t.len()).all(|j| commutes_unchecked(&t[i].string, &t[j].string)))
}

/// `state <- exp(theta G) state`.
pub fn apply_generator(state: &mut StateVector, g: &PauliSum, theta: f64) -> Result<()> {
    check_dim(state.n_qubits(), g.n_qubits())?;
    if theta == 0.0 || g.is_empty() {
        return Ok(());
    }
    if terms_commute(g) {
        // Each term is i c P with real c: exp(theta i c P).
        for t in g.terms() {
            state.apply_pauli_exponential(&t.string, theta * t.coeff.im)?;
        }
        return Ok(());
    }
    let qubits = support_qubits(support_of(g));
    let u = local_exponential(&localize(&g.scale(Complex64::new(theta, 0.0)), &qubits)?)?;
    state.apply_local(&qubits, &u)
}

/// Maximal generator supports, in order of first appearance; each generator is
/// assigned to the first block containing its support.
fn relaxed_blocks(set: &GeneratorSet) -> Vec<(u64, Vec<usize>)> {
    let supports: Vec<u64> = set.generators.iter().map(support_of).collect();
    let mut maximal: Vec<u64> = Vec::new();
    for &s in &supports {
        let dominated = supports.iter().any(|&o| o != s && o & s == s);
        if !dominated && !maximal.contains(&s) {
            maximal.push(s);
        }
    }
    let mut blocks: Vec<(u64, Vec<usize>)> = Vec::with_capacity(maximal.len());
    let mut assigned = vec![false; supports.len()];
    for m in maximal {
        let mut members = Vec::new();
        for (g, &s) in supports.iter().enumerate() {
            if !assigned[g] && s & m == s {
                assigned[g] = true;
                members.push(g);
            }
        }
        blocks.push((m, members));
    }
    blocks
}

/// Applies the ansatz to the reference.
///
/// Shared mode applies `prod_slices prod_g exp(theta_g / N * G_g)` in label
/// order. Relaxed mode takes parameters slice-major (`theta[t * len + g]`) and
/// applies, per slice and block, `exp(sum_{g in block} theta_{g,t} G_g)`.
pub fn prepare_state(reference: &ReferenceState, cfg: &AnsatzConfig, params: &[f64]) -> Result<StateVector> {
    check_dim(cfg.generators.n_qubits, reference.n_qubits())?;
    check_dim(cfg.n_params(), params.len())?;
    let mut state = reference.to_state()?;
    let set = &cfg.generators;
    let slices = cfg.trotter_slices;
    if !cfg.relaxed {
        let scale = 1.0 / slices as f64;
        for _ in 0..slices {
            for (g, theta) in set.generators.iter().zip(params) {
                apply_generator(&mut state, g, theta * scale)?;
            }
        }
        return Ok(state);
    }
    let blocks = relaxed_blocks(set);
    for t in 0..slices {
        let slice = &params[t * set.len()..(t + 1) * set.len()];
        for (mask, members) in &blocks {
            if members.iter().all(|&g| slice[g] == 0.0) {
                continue;
            }
            let mut sum = PauliSum::zero(set.n_qubits)?;
            for &g in members {
                sum = sum.try_add(&set.generators[g].scale(Complex64::new(slice[g], 0.0)))?;
            }
            if sum.is_empty() {
                continue;
            }
            if terms_commute(&sum) {
                apply_generator(&mut state, &sum, 1.0)?;
            } else {
                let qubits = support_qubits(*mask);
                let u = local_exponential(&localize(&sum, &qubits)?)?;
                state.apply_local(&qubits, &u)?;
            }
        }
    }
    Ok(state)
}

/// Per-qubit rotations `U_q` with `U_q |0> = (c0, c1)`, so that applying them to
/// `|0...0>` rebuilds the reference. The canonical reference is `|0...0>`.
pub fn canonicalize_reference(reference: &ReferenceState) -> Result<(Vec<Matrix2<Complex64>>, ReferenceState)> {
    let n = reference.n_qubits();
    let pairs: Vec<(Complex64, Complex64)> = match reference {
        ReferenceState::Basis { n_qubits, index } => {
            if *index >= 1usize << n_qubits {
                return Err(Error::InvalidArgument("basis index out of range".into()));
            }
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            (0..*n_qubits).map(|q| if index >> q & 1 == 1 { (zero, one) } else { (one, zero) }).collect()
        }
        ReferenceState::Product(p) => p.clone(),
    };
    let mut rotations = Vec::with_capacity(n);
    for (q, (c0, c1)) in pairs.iter().enumerate() {
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("qubit {q} pair has norm {norm}")));
        }
        rotations.push(Matrix2::new(*c0, -c1.conj(), *c1, c0.conj()));
    }
    Ok((rotations, ReferenceState::Basis { n_qubits: n, index: 0 }))
}

/// Applies per-qubit rotations to a state.
pub fn apply_rotations(state: &mut StateVector, rotations: &[Matrix2<Complex64>]) -> Result<()> {
    check_dim(state.n_qubits(), rotations.len())?;
    for (q, r) in rotations.iter().enumerate() {
        let m = DMatrix::from_iterator(2, 2, r.iter().copied());
        state.apply_local(&[q], &m)?;
    }
    Ok(())
}
