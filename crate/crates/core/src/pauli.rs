//! Pauli strings and weighted Pauli sums.
//!
//! A string on `n` qubits is stored as two bitmasks: bit `q` of `x` is set when
//! the letter on qubit `q` is X or Y, bit `q` of `z` when it is Z or Y. Text form
//! writes qubit `n - 1` first and qubit 0 last, so `"XZ"` is X on qubit 1 and Z
//! on qubit 0, matching the ket convention `|b_{n-1} ... b_0>` used by
//! [`crate::simulator::StateVector`].

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Largest register a [`PauliString`] can address.
pub const MAX_QUBITS: usize = 64;
/// Default qubit limit for dense matrix realization.
pub const DEFAULT_MATRIX_LIMIT: usize = 12;
/// Absolute coefficient magnitude below which a term is dropped by [`PauliSum::simplify`].
pub const ZERO_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// Power of `i` in `{1, i, -1, -i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);

    pub fn from_exponent(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Tensor product of single-qubit Pauli letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<PauliString> {
        check_register(n_qubits)?;
        Ok(PauliString { n_qubits, x: 0, z: 0 })
    }

    /// Builds a string from its `x`/`z` bitmasks.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<PauliString> {
        check_register(n_qubits)?;
        let mask = register_mask(n_qubits);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::InvalidArgument(format!(
                "bitmask addresses qubits beyond a {n_qubits}-qubit register"
            )));
        }
        Ok(PauliString { n_qubits, x, z })
    }

    /// String with `letter` on each listed qubit and identity elsewhere.
    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<PauliString> {
        let mut s = PauliString::identity(n_qubits)?;
        for &(q, p) in sites {
            if q >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "qubit {q} out of range for {n_qubits} qubits"
                )));
            }
            s.set(q, p);
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let xb = (self.x >> qubit) & 1 == 1;
        let zb = (self.z >> qubit) & 1 == 1;
        match (xb, zb) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn set(&mut self, qubit: usize, p: Pauli) {
        let (xb, zb) = p.bits();
        let bit = 1u64 << qubit;
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    /// Action on a computational basis state: `P|b> = phase(b) |b ^ x>`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (usize, Complex64) {
        let b64 = b as u64;
        let k = (self.x & self.z).count_ones() as i64 + 2 * (b64 & self.z).count_ones() as i64;
        ((b64 ^ self.x) as usize, Phase::from_exponent(k).to_complex())
    }
}

fn register_mask(n_qubits: usize) -> u64 {
    if n_qubits == 64 {
        u64::MAX
    } else {
        (1u64 << n_qubits) - 1
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("register must have at least one qubit".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity { requested: n_qubits, limit: MAX_QUBITS });
    }
    Ok(())
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            write!(f, "{}", self.get(q).to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliString> {
        let letters: Vec<char> = s.chars().collect();
        let n = letters.len();
        let mut out = PauliString::identity(n)?;
        for (pos, c) in letters.iter().enumerate() {
            let p = Pauli::from_char(*c).ok_or_else(|| {
                Error::InvalidArgument(format!("invalid Pauli letter {c:?} in {s:?}"))
            })?;
            out.set(n - 1 - pos, p);
        }
        Ok(out)
    }
}

/// Product of two strings: `a * b = phase * product`.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    check_dim(a.n_qubits, b.n_qubits)?;
    let (ax, ay, az) = letter_masks(a);
    let (bx, by, bz) = letter_masks(b);
    // XY = iZ, YZ = iX, ZX = iY and the reverse orders pick up -i.
    let plus = (ax & by) | (ay & bz) | (az & bx);
    let minus = (ay & bx) | (az & by) | (ax & bz);
    let k = plus.count_ones() as i64 - minus.count_ones() as i64;
    let product = PauliString { n_qubits: a.n_qubits, x: a.x ^ b.x, z: a.z ^ b.z };
    Ok((Phase::from_exponent(k), product))
}

fn letter_masks(s: &PauliString) -> (u64, u64, u64) {
    (s.x & !s.z, s.x & s.z, s.z & !s.x)
}

/// True iff the two strings commute as matrices.
pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    check_dim(a.n_qubits, b.n_qubits)?;
    Ok(commutes_unchecked(a, b))
}

#[inline]
pub(crate) fn commutes_unchecked(a: &PauliString, b: &PauliString) -> bool {
    ((a.x & b.z) ^ (a.z & b.x)).count_ones().is_multiple_of(2)
}

/// A coefficient times a Pauli string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: Complex64, string: PauliString) -> PauliTerm {
        PauliTerm { coeff, string }
    }
}

/// Weighted sum of Pauli strings on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<PauliSum> {
        check_register(n_qubits)?;
        Ok(PauliSum { n_qubits, terms: Vec::new() })
    }

    /// `c * I` on `n_qubits` qubits.
    pub fn identity(n_qubits: usize, c: f64) -> Result<PauliSum> {
        let mut s = PauliSum::zero(n_qubits)?;
        s.terms.push(PauliTerm::new(Complex64::new(c, 0.0), PauliString::identity(n_qubits)?));
        Ok(s)
    }

    /// General (possibly non-Hermitian) sum. All strings must share the register size.
    pub fn from_terms(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<PauliSum> {
        check_register(n_qubits)?;
        for t in &terms {
            check_dim(n_qubits, t.string.n_qubits)?;
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
        }
        Ok(PauliSum { n_qubits, terms })
    }

    /// Hermitian sum from real coefficients and text strings, e.g. `(-1.0, "XX")`.
    pub fn from_real_terms(n_qubits: usize, terms: &[(f64, &str)]) -> Result<PauliSum> {
        let mut out = Vec::with_capacity(terms.len());
        for &(c, s) in terms {
            let string: PauliString = s.parse()?;
            check_dim(n_qubits, string.n_qubits)?;
            if !c.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
            out.push(PauliTerm::new(Complex64::new(c, 0.0), string));
        }
        PauliSum::from_terms(n_qubits, out)
    }

    /// Hermitian sum from complex coefficients; rejects any coefficient with a
    /// non-negligible imaginary part.
    pub fn hermitian_from_terms(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<PauliSum> {
        let s = PauliSum::from_terms(n_qubits, terms)?;
        if let Some(t) = s.terms.iter().find(|t| t.coeff.im.abs() > ZERO_TOLERANCE) {
            return Err(Error::NotHermitian(format!(
                "coefficient {} on {} is not real",
                t.coeff, t.string
            )));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, coeff: Complex64, string: PauliString) -> Result<()> {
        check_dim(self.n_qubits, string.n_qubits)?;
        self.terms.push(PauliTerm::new(coeff, string));
        Ok(())
    }

    /// Hermitian iff every coefficient is real (within [`ZERO_TOLERANCE`]) after merging.
    pub fn is_hermitian(&self) -> bool {
        self.simplify().terms.iter().all(|t| t.coeff.im.abs() <= ZERO_TOLERANCE)
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian("sum has complex coefficients".into()))
        }
    }

    /// Anti-Hermitian iff every coefficient is purely imaginary.
    pub fn is_anti_hermitian(&self) -> bool {
        self.simplify().terms.iter().all(|t| t.coeff.re.abs() <= ZERO_TOLERANCE)
    }

    /// Merges equal strings and drops terms with `|coeff| < ZERO_TOLERANCE`.
    /// Surviving strings keep the order of their first appearance.
    pub fn simplify(&self) -> PauliSum {
        let mut index: HashMap<PauliString, usize> = HashMap::with_capacity(self.terms.len());
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match index.get(&t.string) {
                Some(&k) => merged[k].coeff += t.coeff,
                None => {
                    index.insert(t.string, merged.len());
                    merged.push(*t);
                }
            }
        }
        merged.retain(|t| t.coeff.norm() >= ZERO_TOLERANCE);
        PauliSum { n_qubits: self.n_qubits, terms: merged }
    }

    pub fn scale(&self, c: Complex64) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|t| PauliTerm::new(t.coeff * c, t.string)).collect(),
        }
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|t| PauliTerm::new(t.coeff.conj(), t.string)).collect(),
        }
    }

    pub fn try_add(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dim(self.n_qubits, other.n_qubits)?;
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(PauliSum { n_qubits: self.n_qubits, terms }.simplify())
    }

    pub fn try_mul(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dim(self.n_qubits, other.n_qubits)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let (phase, s) = multiply(&a.string, &b.string)?;
                terms.push(PauliTerm::new(a.coeff * b.coeff * phase.to_complex(), s));
            }
        }
        Ok(PauliSum { n_qubits: self.n_qubits, terms }.simplify())
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        let ab = self.try_mul(other)?;
        let ba = other.try_mul(self)?;
        ab.try_add(&-ba)
    }

    /// Sum of identity-string coefficients.
    pub fn identity_coefficient(&self) -> Complex64 {
        self.terms.iter().filter(|t| t.string.is_identity()).map(|t| t.coeff).sum()
    }

    /// Dense `2^n x 2^n` matrix, refusing registers wider than `limit`.
    pub fn to_matrix_with_limit(&self, limit: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > limit {
            return Err(Error::Capacity { requested: self.n_qubits, limit });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for t in &self.terms {
            for col in 0..dim {
                let (row, ph) = t.string.apply_to_basis(col);
                m[(row, col)] += t.coeff * ph;
            }
        }
        Ok(m)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.to_matrix_with_limit(DEFAULT_MATRIX_LIMIT)
    }

    /// `self |psi>` on raw amplitudes (length `2^n`).
    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        check_dim(1usize << self.n_qubits, amps.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for t in &self.terms {
            for (b, a) in amps.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let (b2, ph) = t.string.apply_to_basis(b);
                out[b2] += t.coeff * ph * a;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<HamiltonianJson> {
        let s = self.simplify();
        s.require_hermitian()?;
        Ok(HamiltonianJson {
            n_qubits: s.n_qubits,
            terms: s
                .terms
                .iter()
                .map(|t| TermJson { coeff: t.coeff.re, paulis: t.string.to_string() })
                .collect(),
        })
    }

    pub fn from_json(h: &HamiltonianJson) -> Result<PauliSum> {
        let mut terms = Vec::with_capacity(h.terms.len());
        for (k, t) in h.terms.iter().enumerate() {
            let string: PauliString = t.paulis.parse()?;
            if string.n_qubits != h.n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "term {k}: string {:?} has length {}, expected {}",
                    t.paulis, string.n_qubits, h.n_qubits
                )));
            }
            terms.push(PauliTerm::new(Complex64::new(t.coeff, 0.0), string));
        }
        PauliSum::from_terms(h.n_qubits, terms)
    }

    pub fn from_json_str(s: &str) -> Result<PauliSum> {
        let h: HamiltonianJson = serde_json::from_str(s)?;
        PauliSum::from_json(&h)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json()?)?)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if t.coeff.im == 0.0 {
                write!(f, "{} {}", t.coeff.re, t.string)?;
            } else {
                write!(f, "({}) {}", t.coeff, t.string)?;
            }
        }
        Ok(())
    }
}

impl Neg for PauliSum {
    type Output = PauliSum;
    fn neg(self) -> PauliSum {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    /// Panics on register mismatch; use [`PauliSum::try_add`] to handle it.
    fn add(self, rhs: &PauliSum) -> PauliSum {
        self.try_add(rhs).expect("register size mismatch in PauliSum addition")
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;
    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self.try_add(&-rhs.clone()).expect("register size mismatch in PauliSum subtraction")
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.try_mul(rhs).expect("register size mismatch in PauliSum product")
    }
}

/// On-disk Hamiltonian: `{"n_qubits": n, "terms": [{"coeff": c, "paulis": "XZ"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianJson {
    pub n_qubits: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub coeff: f64,
    pub paulis: String,
}

/// `i` as a complex constant.
pub fn imag_unit() -> Complex64 {
    I
}
