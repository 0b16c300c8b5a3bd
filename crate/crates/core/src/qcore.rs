//! Exact complex linear algebra for one- and two-qubit states.
//!
//! Everything here works on dense row-major matrices of dimension 2 or 4.
//! States are validated density matrices (Hermitian, unit trace, positive
//! semidefinite up to a small eigenvalue floor); channels are validated
//! Kraus sets. All operations are pure functions of their inputs.

use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance used for matrix equality and Hermiticity checks.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Eigenvalue floor for the positive-semidefinite check. Floating
/// arithmetic on mixtures produces tiny negative eigenvalues.
pub const PSD_FLOOR: f64 = -1e-10;
/// Tolerance for Kraus completeness, `sum E_i^dag E_i = I`.
pub const KRAUS_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QcoreError {
    #[error("unsupported matrix dimension {0}; only 2 and 4 are handled")]
    UnsupportedDimension(usize),
    #[error("entry count {got} does not match dimension {dim}")]
    BadEntryCount { dim: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian within {0}")]
    NotHermitian(f64),
    #[error("trace {0} is not 1 within tolerance")]
    TraceNotOne(f64),
    #[error("matrix has eigenvalue {0} below the positivity floor")]
    NotPositive(f64),
    #[error("Kraus set is incomplete: max deviation from identity {0}")]
    IncompleteKraus(f64),
    #[error("Kraus set is empty")]
    EmptyKrausSet,
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("observable is not Hermitian")]
    NonHermitianObservable,
}

/// Dense square complex matrix of dimension 2 or 4, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self, QcoreError> {
        if dim != 2 && dim != 4 {
            return Err(QcoreError::UnsupportedDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(QcoreError::BadEntryCount {
                dim,
                got: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Result<Self, QcoreError> {
        Self::new(dim, vec![Complex64::new(0.0, 0.0); dim * dim])
    }

    pub fn identity(dim: usize) -> Result<Self, QcoreError> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        Ok(m)
    }

    /// 2x2 matrix from real entries, row-major.
    pub fn from_real_2x2(entries: [f64; 4]) -> Self {
        let entries = entries
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect::<Vec<_>>();
        Self { dim: 2, entries }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_2x2([0.0, 1.0, 1.0, 0.0])
    }

    pub fn pauli_y() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        Self {
            dim: 2,
            entries: vec![z, -i, i, z],
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_2x2([1.0, 0.0, 0.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, QcoreError> {
        if self.dim != other.dim {
            return Err(QcoreError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, QcoreError> {
        if self.dim != other.dim {
            return Err(QcoreError::DimensionMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.entries[k * n + c];
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        Self {
            dim: n,
            entries: out,
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entry-wise equality within an explicit absolute tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && self.max_abs_diff(other) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending, via cyclic Jacobi
    /// rotations. Caller must pass a Hermitian matrix.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = self.entries.clone();
        let idx = |r: usize, c: usize| r * n + c;
        for _sweep in 0..64 {
            let off: f64 = (0..n)
                .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
                .map(|(p, q)| a[idx(p, q)].norm_sqr())
                .sum();
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[idx(p, q)];
                    let mag = apq.norm();
                    if mag < 1e-300 {
                        continue;
                    }
                    let u = apq / mag;
                    let app = a[idx(p, p)].re;
                    let aqq = a[idx(q, q)].re;
                    let theta = 0.5 * (2.0 * mag).atan2(app - aqq);
                    let (s, c) = theta.sin_cos();
                    // A <- R^dag A R with R = [[c, -s u], [s conj(u), c]]
                    for k in 0..n {
                        let akp = a[idx(k, p)];
                        let akq = a[idx(k, q)];
                        a[idx(k, p)] = c * akp + s * u.conj() * akq;
                        a[idx(k, q)] = -s * u * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[idx(p, k)];
                        let aqk = a[idx(q, k)];
                        a[idx(p, k)] = c * apk + s * u * aqk;
                        a[idx(q, k)] = -s * u.conj() * apk + c * aqk;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a[idx(i, i)].re).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
        eigs
    }
}

/// Kronecker product. The result dimension must still be 2 or 4, so the
/// only accepted input shape is 2 (x) 2.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, QcoreError> {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n)?;
    for ra in 0..da {
        for ca in 0..da {
            let f = a.get(ra, ca);
            for rb in 0..db {
                for cb in 0..db {
                    out.set(ra * db + rb, ca * db + cb, f * b.get(rb, cb));
                }
            }
        }
    }
    Ok(out)
}

/// The four Bell states in the fixed basis ordering |00>, |01>, |10>, |11>:
/// phi_pm = (|00> +- |11>)/sqrt(2), psi_pm = (|01> +- |10>)/sqrt(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn state_vector(self) -> [Complex64; 4] {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            BellLabel::PhiPlus => [h, z, z, h],
            BellLabel::PhiMinus => [h, z, z, -h],
            BellLabel::PsiPlus => [z, h, h, z],
            BellLabel::PsiMinus => [z, h, -h, z],
        }
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite
/// up to [`PSD_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self, QcoreError> {
        if !mat.is_hermitian(DEFAULT_TOL) {
            return Err(QcoreError::NotHermitian(DEFAULT_TOL));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > DEFAULT_TOL || tr.im.abs() > DEFAULT_TOL {
            return Err(QcoreError::TraceNotOne(tr.re));
        }
        let min_eig = mat
            .hermitian_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_FLOOR {
            return Err(QcoreError::NotPositive(min_eig));
        }
        Ok(Self { mat })
    }

    /// Outer product |v><v| of a normalized state vector (length 2 or 4).
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self, QcoreError> {
        let dim = amplitudes.len();
        let mut mat = ComplexMatrix::zeros(dim)?;
        for r in 0..dim {
            for c in 0..dim {
                mat.set(r, c, amplitudes[r] * amplitudes[c].conj());
            }
        }
        Self::new(mat)
    }

    pub fn bell(label: BellLabel) -> Self {
        Self::from_pure(&label.state_vector()).expect("Bell states are valid")
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, QcoreError> {
        let id = ComplexMatrix::identity(dim)?;
        Self::new(id.scale(Complex64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.hermitian_eigenvalues()
    }
}

/// Validated Kraus set: operators of a common dimension satisfying the
/// completeness relation within [`KRAUS_TOL`].
#[derive(Debug, Clone)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self, QcoreError> {
        let dim = operators.first().ok_or(QcoreError::EmptyKrausSet)?.dim;
        let mut acc = ComplexMatrix::zeros(dim)?;
        for op in &operators {
            if op.dim != dim {
                return Err(QcoreError::DimensionMismatch(dim, op.dim));
            }
            acc = acc.add(&op.dagger().matmul(op)?)?;
        }
        let dev = acc.max_abs_diff(&ComplexMatrix::identity(dim)?);
        if dev > KRAUS_TOL {
            return Err(QcoreError::IncompleteKraus(dev));
        }
        Ok(Self { operators })
    }

    /// The trivial (noiseless) channel.
    pub fn identity(dim: usize) -> Result<Self, QcoreError> {
        Self::new(vec![ComplexMatrix::identity(dim)?])
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim
    }
}

/// Which qubit of a two-qubit state a single-qubit channel acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// Applies a single-qubit Kraus set to one side of a two-qubit state:
/// `Second` applies I (x) E_i, `First` applies E_i (x) I.
pub fn apply_kraus_side(
    rho: &DensityMatrix,
    kraus: &KrausSet,
    side: Side,
) -> Result<DensityMatrix, QcoreError> {
    if rho.dim() != 4 || kraus.dim() != 2 {
        return Err(QcoreError::DimensionMismatch(rho.dim(), kraus.dim()));
    }
    let id2 = ComplexMatrix::identity(2)?;
    let mut acc = ComplexMatrix::zeros(4)?;
    for op in kraus.operators() {
        let lifted = match side {
            Side::First => tensor(op, &id2)?,
            Side::Second => tensor(&id2, op)?,
        };
        let term = lifted.matmul(rho.matrix())?.matmul(&lifted.dagger())?;
        acc = acc.add(&term)?;
    }
    DensityMatrix::new(acc)
}

/// Convex mixture with the maximally mixed state:
/// `eta * rho + (1 - eta) * I/dim`.
pub fn mix_white_noise(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix, QcoreError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(QcoreError::ProbabilityOutOfRange(eta));
    }
    let dim = rho.dim();
    let mixed = ComplexMatrix::identity(dim)?.scale(Complex64::new((1.0 - eta) / dim as f64, 0.0));
    let scaled = rho.matrix().scale(Complex64::new(eta, 0.0));
    DensityMatrix::new(scaled.add(&mixed)?)
}

/// Conjugation `U rho U^dag` by a unitary of matching dimension.
pub fn apply_unitary(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix, QcoreError> {
    if rho.dim() != u.dim() {
        return Err(QcoreError::DimensionMismatch(rho.dim(), u.dim()));
    }
    DensityMatrix::new(u.matmul(rho.matrix())?.matmul(&u.dagger())?)
}

/// Expectation value `Tr(rho * obs)` of a Hermitian observable.
pub fn expectation(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<f64, QcoreError> {
    if rho.dim() != obs.dim() {
        return Err(QcoreError::DimensionMismatch(rho.dim(), obs.dim()));
    }
    if !obs.is_hermitian(DEFAULT_TOL) {
        return Err(QcoreError::NonHermitianObservable);
    }
    let n = rho.dim();
    let mut tr = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            tr += rho.matrix().get(r, c) * obs.get(c, r);
        }
    }
    debug_assert!(tr.im.abs() < 1e-10, "expectation has imaginary residue");
    Ok(tr.re)
}

/// Probabilities of the four Bell-basis measurement outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellProbabilities {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
}

impl BellProbabilities {
    pub fn get(&self, label: BellLabel) -> f64 {
        match label {
            BellLabel::PhiPlus => self.phi_plus,
            BellLabel::PhiMinus => self.phi_minus,
            BellLabel::PsiPlus => self.psi_plus,
            BellLabel::PsiMinus => self.psi_minus,
        }
    }

    pub fn sum(&self) -> f64 {
        self.phi_plus + self.phi_minus + self.psi_plus + self.psi_minus
    }
}

/// Bell-basis projection probabilities `<bell| rho |bell>` of a two-qubit
/// state. The four projectors sum to the identity, so the probabilities
/// sum to 1.
pub fn bell_probabilities(rho: &DensityMatrix) -> BellProbabilities {
    assert_eq!(rho.dim(), 4, "Bell projection needs a two-qubit state");
    let prob = |label: BellLabel| -> f64 {
        let v = label.state_vector();
        let mut amp = Complex64::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                amp += v[r].conj() * rho.matrix().get(r, c) * v[c];
            }
        }
        debug_assert!(amp.im.abs() < 1e-10);
        amp.re.max(0.0)
    };
    BellProbabilities {
        phi_plus: prob(BellLabel::PhiPlus),
        phi_minus: prob(BellLabel::PhiMinus),
        psi_plus: prob(BellLabel::PsiPlus),
        psi_minus: prob(BellLabel::PsiMinus),
    }
}
