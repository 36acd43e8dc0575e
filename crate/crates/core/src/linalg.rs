//! Dense complex linear algebra shared by every other module.
//!
//! Conventions fixed here and relied upon everywhere else:
//!
//! * inner products are linear in the first argument and conjugate-linear in
//!   the second, `<a, b> = sum_i a_i conj(b_i)`;
//! * vectorization stacks columns, so the map `X -> A X B` has matrix
//!   `B^T (x) A`;
//! * a space `h (x) k` with `dim h = d` is laid out channel-major: block `i`
//!   (rows `i*d .. (i+1)*d`) is the copy of `h` attached to the noise basis
//!   vector `e_i`. Under this layout `x (x) 1_k` is the block-diagonal
//!   [`ampliate`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Default absolute tolerance for norm residuals.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_TOL` count as non-negative.
pub const PSD_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a matrix from entries listed row by row.
pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<ComplexMatrix> {
    if entries.len() != rows * cols {
        return Err(Error::dims(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    Ok(ComplexMatrix::from_row_slice(rows, cols, entries))
}

pub fn to_row_major(a: &ComplexMatrix) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `Tr(a) / n`, the normalized matrix trace.
pub fn normalized_trace(a: &ComplexMatrix) -> Complex64 {
    trace(a) / a.nrows() as f64
}

/// Kronecker product: `(A (x) B)[i*p + k, j*q + l] = A[i,j] B[k,l]` for `B` of shape `p x q`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Block-diagonal `diag(x, ..., x)` with `k` copies; the layout's `x (x) 1_k`.
pub fn ampliate(x: &ComplexMatrix, k: usize) -> ComplexMatrix {
    kron(&identity(k), x)
}

/// The `(i, j)` block of size `bs x bs`.
pub fn block(m: &ComplexMatrix, i: usize, j: usize, bs: usize) -> ComplexMatrix {
    m.view((i * bs, j * bs), (bs, bs)).into_owned()
}

/// Largest entry modulus, the residual measure used by the exact-equality checks.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hs_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm(a: &ComplexMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !is_finite(a) {
        return Err(Error::NonFinite("singular value input"));
    }
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("SVD did not converge"))?;
    Ok(svd.singular_values.iter().copied().collect())
}

pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.into_iter().fold(0.0, f64::max))
}

pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::dims("trace norm of a non-square matrix"));
    }
    Ok(singular_values(a)?.into_iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub operator_norm: f64,
    pub trace_norm: f64,
    pub hs_norm: f64,
}

pub fn norms(a: &ComplexMatrix) -> Result<Norms> {
    if !a.is_square() {
        return Err(Error::dims("norms require a square matrix"));
    }
    let sv = singular_values(a)?;
    Ok(Norms {
        operator_norm: sv.iter().copied().fold(0.0, f64::max),
        trace_norm: sv.iter().sum(),
        hs_norm: hs_norm(a),
    })
}

/// Which matrix norm to measure a difference in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Operator,
    Trace,
    Hs,
}

impl NormKind {
    pub fn measure(self, a: &ComplexMatrix) -> Result<f64> {
        match self {
            NormKind::Operator => operator_norm(a),
            NormKind::Trace => trace_norm(a),
            NormKind::Hs => Ok(hs_norm(a)),
        }
    }
}

/// Eigenvalues (ascending) of the Hermitian part `(a + a*)/2`.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::dims("eigenvalues of a non-square matrix"));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let h = (a + a.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("Hermitian eigensolver did not converge"))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn min_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.first().copied().unwrap_or(0.0))
}

pub fn max_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.last().copied().unwrap_or(0.0))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let h = (a + a.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("Hermitian eigensolver did not converge"))?;
    let v = &eig.eigenvectors;
    let diag = ComplexMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| c64(f(l), 0.0)),
    ));
    Ok(v * diag * v.adjoint())
}

/// Unitary factor of the polar decomposition, `g (g* g)^{-1/2}`.
pub fn polar_unitary(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gram = g.adjoint() * g;
    let lo = min_eigenvalue(&gram)?;
    if lo <= 1e-12 {
        return Err(Error::numeric(format!(
            "polar correction of a (near-)singular matrix, min eigenvalue of G*G = {lo:.3e}"
        )));
    }
    Ok(g * hermitian_function(&gram, |l| 1.0 / l.sqrt())?)
}

/// `max |U*U - I|`, zero for an exact unitary.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.ncols())))
}

// Scaling-and-squaring core: diagonal [13/13] Pade approximant of exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
/// 1-norm below which the degree-13 approximant meets double-precision backward error.
pub const EXPM_THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a fixed degree-13 Pade core.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::dims(format!("expm of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite("expm input"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    let s = if norm > EXPM_THETA13 {
        (norm / EXPM_THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * c64(0.5f64.powi(s), 0.0);

    let id = identity(n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |i: usize| c64(PADE13[i], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::numeric("singular denominator in Pade approximant"))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !is_finite(&r) {
        return Err(Error::numeric("expm overflowed"));
    }
    Ok(r)
}

/// `<f, A>` for `A: h -> h (x) k`, the operator on `h` with `<<f,A>u, v> = <Au, v (x) f>`.
///
/// Under the channel-major layout this is `sum_i conj(f_i) A_i`.
pub fn contract_channel(a: &ComplexMatrix, f: &[Complex64]) -> Result<ComplexMatrix> {
    let k = f.len();
    let d = a.ncols();
    if k == 0 || a.nrows() != d * k {
        return Err(Error::dims(format!(
            "contract_channel: A is {}x{}, f has length {k}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for (i, fi) in f.iter().enumerate() {
        out += a.rows(i * d, d) * fi.conj();
    }
    Ok(out)
}

/// Column-stacking vectorization.
pub fn vec_of(x: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &ComplexVector, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v.as_slice())
}

/// A linear map on `M_d`, held as a `d^2 x d^2` matrix acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: ComplexMatrix,
    hermitian_preserving: bool,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::dims(format!(
                "superoperator on M_{dim} needs a {0}x{0} matrix, got {1}x{2}",
                dim * dim,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            dim,
            matrix,
            hermitian_preserving: false,
        })
    }

    /// Tabulates a linear map by applying it to the matrix units.
    pub fn from_map(dim: usize, map: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n = dim * dim;
        let mut matrix = ComplexMatrix::zeros(n, n);
        let mut unit = ComplexMatrix::zeros(dim, dim);
        for p in 0..n {
            let (i, j) = (p % dim, p / dim);
            unit[(i, j)] = ONE;
            let image = map(&unit);
            matrix.set_column(p, &vec_of(&image));
            unit[(i, j)] = ZERO;
        }
        Self {
            dim,
            matrix,
            hermitian_preserving: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: identity(dim * dim),
            hermitian_preserving: true,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
            hermitian_preserving: true,
        }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let dim = a.nrows();
        Self {
            dim,
            matrix: kron(&b.transpose(), a),
            hermitian_preserving: false,
        }
    }

    /// Marks the map as Hermiticity-preserving. Callers assert this; tests verify it.
    pub fn with_hermitian_preserving(mut self, flag: bool) -> Self {
        self.hermitian_preserving = flag;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn is_hermitian_preserving(&self) -> bool {
        self.hermitian_preserving
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        unvec(&(&self.matrix * vec_of(x)), self.dim)
    }

    /// `self o other` (apply `other` first).
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
            hermitian_preserving: self.hermitian_preserving && other.hermitian_preserving,
        })
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
            hermitian_preserving: self.hermitian_preserving && other.hermitian_preserving,
        })
    }

    pub fn sub(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
            hermitian_preserving: self.hermitian_preserving && other.hermitian_preserving,
        })
    }

    pub fn scale(&self, s: Complex64) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix * s,
            hermitian_preserving: self.hermitian_preserving && s.im == 0.0,
        }
    }

    /// In-place `self += s * other`; the Hermiticity flag is dropped.
    pub fn axpy(&mut self, s: Complex64, other: &Superoperator) -> Result<()> {
        self.check_dim(other)?;
        self.matrix += &other.matrix * s;
        self.hermitian_preserving = false;
        Ok(())
    }

    fn check_dim(&self, other: &Superoperator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dims(format!(
                "superoperators on M_{} and M_{}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// `sum_{ij} E_ij (x) S(E_ij)`; `S` is completely positive iff this is positive semidefinite.
pub fn choi_matrix(s: &Superoperator) -> ComplexMatrix {
    let d = s.dim();
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    let mut unit = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            unit[(i, j)] = ONE;
            let image = s.apply(&unit);
            choi.view_mut((i * d, j * d), (d, d)).copy_from(&image);
            unit[(i, j)] = ZERO;
        }
    }
    choi
}

/// Entries i.i.d. standard complex Gaussian (`E|z|^2 = 1`).
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * s, im * s)
    })
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    ginibre(rng, n, 1).iter().copied().collect()
}

/// Symmetrized Ginibre matrix, `(G + G*)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()) * c64(0.5, 0.0)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phases of `R` divided out).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let qr = ginibre(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// JSON form of a matrix: a list of rows, each entry an `[re, im]` pair.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(a: &ComplexMatrix) -> MatrixJson {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson, what: &'static str) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dims(format!("{what}: ragged rows")));
    }
    let entries: Vec<Complex64> = rows.iter().flatten().map(|p| c64(p[0], p[1])).collect();
    let m = from_row_major(nrows, ncols, &entries)?;
    if !is_finite(&m) {
        return Err(Error::NonFinite(what));
    }
    Ok(m)
}

pub fn vector_to_json(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_json(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| c64(p[0], p[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn pauli_x() -> ComplexMatrix {
        from_row_major(2, 2, &[ZERO, ONE, ONE, ZERO]).unwrap()
    }

    fn pauli_y() -> ComplexMatrix {
        from_row_major(2, 2, &[ZERO, -I, I, ZERO]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        from_row_major(2, 2, &[ONE, ZERO, ZERO, -ONE]).unwrap()
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c64(2.0, 1.0), c64(-3.0, 0.0)]));
        let got = kron(&d, &identity(2));
        let want = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            c64(2.0, 1.0),
            c64(2.0, 1.0),
            c64(-3.0, 0.0),
            c64(-3.0, 0.0),
        ]));
        assert_eq!(got, want);
    }

    #[test]
    fn kron_matches_index_formula() {
        let (a, b) = (pauli_x(), pauli_z());
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 2 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn expm_trivial_cases() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(max_abs(&(expm(&z).unwrap() - identity(3))) < 1e-15);
        let n = from_row_major(2, 2, &[ZERO, ONE, ZERO, ZERO]).unwrap();
        let want = from_row_major(2, 2, &[ONE, ONE, ZERO, ONE]).unwrap();
        assert!(max_abs(&(expm(&n).unwrap() - want)) < 1e-15);
    }

    #[test]
    fn expm_matches_spectral_reconstruction() {
        // i theta sigma_y is i times Hermitian, so exp = V diag(e^{i theta l}) V*.
        for &theta in &[0.3, 1.7, 12.0, 40.0] {
            let a = pauli_y() * c64(0.0, theta);
            let got = expm(&a).unwrap();
            let eig = SymmetricEigen::new(pauli_y());
            let v = &eig.eigenvectors;
            let diag = ComplexMatrix::from_diagonal(&DVector::from_iterator(
                2,
                eig.eigenvalues.iter().map(|&l| (I * theta * l).exp()),
            ));
            let want = v * diag * v.adjoint();
            assert!(max_abs(&(got - want)) < 1e-12, "theta = {theta}");
        }
    }

    #[test]
    fn expm_rejects_bad_input() {
        assert!(matches!(
            expm(&ComplexMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
        let mut a = identity(2);
        a[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(expm(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn expm_of_commuting_sum_factorizes() {
        // simultaneously diagonalizable pairs built on a shared random eigenbasis
        let mut rng = rng();
        for _ in 0..20 {
            let n = 4;
            let v = random_unitary(&mut rng, n);
            let da = ComplexMatrix::from_diagonal(&DVector::from_vec(random_vector(&mut rng, n)));
            let db = ComplexMatrix::from_diagonal(&DVector::from_vec(random_vector(&mut rng, n)));
            let a = &v * da * v.adjoint() * c64(2.0, 0.0);
            let b = &v * db * v.adjoint() * c64(2.0, 0.0);
            let lhs = expm(&(&a + &b)).unwrap();
            let rhs = expm(&a).unwrap() * expm(&b).unwrap();
            assert!(hs_norm(&(&lhs - &rhs)) / hs_norm(&lhs) < 1e-9);
        }
    }

    #[test]
    fn expm_backward_error_large_norm() {
        // exp(A) exp(-A) = I checks consistency for ||A|| up to ~50
        let mut rng = rng();
        let h = random_hermitian(&mut rng, 5);
        let scale = 50.0 / operator_norm(&h).unwrap();
        let a = &h * c64(0.0, scale);
        let prod = expm(&a).unwrap() * expm(&(-&a)).unwrap();
        assert!(max_abs(&(prod - identity(5))) < 1e-10);
    }

    #[test]
    fn norms_known_values() {
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![ONE, c64(-2.0, 0.0)]));
        assert!((trace_norm(&d).unwrap() - 3.0).abs() < 1e-14);
        let mut rng = rng();
        let u = random_unitary(&mut rng, 6);
        assert!((trace_norm(&u).unwrap() - 6.0).abs() < 1e-12);
        assert!((operator_norm(&u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norms_match_eigenvalue_oracle() {
        // singular values are square roots of the eigenvalues of A*A
        let mut rng = rng();
        let a = ginibre(&mut rng, 5, 5);
        let n = norms(&a).unwrap();
        let eig = hermitian_eigenvalues(&(a.adjoint() * &a)).unwrap();
        let sv: Vec<f64> = eig.iter().map(|l| l.max(0.0).sqrt()).collect();
        assert!((n.operator_norm - sv[4]).abs() < 1e-10);
        assert!((n.trace_norm - sv.iter().sum::<f64>()).abs() < 1e-10);
        assert!((n.hs_norm.powi(2) - trace(&(a.adjoint() * &a)).re).abs() < 1e-10);
        assert!(n.trace_norm >= n.operator_norm);
    }

    #[test]
    fn trace_norm_requires_square() {
        assert!(trace_norm(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn contract_channel_selects_blocks() {
        let mut rng = rng();
        let a = ginibre(&mut rng, 6, 2);
        let got = contract_channel(&a, &[ONE, ZERO, ZERO]).unwrap();
        assert_eq!(got, a.rows(0, 2).into_owned());
        let zero = contract_channel(&a, &[ZERO; 3]).unwrap();
        assert_eq!(zero, ComplexMatrix::zeros(2, 2));
        assert!(contract_channel(&a, &[ONE, ZERO]).is_err());
    }

    #[test]
    fn contract_channel_defining_identity() {
        // <<f,A>u, v> = <Au, v (x) f>, with v (x) f channel-major: block i = f_i v
        let mut rng = rng();
        let (d, k) = (3, 2);
        let a = ginibre(&mut rng, d * k, d);
        let f = random_vector(&mut rng, k);
        let fa = contract_channel(&a, &f).unwrap();
        let inner = |x: &ComplexVector, y: &ComplexVector| -> Complex64 {
            x.iter().zip(y.iter()).map(|(p, q)| p * q.conj()).sum()
        };
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let u = ComplexVector::from_vec(random_vector(&mut rng, d));
            let v = ComplexVector::from_vec(random_vector(&mut rng, d));
            let mut vf = ComplexVector::zeros(d * k);
            for i in 0..k {
                vf.rows_mut(i * d, d).copy_from(&(&v * f[i]));
            }
            let lhs = inner(&(&fa * &u), &v);
            let rhs = inner(&(&a * &u), &vf);
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst <= 1e-12, "residual {worst}");
    }

    #[test]
    fn choi_of_identity_and_transpose() {
        let id = Superoperator::identity(2);
        let choi = choi_matrix(&id);
        let eig = hermitian_eigenvalues(&choi).unwrap();
        assert!(eig[0] > -1e-12);
        assert!((eig[3] - 2.0).abs() < 1e-12);
        assert!(eig[..3].iter().all(|l| l.abs() < 1e-12), "rank one");

        let transpose = Superoperator::from_map(2, |x| x.transpose());
        let eig = hermitian_eigenvalues(&choi_matrix(&transpose)).unwrap();
        assert!((eig[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_of_unitary_conjugation_is_rank_one_psd() {
        let mut rng = rng();
        let v = random_unitary(&mut rng, 3);
        let s = Superoperator::sandwich(&v, &v.adjoint());
        let eig = hermitian_eigenvalues(&choi_matrix(&s)).unwrap();
        assert!(eig[0] > -PSD_TOL);
        assert_eq!(eig.iter().filter(|l| l.abs() > 1e-9).count(), 1);
    }

    #[test]
    fn superoperator_matrix_matches_defining_map() {
        let mut rng = rng();
        let (a, b) = (ginibre(&mut rng, 3, 3), ginibre(&mut rng, 3, 3));
        let s = Superoperator::sandwich(&a, &b);
        let tab = Superoperator::from_map(3, |x| &a * x * &b);
        assert!(max_abs(&(s.matrix() - tab.matrix())) < 1e-12);
        let x = ginibre(&mut rng, 3, 3);
        assert!(max_abs(&(s.apply(&x) - &a * &x * &b)) < 1e-12);
    }

    #[test]
    fn hermitian_preserving_flag_is_honest() {
        let mut rng = rng();
        let r = ginibre(&mut rng, 3, 3);
        let s = Superoperator::sandwich(&r.adjoint(), &r).with_hermitian_preserving(true);
        for _ in 0..100 {
            let x = ginibre(&mut rng, 3, 3);
            let lhs = s.apply(&x.adjoint()).adjoint();
            assert!(max_abs(&(lhs - s.apply(&x))) < 1e-10);
        }
    }

    #[test]
    fn polar_unitary_is_unitary() {
        let mut rng = rng();
        let g = identity(4) + ginibre(&mut rng, 4, 4) * c64(0.1, 0.0);
        let u = polar_unitary(&g).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        assert!(polar_unitary(&ComplexMatrix::zeros(2, 2)).is_err());
    }

    fn small_matrix() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..4, 1usize..4).prop_flat_map(|(r, c)| {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), r * c).prop_map(move |v| {
                let e: Vec<Complex64> = v.into_iter().map(|(a, b)| c64(a, b)).collect();
                from_row_major(r, c, &e).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn kron_is_associative(a in small_matrix(), b in small_matrix(), c in small_matrix()) {
            let lhs = kron(&kron(&a, &b), &c);
            let rhs = kron(&a, &kron(&b, &c));
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }

        #[test]
        fn adjoint_is_an_involution(a in small_matrix()) {
            prop_assert_eq!(a.adjoint().adjoint(), a);
        }

        #[test]
        fn row_major_roundtrip(a in small_matrix()) {
            let back = from_row_major(a.nrows(), a.ncols(), &to_row_major(&a)).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn trace_is_cyclic(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ginibre(&mut rng, n, n);
            let b = ginibre(&mut rng, n, n);
            let (ab, ba) = (trace(&(&a * &b)), trace(&(&b * &a)));
            prop_assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
        }

        #[test]
        fn contract_channel_is_linear(seed in any::<u64>()) {
            // linear in A, conjugate-linear in f
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a1, a2) = (ginibre(&mut rng, 6, 3), ginibre(&mut rng, 6, 3));
            let f = random_vector(&mut rng, 2);
            let z = c64(0.7, -1.3);
            let lhs = contract_channel(&(&a1 * z + &a2), &f).unwrap();
            let rhs = contract_channel(&a1, &f).unwrap() * z + contract_channel(&a2, &f).unwrap();
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
            let fz: Vec<Complex64> = f.iter().map(|x| x * z).collect();
            let lhs = contract_channel(&a1, &fz).unwrap();
            let rhs = contract_channel(&a1, &f).unwrap() * z.conj();
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }
}
