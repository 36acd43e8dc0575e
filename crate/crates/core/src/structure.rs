//! Evans–Hudson structure maps built from inner generating data `(H, W, R)`.
//!
//! With `pi(x) = W*(x (x) 1_k)W` the maps are
//!
//! ```text
//! L(x)        = i[H, x] + R* pi(x) R - (R*R x + x R*R)/2
//! delta(x)    = pi(x) R - R x
//! delta^+(x)  = delta(x*)*
//! sigma(x)    = pi(x) - x (x) 1_k
//! ```
//!
//! and are arranged as `theta[mu][nu]` with `mu, nu` in `0..=k`: `theta[0][0] = L`,
//! `theta[i][0] = delta_i`, `theta[0][j] = delta^+_j` and `theta[i][j]` the `(i, j)` block
//! of `sigma` (channel indices are 1-based in this array).

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, block, c64, ginibre, hs_norm, identity, matrix_from_json, matrix_to_json, max_abs, normalized_trace,
    random_hermitian, random_unitary, unitarity_defect, ComplexMatrix, MatrixJson, Superoperator, I, ONE, ZERO,
};

/// Tolerance on `H = H*` and `W*W = I` accepted by [`build_inner_structure`].
pub const INPUT_TOL: f64 = 1e-8;
/// Residual threshold of the verifiers.
pub const VERIFY_TOL: f64 = 1e-10;

/// A vector `c` in the noise space `C^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    components: Vec<Complex64>,
}

impl NoiseVector {
    pub fn new(components: Vec<Complex64>) -> Result<Self> {
        if components.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("noise vector"));
        }
        Ok(Self { components })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            components: vec![ZERO; k],
        }
    }

    /// Basis vector `e_i` (0-based).
    pub fn basis(k: usize, i: usize) -> Self {
        let mut v = Self::zeros(k);
        v.components[i] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Which trace the dissipativity check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    /// `Tr / d`.
    #[default]
    Normalized,
    Unnormalized,
}

impl TraceKind {
    pub fn eval(self, a: &ComplexMatrix) -> f64 {
        match self {
            TraceKind::Normalized => normalized_trace(a).re,
            TraceKind::Unnormalized => linalg::trace(a).re,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EHStructure {
    d: usize,
    k: usize,
    h: ComplexMatrix,
    w: ComplexMatrix,
    r: ComplexMatrix,
    /// `W_{lj}`, the `(l, j)` block of `W`, at index `l * k + j`.
    w_blocks: Vec<ComplexMatrix>,
    /// `K_l`, block `l` of `W R`.
    k_blocks: Vec<ComplexMatrix>,
    r_blocks: Vec<ComplexMatrix>,
    rr: ComplexMatrix,
    w_is_identity: bool,
    /// Test-only additive defects `theta[mu][nu](x) += eps x`.
    injected: Vec<(usize, usize, f64)>,
}

/// Checks shapes, `H = H*` and `W*W = I`, then caches the blocks every map is built from.
pub fn build_inner_structure(h: ComplexMatrix, w: ComplexMatrix, r: ComplexMatrix) -> Result<EHStructure> {
    let d = h.nrows();
    if d == 0 || !h.is_square() {
        return Err(Error::dims(format!("H is {}x{}", h.nrows(), h.ncols())));
    }
    if r.ncols() != d || r.nrows() == 0 || !r.nrows().is_multiple_of(d) {
        return Err(Error::dims(format!(
            "R is {}x{}, expected (d*k)x{d}",
            r.nrows(),
            r.ncols()
        )));
    }
    let k = r.nrows() / d;
    if w.nrows() != d * k || w.ncols() != d * k {
        return Err(Error::dims(format!(
            "W is {}x{}, expected {n}x{n}",
            w.nrows(),
            w.ncols(),
            n = d * k
        )));
    }
    for (m, name) in [(&h, "H"), (&w, "W"), (&r, "R")] {
        if !linalg::is_finite(m) {
            return Err(Error::NonFinite(name));
        }
    }
    let sa = max_abs(&(&h - h.adjoint()));
    if sa > INPUT_TOL {
        return Err(Error::NotSelfAdjoint(sa));
    }
    let ud = unitarity_defect(&w);
    if ud > INPUT_TOL {
        return Err(Error::NotUnitary(ud));
    }
    Ok(EHStructure::assemble(h, w, r, d, k))
}

impl EHStructure {
    fn assemble(h: ComplexMatrix, w: ComplexMatrix, r: ComplexMatrix, d: usize, k: usize) -> Self {
        let mut w_blocks = Vec::with_capacity(k * k);
        for l in 0..k {
            for j in 0..k {
                w_blocks.push(block(&w, l, j, d));
            }
        }
        let wr = &w * &r;
        let k_blocks = (0..k).map(|l| wr.rows(l * d, d).into_owned()).collect();
        let r_blocks = (0..k).map(|l| r.rows(l * d, d).into_owned()).collect();
        let rr = r.adjoint() * &r;
        let w_is_identity = w == identity(d * k);
        Self {
            d,
            k,
            h,
            w,
            r,
            w_blocks,
            k_blocks,
            r_blocks,
            rr,
            w_is_identity,
            injected: Vec::new(),
        }
    }

    /// The structure with `H = 0`, `R = 0`, `W = I`.
    pub fn trivial(d: usize, k: usize) -> Self {
        Self::assemble(
            ComplexMatrix::zeros(d, d),
            identity(d * k),
            ComplexMatrix::zeros(d * k, d),
            d,
            k,
        )
    }

    /// Adds `eps * x` to `theta[mu][nu]`, producing a structure that should fail verification.
    pub fn with_injected_perturbation(mut self, mu: usize, nu: usize, eps: f64) -> Result<Self> {
        if mu > self.k || nu > self.k {
            return Err(Error::InvalidArgument(format!(
                "index ({mu},{nu}) out of range for k = {}",
                self.k
            )));
        }
        self.injected.push((mu, nu, eps));
        Ok(self)
    }

    pub fn is_perturbed(&self) -> bool {
        !self.injected.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn w(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn r(&self) -> &ComplexMatrix {
        &self.r
    }

    /// `R_i` (0-based channel).
    pub fn r_block(&self, i: usize) -> &ComplexMatrix {
        &self.r_blocks[i]
    }

    fn wb(&self, l: usize, j: usize) -> &ComplexMatrix {
        &self.w_blocks[l * self.k + j]
    }

    /// `pi(x) = W*(x (x) 1_k)W`.
    pub fn pi(&self, x: &ComplexMatrix) -> ComplexMatrix {
        if self.w_is_identity {
            return linalg::ampliate(x, self.k);
        }
        self.w.adjoint() * linalg::ampliate(x, self.k) * &self.w
    }

    pub fn lindblad(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = (&self.h * x - x * &self.h) * I;
        for kl in &self.k_blocks {
            out += kl.adjoint() * x * kl;
        }
        out -= (&self.rr * x + x * &self.rr) * c64(0.5, 0.0);
        self.add_injected(0, 0, x, out)
    }

    /// `delta_i(x)` for 0-based channel `i`.
    pub fn delta(&self, i: usize, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = -(&self.r_blocks[i] * x);
        if self.w_is_identity {
            out += x * &self.r_blocks[i];
        } else {
            for l in 0..self.k {
                out += self.wb(l, i).adjoint() * x * &self.k_blocks[l];
            }
        }
        self.add_injected(i + 1, 0, x, out)
    }

    /// `delta^+_j(x) = delta_j(x*)*` for 0-based channel `j`.
    pub fn delta_dagger(&self, j: usize, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = -(x * self.r_blocks[j].adjoint());
        if self.w_is_identity {
            out += self.r_blocks[j].adjoint() * x;
        } else {
            for l in 0..self.k {
                out += self.k_blocks[l].adjoint() * x * self.wb(l, j);
            }
        }
        self.add_injected(0, j + 1, x, out)
    }

    /// `sigma_ij(x)` for 0-based channels.
    pub fn sigma(&self, i: usize, j: usize, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d, self.d);
        if !self.w_is_identity {
            for l in 0..self.k {
                out += self.wb(l, i).adjoint() * x * self.wb(l, j);
            }
            if i == j {
                out -= x;
            }
        }
        self.add_injected(i + 1, j + 1, x, out)
    }

    /// `theta[mu][nu](x)`, indices in `0..=k`.
    pub fn theta(&self, mu: usize, nu: usize, x: &ComplexMatrix) -> ComplexMatrix {
        match (mu, nu) {
            (0, 0) => self.lindblad(x),
            (i, 0) => self.delta(i - 1, x),
            (0, j) => self.delta_dagger(j - 1, x),
            (i, j) => self.sigma(i - 1, j - 1, x),
        }
    }

    fn add_injected(&self, mu: usize, nu: usize, x: &ComplexMatrix, mut out: ComplexMatrix) -> ComplexMatrix {
        for &(m, n, eps) in &self.injected {
            if (m, n) == (mu, nu) {
                out += x * c64(eps, 0.0);
            }
        }
        out
    }

    /// `theta[mu][nu]` as a `d^2 x d^2` superoperator.
    pub fn theta_superop(&self, mu: usize, nu: usize) -> Superoperator {
        let d = self.d;
        let id = identity(d);
        let sw = |a: &ComplexMatrix, b: &ComplexMatrix| Superoperator::sandwich(a, b).into_matrix();
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        match (mu, nu) {
            (0, 0) => {
                m += (sw(&self.h, &id) - sw(&id, &self.h)) * I;
                for kl in &self.k_blocks {
                    m += sw(&kl.adjoint(), kl);
                }
                m -= (sw(&self.rr, &id) + sw(&id, &self.rr)) * c64(0.5, 0.0);
            }
            (i, 0) => {
                let i = i - 1;
                m -= sw(&self.r_blocks[i], &id);
                for l in 0..self.k {
                    m += sw(&self.wb(l, i).adjoint(), &self.k_blocks[l]);
                }
            }
            (0, j) => {
                let j = j - 1;
                m -= sw(&id, &self.r_blocks[j].adjoint());
                for l in 0..self.k {
                    m += sw(&self.k_blocks[l].adjoint(), self.wb(l, j));
                }
            }
            (i, j) => {
                let (i, j) = (i - 1, j - 1);
                for l in 0..self.k {
                    m += sw(&self.wb(l, i).adjoint(), self.wb(l, j));
                }
                if i == j {
                    m -= identity(d * d);
                }
            }
        }
        for &(a, b, eps) in &self.injected {
            if (a, b) == (mu, nu) {
                m += identity(d * d) * c64(eps, 0.0);
            }
        }
        let hp = mu == nu && mu == 0;
        Superoperator::from_matrix(d, m)
            .expect("shape fixed by construction")
            .with_hermitian_preserving(hp)
    }

    /// The vacuum generator `L` as a superoperator.
    pub fn generator(&self) -> Superoperator {
        self.theta_superop(0, 0)
    }

    /// Writes the generating data; derived maps are never serialized.
    pub fn to_json(&self) -> StructureJson {
        StructureJson {
            d: self.d,
            k: self.k,
            h: matrix_to_json(&self.h),
            w: matrix_to_json(&self.w),
            r: matrix_to_json(&self.r),
        }
    }

    pub fn from_json(doc: &StructureJson) -> Result<Self> {
        let h = matrix_from_json(&doc.h, "H")?;
        let w = matrix_from_json(&doc.w, "W")?;
        let r = matrix_from_json(&doc.r, "R")?;
        let s = build_inner_structure(h, w, r)?;
        if s.d != doc.d || s.k != doc.k {
            return Err(Error::dims(format!(
                "declared d={}, k={} but matrices give d={}, k={}",
                doc.d, doc.k, s.d, s.k
            )));
        }
        Ok(s)
    }
}

/// On-disk structure document `{d, k, H, W, R}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureJson {
    pub d: usize,
    pub k: usize,
    #[serde(rename = "H")]
    pub h: MatrixJson,
    #[serde(rename = "W")]
    pub w: MatrixJson,
    #[serde(rename = "R")]
    pub r: MatrixJson,
}

/// Random generating data: symmetrized Ginibre `H`, Haar `W`, Ginibre `R` scaled by `r_scale`.
pub fn random_inner_structure<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize, r_scale: f64) -> EHStructure {
    let h = random_hermitian(rng, d);
    let w = random_unitary(rng, d * k);
    let r = ginibre(rng, d * k, d) * c64(r_scale, 0.0);
    build_inner_structure(h, w, r).expect("random data is valid by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    /// Worst `||theta(xy) - theta(x)y - x theta(y) - sum_i theta(x) theta(y)||_HS`.
    pub relation_residual: f64,
    /// Worst `||theta[mu][nu](x)* - theta[nu][mu](x*)||_HS`.
    pub adjoint_residual: f64,
    /// Index pair attaining the larger of the two residuals.
    pub worst: (usize, usize),
    pub trials: usize,
    pub tol: f64,
}

impl RelationReport {
    pub fn max_residual(&self) -> f64 {
        self.relation_residual.max(self.adjoint_residual)
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= self.tol
    }

    /// The failing index pair, if any.
    pub fn failing(&self) -> Option<(usize, usize)> {
        (!self.passed()).then_some(self.worst)
    }
}

/// Checks the structure relation and the adjoint symmetry on `trials` random pairs.
pub fn verify_structure_relations<R: Rng + ?Sized>(s: &EHStructure, trials: usize, rng: &mut R) -> RelationReport {
    let n = s.k + 1;
    let d = s.d;
    let mut rep = RelationReport {
        relation_residual: 0.0,
        adjoint_residual: 0.0,
        worst: (0, 0),
        trials,
        tol: VERIFY_TOL,
    };
    let mut worst_val = 0.0;
    for _ in 0..trials.max(1) {
        let x = ginibre(rng, d, d);
        let y = ginibre(rng, d, d);
        let xy = &x * &y;
        let xs = x.adjoint();
        let tx: Vec<ComplexMatrix> = (0..n * n).map(|p| s.theta(p / n, p % n, &x)).collect();
        let ty: Vec<ComplexMatrix> = (0..n * n).map(|p| s.theta(p / n, p % n, &y)).collect();
        let txs: Vec<ComplexMatrix> = (0..n * n).map(|p| s.theta(p / n, p % n, &xs)).collect();
        for mu in 0..n {
            for nu in 0..n {
                let mut res = s.theta(mu, nu, &xy) - &tx[mu * n + nu] * &y - &x * &ty[mu * n + nu];
                for i in 1..n {
                    res -= &tx[mu * n + i] * &ty[i * n + nu];
                }
                let rel = hs_norm(&res);
                let adj = hs_norm(&(tx[mu * n + nu].adjoint() - &txs[nu * n + mu]));
                rep.relation_residual = rep.relation_residual.max(rel);
                rep.adjoint_residual = rep.adjoint_residual.max(adj);
                if rel.max(adj) > worst_val {
                    worst_val = rel.max(adj);
                    rep.worst = (mu, nu);
                }
            }
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleReport {
    /// Worst residual of the cocycle identity itself.
    pub max_residual: f64,
    /// Worst `||L(x)* - L(x*)||_HS`. The commutator part of `L` is a derivation for any `H`,
    /// so the identity alone cannot see a non-self-adjoint Hamiltonian; this term does.
    pub adjoint_residual: f64,
    pub trials: usize,
    pub tol: f64,
}

impl CocycleReport {
    pub fn passed(&self) -> bool {
        self.max_residual.max(self.adjoint_residual) <= self.tol
    }
}

/// Checks `sum_i delta_i(x)* delta_i(y) = L(x*y) - L(x*)y - x*L(y)` on random pairs,
/// together with `L(x*) = L(x)*`.
pub fn verify_cocycle<R: Rng + ?Sized>(s: &EHStructure, trials: usize, rng: &mut R) -> CocycleReport {
    let d = s.d;
    let mut worst: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let x = ginibre(rng, d, d);
        let y = ginibre(rng, d, d);
        worst = worst.max(cocycle_residual(s, &x, &y));
        adj = adj.max(hs_norm(&(s.lindblad(&x).adjoint() - s.lindblad(&x.adjoint()))));
    }
    CocycleReport {
        max_residual: worst,
        adjoint_residual: adj,
        trials,
        tol: VERIFY_TOL,
    }
}

pub fn cocycle_residual(s: &EHStructure, x: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    let xs = x.adjoint();
    let mut lhs = ComplexMatrix::zeros(s.d, s.d);
    for i in 0..s.k {
        lhs += s.delta(i, x).adjoint() * s.delta(i, y);
    }
    let rhs = s.lindblad(&(&xs * y)) - s.lindblad(&xs) * y - &xs * s.lindblad(y);
    hs_norm(&(lhs - rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    /// Largest `tau(L(x*x))` seen.
    pub max_value: f64,
    pub trials: usize,
    pub tol: f64,
    pub trace: TraceKind,
}

impl DissipativityReport {
    pub fn passed(&self) -> bool {
        self.max_value <= self.tol
    }
}

/// Largest `tau(L(x*x))` over random `x`; passes iff it is at most `1e-10`.
pub fn verify_weak_dissipativity<R: Rng + ?Sized>(
    s: &EHStructure,
    trials: usize,
    trace: TraceKind,
    rng: &mut R,
) -> DissipativityReport {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials.max(1) {
        let x = ginibre(rng, s.d, s.d);
        worst = worst.max(trace.eval(&s.lindblad(&(x.adjoint() * &x))));
    }
    DissipativityReport {
        max_value: worst,
        trials,
        tol: VERIFY_TOL,
        trace,
    }
}

/// Structure of the composed flow: channels of `s1` first, then those of `s2`.
///
/// `H = H1 + H2`, `R = (R1; R2)`, `W = diag(W1, W2)`, so `L = L1 + L2`, `delta` stacks and
/// `sigma` is block diagonal. Concatenation is associative on the nose, so no channel
/// permutation is needed when regrouping three factors.
pub fn combined_structure(s1: &EHStructure, s2: &EHStructure) -> Result<EHStructure> {
    if s1.d != s2.d {
        return Err(Error::dims(format!(
            "cannot combine structures on M_{} and M_{}",
            s1.d, s2.d
        )));
    }
    let d = s1.d;
    let (k1, k2) = (s1.k, s2.k);
    let h = &s1.h + &s2.h;
    let mut r = ComplexMatrix::zeros(d * (k1 + k2), d);
    r.rows_mut(0, d * k1).copy_from(&s1.r);
    r.rows_mut(d * k1, d * k2).copy_from(&s2.r);
    let mut w = ComplexMatrix::zeros(d * (k1 + k2), d * (k1 + k2));
    w.view_mut((0, 0), (d * k1, d * k1)).copy_from(&s1.w);
    w.view_mut((d * k1, d * k1), (d * k2, d * k2)).copy_from(&s2.w);
    let mut s = EHStructure::assemble(h, w, r, d, k1 + k2);
    for &(mu, nu, eps) in &s1.injected {
        s.injected.push((mu, nu, eps));
    }
    for &(mu, nu, eps) in &s2.injected {
        let shift = |m: usize| if m == 0 { 0 } else { m + k1 };
        s.injected.push((shift(mu), shift(nu), eps));
    }
    Ok(s)
}

/// Generator of the `(c, d)`-perturbed semigroup:
/// `L + sum_i conj(c_i) delta_i + sum_j delta^+_j d_j + sum_ij conj(c_i) sigma_ij d_j + sum_i conj(c_i) d_i id`.
pub fn perturbed_generator(s: &EHStructure, c: &NoiseVector, d: &NoiseVector) -> Result<Superoperator> {
    if c.len() != s.k || d.len() != s.k {
        return Err(Error::dims(format!(
            "noise vectors of length {} and {} for k = {}",
            c.len(),
            d.len(),
            s.k
        )));
    }
    let (c, dv) = (c.components(), d.components());
    let mut g = s.generator();
    for i in 0..s.k {
        if c[i] != ZERO {
            g.axpy(c[i].conj(), &s.theta_superop(i + 1, 0))?;
        }
        if dv[i] != ZERO {
            g.axpy(dv[i], &s.theta_superop(0, i + 1))?;
        }
    }
    for i in 0..s.k {
        for j in 0..s.k {
            let coef = c[i].conj() * dv[j];
            if coef != ZERO && !s.w_is_identity {
                g.axpy(coef, &s.theta_superop(i + 1, j + 1))?;
            }
        }
    }
    let cd: Complex64 = c.iter().zip(dv).map(|(a, b)| a.conj() * b).sum();
    g.axpy(cd, &Superoperator::identity(s.d))?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_row_major;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn nilpotent() -> ComplexMatrix {
        from_row_major(2, 2, &[ZERO, ONE, ZERO, ZERO]).unwrap()
    }

    fn simple(r: ComplexMatrix) -> EHStructure {
        let d = r.nrows();
        build_inner_structure(ComplexMatrix::zeros(d, d), identity(d), r).unwrap()
    }

    #[test]
    fn rejects_bad_generating_data() {
        let mut h = identity(2);
        h[(0, 1)] = ONE;
        let err = build_inner_structure(h, identity(2), identity(2)).unwrap_err();
        assert!(matches!(err, Error::NotSelfAdjoint(_)));
        let w = identity(2) * c64(2.0, 0.0);
        let err = build_inner_structure(identity(2), w, identity(2)).unwrap_err();
        assert!(matches!(err, Error::NotUnitary(_)));
        let err = build_inner_structure(identity(2), identity(2), ComplexMatrix::zeros(3, 2));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn derivation_is_commutator_for_trivial_w() {
        let mut g = rng(1);
        let r = ginibre(&mut g, 3, 3);
        let s = simple(r.clone());
        let x = ginibre(&mut g, 3, 3);
        assert!(max_abs(&(s.delta(0, &x) - (&x * &r - &r * &x))) < 1e-12);
    }

    #[test]
    fn only_homomorphism_part_survives_without_h_and_r() {
        let mut g = rng(2);
        let w = random_unitary(&mut g, 4);
        let s = build_inner_structure(ComplexMatrix::zeros(2, 2), w.clone(), ComplexMatrix::zeros(4, 2)).unwrap();
        let x = ginibre(&mut g, 2, 2);
        assert!(max_abs(&s.lindblad(&x)) < 1e-14);
        assert!(max_abs(&s.delta(0, &x)) < 1e-14);
        assert!(max_abs(&s.delta(1, &x)) < 1e-14);
        let xk = linalg::ampliate(&x, 2);
        let sigma = w.adjoint() * &xk * &w - &xk;
        for i in 0..2 {
            for j in 0..2 {
                assert!(max_abs(&(s.sigma(i, j, &x) - block(&sigma, i, j, 2))) < 1e-12);
            }
        }
    }

    #[test]
    fn nilpotent_example_entrywise() {
        // hand-expanded L and delta for r = E_12, x = [[a, b], [c, e]]:
        // r*xr = [[0,0],[0,a]], r*r = E_22, delta(x) = xr - rx = [[-c, a - e], [0, c]]
        let s = simple(nilpotent());
        let (a, b, cc, e) = (c64(1.0, 2.0), c64(-0.5, 0.3), c64(0.7, -1.1), c64(2.0, 0.0));
        let x = from_row_major(2, 2, &[a, b, cc, e]).unwrap();
        let half = c64(0.5, 0.0);
        let want_l = from_row_major(2, 2, &[ZERO, -half * b, -half * cc, a - e]).unwrap();
        let want_d = from_row_major(2, 2, &[-cc, a - e, ZERO, cc]).unwrap();
        assert!(max_abs(&(s.lindblad(&x) - want_l)) < 1e-15);
        assert!(max_abs(&(s.delta(0, &x) - want_d)) < 1e-15);
    }

    #[test]
    fn random_structures_pass_all_relations() {
        let mut g = rng(3);
        for (d, k) in [(1, 1), (2, 1), (3, 2), (4, 3), (6, 2), (8, 3)] {
            let s = random_inner_structure(&mut g, d, k, 1.0);
            let rep = verify_structure_relations(&s, 20, &mut g);
            assert!(rep.passed(), "d={d} k={k}: {rep:?}");
            let co = verify_cocycle(&s, 20, &mut g);
            assert!(co.passed(), "d={d} k={k}: {co:?}");
            assert!(max_abs(&s.lindblad(&identity(d))) < 1e-12);
        }
    }

    #[test]
    fn zero_structure_residual_is_zero() {
        let s = EHStructure::trivial(3, 2);
        let rep = verify_structure_relations(&s, 5, &mut rng(4));
        assert_eq!(rep.max_residual(), 0.0);
    }

    #[test]
    fn injected_sigma_defect_is_flagged() {
        let mut g = rng(5);
        let s = random_inner_structure(&mut g, 3, 2, 1.0)
            .with_injected_perturbation(1, 1, 1e-3)
            .unwrap();
        let rep = verify_structure_relations(&s, 10, &mut g);
        assert!(rep.relation_residual > 1e-4);
        assert!(!rep.passed());
        assert!(rep.failing().is_some());
    }

    #[test]
    fn cocycle_sides_vanish_at_identity() {
        let mut g = rng(6);
        let s = random_inner_structure(&mut g, 3, 2, 1.0);
        let y = ginibre(&mut g, 3, 3);
        assert!(cocycle_residual(&s, &identity(3), &y) < 1e-12);
        assert!(cocycle_residual(&s, &y, &identity(3)) < 1e-12);
        for i in 0..2 {
            assert!(max_abs(&s.delta(i, &identity(3))) < 1e-12);
        }
    }

    #[test]
    fn cocycle_fails_for_non_self_adjoint_h() {
        // bypasses the constructor check to model a bad Hamiltonian
        let mut g = rng(7);
        let h = ginibre(&mut g, 3, 3);
        let s = EHStructure::assemble(h, identity(3), ginibre(&mut g, 3, 3), 3, 1);
        let rep = verify_cocycle(&s, 5, &mut g);
        assert!(rep.max_residual < 1e-10, "the identity itself is blind to H");
        assert!(rep.adjoint_residual > 1e-3);
        assert!(!rep.passed());
    }

    #[test]
    fn dissipativity_examples() {
        let mut g = rng(8);
        // diagonal r is normal
        let r = from_row_major(2, 2, &[c64(1.0, 1.0), ZERO, ZERO, c64(-2.0, 0.5)]).unwrap();
        let rep = verify_weak_dissipativity(&simple(r), 50, TraceKind::Normalized, &mut g);
        assert!(rep.max_value.abs() < 1e-12);
        let clock = from_row_major(2, 2, &[ONE, ZERO, ZERO, -ONE]).unwrap();
        assert!(verify_weak_dissipativity(&simple(clock), 50, TraceKind::Normalized, &mut g).passed());
        // [r, r*] = diag(1, -1) for the nilpotent r
        let comm = nilpotent() * nilpotent().adjoint() - nilpotent().adjoint() * nilpotent();
        let eig = linalg::hermitian_eigenvalues(&comm).unwrap();
        assert!((eig[0] + 1.0).abs() < 1e-14 && (eig[1] - 1.0).abs() < 1e-14);
        let rep = verify_weak_dissipativity(&simple(nilpotent()), 50, TraceKind::Normalized, &mut g);
        assert!(rep.max_value > 1e-3 && !rep.passed());
    }

    #[test]
    fn dissipation_equals_commutator_trace_for_trivial_w() {
        let mut g = rng(9);
        let r = ginibre(&mut g, 3, 3);
        let s = simple(r.clone());
        let comm = &r * r.adjoint() - r.adjoint() * &r;
        for _ in 0..10 {
            let x = ginibre(&mut g, 3, 3);
            let xx = x.adjoint() * &x;
            let lhs = normalized_trace(&s.lindblad(&xx)).re;
            let rhs = normalized_trace(&(&xx * &comm)).re;
            assert!((lhs - rhs).abs() < 1e-11);
        }
    }

    #[test]
    fn combining_with_trivial_keeps_first() {
        let mut g = rng(10);
        let s1 = random_inner_structure(&mut g, 3, 2, 1.0);
        let c = combined_structure(&s1, &EHStructure::trivial(3, 1)).unwrap();
        assert_eq!(c.k(), 3);
        assert!(max_abs(&(c.generator().matrix() - s1.generator().matrix())) < 1e-12);
        let x = ginibre(&mut g, 3, 3);
        assert!(max_abs(&c.delta(2, &x)) < 1e-14);
        assert!(combined_structure(&s1, &EHStructure::trivial(2, 1)).is_err());
    }

    #[test]
    fn combined_generator_is_sum_and_relations_hold() {
        let mut g = rng(11);
        let s1 = random_inner_structure(&mut g, 3, 2, 1.0);
        let s2 = random_inner_structure(&mut g, 3, 1, 1.0);
        let c = combined_structure(&s1, &s2).unwrap();
        let sum = s1.generator().add(&s2.generator()).unwrap();
        assert!(max_abs(&(c.generator().matrix() - sum.matrix())) < 1e-12);
        assert!(verify_structure_relations(&c, 10, &mut g).passed());
        let x = ginibre(&mut g, 3, 3);
        assert!(max_abs(&(c.delta(2, &x) - s2.delta(0, &x))) < 1e-12);
        assert!(max_abs(&c.sigma(0, 2, &x)) < 1e-12);
    }

    #[test]
    fn perturbed_generator_examples() {
        let mut g = rng(12);
        let s = random_inner_structure(&mut g, 3, 2, 1.0);
        let z = NoiseVector::zeros(2);
        let pg = perturbed_generator(&s, &z, &z).unwrap();
        assert_eq!(pg.matrix(), s.generator().matrix());

        let c = NoiseVector::new(vec![c64(0.3, -0.2), c64(1.1, 0.4)]).unwrap();
        let d = NoiseVector::new(vec![c64(-0.7, 0.5), c64(0.2, 0.9)]).unwrap();
        let pg = perturbed_generator(&s, &c, &d).unwrap();
        let cd: Complex64 = (0..2).map(|i| c.components()[i].conj() * d.components()[i]).sum();
        assert!(max_abs(&(pg.apply(&identity(3)) - identity(3) * cd)) < 1e-12);
        assert!(perturbed_generator(&s, &NoiseVector::zeros(1), &d).is_err());
    }

    #[test]
    fn perturbed_generator_scalar_case_entrywise() {
        let mut g = rng(13);
        let r = ginibre(&mut g, 2, 2);
        let s = simple(r.clone());
        let (cs, ds) = (c64(0.4, 0.6), c64(-1.2, 0.1));
        let pg = perturbed_generator(
            &s,
            &NoiseVector::new(vec![cs]).unwrap(),
            &NoiseVector::new(vec![ds]).unwrap(),
        )
        .unwrap();
        let x = ginibre(&mut g, 2, 2);
        let rs = r.adjoint();
        let want =
            s.lindblad(&x) + (&x * &r - &r * &x) * cs.conj() + (&rs * &x - &x * &rs) * ds + &x * (cs.conj() * ds);
        assert!(max_abs(&(pg.apply(&x) - want)) < 1e-12);
    }

    #[test]
    fn superoperators_match_direct_evaluation() {
        let mut g = rng(14);
        let s = random_inner_structure(&mut g, 3, 2, 1.0);
        let x = ginibre(&mut g, 3, 3);
        for mu in 0..3 {
            for nu in 0..3 {
                let diff = s.theta_superop(mu, nu).apply(&x) - s.theta(mu, nu, &x);
                assert!(max_abs(&diff) < 1e-12, "({mu},{nu})");
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut g = rng(15);
        let s = random_inner_structure(&mut g, 2, 2, 1.0);
        let text = serde_json::to_string(&s.to_json()).unwrap();
        let back = EHStructure::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.h(), s.h());
        assert_eq!(back.w(), s.w());
        assert_eq!(back.r(), s.r());
        let mut doc = s.to_json();
        doc.k = 3;
        assert!(EHStructure::from_json(&doc).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inner_structures_always_verify(seed in any::<u64>(), d in 1usize..=8, k in 1usize..=3) {
            let mut g = rng(seed);
            let s = random_inner_structure(&mut g, d, k, 1.0);
            prop_assert!(verify_structure_relations(&s, 4, &mut g).passed());
            prop_assert!(verify_cocycle(&s, 4, &mut g).passed());
        }

        #[test]
        fn combination_is_associative(seed in any::<u64>()) {
            let mut g = rng(seed);
            let s1 = random_inner_structure(&mut g, 2, 1, 1.0);
            let s2 = random_inner_structure(&mut g, 2, 2, 1.0);
            let s3 = random_inner_structure(&mut g, 2, 1, 1.0);
            let left = combined_structure(&combined_structure(&s1, &s2).unwrap(), &s3).unwrap();
            let right = combined_structure(&s1, &combined_structure(&s2, &s3).unwrap()).unwrap();
            for mu in 0..5 {
                for nu in 0..5 {
                    let diff = left.theta_superop(mu, nu).into_matrix() - right.theta_superop(mu, nu).into_matrix();
                    prop_assert!(max_abs(&diff) <= 1e-12);
                }
            }
        }

        #[test]
        fn perturbed_generator_expands_over_basis(seed in any::<u64>()) {
            let mut g = rng(seed);
            let k = 2;
            let s = random_inner_structure(&mut g, 2, k, 1.0);
            let c = linalg::random_vector(&mut g, k);
            let d = linalg::random_vector(&mut g, k);
            let pg = |c: &NoiseVector, d: &NoiseVector| perturbed_generator(&s, c, d).unwrap().into_matrix();
            let l = s.generator().into_matrix();
            let z = NoiseVector::zeros(k);
            // sesquilinear-affine: G(c,d) = L + sum_ij conj(c_i) d_j (G(e_i,e_j) - G(e_i,0) - G(0,e_j) + L)
            //                              + sum_i conj(c_i)(G(e_i,0) - L) + sum_j d_j (G(0,e_j) - L)
            let mut want = l.clone();
            for i in 0..k {
                let ei = NoiseVector::basis(k, i);
                let gi0 = pg(&ei, &z);
                want += (&gi0 - &l) * c[i].conj();
                let g0i = pg(&z, &ei);
                want += (&g0i - &l) * d[i];
                for j in 0..k {
                    let ej = NoiseVector::basis(k, j);
                    let g0j = pg(&z, &ej);
                    let gij = pg(&ei, &ej);
                    want += (gij - &gi0 - g0j + &l) * (c[i].conj() * d[j]);
                }
            }
            let got = pg(&NoiseVector::new(c).unwrap(), &NoiseVector::new(d).unwrap());
            prop_assert!(max_abs(&(got - want)) <= 1e-12);
        }

        #[test]
        fn delta_dagger_is_conjugated_delta(seed in any::<u64>()) {
            let mut g = rng(seed);
            let s = random_inner_structure(&mut g, 3, 2, 1.0);
            let x = ginibre(&mut g, 3, 3);
            for j in 0..2 {
                let lhs = s.delta_dagger(j, &x);
                let rhs = s.delta(j, &x.adjoint()).adjoint();
                prop_assert!(max_abs(&(lhs - rhs)) <= 1e-12);
            }
        }

        #[test]
        fn pi_is_a_star_homomorphism(seed in any::<u64>()) {
            let mut g = rng(seed);
            let s = random_inner_structure(&mut g, 3, 2, 1.0);
            let x = ginibre(&mut g, 3, 3);
            let y = ginibre(&mut g, 3, 3);
            prop_assert!(max_abs(&(s.pi(&(&x * &y)) - s.pi(&x) * s.pi(&y))) <= 1e-10);
            prop_assert!(max_abs(&(s.pi(&x.adjoint()) - s.pi(&x).adjoint())) <= 1e-10);
        }
    }
}
