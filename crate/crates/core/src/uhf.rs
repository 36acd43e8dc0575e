//! Clock-shift algebras on a finite periodic lattice window.
//!
//! Sites of the box are ordered lexicographically (last coordinate fastest) and site 0 is
//! the leftmost Kronecker factor, so the algebra of the window is `M_N^{(x)|Lambda|}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, kron, matrix_from_json, matrix_to_json, max_abs, max_eigenvalue, operator_norm, ComplexMatrix,
    MatrixJson, Superoperator, ONE, ZERO,
};
use crate::structure::{build_inner_structure, combined_structure, EHStructure};

/// Largest window algebra dimension `N^|Lambda|` accepted by default.
pub const DEFAULT_DIM_CAP: usize = 64;

/// Tolerance of the `[r, r*] <= 0` test and of the trivial-action check.
pub const COMMUTATOR_TOL: f64 = 1e-10;
const TRIVIAL_TOL: f64 = 1e-12;

/// `U = diag(1, w, ..., w^{N-1})` and the cyclic shift `V e_j = e_{j+1}`, with `w = e^{2 pi i / N}`.
pub fn clock_shift(n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("clock and shift need N >= 2, got {n}")));
    }
    let mut u = ComplexMatrix::zeros(n, n);
    let mut v = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        u[(j, j)] = root_of_unity(j, n);
        v[((j + 1) % n, j)] = ONE;
    }
    Ok((u, v))
}

/// `e^{2 pi i j / N}` with exact values on the axes.
fn root_of_unity(j: usize, n: usize) -> num_complex::Complex64 {
    let j = j % n;
    if (4 * j).is_multiple_of(n) {
        return match 4 * j / n {
            0 => c64(1.0, 0.0),
            1 => c64(0.0, 1.0),
            2 => c64(-1.0, 0.0),
            _ => c64(0.0, -1.0),
        };
    }
    num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64)
}

/// A periodic box `prod_i Z_{extent_i}` of sites carrying `M_N` each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeWindow {
    n: usize,
    extents: Vec<usize>,
    cap: usize,
}

impl LatticeWindow {
    pub fn new(n: usize, extents: Vec<usize>) -> Result<Self> {
        Self::with_cap(n, extents, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n: usize, extents: Vec<usize>, cap: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("on-site size N must be >= 2, got {n}")));
        }
        if extents.is_empty() || extents.contains(&0) {
            return Err(Error::InvalidArgument("window extents must be positive".into()));
        }
        let sites: usize = extents.iter().product();
        let dim = (0..sites).try_fold(1usize, |acc, _| acc.checked_mul(n).filter(|d| *d <= cap));
        match dim {
            Some(_) => Ok(Self { n, extents, cap }),
            None => Err(Error::WindowTooLarge {
                dim: n.checked_pow(sites as u32).unwrap_or(usize::MAX),
                cap,
            }),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_lat(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn sites(&self) -> usize {
        self.extents.iter().product()
    }

    /// `N^|Lambda|`.
    pub fn dim(&self) -> usize {
        self.n.pow(self.sites() as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0; self.extents.len()];
        let mut rest = site;
        for (i, e) in self.extents.iter().enumerate().rev() {
            c[i] = rest % e;
            rest /= e;
        }
        c
    }

    pub fn site_of(&self, coords: &[i64]) -> usize {
        coords
            .iter()
            .zip(&self.extents)
            .fold(0, |acc, (&x, &e)| acc * e + x.rem_euclid(e as i64) as usize)
    }

    /// `j + k` with periodic wrap.
    pub fn shift_site(&self, site: usize, k: &[i64]) -> usize {
        let c: Vec<i64> = self.coords(site).iter().zip(k).map(|(&x, &s)| x as i64 + s).collect();
        self.site_of(&c)
    }

    fn check_vector(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.d_lat() {
            return Err(Error::dims(format!(
                "lattice vector of length {} in {} dimensions",
                k.len(),
                self.d_lat()
            )));
        }
        Ok(())
    }

    fn digit(&self, index: usize, site: usize) -> usize {
        index / self.n.pow((self.sites() - 1 - site) as u32) % self.n
    }

    fn with_digit(&self, index: usize, site: usize, value: usize) -> usize {
        let p = self.n.pow((self.sites() - 1 - site) as u32);
        index - self.digit(index, site) * p + value * p
    }
}

/// An element of the window algebra with the sites it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    matrix: ComplexMatrix,
    support: BTreeSet<usize>,
}

impl LocalOperator {
    /// Checks that `matrix` acts trivially off `support`, then drops sites where it acts
    /// trivially anyway.
    pub fn new(matrix: ComplexMatrix, support: impl IntoIterator<Item = usize>, w: &LatticeWindow) -> Result<Self> {
        let dim = w.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::dims(format!(
                "operator is {}x{}, window algebra is M_{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let support: BTreeSet<usize> = support.into_iter().collect();
        if let Some(&s) = support.iter().find(|&&s| s >= w.sites()) {
            return Err(Error::SiteOutOfWindow(s));
        }
        for s in 0..w.sites() {
            if !support.contains(&s) && !acts_trivially_on(&matrix, s, w) {
                return Err(Error::InvalidArgument(format!(
                    "operator acts on site {s} outside its declared support"
                )));
            }
        }
        let support = support
            .into_iter()
            .filter(|&s| !acts_trivially_on(&matrix, s, w))
            .collect();
        Ok(Self { matrix, support })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn support(&self) -> &BTreeSet<usize> {
        &self.support
    }
}

/// `x = tr_s(x) (x) 1_s`, with `tr_s` the normalized partial trace over site `s`.
pub fn acts_trivially_on(x: &ComplexMatrix, site: usize, w: &LatticeWindow) -> bool {
    let dim = w.dim();
    let nf = w.n as f64;
    for i in 0..dim {
        for j in 0..dim {
            let (a, b) = (w.digit(i, site), w.digit(j, site));
            let want = if a == b {
                (0..w.n)
                    .map(|c| x[(w.with_digit(i, site, c), w.with_digit(j, site, c))])
                    .sum::<num_complex::Complex64>()
                    / nf
            } else {
                ZERO
            };
            if (x[(i, j)] - want).norm() > TRIVIAL_TOL * (1.0 + x[(i, j)].norm()) {
                return false;
            }
        }
    }
    true
}

/// `1 (x) ... (x) a (x) ... (x) 1` with `a` in the factor of `site`.
pub fn embed(a: &ComplexMatrix, site: usize, w: &LatticeWindow) -> Result<LocalOperator> {
    if a.nrows() != w.n || a.ncols() != w.n {
        return Err(Error::dims(format!(
            "on-site matrix is {}x{}, expected {n}x{n}",
            a.nrows(),
            a.ncols(),
            n = w.n
        )));
    }
    if site >= w.sites() {
        return Err(Error::SiteOutOfWindow(site));
    }
    let id = identity(w.n);
    let mut m = identity(1);
    for s in 0..w.sites() {
        m = kron(&m, if s == site { a } else { &id });
    }
    let support = if max_abs(&(a - &id)) == 0.0 {
        BTreeSet::new()
    } else {
        BTreeSet::from([site])
    };
    Ok(LocalOperator { matrix: m, support })
}

/// The automorphism `tau_k`: the factor at site `j` moves to site `j + k`.
pub fn translate(x: &LocalOperator, k: &[i64], w: &LatticeWindow) -> Result<LocalOperator> {
    w.check_vector(k)?;
    let sites = w.sites();
    let target: Vec<usize> = (0..sites).map(|s| w.shift_site(s, k)).collect();
    let dim = w.dim();
    let perm: Vec<usize> = (0..dim)
        .map(|i| {
            (0..sites).fold(0, |acc, s| {
                acc + w.digit(i, s) * w.n.pow((sites - 1 - target[s]) as u32)
            })
        })
        .collect();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(perm[i], perm[j])] = x.matrix[(i, j)];
        }
    }
    Ok(LocalOperator {
        matrix: m,
        support: x.support.iter().map(|&s| target[s]).collect(),
    })
}

/// `L = sum_{k in Lambda} tau_k L_0 tau_{-k}` with
/// `L_0(x) = sum_l r_l* x r_l - (1/2){sum_l r_l* r_l, x}`.
pub fn local_lindbladian(r_list: &[LocalOperator], w: &LatticeWindow) -> Result<Superoperator> {
    let dim = w.dim();
    let mut total = ComplexMatrix::zeros(dim * dim, dim * dim);
    let id = identity(dim);
    for site in 0..w.sites() {
        let k: Vec<i64> = w.coords(site).iter().map(|&c| c as i64).collect();
        for r in r_list {
            let rk = translate(r, &k, w)?.matrix;
            let rr = rk.adjoint() * &rk;
            total += kron(&rk.transpose(), &rk.adjoint());
            total -= kron(&id, &rr) * c64(0.5, 0.0);
            total -= kron(&rr.transpose(), &id) * c64(0.5, 0.0);
        }
    }
    Ok(Superoperator::from_matrix(dim, total)?.with_hermitian_preserving(true))
}

/// `sum_{j in Lambda} sum_{a,b in Z_N} ||W x W* - x||` with `W = U_j^a V_j^b`.
pub fn matsui_seminorm(x: &LocalOperator, w: &LatticeWindow) -> Result<f64> {
    let (u, v) = clock_shift(w.n)?;
    let mut total = 0.0;
    for site in 0..w.sites() {
        let mut ua = identity(w.n);
        for _ in 0..w.n {
            let mut g = ua.clone();
            for _ in 0..w.n {
                let wj = embed(&g, site, w)?.matrix;
                total += operator_norm(&(&wj * &x.matrix * wj.adjoint() - &x.matrix))?;
                g = &g * &v;
            }
            ua = &ua * &u;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorReport {
    /// Largest eigenvalue of `r r* - r* r`.
    pub max_eigenvalue: f64,
    pub tol: f64,
}

impl CommutatorReport {
    pub fn passed(&self) -> bool {
        self.max_eigenvalue <= self.tol
    }
}

pub fn check_commutator_condition(r: &LocalOperator) -> Result<CommutatorReport> {
    let m = &r.matrix;
    let c = m * m.adjoint() - m.adjoint() * m;
    Ok(CommutatorReport {
        max_eigenvalue: max_eigenvalue(&c)?,
        tol: COMMUTATOR_TOL,
    })
}

/// One `k = 1` structure per `(m, j)` and their concatenation.
#[derive(Debug, Clone)]
pub struct UhfStructures {
    /// `m`-major, then sites in lexicographic order.
    pub terms: Vec<EHStructure>,
    pub combined: EHStructure,
    /// Indices `m` of operators that fail the commutator condition.
    pub warnings: Vec<usize>,
}

/// `H = 0`, `W = 1`, `R = tau_j(r_m)`, so `delta(x) = [x, tau_j(r_m)]`.
pub fn build_uhf_flow_structures(r_list: &[LocalOperator], w: &LatticeWindow) -> Result<UhfStructures> {
    if r_list.is_empty() {
        return Err(Error::InvalidArgument("empty r_list".into()));
    }
    let dim = w.dim();
    let mut warnings = Vec::new();
    let mut terms = Vec::with_capacity(r_list.len() * w.sites());
    for (m, r) in r_list.iter().enumerate() {
        if !check_commutator_condition(r)?.passed() {
            warnings.push(m);
        }
        for site in 0..w.sites() {
            let k: Vec<i64> = w.coords(site).iter().map(|&c| c as i64).collect();
            let rj = translate(r, &k, w)?.matrix;
            terms.push(build_inner_structure(
                ComplexMatrix::zeros(dim, dim),
                identity(dim),
                rj,
            )?);
        }
    }
    let mut combined = terms[0].clone();
    for s in &terms[1..] {
        combined = combined_structure(&combined, s)?;
    }
    Ok(UhfStructures {
        terms,
        combined,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalOperatorJson {
    /// Full window-algebra matrix, row-major `[re, im]` pairs.
    pub matrix: MatrixJson,
    pub support: Vec<usize>,
}

/// Model file: `{N, d_lat, window, r_list}` with optional `dim_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UhfModelJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub d_lat: usize,
    pub window: Vec<usize>,
    pub r_list: Vec<LocalOperatorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cap: Option<usize>,
}

impl UhfModelJson {
    pub fn load(&self) -> Result<(LatticeWindow, Vec<LocalOperator>)> {
        if self.window.len() != self.d_lat {
            return Err(Error::dims(format!(
                "window has {} extents for d_lat = {}",
                self.window.len(),
                self.d_lat
            )));
        }
        let w = LatticeWindow::with_cap(self.n, self.window.clone(), self.dim_cap.unwrap_or(DEFAULT_DIM_CAP))?;
        let r_list = self
            .r_list
            .iter()
            .map(|r| LocalOperator::new(matrix_from_json(&r.matrix, "r")?, r.support.iter().copied(), &w))
            .collect::<Result<_>>()?;
        Ok((w, r_list))
    }

    pub fn from_parts(w: &LatticeWindow, r_list: &[LocalOperator]) -> Self {
        Self {
            n: w.n,
            d_lat: w.d_lat(),
            window: w.extents.clone(),
            r_list: r_list
                .iter()
                .map(|r| LocalOperatorJson {
                    matrix: matrix_to_json(&r.matrix),
                    support: r.support.iter().copied().collect(),
                })
                .collect(),
            dim_cap: (w.cap != DEFAULT_DIM_CAP).then_some(w.cap),
        }
    }
}
