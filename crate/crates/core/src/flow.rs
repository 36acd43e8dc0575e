//! Repeated-interaction simulation of inner flows `j_t(x) = U_t*(x (x) 1)U_t`.
//!
//! Time `[0, T]` is cut into `N` slots of width `h`. Each slot carries a copy of
//! `C^{1+k}`, and the exponential vector `e(f)` is replaced by the product of slot vectors
//! `xi_j = (1, sqrt(h) f_j)`. Matrix elements are computed in the Heisenberg picture by
//! contracting one slot at a time, last slot first, so memory stays `O(d^2 (1+k)^2)`.
//!
//! Every scheme is described by slot maps `J[mu][nu]` on `M_d`. A slot acts on an algebra
//! element as `X -> sum_{mu nu} J[mu][nu](X) (x) |e_mu><e_nu|`, so sandwiching with the
//! slot vectors gives `Phi(X) = sum conj(xg_mu) xf_nu J[mu][nu](X)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block, c64, identity, kron, polar_unitary, unitarity_defect, vector_from_json, vector_to_json, ComplexMatrix, ONE,
    ZERO,
};
use crate::structure::EHStructure;

/// Default number of sub-steps per dyadic slot in flow-level Trotter products.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// A piecewise-constant `C^k`-valued function on `[0, T)` with `N` equal cells.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    k: usize,
    t_end: f64,
    values: Vec<Vec<Complex64>>,
}

impl StepFunction {
    pub fn new(k: usize, t_end: f64, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("a step function needs at least one cell".into()));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon {t_end} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| v.len() != k) {
            return Err(Error::dims(format!("value of length {} for k = {k}", v.len())));
        }
        if values.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("step function values"));
        }
        Ok(Self { k, t_end, values })
    }

    pub fn zeros(k: usize, t_end: f64, steps: usize) -> Result<Self> {
        Self::new(k, t_end, vec![vec![ZERO; k]; steps.max(1)])
    }

    pub fn constant(t_end: f64, steps: usize, c: &[Complex64]) -> Result<Self> {
        Self::new(c.len(), t_end, vec![c.to_vec(); steps.max(1)])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    /// Value on fine cell `j` of a grid with `fine` cells; `fine` must be a multiple of `steps`.
    fn value_on(&self, j: usize, fine: usize) -> &[Complex64] {
        &self.values[j * self.values.len() / fine]
    }

    fn check_grid(&self, k: usize, t_end: f64, fine: usize) -> Result<()> {
        if self.k != k {
            return Err(Error::GridMismatch(format!("{} channels, expected {k}", self.k)));
        }
        if (self.t_end - t_end).abs() > 1e-12 * t_end.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "horizon {} differs from {t_end}",
                self.t_end
            )));
        }
        if !fine.is_multiple_of(self.steps()) {
            return Err(Error::GridMismatch(format!(
                "{} cells do not divide the {fine}-step simulation grid",
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> StepFunctionJson {
        StepFunctionJson {
            k: self.k,
            t_end: self.t_end,
            steps: self.steps(),
            values: self.values.iter().map(|v| vector_to_json(v)).collect(),
        }
    }

    pub fn from_json(doc: &StepFunctionJson) -> Result<Self> {
        if doc.steps != doc.values.len() {
            return Err(Error::dims(format!(
                "declared {} steps but {} values",
                doc.steps,
                doc.values.len()
            )));
        }
        Self::new(
            doc.k,
            doc.t_end,
            doc.values.iter().map(|v| vector_from_json(v)).collect(),
        )
    }
}

/// JSON form: grid metadata plus one `[re, im]` vector per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFunctionJson {
    pub k: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub steps: usize,
    pub values: Vec<Vec<[f64; 2]>>,
}

/// How one slot of the discrete chain is built from the structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScheme {
    /// Block Euler step made exactly unitary by polar correction.
    #[default]
    Polar,
    /// The same block step without correction; unitary only to `O(h^{3/2})`.
    Raw,
    /// Euler step of the structure equation: `J[0][0] = X + hL(X)`, `J[i][0] = sqrt(h) delta_i`,
    /// `J[0][j] = sqrt(h) delta^+_j`, `J[i][j] = sigma_ij + delta_ij X`. Not a homomorphism at
    /// finite `h`.
    QsdeEuler,
}

/// `G_h = [[I - h(iH + R*R/2), -sqrt(h) R*], [sqrt(h) WR, W(I - (h/2) RR*)]]` on `h (+) (h (x) k)`.
pub fn raw_step_matrix(s: &EHStructure, h: f64) -> Result<ComplexMatrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
    }
    let (d, k) = (s.d(), s.k());
    let sh = c64(h.sqrt(), 0.0);
    let r = s.r();
    let rs = r.adjoint();
    let mut g = ComplexMatrix::zeros(d * (1 + k), d * (1 + k));
    let a = identity(d) - (s.h() * Complex64::i() + &rs * r * c64(0.5, 0.0)) * c64(h, 0.0);
    g.view_mut((0, 0), (d, d)).copy_from(&a);
    g.view_mut((0, d), (d, d * k)).copy_from(&(&rs * -sh));
    g.view_mut((d, 0), (d * k, d)).copy_from(&(s.w() * r * sh));
    let dd = s.w() * (identity(d * k) - r * &rs * c64(0.5 * h, 0.0));
    g.view_mut((d, d), (d * k, d * k)).copy_from(&dd);
    Ok(g)
}

/// Polar-corrected step unitary `G_h (G_h* G_h)^{-1/2}`.
pub fn hp_step_unitary(s: &EHStructure, h: f64) -> Result<ComplexMatrix> {
    let g = raw_step_matrix(s, h)?;
    if unitarity_defect(&g) <= 1e-15 {
        return Ok(g);
    }
    polar_unitary(&g).map_err(|e| Error::numeric(format!("step size {h} too large: {e}")))
}

/// The per-slot maps of one scheme at a fixed step size.
#[derive(Debug, Clone)]
enum Kernel {
    /// `J[mu][nu](X) = sum_l G_{l mu}* X G_{l nu}` from the blocks of a step matrix.
    Blocks {
        k: usize,
        blocks: Vec<ComplexMatrix>,
    },
    Euler {
        h: f64,
    },
}

impl Kernel {
    fn new(s: &EHStructure, h: f64, scheme: StepScheme) -> Result<Self> {
        let g = match scheme {
            StepScheme::Polar => hp_step_unitary(s, h)?,
            StepScheme::Raw => raw_step_matrix(s, h)?,
            StepScheme::QsdeEuler => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
                }
                return Ok(Kernel::Euler { h });
            }
        };
        let (d, k) = (s.d(), s.k());
        let mut blocks = Vec::with_capacity((k + 1) * (k + 1));
        for l in 0..=k {
            for mu in 0..=k {
                blocks.push(block(&g, l, mu, d));
            }
        }
        Ok(Kernel::Blocks { k, blocks })
    }

    /// `Phi(X) = sum conj(xg_mu) xf_nu J[mu][nu](X)`.
    fn apply(&self, s: &EHStructure, x: &ComplexMatrix, xf: &[Complex64], xg: &[Complex64]) -> ComplexMatrix {
        match self {
            Kernel::Blocks { k, blocks } => {
                let n = k + 1;
                let mut out = ComplexMatrix::zeros(x.nrows(), x.ncols());
                for l in 0..n {
                    let mut a = ComplexMatrix::zeros(x.nrows(), x.ncols());
                    let mut b = ComplexMatrix::zeros(x.nrows(), x.ncols());
                    for mu in 0..n {
                        let gb = &blocks[l * n + mu];
                        if xf[mu] != ZERO {
                            a += gb * xf[mu];
                        }
                        if xg[mu] != ZERO {
                            b += gb * xg[mu];
                        }
                    }
                    out += b.adjoint() * x * a;
                }
                out
            }
            Kernel::Euler { h } => {
                let n = s.k() + 1;
                let sh = h.sqrt();
                let mut out = ComplexMatrix::zeros(x.nrows(), x.ncols());
                for mu in 0..n {
                    for nu in 0..n {
                        let coef = xg[mu].conj() * xf[nu];
                        if coef == ZERO {
                            continue;
                        }
                        let j = match (mu, nu) {
                            (0, 0) => x + s.lindblad(x) * c64(*h, 0.0),
                            (0, _) | (_, 0) => s.theta(mu, nu, x) * c64(sh, 0.0),
                            _ if mu == nu => s.theta(mu, nu, x) + x,
                            _ => s.theta(mu, nu, x),
                        };
                        out += j * coef;
                    }
                }
                out
            }
        }
    }

    /// `d^2 x d^2` matrices of `J[mu][nu]`, indexed `mu * (k+1) + nu`.
    fn superops(&self, s: &EHStructure) -> Vec<ComplexMatrix> {
        let (d, n) = (s.d(), s.k() + 1);
        match self {
            Kernel::Blocks { blocks, .. } => {
                let mut out = Vec::with_capacity(n * n);
                for mu in 0..n {
                    for nu in 0..n {
                        let mut m = ComplexMatrix::zeros(d * d, d * d);
                        for l in 0..n {
                            m += kron(&blocks[l * n + nu].transpose(), &blocks[l * n + mu].adjoint());
                        }
                        out.push(m);
                    }
                }
                out
            }
            Kernel::Euler { h } => {
                let sh = c64(h.sqrt(), 0.0);
                let mut out = Vec::with_capacity(n * n);
                for mu in 0..n {
                    for nu in 0..n {
                        let t = s.theta_superop(mu, nu).into_matrix();
                        out.push(match (mu, nu) {
                            (0, 0) => identity(d * d) + t * c64(*h, 0.0),
                            (0, _) | (_, 0) => t * sh,
                            _ if mu == nu => t + identity(d * d),
                            _ => t,
                        });
                    }
                }
                out
            }
        }
    }
}

/// Slot vector `(1, sqrt(h) f)`.
fn slot_vector(h: f64, f: &[Complex64]) -> Vec<Complex64> {
    let sh = h.sqrt();
    std::iter::once(ONE).chain(f.iter().map(|z| z * sh)).collect()
}

/// A structure together with a uniform time grid and a step scheme.
#[derive(Debug, Clone)]
pub struct FlowDiscretization {
    structure: EHStructure,
    t_end: f64,
    steps: usize,
    scheme: StepScheme,
    kernel: Kernel,
}

impl FlowDiscretization {
    pub fn new(structure: EHStructure, t_end: f64, steps: usize, scheme: StepScheme) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon {t_end} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one step is required".into()));
        }
        let kernel = Kernel::new(&structure, t_end / steps as f64, scheme)?;
        Ok(Self {
            structure,
            t_end,
            steps,
            scheme,
            kernel,
        })
    }

    pub fn structure(&self) -> &EHStructure {
        &self.structure
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn scheme(&self) -> StepScheme {
        self.scheme
    }

    /// The cached step matrix; `None` for [`StepScheme::QsdeEuler`].
    pub fn step_matrix(&self) -> Option<ComplexMatrix> {
        match &self.kernel {
            Kernel::Blocks { k, blocks } => {
                let (d, n) = (self.structure.d(), k + 1);
                let mut g = ComplexMatrix::zeros(d * n, d * n);
                for l in 0..n {
                    for mu in 0..n {
                        g.view_mut((l * d, mu * d), (d, d)).copy_from(&blocks[l * n + mu]);
                    }
                }
                Some(g)
            }
            Kernel::Euler { .. } => None,
        }
    }

    fn check_inputs(&self, x: &ComplexMatrix, f: &StepFunction, g: &StepFunction) -> Result<()> {
        let d = self.structure.d();
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::dims(format!(
                "x is {}x{}, expected {d}x{d}",
                x.nrows(),
                x.ncols()
            )));
        }
        f.check_grid(self.structure.k(), self.t_end, self.steps)?;
        g.check_grid(self.structure.k(), self.t_end, self.steps)
    }

    /// Applies the slot maps for slots `to-1, ..., from` to `x` (Heisenberg order).
    pub fn heisenberg_chain(
        &self,
        x: &ComplexMatrix,
        f: &StepFunction,
        g: &StepFunction,
        from: usize,
        to: usize,
    ) -> Result<ComplexMatrix> {
        self.check_inputs(x, f, g)?;
        if from > to || to > self.steps {
            return Err(Error::InvalidArgument(format!(
                "slot range {from}..{to} outside 0..{}",
                self.steps
            )));
        }
        let h = self.h();
        let mut m = x.clone();
        for j in (from..to).rev() {
            let xf = slot_vector(h, f.value_on(j, self.steps));
            let xg = slot_vector(h, g.value_on(j, self.steps));
            m = self.kernel.apply(&self.structure, &m, &xf, &xg);
        }
        Ok(m)
    }
}

fn check_vec(v: &[Complex64], d: usize, name: &str) -> Result<()> {
    if v.len() != d {
        return Err(Error::dims(format!("{name} has length {}, expected {d}", v.len())));
    }
    Ok(())
}

/// `<u, v> = sum u_i conj(v_i)`.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// `v* X u`, i.e. `<X u, v>`.
pub fn sandwich(x: &ComplexMatrix, u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..x.nrows() {
        let mut row = ZERO;
        for j in 0..x.ncols() {
            row += x[(i, j)] * u[j];
        }
        acc += v[i].conj() * row;
    }
    acc
}

/// `<(x (x) 1) U (u (x) xi(f)), U (v (x) xi(g))>`, the discrete `<j_T(x) u e(f), v e(g)>`.
pub fn flow_matrix_element(
    disc: &FlowDiscretization,
    x: &ComplexMatrix,
    u: &[Complex64],
    v: &[Complex64],
    f: &StepFunction,
    g: &StepFunction,
) -> Result<Complex64> {
    let d = disc.structure.d();
    check_vec(u, d, "u")?;
    check_vec(v, d, "v")?;
    let m = disc.heisenberg_chain(x, f, g, 0, disc.steps)?;
    Ok(sandwich(&m, u, v))
}

/// `|<j(x) u e(f), j(y) v e(g)> - <j(y*x) u e(f), v e(g)>|` for the discrete chain.
///
/// The first term needs `j(y)* j(x)` with the noise contracted jointly. The pair is carried as
/// `M = sum_r vec(Y_r) vec(X_r)^T` (initially `Y = y*`, `X = x`); a slot maps it to
/// `sum_mu A_mu M B_mu^T` with `A_mu = sum_nu conj(xg_nu) J[nu][mu]` and
/// `B_mu = sum_nu xf_nu J[mu][nu]`, which uses `J[mu][nu](z)* = J[nu][mu](z*)`.
#[allow(clippy::too_many_arguments)]
pub fn homomorphism_defect(
    disc: &FlowDiscretization,
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    u: &[Complex64],
    v: &[Complex64],
    f: &StepFunction,
    g: &StepFunction,
) -> Result<f64> {
    let s = &disc.structure;
    let (d, n) = (s.d(), s.k() + 1);
    check_vec(u, d, "u")?;
    check_vec(v, d, "v")?;
    disc.check_inputs(y, f, g)?;
    let second = flow_matrix_element(disc, &(y.adjoint() * x), u, v, f, g)?;

    let sup = disc.kernel.superops(s);
    let vec = |z: &ComplexMatrix| ComplexMatrix::from_column_slice(d * d, 1, z.as_slice());
    let mut m = vec(&y.adjoint()) * vec(x).transpose();
    let h = disc.h();
    for j in (0..disc.steps).rev() {
        let xf = slot_vector(h, f.value_on(j, disc.steps));
        let xg = slot_vector(h, g.value_on(j, disc.steps));
        let mut next = ComplexMatrix::zeros(d * d, d * d);
        for mu in 0..n {
            let mut a = ComplexMatrix::zeros(d * d, d * d);
            let mut b = ComplexMatrix::zeros(d * d, d * d);
            for nu in 0..n {
                a += &sup[nu * n + mu] * xg[nu].conj();
                b += &sup[mu * n + nu] * xf[nu];
            }
            next += a * &m * b.transpose();
        }
        m = next;
    }
    let mut first = ZERO;
    for i in 0..d {
        for jj in 0..d {
            for l in 0..d {
                first += m[(i + d * jj, jj + d * l)] * u[l] * v[i].conj();
            }
        }
    }
    Ok((first - second).norm())
}

/// Which flow's sub-steps act first on the algebra element inside a dyadic slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrotterOrder {
    /// `eta = (j1 (x) id) o j2`: flow 2 is innermost.
    #[default]
    SecondInner,
    FirstInner,
}

/// Data for the dyadic Trotter product of two flows on the same algebra.
#[derive(Debug, Clone)]
pub struct FlowTrotter {
    s1: EHStructure,
    s2: EHStructure,
    t_end: f64,
    substeps: usize,
    scheme: StepScheme,
    order: TrotterOrder,
}

impl FlowTrotter {
    pub fn new(s1: EHStructure, s2: EHStructure, t_end: f64) -> Result<Self> {
        if s1.d() != s2.d() {
            return Err(Error::dims(format!("flows on M_{} and M_{}", s1.d(), s2.d())));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon {t_end} must be positive")));
        }
        Ok(Self {
            s1,
            s2,
            t_end,
            substeps: DEFAULT_SUBSTEPS,
            scheme: StepScheme::Polar,
            order: TrotterOrder::SecondInner,
        })
    }

    pub fn with_substeps(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        self.substeps = m;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: StepScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_order(mut self, order: TrotterOrder) -> Self {
        self.order = order;
        self
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn k(&self) -> usize {
        self.s1.k() + self.s2.k()
    }

    /// Number of dyadic slots `T 2^n`; errors unless it is an integer.
    pub fn slots(&self, n: u32) -> Result<usize> {
        let exact = self.t_end * 2f64.powi(n as i32);
        let slots = exact.round();
        if (exact - slots).abs() > 1e-9 || slots < 1.0 {
            return Err(Error::NonDyadic(format!(
                "T = {} is not a multiple of 2^-{n}",
                self.t_end
            )));
        }
        Ok(slots as usize)
    }
}

/// Matrix element of the level-`n` Trotter product of two flows.
///
/// Each dyadic slot of width `2^-n` runs `m` sub-steps of flow 2 on channels `k1..k1+k2`
/// and `m` sub-steps of flow 1 on channels `0..k1`, over the same time cells. With the default
/// order the flow-2 block is applied to the algebra element first.
#[allow(clippy::too_many_arguments)]
pub fn trotter_flow_matrix_element(
    tr: &FlowTrotter,
    n: u32,
    x: &ComplexMatrix,
    u: &[Complex64],
    v: &[Complex64],
    f: &StepFunction,
    g: &StepFunction,
) -> Result<Complex64> {
    let d = tr.s1.d();
    let (k1, k) = (tr.s1.k(), tr.k());
    check_vec(u, d, "u")?;
    check_vec(v, d, "v")?;
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::dims(format!(
            "x is {}x{}, expected {d}x{d}",
            x.nrows(),
            x.ncols()
        )));
    }
    let slots = tr.slots(n)?;
    let m = tr.substeps;
    let fine = slots * m;
    let h = tr.t_end / fine as f64;
    for sf in [f, g] {
        if sf.steps() > fine || !fine.is_multiple_of(sf.steps()) {
            return Err(Error::NonDyadic(format!(
                "{} cells do not refine into the {fine}-cell level-{n} grid",
                sf.steps()
            )));
        }
        sf.check_grid(k, tr.t_end, fine)?;
    }
    let ker1 = Kernel::new(&tr.s1, h, tr.scheme)?;
    let ker2 = Kernel::new(&tr.s2, h, tr.scheme)?;
    let run = |s: &EHStructure, ker: &Kernel, range: std::ops::Range<usize>, slot: usize, mut xm: ComplexMatrix| {
        for j in (0..m).rev() {
            let cell = slot * m + j;
            let xf = slot_vector(h, &f.value_on(cell, fine)[range.clone()]);
            let xg = slot_vector(h, &g.value_on(cell, fine)[range.clone()]);
            xm = ker.apply(s, &xm, &xf, &xg);
        }
        xm
    };
    let mut xm = x.clone();
    for slot in (0..slots).rev() {
        xm = match tr.order {
            TrotterOrder::SecondInner => {
                let inner = run(&tr.s2, &ker2, k1..k, slot, xm);
                run(&tr.s1, &ker1, 0..k1, slot, inner)
            }
            TrotterOrder::FirstInner => {
                let inner = run(&tr.s1, &ker1, 0..k1, slot, xm);
                run(&tr.s2, &ker2, k1..k, slot, inner)
            }
        };
    }
    Ok(sandwich(&xm, u, v))
}
