//! Processes on groups as dyadic products of one-parameter increments.
//!
//! Brownian motion on a compact matrix Lie group is approximated by
//! `prod_slots prod_channels exp(dW * chi_i)` and a random walk on a finitely generated group
//! by `prod_slots prod_channels g_i^{dZ}` with `dZ` a difference of Poisson counts. Samples at
//! neighbouring dyadic levels are coupled by summing fine increments pairwise.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, expm, max_abs, ComplexMatrix, ONE, ZERO};
use crate::rng::stream;
use crate::table::{Cell, ResultTable};

/// Number of dyadic slots `t 2^n`; `t` must be a non-negative multiple of `2^-n`.
pub fn dyadic_slots(t: f64, n: u32) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and non-negative"
        )));
    }
    let exact = t * 2f64.powi(n as i32);
    let slots = exact.round();
    if (exact - slots).abs() > 1e-9 {
        return Err(Error::NonDyadic(format!("t = {t} is not a multiple of 2^-{n}")));
    }
    Ok(slots as usize)
}

/// Order of the factors in a dyadic product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorOrder {
    /// Slot by slot, channels `1..k` inside each slot.
    #[default]
    Interleaved,
    /// All slots of channel 1, then all of channel 2, and so on.
    ChannelOuter,
}

fn factor_sequence(slots: usize, k: usize, order: FactorOrder) -> impl Iterator<Item = (usize, usize)> {
    (0..slots * k).map(move |p| match order {
        FactorOrder::Interleaved => (p / k, p % k),
        FactorOrder::ChannelOuter => (p % slots, p / slots),
    })
}

/// Row-major `m x m` product `out = a b`.
fn mul_into(a: &[Complex64], b: &[Complex64], out: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = ZERO;
            for l in 0..m {
                acc += a[i * m + l] * b[l * m + j];
            }
            out[i * m + j] = acc;
        }
    }
}

fn to_matrix(flat: &[Complex64], m: usize) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(m, m, flat)
}

/// A compact matrix Lie group with a fixed basis `chi_l` of its Lie algebra.
#[derive(Debug, Clone)]
pub struct LieGroupModel {
    name: String,
    dim: usize,
    basis: Vec<ComplexMatrix>,
    /// Eigenvalues and row-major eigenvectors of the Hermitian `-i chi_l`.
    spectra: Vec<(Vec<f64>, Vec<Complex64>)>,
}

impl LieGroupModel {
    pub fn new(name: &str, basis: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = basis.first().map_or(0, |b| b.nrows());
        if dim == 0 {
            return Err(Error::InvalidArgument("empty Lie algebra basis".into()));
        }
        let mut spectra = Vec::with_capacity(basis.len());
        for chi in &basis {
            if chi.nrows() != dim || chi.ncols() != dim {
                return Err(Error::dims("basis elements of different sizes"));
            }
            let skew = max_abs(&(chi.adjoint() + chi));
            if skew > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "basis element is not anti-self-adjoint (residual {skew:.3e})"
                )));
            }
            let k = chi * c64(0.0, -1.0);
            let herm = (&k + k.adjoint()) * c64(0.5, 0.0);
            let eig = SymmetricEigen::try_new(herm, f64::EPSILON, 10_000)
                .ok_or_else(|| Error::numeric("eigensolver failed on a basis element"))?;
            let vals = eig.eigenvalues.iter().copied().collect();
            let mut vecs = Vec::with_capacity(dim * dim);
            for i in 0..dim {
                for j in 0..dim {
                    vecs.push(eig.eigenvectors[(i, j)]);
                }
            }
            spectra.push((vals, vecs));
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            basis,
            spectra,
        })
    }

    /// `T^n` as diagonal unitaries, `chi_l = i E_ll`.
    pub fn torus(n: usize) -> Result<Self> {
        let basis = (0..n)
            .map(|l| {
                let mut m = ComplexMatrix::zeros(n, n);
                m[(l, l)] = c64(0.0, 1.0);
                m
            })
            .collect();
        Self::new("torus", basis)
    }

    /// `SU(2)` with `chi_l = (i/2) sigma_l`, so `sum chi_l^2 = -(3/4) I`.
    pub fn su2() -> Self {
        let h = c64(0.0, 0.5);
        let sx = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let sy = ComplexMatrix::from_row_slice(2, 2, &[ZERO, c64(0.0, -1.0), c64(0.0, 1.0), ZERO]);
        let sz = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        Self::new("su2", vec![sx * h, sy * h, sz * h]).expect("fixed basis is valid")
    }

    /// `SO(3)` with the real antisymmetric rotation generators, so `sum chi_l^2 = -2 I`.
    pub fn so3() -> Self {
        let r = |e: [f64; 9]| ComplexMatrix::from_row_slice(3, 3, &e.map(|x| c64(x, 0.0)));
        let lx = r([0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        let ly = r([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        let lz = r([0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        Self::new("so3", vec![lx, ly, lz]).expect("fixed basis is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// `exp(w chi_l)`, row-major, from the cached spectral decomposition.
    fn factor_into(&self, l: usize, w: f64, out: &mut [Complex64]) {
        let m = self.dim;
        let (vals, vecs) = &self.spectra[l];
        out.fill(ZERO);
        for (j, &lam) in vals.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, w * lam);
            for a in 0..m {
                let va = vecs[a * m + j] * phase;
                for b in 0..m {
                    out[a * m + b] += va * vecs[b * m + j].conj();
                }
            }
        }
    }

    pub fn exp_factor(&self, l: usize, w: f64) -> ComplexMatrix {
        let mut out = vec![ZERO; self.dim * self.dim];
        self.factor_into(l, w, &mut out);
        to_matrix(&out, self.dim)
    }
}

/// Gaussian increments `w[slot * k + l] ~ N(0, 2^-n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieIncrements {
    pub n: u32,
    pub slots: usize,
    pub k: usize,
    pub w: Vec<f64>,
}

impl LieIncrements {
    /// Level `n - 1` increments of the same path.
    pub fn aggregate(&self) -> Result<LieIncrements> {
        if self.n == 0 || !self.slots.is_multiple_of(2) {
            return Err(Error::NonDyadic(format!(
                "cannot coarsen level {} with {} slots",
                self.n, self.slots
            )));
        }
        let k = self.k;
        let slots = self.slots / 2;
        let mut w = vec![0.0; slots * k];
        for s in 0..slots {
            for l in 0..k {
                w[s * k + l] = self.w[2 * s * k + l] + self.w[(2 * s + 1) * k + l];
            }
        }
        Ok(LieIncrements {
            n: self.n - 1,
            slots,
            k,
            w,
        })
    }
}

pub fn draw_lie_increments<R: Rng + ?Sized>(g: &LieGroupModel, t: f64, n: u32, rng: &mut R) -> Result<LieIncrements> {
    let slots = dyadic_slots(t, n)?;
    let k = g.basis.len();
    let normal = Normal::new(0.0, 2f64.powi(-(n as i32)).sqrt()).expect("positive variance");
    let w = (0..slots * k).map(|_| normal.sample(rng)).collect();
    Ok(LieIncrements { n, slots, k, w })
}

/// The ordered product of `exp(w chi_l)` factors.
pub fn assemble_lie(g: &LieGroupModel, inc: &LieIncrements, order: FactorOrder) -> ComplexMatrix {
    let m = g.dim;
    let mut x = vec![ZERO; m * m];
    for i in 0..m {
        x[i * m + i] = ONE;
    }
    let mut f = vec![ZERO; m * m];
    let mut tmp = vec![ZERO; m * m];
    for (slot, l) in factor_sequence(inc.slots, inc.k, order) {
        let w = inc.w[slot * inc.k + l];
        if w == 0.0 {
            continue;
        }
        g.factor_into(l, w, &mut f);
        mul_into(&x, &f, &mut tmp, m);
        std::mem::swap(&mut x, &mut tmp);
    }
    to_matrix(&x, m)
}

/// One draw of the level-`n` product at time `t`, interleaved order.
pub fn sample_lie_bm_trotter<R: Rng + ?Sized>(g: &LieGroupModel, t: f64, n: u32, rng: &mut R) -> Result<ComplexMatrix> {
    sample_lie_bm_ordered(g, t, n, FactorOrder::Interleaved, rng)
}

pub fn sample_lie_bm_ordered<R: Rng + ?Sized>(
    g: &LieGroupModel,
    t: f64,
    n: u32,
    order: FactorOrder,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let inc = draw_lie_increments(g, t, n, rng)?;
    Ok(assemble_lie(g, &inc, order))
}

/// `E[pi(g_t)] = exp((t/2) sum chi_l^2)` for the limiting Brownian motion.
pub fn heat_expectation_oracle(g: &LieGroupModel, t: f64) -> Result<ComplexMatrix> {
    let mut casimir = ComplexMatrix::zeros(g.dim, g.dim);
    for chi in &g.basis {
        casimir += chi * chi;
    }
    expm(&(casimir * c64(0.5 * t, 0.0)))
}

/// Entrywise sample mean with standard errors of the real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub mean: ComplexMatrix,
    pub se_re: DMatrix<f64>,
    pub se_im: DMatrix<f64>,
    pub samples: usize,
}

impl MeanEstimate {
    /// Largest `|mean - target| / se` over real and imaginary parts of all entries.
    /// Entries with zero standard error must match exactly.
    pub fn max_z_score(&self, target: &ComplexMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.mean.nrows() {
            for j in 0..self.mean.ncols() {
                let d = self.mean[(i, j)] - target[(i, j)];
                for (dev, se) in [(d.re.abs(), self.se_re[(i, j)]), (d.im.abs(), self.se_im[(i, j)])] {
                    let z = if se > 0.0 {
                        dev / se
                    } else if dev < 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    worst = worst.max(z);
                }
            }
        }
        worst
    }
}

/// Monte-Carlo mean of the level-`n` product; trajectory `i` uses stream `(seed, i)`.
pub fn lie_mean_estimate(
    g: &LieGroupModel,
    t: f64,
    n: u32,
    order: FactorOrder,
    samples: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let m = g.dim;
    let mut sum = vec![ZERO; m * m];
    let mut sq_re = vec![0.0; m * m];
    let mut sq_im = vec![0.0; m * m];
    for i in 0..samples {
        let mut rng = stream(seed, i as u64);
        let x = sample_lie_bm_ordered(g, t, n, order, &mut rng)?;
        for a in 0..m {
            for b in 0..m {
                let z = x[(a, b)];
                sum[a * m + b] += z;
                sq_re[a * m + b] += z.re * z.re;
                sq_im[a * m + b] += z.im * z.im;
            }
        }
    }
    let nf = samples as f64;
    let mean = to_matrix(&sum.iter().map(|z| z / nf).collect::<Vec<_>>(), m);
    let se = |sq: &[f64], part: fn(Complex64) -> f64| {
        DMatrix::from_fn(m, m, |a, b| {
            let mu = part(mean[(a, b)]);
            let var = ((sq[a * m + b] - nf * mu * mu) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
    };
    Ok(MeanEstimate {
        se_re: se(&sq_re, |z| z.re),
        se_im: se(&sq_im, |z| z.im),
        mean,
        samples,
    })
}

/// `rho(g, h) = sum_n 2^-n |phi_n(g) - phi_n(h)| / (1 + |phi_n(g) - phi_n(h)|)` with
/// `phi_1, phi_2, ...` the real and imaginary parts of the matrix entries, row-major.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RhoMetric;

impl RhoMetric {
    pub fn distance(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        let mut weight = 1.0;
        let mut total = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let d = a[(i, j)] - b[(i, j)];
                for part in [d.re.abs(), d.im.abs()] {
                    weight *= 0.5;
                    total += weight * part / (1.0 + part);
                }
            }
        }
        total
    }
}

/// Rows `(n, mean_rho, std_error)` for `E rho(X^(n)_t, X^(n+1)_t)` on coupled paths.
pub fn rho_convergence_diagnostic(
    g: &LieGroupModel,
    t: f64,
    levels: &[u32],
    order: FactorOrder,
    samples: usize,
    seed: u64,
) -> Result<ResultTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "levels must be non-empty and strictly increasing".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let finest = levels[levels.len() - 1] + 1;
    let lowest = levels[0];
    let metric = RhoMetric;
    let mut sums = vec![0.0; levels.len()];
    let mut sqs = vec![0.0; levels.len()];
    for i in 0..samples {
        let mut rng = stream(seed, i as u64);
        let mut inc = draw_lie_increments(g, t, finest, &mut rng)?;
        // products at every level from finest down to the lowest requested
        let mut by_level = BTreeMap::new();
        loop {
            by_level.insert(inc.n, assemble_lie(g, &inc, order));
            if inc.n == lowest {
                break;
            }
            inc = inc.aggregate()?;
        }
        for (p, &n) in levels.iter().enumerate() {
            let r = metric.distance(&by_level[&n], &by_level[&(n + 1)]);
            sums[p] += r;
            sqs[p] += r * r;
        }
    }
    let nf = samples as f64;
    let mut table = ResultTable::new(["n", "mean_rho", "std_error"]);
    for (p, &n) in levels.iter().enumerate() {
        let mean = sums[p] / nf;
        let var = ((sqs[p] - nf * mean * mean) / (nf - 1.0)).max(0.0);
        table.push_row(vec![
            Cell::Int(n as i64),
            Cell::float(mean),
            Cell::float((var / nf).sqrt()),
        ])?;
    }
    Ok(table)
}

/// Finitely generated groups with torsion-free generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Presentation {
    /// `Z^d` with the standard basis.
    Lattice { d: usize },
    /// Free group on `k` letters.
    Free { k: usize },
    /// Integer Heisenberg group, `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`, generators
    /// `x = (1,0,0)`, `y = (0,1,0)`.
    Heisenberg,
}

impl Presentation {
    /// Number of generators `k`; the symmetric set has `2k` elements.
    pub fn rank(self) -> usize {
        match self {
            Presentation::Lattice { d } => d,
            Presentation::Free { k } => k,
            Presentation::Heisenberg => 2,
        }
    }
}

/// Integer coordinates (lattice, Heisenberg) or a reduced word. Letter `+(i+1)` is `g_i`,
/// `-(i+1)` its inverse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupElement {
    Vector(Vec<i64>),
    Word(Vec<i32>),
}

fn reduce_word(word: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(word.len());
    for &c in word {
        if out.last() == Some(&-c) {
            out.pop();
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGroupModel {
    presentation: Presentation,
    /// `lambda_1..lambda_2k`; `lambda_{k+i}` drives the inverse of generator `i`.
    intensities: Vec<f64>,
}

impl DiscreteGroupModel {
    pub fn new(presentation: Presentation, intensities: Vec<f64>) -> Result<Self> {
        let k = presentation.rank();
        if k == 0 {
            return Err(Error::InvalidArgument("the group needs at least one generator".into()));
        }
        if intensities.len() != 2 * k {
            return Err(Error::dims(format!(
                "{} intensities for {} generators",
                intensities.len(),
                2 * k
            )));
        }
        if intensities.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidArgument("intensities must be positive".into()));
        }
        Ok(Self {
            presentation,
            intensities,
        })
    }

    pub fn presentation(&self) -> Presentation {
        self.presentation
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn rank(&self) -> usize {
        self.presentation.rank()
    }

    pub fn identity(&self) -> GroupElement {
        match self.presentation {
            Presentation::Lattice { d } => GroupElement::Vector(vec![0; d]),
            Presentation::Heisenberg => GroupElement::Vector(vec![0; 3]),
            Presentation::Free { .. } => GroupElement::Word(Vec::new()),
        }
    }

    /// `g_i^m` for `i < k`.
    pub fn power(&self, i: usize, m: i64) -> GroupElement {
        match self.presentation {
            Presentation::Lattice { d } => {
                let mut v = vec![0; d];
                v[i] = m;
                GroupElement::Vector(v)
            }
            Presentation::Heisenberg => {
                let mut v = vec![0; 3];
                v[i] = m;
                GroupElement::Vector(v)
            }
            Presentation::Free { .. } => {
                let letter = (i as i32 + 1) * if m < 0 { -1 } else { 1 };
                GroupElement::Word(vec![letter; m.unsigned_abs() as usize])
            }
        }
    }

    /// Element `j` of the symmetric generating set: `g_j` for `j < k`, `g_{j-k}^{-1}` after.
    pub fn generator(&self, j: usize) -> GroupElement {
        let k = self.rank();
        if j < k {
            self.power(j, 1)
        } else {
            self.power(j - k, -1)
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match (self.presentation, a, b) {
            (Presentation::Heisenberg, GroupElement::Vector(x), GroupElement::Vector(y)) => {
                GroupElement::Vector(vec![x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1]])
            }
            (_, GroupElement::Vector(x), GroupElement::Vector(y)) => {
                GroupElement::Vector(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (_, GroupElement::Word(x), GroupElement::Word(y)) => {
                let mut w = x.clone();
                w.extend_from_slice(y);
                GroupElement::Word(reduce_word(&w))
            }
            _ => panic!("mixed element representations"),
        }
    }

    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        match (self.presentation, a) {
            (Presentation::Heisenberg, GroupElement::Vector(x)) => {
                GroupElement::Vector(vec![-x[0], -x[1], -x[2] + x[0] * x[1]])
            }
            (_, GroupElement::Vector(x)) => GroupElement::Vector(x.iter().map(|p| -p).collect()),
            (_, GroupElement::Word(w)) => GroupElement::Word(w.iter().rev().map(|c| -c).collect()),
        }
    }

    /// Reduced word length for free groups, `sum |coordinate|` otherwise.
    pub fn size(&self, a: &GroupElement) -> u64 {
        match a {
            GroupElement::Vector(x) => x.iter().map(|p| p.unsigned_abs()).sum(),
            GroupElement::Word(w) => w.len() as u64,
        }
    }

    /// Printable label: coordinates `(a,b,c)` or a word over `a, b, ...` with capitals for inverses.
    pub fn label(&self, a: &GroupElement) -> String {
        match a {
            GroupElement::Vector(x) => {
                let parts: Vec<String> = x.iter().map(|p| p.to_string()).collect();
                format!("({})", parts.join(" "))
            }
            GroupElement::Word(w) if w.is_empty() => "e".to_string(),
            GroupElement::Word(w) => w.iter().map(|&c| letter(c)).collect(),
        }
    }
}

fn letter(c: i32) -> char {
    let base = if c > 0 { b'a' } else { b'A' };
    (base + (c.unsigned_abs() - 1) as u8) as char
}

/// Net counts `z[slot * k + i] = dN_i - dN_{k+i}` of one walk path at level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkIncrements {
    pub n: u32,
    pub slots: usize,
    pub k: usize,
    pub z: Vec<i64>,
}

impl WalkIncrements {
    pub fn aggregate(&self) -> Result<WalkIncrements> {
        if self.n == 0 || !self.slots.is_multiple_of(2) {
            return Err(Error::NonDyadic(format!(
                "cannot coarsen level {} with {} slots",
                self.n, self.slots
            )));
        }
        let k = self.k;
        let slots = self.slots / 2;
        let mut z = vec![0; slots * k];
        for s in 0..slots {
            for i in 0..k {
                z[s * k + i] = self.z[2 * s * k + i] + self.z[(2 * s + 1) * k + i];
            }
        }
        Ok(WalkIncrements {
            n: self.n - 1,
            slots,
            k,
            z,
        })
    }
}

/// Per-slot counts are i.i.d. `Poisson(lambda 2^-n)`. They are drawn jointly: a
/// `Poisson(lambda t)` total per direction, each jump placed in a uniform slot, which has
/// the same law and costs `O(jumps)` instead of `O(slots)`.
pub fn draw_walk_increments<R: Rng + ?Sized>(
    g: &DiscreteGroupModel,
    t: f64,
    n: u32,
    rng: &mut R,
) -> Result<WalkIncrements> {
    let slots = dyadic_slots(t, n)?;
    let k = g.rank();
    let mut z = vec![0i64; slots * k];
    if slots == 0 {
        return Ok(WalkIncrements { n, slots, k, z });
    }
    for (j, &lambda) in g.intensities.iter().enumerate() {
        let total = Poisson::new(lambda * t)
            .map_err(|e| Error::numeric(format!("Poisson law: {e}")))?
            .sample(rng) as u64;
        let (i, sign) = if j < k { (j, 1) } else { (j - k, -1) };
        for _ in 0..total {
            let slot = rng.random_range(0..slots);
            z[slot * k + i] += sign;
        }
    }
    Ok(WalkIncrements { n, slots, k, z })
}

/// The ordered product of `g_i^{z}` factors.
pub fn assemble_walk(g: &DiscreteGroupModel, inc: &WalkIncrements, order: FactorOrder) -> GroupElement {
    let mut x = g.identity();
    for (slot, i) in factor_sequence(inc.slots, inc.k, order) {
        let m = inc.z[slot * inc.k + i];
        if m != 0 {
            x = g.multiply(&x, &g.power(i, m));
        }
    }
    x
}

pub fn sample_group_walk_trotter<R: Rng + ?Sized>(
    g: &DiscreteGroupModel,
    t: f64,
    n: u32,
    rng: &mut R,
) -> Result<GroupElement> {
    let inc = draw_walk_increments(g, t, n, rng)?;
    Ok(assemble_walk(g, &inc, FactorOrder::Interleaved))
}

/// An exact draw of the limiting walk with its jump count.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSample {
    pub element: GroupElement,
    pub jumps: u64,
}

/// Exponential holding times at total rate `sum lambda`, jumps chosen proportionally.
pub fn ctmc_walk_sample<R: Rng + ?Sized>(g: &DiscreteGroupModel, t: f64, rng: &mut R) -> Result<WalkSample> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and non-negative"
        )));
    }
    let total: f64 = g.intensities.iter().sum();
    let hold = Exp::new(total).map_err(|e| Error::numeric(format!("exponential law: {e}")))?;
    let mut x = g.identity();
    let mut clock = hold.sample(rng);
    let mut jumps = 0;
    while clock <= t {
        let mut u = rng.random::<f64>() * total;
        let mut j = g.intensities.len() - 1;
        for (p, l) in g.intensities.iter().enumerate() {
            if u < *l {
                j = p;
                break;
            }
            u -= l;
        }
        x = g.multiply(&x, &g.generator(j));
        jumps += 1;
        clock += hold.sample(rng);
    }
    Ok(WalkSample { element: x, jumps })
}

pub fn ctmc_walk_oracle<R: Rng + ?Sized>(g: &DiscreteGroupModel, t: f64, rng: &mut R) -> Result<GroupElement> {
    Ok(ctmc_walk_sample(g, t, rng)?.element)
}

/// Label of the bin collecting every element outside the ball.
pub const OUTSIDE: &str = "outside";

/// Empirical law on the ball `size <= radius`, with one extra bin for the rest.
pub fn empirical_ball_law<'a>(
    g: &DiscreteGroupModel,
    samples: impl IntoIterator<Item = &'a GroupElement>,
    radius: u64,
) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for s in samples {
        let key = if g.size(s) <= radius {
            g.label(s)
        } else {
            OUTSIDE.to_string()
        };
        *counts.entry(key).or_default() += 1.0;
        total += 1.0;
    }
    if total > 0.0 {
        for v in counts.values_mut() {
            *v /= total;
        }
    }
    counts
}

/// `(1/2) sum |p - q|` over the union of supports.
pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut tv = 0.0;
    for (k, a) in p {
        tv += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            tv += b.abs();
        }
    }
    0.5 * tv
}

fn ln_poisson(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let mut ln_fact = 0.0;
    for j in 2..=k {
        ln_fact += (j as f64).ln();
    }
    k as f64 * mu.ln() - mu - ln_fact
}

/// `P(N_1 - N_2 = k)` for independent `N_i ~ Poisson(mu_i)`, summed in log space.
pub fn skellam_pmf(k: i64, mu1: f64, mu2: f64) -> f64 {
    let start = if k < 0 { k.unsigned_abs() } else { 0 };
    let mut total = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut j = start;
    loop {
        let term = ln_poisson(mu1, (k + j as i64) as u64) + ln_poisson(mu2, j);
        peak = peak.max(term);
        total += term.exp();
        if (term < peak - 50.0 && j as f64 > mu2) || j > start + 10_000 || term == f64::NEG_INFINITY && j > start {
            break;
        }
        j += 1;
    }
    total
}

/// TV distance between an empirical law on `Z` and `Skellam(mu1, mu2)`, including the
/// Skellam mass that no sample reached.
pub fn skellam_tv(samples: &[i64], mu1: f64, mu2: f64) -> f64 {
    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1.0;
    }
    let n = samples.len().max(1) as f64;
    let spread = (6.0 * (mu1 + mu2).sqrt()).ceil() as i64 + 10;
    let lo = counts.keys().next().copied().unwrap_or(0).min(-spread);
    let hi = counts.keys().next_back().copied().unwrap_or(0).max(spread);
    let mut tv = 0.0;
    let mut covered = 0.0;
    for k in lo..=hi {
        let p = skellam_pmf(k, mu1, mu2);
        covered += p;
        tv += (counts.get(&k).copied().unwrap_or(0.0) / n - p).abs();
    }
    0.5 * (tv + (1.0 - covered).max(0.0))
}

/// One row per trajectory: `trajectory, re_00, im_00, re_01, ...` (row-major entries).
pub fn lie_samples_table(
    g: &LieGroupModel,
    t: f64,
    n: u32,
    order: FactorOrder,
    samples: usize,
    seed: u64,
) -> Result<ResultTable> {
    let m = g.dim;
    let mut cols = vec!["trajectory".to_string()];
    for a in 0..m {
        for b in 0..m {
            cols.push(format!("re_{a}{b}"));
            cols.push(format!("im_{a}{b}"));
        }
    }
    let mut table = ResultTable::new(cols);
    for i in 0..samples {
        let x = sample_lie_bm_ordered(g, t, n, order, &mut stream(seed, i as u64))?;
        let mut row = vec![Cell::from(i)];
        for a in 0..m {
            for b in 0..m {
                row.push(Cell::float(x[(a, b)].re));
                row.push(Cell::float(x[(a, b)].im));
            }
        }
        table.push_row(row)?;
    }
    Ok(table)
}

/// One row per trajectory with the flattened element: coordinates, or the reduced word.
pub fn walk_samples_table(g: &DiscreteGroupModel, t: f64, n: u32, samples: usize, seed: u64) -> Result<ResultTable> {
    let cols: Vec<String> = match g.presentation {
        Presentation::Lattice { d } => std::iter::once("trajectory".to_string())
            .chain((0..d).map(|i| format!("z_{i}")))
            .collect(),
        Presentation::Heisenberg => ["trajectory", "a", "b", "c"].map(String::from).to_vec(),
        Presentation::Free { .. } => ["trajectory", "word", "length"].map(String::from).to_vec(),
    };
    let mut table = ResultTable::new(cols);
    for i in 0..samples {
        let x = sample_group_walk_trotter(g, t, n, &mut stream(seed, i as u64))?;
        let mut row = vec![Cell::from(i)];
        match &x {
            GroupElement::Vector(v) => row.extend(v.iter().map(|&p| Cell::Int(p))),
            GroupElement::Word(w) => {
                row.push(Cell::Text(g.label(&x)));
                row.push(Cell::from(w.len()));
            }
        }
        table.push_row(row)?;
    }
    Ok(table)
}
