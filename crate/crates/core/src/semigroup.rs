//! Quantum dynamical semigroups `e^{tL}` and Trotter–Kato splitting experiments.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, ginibre, hs_norm, identity, trace_norm, ComplexMatrix, NormKind, Superoperator};
use crate::structure::{perturbed_generator, verify_weak_dissipativity, EHStructure, NoiseVector, TraceKind};
use crate::table::{Cell, ResultTable};

/// Largest `|t| * ||L||_HS` accepted by [`semigroup`]. Beyond this the scaling-and-squaring
/// step count passes 20 and growing generators overflow double precision.
pub const SEMIGROUP_NORM_BOUND: f64 = 1e6;

/// Errors below this are treated as exact zeros when estimating orders.
pub const EXACT_TOL: f64 = 1e-12;

/// `e^{tL}`.
pub fn semigroup(l: &Superoperator, t: f64) -> Result<Superoperator> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    let scaled = l.matrix() * c64(t, 0.0);
    let size = hs_norm(&scaled);
    if size > SEMIGROUP_NORM_BOUND {
        return Err(Error::numeric(format!(
            "||tL|| = {size:.3e} exceeds the bound {SEMIGROUP_NORM_BOUND:.0e}"
        )));
    }
    let e = linalg::expm(&scaled)?;
    Ok(Superoperator::from_matrix(l.dim(), e)?.with_hermitian_preserving(l.is_hermitian_preserving()))
}

fn matrix_power(base: &ComplexMatrix, mut n: usize) -> ComplexMatrix {
    let mut result = identity(base.nrows());
    let mut p = base.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &p;
        }
        n >>= 1;
        if n > 0 {
            p = &p * &p;
        }
    }
    result
}

/// `(e^{tA/n} e^{tB/n})^n`; in each slot `B` acts first, then `A`.
pub fn trotter_product_semigroup(a: &Superoperator, b: &Superoperator, t: f64, n: usize) -> Result<Superoperator> {
    if a.dim() != b.dim() {
        return Err(Error::dims(format!("generators on M_{} and M_{}", a.dim(), b.dim())));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let ea = semigroup(a, t / n as f64)?;
    let eb = semigroup(b, t / n as f64)?;
    let slot = ea.compose(&eb)?;
    let hp = slot.is_hermitian_preserving();
    Ok(Superoperator::from_matrix(a.dim(), matrix_power(slot.matrix(), n))?.with_hermitian_preserving(hp))
}

#[derive(Debug, Clone)]
pub struct SemigroupExperiment {
    pub generators: Vec<Superoperator>,
    pub t: f64,
    pub n_values: Vec<usize>,
    pub norm: NormKind,
}

impl SemigroupExperiment {
    pub fn new(generators: Vec<Superoperator>, t: f64, n_values: Vec<usize>, norm: NormKind) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time {t} must be finite and non-negative"
            )));
        }
        if n_values.is_empty() || n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "n_values must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            generators,
            t,
            n_values,
            norm,
        })
    }
}

/// Trotter error `||(e^{tA/n}e^{tB/n})^n - e^{t(A+B)}||` for each `n`.
pub fn trotter_errors(
    a: &Superoperator,
    b: &Superoperator,
    t: f64,
    n_values: &[usize],
    norm: NormKind,
) -> Result<Vec<f64>> {
    let exact = semigroup(&a.add(b)?, t)?;
    n_values
        .iter()
        .map(|&n| {
            let p = trotter_product_semigroup(a, b, t, n)?;
            norm.measure(&(p.matrix() - exact.matrix()))
        })
        .collect()
}

/// Least-squares slope of `-log(error)` against `log(n)`; `None` if any error is at round-off.
pub fn loglog_slope(n_values: &[f64], errors: &[f64]) -> Option<f64> {
    if n_values.len() != errors.len() || n_values.len() < 2 {
        return None;
    }
    if errors.iter().any(|&e| e.is_nan() || e <= EXACT_TOL || e.is_infinite()) {
        return None;
    }
    let xs: Vec<f64> = n_values.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Order estimated from two consecutive refinements.
pub fn pairwise_order(n0: f64, e0: f64, n1: f64, e1: f64) -> Option<f64> {
    (e0 > EXACT_TOL && e1 > EXACT_TOL).then(|| (e0 / e1).ln() / (n1 / n0).ln())
}

/// Columns `n, error, estimated_order`; the order is `NA` on the first row and wherever
/// the errors are at round-off level.
pub fn trotter_error_table(exp: &SemigroupExperiment) -> Result<ResultTable> {
    if exp.generators.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "a Trotter table needs exactly two generators, got {}",
            exp.generators.len()
        )));
    }
    let errs = trotter_errors(&exp.generators[0], &exp.generators[1], exp.t, &exp.n_values, exp.norm)?;
    let mut table = ResultTable::new(["n", "error", "estimated_order"]);
    for (i, (&n, &e)) in exp.n_values.iter().zip(&errs).enumerate() {
        let order = if i == 0 {
            None
        } else {
            pairwise_order(exp.n_values[i - 1] as f64, errs[i - 1], n as f64, e)
        };
        table.push_row(vec![Cell::from(n), Cell::float(e), order.into()])?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `max ||e^{tL^{c,d}}(x)||_1 / ||x||_1` over the sampled `x`.
    pub max_ratio: f64,
    /// Smallest `M` with `max_ratio <= e^{tM}`.
    pub m_min: f64,
    /// Least-squares `M` from `log ratio ~ M s` on `s in {t/4, t/2, 3t/4, t}`.
    pub m_fit: f64,
    /// Max ratio at `2t` for the same samples.
    pub ratio_doubled: f64,
    /// `ratio_doubled <= e^{2t max(m_min, m_fit, 0)}`.
    pub doubled_within_bound: bool,
    /// Set when `c = d = 0` and the structure is dissipative; then `max_ratio <= 1 + 1e-9` is required.
    pub contraction_required: bool,
    pub passed: bool,
}

const CONTRACTION_TOL: f64 = 1e-9;

/// Empirical exponential bound `||e^{tL^{c,d}}(x)||_1 <= e^{tM} ||x||_1` on random `x`.
pub fn trace_norm_growth_check<R: Rng + ?Sized>(
    s: &EHStructure,
    c: &NoiseVector,
    d: &NoiseVector,
    t: f64,
    trials: usize,
    rng: &mut R,
) -> Result<GrowthReport> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and non-negative"
        )));
    }
    let g = perturbed_generator(s, c, d)?;
    let xs: Vec<ComplexMatrix> = (0..trials.max(1)).map(|_| ginibre(rng, s.d(), s.d())).collect();
    let max_ratio_at = |tau: f64| -> Result<f64> {
        let e = semigroup(&g, tau)?;
        let mut worst: f64 = 0.0;
        for x in &xs {
            worst = worst.max(trace_norm(&e.apply(x))? / trace_norm(x)?);
        }
        Ok(worst)
    };
    let max_ratio = max_ratio_at(t)?;
    let (m_min, m_fit, ratio_doubled) = if t == 0.0 {
        (0.0, 0.0, max_ratio)
    } else {
        let grid = [0.25 * t, 0.5 * t, 0.75 * t, t];
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for &tau in &grid {
            sxy += tau * max_ratio_at(tau)?.ln();
            sxx += tau * tau;
        }
        (max_ratio.ln() / t, sxy / sxx, max_ratio_at(2.0 * t)?)
    };
    let m = m_min.max(m_fit).max(0.0);
    let doubled_within_bound = ratio_doubled <= (2.0 * t * m).exp() * (1.0 + CONTRACTION_TOL);
    let zero_noise = c.components().iter().chain(d.components()).all(|z| z.norm() == 0.0);
    let contraction_required =
        zero_noise && verify_weak_dissipativity(s, trials.max(1), TraceKind::Normalized, rng).passed();
    let passed = m.is_finite() && doubled_within_bound && (!contraction_required || max_ratio <= 1.0 + CONTRACTION_TOL);
    Ok(GrowthReport {
        max_ratio,
        m_min,
        m_fit,
        ratio_doubled,
        doubled_within_bound,
        contraction_required,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct L2Report {
    /// `max ||T_t(y)||_2 / ||y||_2`.
    pub max_ratio: f64,
    /// Whether the structure passed the weak dissipativity check, the hypothesis of the bound.
    pub dissipative: bool,
    pub passed: bool,
}

/// `||T_t(y)||_2 <= ||y||_2` in the trace `L^2` norm, on random `y`.
pub fn l2_contraction_check<R: Rng + ?Sized>(s: &EHStructure, t: f64, trials: usize, rng: &mut R) -> Result<L2Report> {
    let e = semigroup(&s.generator(), t)?;
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let y = ginibre(rng, s.d(), s.d());
        worst = worst.max(hs_norm(&e.apply(&y)) / hs_norm(&y));
    }
    let dissipative = verify_weak_dissipativity(s, trials.max(1), TraceKind::Normalized, rng).passed();
    Ok(L2Report {
        max_ratio: worst,
        dissipative,
        passed: worst <= 1.0 + CONTRACTION_TOL,
    })
}
