//! Executes a configured experiment, evaluates its checks and stamps provenance metadata.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    resolve_seed, Experiment, ExperimentConfig, FlowMeasure, FlowSimParams, FlowTrotterParams, GroupWalkParams,
    LieBmParams, LieGroupSpec, LieMode, PairKind, SeedSource, SemigroupTrotterParams, StructureVerifyParams,
    Tolerances, UhfParams, WalkMode,
};
use crate::error::{Error, Result};
use crate::flow::{
    flow_matrix_element, homomorphism_defect, trotter_flow_matrix_element, FlowDiscretization, FlowTrotter,
    StepFunction, StepScheme,
};
use crate::group::{
    ctmc_walk_oracle, empirical_ball_law, heat_expectation_oracle, lie_mean_estimate, lie_samples_table,
    rho_convergence_diagnostic, sample_group_walk_trotter, skellam_pmf, skellam_tv, total_variation,
    walk_samples_table, DiscreteGroupModel, GroupElement, LieGroupModel, Presentation,
};
use crate::linalg::{
    c64, choi_matrix, ginibre, identity, max_abs, min_eigenvalue, operator_norm, random_hermitian, random_vector,
    trace_norm, vector_from_json, ComplexMatrix,
};
use crate::rng::{stream, RNG_ALGORITHM};
use crate::semigroup::{loglog_slope, pairwise_order, semigroup, trotter_errors};
use crate::structure::{
    build_inner_structure, combined_structure, perturbed_generator, random_inner_structure, verify_cocycle,
    verify_structure_relations, verify_weak_dissipativity, EHStructure, NoiseVector, TraceKind,
};
use crate::table::{Cell, ResultTable};
use crate::uhf::{
    build_uhf_flow_structures, check_commutator_condition, clock_shift, embed, local_lindbladian, matsui_seminorm,
    LatticeWindow, UhfModelJson,
};

/// Oracle draws of a walk use stream indices from here on, trajectories below it.
pub const ORACLE_STREAM_OFFSET: u64 = 1 << 40;

/// One pass/fail assertion with the threshold that was applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            bound,
            passed: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=",
            bound,
            passed: value >= bound,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    Failed,
    ConfigError,
    NumericFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Passed => 0,
            RunStatus::Failed => 1,
            RunStatus::ConfigError => 2,
            RunStatus::NumericFailure => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table: ResultTable,
    pub checks: Vec<Check>,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Parses `text`, resolves the seed and runs. `Err` means a configuration error (exit 2).
pub fn run_config_text(text: &str, cli_seed: Option<u64>, env_seed: Option<&str>) -> Result<RunOutcome> {
    let config = ExperimentConfig::from_json(text)?;
    let (seed, source) = resolve_seed(cli_seed, env_seed, config.seed)?;
    Ok(run(&config, seed, source))
}

/// Runs the experiment with the given seed. Configuration problems found while running
/// (e.g. an unreadable model file) give [`RunStatus::ConfigError`].
pub fn run(config: &ExperimentConfig, seed: u64, source: SeedSource) -> RunOutcome {
    let start = Instant::now();
    let tol = &config.tolerances;
    let result = match &config.experiment {
        Experiment::StructureVerify(p) => structure_verify(p, tol, seed),
        Experiment::SemigroupTrotter(p) => semigroup_trotter(p, tol, seed),
        Experiment::FlowSim(p) => flow_sim(p, tol, seed),
        Experiment::FlowTrotter(p) => flow_trotter(p, tol, seed),
        Experiment::LieBm(p) => lie_bm(p, tol, seed),
        Experiment::GroupWalk(p) => group_walk(p, tol, seed),
        Experiment::Uhf(p) => uhf(p, tol, seed),
    };
    let (mut table, checks, status) = match result {
        Ok((table, checks)) => {
            let status = if checks.iter().all(|c| c.passed) {
                RunStatus::Passed
            } else {
                RunStatus::Failed
            };
            (table, checks, status)
        }
        Err(e) => {
            let status = if matches!(e, Error::Config(_)) {
                RunStatus::ConfigError
            } else {
                RunStatus::NumericFailure
            };
            let mut t = ResultTable::new(["error", "message"]);
            let kind = if status == RunStatus::ConfigError {
                "config"
            } else {
                "numeric"
            };
            t.push_row(vec![kind.into(), e.to_string().into()]).expect("two cells");
            (t, Vec::new(), status)
        }
    };
    table.set_meta("experiment", config.experiment.name());
    table.set_meta("seed", seed);
    table.set_meta("seed_source", serde_json::to_value(source).unwrap_or_default());
    table.set_meta("config_digest", config.digest().unwrap_or_default());
    table.set_meta("tolerances", serde_json::to_value(tol).unwrap_or_default());
    table.set_meta("checks", serde_json::to_value(&checks).unwrap_or_default());
    table.set_meta("status", serde_json::to_value(status).unwrap_or_default());
    table.set_meta("rng", RNG_ALGORITHM);
    table.set_meta("version", format!("trotterflow {}", env!("CARGO_PKG_VERSION")));
    table.set_meta("wall_time_s", start.elapsed().as_secs_f64());
    RunOutcome { table, checks, status }
}

type Run = Result<(ResultTable, Vec<Check>)>;

fn nonfinite_to_nan(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn structure_from(doc: &crate::structure::StructureJson) -> Result<EHStructure> {
    EHStructure::from_json(doc).map_err(|e| Error::Config(format!("structure: {e}")))
}

fn structure_verify(p: &StructureVerifyParams, tol: &Tolerances, seed: u64) -> Run {
    let mut rng = stream(seed, 0);
    let structures: Vec<EHStructure> = match &p.structures {
        Some(docs) => docs.iter().map(structure_from).collect::<Result<_>>()?,
        None => (0..p.count)
            .map(|_| {
                let d = rng.random_range(1..=p.d_max);
                let k = rng.random_range(1..=p.k_max);
                random_inner_structure(&mut rng, d, k, p.r_scale)
            })
            .collect(),
    };
    let mut table = ResultTable::new([
        "index",
        "d",
        "k",
        "relation_residual",
        "adjoint_residual",
        "cocycle_residual",
        "cocycle_adjoint_residual",
        "unital_residual",
        "choi_min_eigenvalue",
        "semigroup_law_residual",
        "perturbed_residual",
        "perturbation_detected",
    ]);
    let (mut rel, mut adj, mut coc, mut unital, mut law) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut choi = f64::INFINITY;
    let mut detected = 0;
    for (i, s) in structures.iter().enumerate() {
        let d = s.d();
        let r = verify_structure_relations(s, p.trials, &mut rng);
        let c = verify_cocycle(s, p.trials, &mut rng);
        let l = s.generator();
        let e = semigroup(&l, p.t)?;
        let u = max_abs(&(e.apply(&identity(d)) - identity(d)));
        let cm = min_eigenvalue(&choi_matrix(&e))?;
        let split = semigroup(&l, 0.4 * p.t)?.compose(&semigroup(&l, 0.6 * p.t)?)?;
        let lr = operator_norm(&(e.matrix() - split.matrix()))?;
        let (pert, det) = match p.perturbation {
            Some(eps) => {
                let mu = rng.random_range(0..=s.k());
                let nu = rng.random_range(0..=s.k());
                let sp = s.clone().with_injected_perturbation(mu, nu, eps)?;
                let rp = verify_structure_relations(&sp, p.trials, &mut rng);
                let cp = verify_cocycle(&sp, p.trials, &mut rng);
                let worst = rp.max_residual().max(cp.max_residual).max(cp.adjoint_residual);
                let hit = worst > tol.residual;
                detected += hit as usize;
                (Cell::float(worst), Cell::from(hit))
            }
            None => (Cell::Null, Cell::Null),
        };
        rel = rel.max(r.relation_residual);
        adj = adj.max(r.adjoint_residual);
        coc = coc.max(c.max_residual).max(c.adjoint_residual);
        unital = unital.max(u);
        choi = choi.min(cm);
        law = law.max(lr);
        table.push_row(vec![
            i.into(),
            d.into(),
            s.k().into(),
            Cell::float(r.relation_residual),
            Cell::float(r.adjoint_residual),
            Cell::float(c.max_residual),
            Cell::float(c.adjoint_residual),
            Cell::float(u),
            Cell::float(cm),
            Cell::float(lr),
            pert,
            det,
        ])?;
    }
    let mut checks = vec![
        Check::at_most("relation_residual", rel, tol.residual),
        Check::at_most("adjoint_residual", adj, tol.residual),
        Check::at_most("cocycle_residual", coc, tol.residual),
        Check::at_most("unital_residual", unital, tol.residual),
        Check::at_least("choi_min_eigenvalue", choi, -tol.residual),
        Check::at_most("semigroup_law_residual", law, tol.semigroup_law),
    ];
    if p.perturbation.is_some() {
        let frac = detected as f64 / structures.len().max(1) as f64;
        checks.push(Check::at_least("perturbations_detected", frac, 1.0));
    }
    Ok((table, checks))
}

/// Diagonal `H`, diagonal blocks of `R`, `W = 1`: every such generator is diagonal on the
/// matrix units, so any two commute.
fn commuting_structure(rng: &mut ChaCha8Rng, d: usize, k: usize, r_scale: f64) -> Result<EHStructure> {
    let mut h = ComplexMatrix::zeros(d, d);
    let mut r = ComplexMatrix::zeros(d * k, d);
    for i in 0..d {
        h[(i, i)] = c64(rng.random_range(-1.0..1.0), 0.0);
        for l in 0..k {
            r[(l * d + i, i)] = c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * r_scale;
        }
    }
    build_inner_structure(h, identity(d * k), r)
}

fn semigroup_trotter(p: &SemigroupTrotterParams, tol: &Tolerances, seed: u64) -> Run {
    let mut rng = stream(seed, 0);
    let pairs: Vec<(EHStructure, EHStructure)> = match &p.structures {
        Some([a, b]) => vec![(structure_from(a)?, structure_from(b)?)],
        None => (0..p.pairs)
            .map(|_| match p.pair_kind {
                PairKind::Random => Ok((
                    random_inner_structure(&mut rng, p.d, p.k, p.r_scale),
                    random_inner_structure(&mut rng, p.d, p.k, p.r_scale),
                )),
                PairKind::Commuting => Ok((
                    commuting_structure(&mut rng, p.d, p.k, p.r_scale)?,
                    commuting_structure(&mut rng, p.d, p.k, p.r_scale)?,
                )),
            })
            .collect::<Result<_>>()?,
    };
    let mut table = ResultTable::new(["pair", "n", "error", "estimated_order", "loglog_slope"]);
    let nf: Vec<f64> = p.n_values.iter().map(|&n| n as f64).collect();
    let mut min_slope = f64::INFINITY;
    let mut max_err = 0.0f64;
    let mut all_converge = true;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let errs = trotter_errors(&a.generator(), &b.generator(), p.t, &p.n_values, p.norm)?;
        let slope = loglog_slope(&nf, &errs);
        let pair_max = errs.iter().copied().fold(0.0, f64::max);
        max_err = max_err.max(pair_max);
        min_slope = min_slope.min(nonfinite_to_nan(slope));
        all_converge &= pair_max <= tol.exact || slope.is_some_and(|s| s >= tol.min_order);
        for (j, (&n, &e)) in p.n_values.iter().zip(&errs).enumerate() {
            let order = if j == 0 {
                None
            } else {
                pairwise_order(nf[j - 1], errs[j - 1], nf[j], e)
            };
            table.push_row(vec![i.into(), n.into(), Cell::float(e), order.into(), slope.into()])?;
        }
    }
    let checks = match (&p.structures, p.pair_kind) {
        (Some(_), _) => vec![Check::holds("converges", all_converge)],
        (None, PairKind::Random) => vec![Check::at_least("min_loglog_slope", min_slope, tol.min_order)],
        (None, PairKind::Commuting) => vec![Check::at_most("max_error", max_err, tol.exact)],
    };
    Ok((table, checks))
}

fn noise(v: &Option<Vec<[f64; 2]>>, rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    match v {
        Some(v) => vector_from_json(v),
        None => random_vector(rng, k).into_iter().map(|z| z * 0.5).collect(),
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let v = random_vector(rng, n);
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn flow_sim(p: &FlowSimParams, tol: &Tolerances, seed: u64) -> Run {
    let mut rng = stream(seed, 0);
    let s = match &p.structure {
        Some(doc) => structure_from(doc)?,
        None => random_inner_structure(&mut rng, p.d, p.k, p.r_scale),
    };
    let (d, k) = (s.d(), s.k());
    let nf: Vec<f64> = p.steps.iter().map(|&n| n as f64).collect();
    match p.measure {
        FlowMeasure::MatrixElements => {
            // unit-scale probes, so the absolute error bound does not depend on their draw
            let x = ginibre(&mut rng, d, d);
            let x = &x * c64(1.0 / operator_norm(&x)?, 0.0);
            let (u, v) = (unit_vector(&mut rng, d), unit_vector(&mut rng, d));
            let c = noise(&p.c, &mut rng, k);
            let dn = noise(&p.d_noise, &mut rng, k);
            if c.len() != k || dn.len() != k {
                return Err(Error::Config(format!("noise vectors must have {k} components")));
            }
            let vac_oracle = crate::flow::sandwich(&semigroup(&s.generator(), p.t)?.apply(&x), &u, &v);
            let pg = perturbed_generator(&s, &NoiseVector::new(c.clone())?, &NoiseVector::new(dn.clone())?)?;
            let cd_oracle = crate::flow::sandwich(&semigroup(&pg, p.t)?.apply(&x), &u, &v);
            let zero = StepFunction::zeros(k, p.t, 1)?;
            let f = StepFunction::constant(p.t, 1, &dn)?;
            let g = StepFunction::constant(p.t, 1, &c)?;
            let mut vac = Vec::new();
            let mut cd = Vec::new();
            for &n in &p.steps {
                let disc = FlowDiscretization::new(s.clone(), p.t, n, p.scheme)?;
                vac.push((flow_matrix_element(&disc, &x, &u, &v, &zero, &zero)? - vac_oracle).norm());
                cd.push((flow_matrix_element(&disc, &x, &u, &v, &f, &g)? - cd_oracle).norm());
            }
            let mut table = ResultTable::new(["steps", "vacuum_error", "cd_error", "vacuum_order", "cd_order"]);
            for j in 0..p.steps.len() {
                let ord = |e: &[f64]| {
                    if j == 0 {
                        None
                    } else {
                        pairwise_order(nf[j - 1], e[j - 1], nf[j], e[j])
                    }
                };
                table.push_row(vec![
                    p.steps[j].into(),
                    Cell::float(vac[j]),
                    Cell::float(cd[j]),
                    ord(&vac).into(),
                    ord(&cd).into(),
                ])?;
            }
            let last = p.steps.len() - 1;
            let checks = vec![
                Check::at_least("vacuum_order", nonfinite_to_nan(loglog_slope(&nf, &vac)), tol.min_order),
                Check::at_least("cd_order", nonfinite_to_nan(loglog_slope(&nf, &cd)), tol.min_order),
                Check::at_most("vacuum_final_error", vac[last], tol.final_error),
                Check::at_most("cd_final_error", cd[last], tol.final_error),
            ];
            Ok((table, checks))
        }
        FlowMeasure::HomomorphismDefect => {
            let mut table =
                ResultTable::new(["scheme", "sample", "steps", "defect", "identity_left", "identity_right"]);
            let mut min_slope: BTreeMap<&'static str, f64> = BTreeMap::new();
            let mut worst_identity = 0.0f64;
            for sample in 0..p.samples {
                let x = ginibre(&mut rng, d, d);
                let y = ginibre(&mut rng, d, d);
                let (u, v) = (random_vector(&mut rng, d), random_vector(&mut rng, d));
                let f = StepFunction::constant(p.t, 1, &noise(&None, &mut rng, k))?;
                let g = StepFunction::constant(p.t, 1, &noise(&None, &mut rng, k))?;
                for &scheme in &p.defect_schemes {
                    let name = scheme_name(scheme);
                    let unital = scheme != StepScheme::Raw;
                    let mut defects = Vec::new();
                    for &n in &p.steps {
                        let disc = FlowDiscretization::new(s.clone(), p.t, n, scheme)?;
                        let def = homomorphism_defect(&disc, &x, &y, &u, &v, &f, &g)?;
                        let (il, ir) = if unital {
                            let il = homomorphism_defect(&disc, &identity(d), &y, &u, &v, &f, &g)?;
                            let ir = homomorphism_defect(&disc, &x, &identity(d), &u, &v, &f, &g)?;
                            worst_identity = worst_identity.max(il).max(ir);
                            (Cell::float(il), Cell::float(ir))
                        } else {
                            (Cell::Null, Cell::Null)
                        };
                        defects.push(def);
                        table.push_row(vec![name.into(), sample.into(), n.into(), Cell::float(def), il, ir])?;
                    }
                    let slope = nonfinite_to_nan(loglog_slope(&nf, &defects));
                    let e = min_slope.entry(name).or_insert(f64::INFINITY);
                    *e = if slope.is_nan() { f64::NAN } else { e.min(slope) };
                }
            }
            let mut checks: Vec<Check> = min_slope
                .iter()
                .map(|(name, &s)| Check::at_least(format!("defect_order_{name}"), s, tol.min_order))
                .collect();
            if p.defect_schemes.iter().any(|&s| s != StepScheme::Raw) {
                checks.push(Check::at_most("identity_defect", worst_identity, tol.identity_defect));
            }
            Ok((table, checks))
        }
    }
}

fn scheme_name(s: StepScheme) -> &'static str {
    match s {
        StepScheme::Polar => "polar",
        StepScheme::Raw => "raw",
        StepScheme::QsdeEuler => "qsde_euler",
    }
}

/// Uniform on the closed unit disc.
fn disc_point(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * rng.random::<f64>())
}

fn flow_trotter(p: &FlowTrotterParams, tol: &Tolerances, seed: u64) -> Run {
    let mut rng = stream(seed, 0);
    let (s1, s2) = match &p.structures {
        Some([a, b]) => (structure_from(a)?, structure_from(b)?),
        None => (
            random_inner_structure(&mut rng, p.d, 1, p.r_scale),
            random_inner_structure(&mut rng, p.d, 1, p.r_scale),
        ),
    };
    let d = s1.d();
    let k = s1.k() + s2.k();
    let x = ginibre(&mut rng, d, d);
    let (u, v) = (random_vector(&mut rng, d), random_vector(&mut rng, d));
    let mut step_values = || -> Vec<Vec<Complex64>> {
        (0..p.noise_cells)
            .map(|_| (0..k).map(|_| disc_point(&mut rng)).collect())
            .collect()
    };
    let (fv, gv) = (step_values(), step_values());
    let cases = [
        ("zero", StepFunction::zeros(k, p.t, 1)?, StepFunction::zeros(k, p.t, 1)?),
        ("step", StepFunction::new(k, p.t, fv)?, StepFunction::new(k, p.t, gv)?),
    ];
    let tr = FlowTrotter::new(s1.clone(), s2.clone(), p.t)?
        .with_substeps(p.substeps)?
        .with_scheme(p.scheme);
    let combined = combined_structure(&s1, &s2)?;
    let last = *p.levels.last().expect("validated");
    let n_ref = tr.slots(last)? * p.substeps;
    let ref_n = FlowDiscretization::new(combined.clone(), p.t, n_ref, p.scheme)?;
    let ref_2n = FlowDiscretization::new(combined, p.t, 2 * n_ref, p.scheme)?;

    let mut table = ResultTable::new([
        "case",
        "n",
        "re",
        "im",
        "level_diff",
        "reference_gap",
        "extrapolated_gap",
        "reference_error",
    ]);
    let mut checks = Vec::new();
    for (name, f, g) in &cases {
        let mut values = Vec::new();
        for &n in p.levels.iter().chain(std::iter::once(&(last + 1))) {
            values.push(trotter_flow_matrix_element(&tr, n, &x, &u, &v, f, g)?);
        }
        let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let r_n = flow_matrix_element(&ref_n, &x, &u, &v, f, g)?;
        let r_2n = flow_matrix_element(&ref_2n, &x, &u, &v, f, g)?;
        let ref_err = 2.0 * (r_n - r_2n).norm();
        let at_last = values[p.levels.len() - 1];
        let gap = (at_last - r_n).norm();
        // first-order Richardson step from the last two requested levels
        let extrapolated = if p.levels.len() >= 2 {
            2.0 * at_last - values[p.levels.len() - 2]
        } else {
            at_last
        };
        let ex_gap = (extrapolated - r_n).norm();
        for (j, &n) in p.levels.iter().enumerate() {
            let (rg, eg, re) = if n == last {
                (Cell::float(gap), Cell::float(ex_gap), Cell::float(ref_err))
            } else {
                (Cell::Null, Cell::Null, Cell::Null)
            };
            table.push_row(vec![
                (*name).into(),
                Cell::Int(n as i64),
                Cell::float(values[j].re),
                Cell::float(values[j].im),
                Cell::float(diffs[j]),
                rg,
                eg,
                re,
            ])?;
        }
        checks.push(Check::holds(
            format!("monotone_{name}"),
            diffs.windows(2).all(|w| w[1] < w[0]),
        ));
        checks.push(Check::at_most(
            format!("reference_ratio_{name}"),
            ex_gap / ref_err,
            tol.reference_factor,
        ));
    }
    Ok((table, checks))
}

fn lie_model(spec: LieGroupSpec) -> Result<LieGroupModel> {
    Ok(match spec {
        LieGroupSpec::Su2 => LieGroupModel::su2(),
        LieGroupSpec::So3 => LieGroupModel::so3(),
        LieGroupSpec::Torus { dim } => LieGroupModel::torus(dim)?,
    })
}

fn lie_bm(p: &LieBmParams, tol: &Tolerances, seed: u64) -> Run {
    let g = lie_model(p.group)?;
    match p.mode {
        LieMode::Mean => {
            let est = lie_mean_estimate(&g, p.t, p.n, p.order, p.samples, seed)?;
            let oracle = heat_expectation_oracle(&g, p.t)?;
            let mut table = ResultTable::new([
                "row",
                "col",
                "mean_re",
                "mean_im",
                "se_re",
                "se_im",
                "oracle_re",
                "oracle_im",
            ]);
            for i in 0..g.dim() {
                for j in 0..g.dim() {
                    table.push_row(vec![
                        i.into(),
                        j.into(),
                        Cell::float(est.mean[(i, j)].re),
                        Cell::float(est.mean[(i, j)].im),
                        Cell::float(est.se_re[(i, j)]),
                        Cell::float(est.se_im[(i, j)]),
                        Cell::float(oracle[(i, j)].re),
                        Cell::float(oracle[(i, j)].im),
                    ])?;
                }
            }
            Ok((
                table,
                vec![Check::at_most("max_z_score", est.max_z_score(&oracle), tol.z_score)],
            ))
        }
        LieMode::Rho => {
            let table = rho_convergence_diagnostic(&g, p.t, &p.levels, p.order, p.samples, seed)?;
            let col: Vec<f64> = table
                .column_f64("mean_rho")
                .unwrap_or_default()
                .into_iter()
                .map(nonfinite_to_nan)
                .collect();
            let ok = col.windows(2).all(|w| w[1] < w[0]);
            Ok((table, vec![Check::holds("rho_strictly_decreasing", ok)]))
        }
        LieMode::Samples => Ok((lie_samples_table(&g, p.t, p.n, p.order, p.samples, seed)?, Vec::new())),
    }
}

fn group_walk(p: &GroupWalkParams, tol: &Tolerances, seed: u64) -> Run {
    let g = DiscreteGroupModel::new(p.group, p.intensities.clone())?;
    if p.mode == WalkMode::Samples {
        return Ok((walk_samples_table(&g, p.t, p.n, p.samples, seed)?, Vec::new()));
    }
    let trotter: Vec<GroupElement> = (0..p.samples)
        .map(|i| sample_group_walk_trotter(&g, p.t, p.n, &mut stream(seed, i as u64)))
        .collect::<Result<_>>()?;
    if p.group == (Presentation::Lattice { d: 1 }) {
        let zs: Vec<i64> = trotter
            .iter()
            .map(|e| match e {
                GroupElement::Vector(v) => v[0],
                GroupElement::Word(_) => unreachable!("lattice elements are vectors"),
            })
            .collect();
        let (mu1, mu2) = (p.intensities[0] * p.t, p.intensities[1] * p.t);
        let tv = skellam_tv(&zs, mu1, mu2);
        let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
        for &z in &zs {
            *counts.entry(z).or_default() += 1.0 / zs.len() as f64;
        }
        let mut table = ResultTable::new(["value", "trotter", "oracle"]);
        for (&z, &c) in &counts {
            table.push_row(vec![
                Cell::Int(z),
                Cell::float(c),
                Cell::float(skellam_pmf(z, mu1, mu2)),
            ])?;
        }
        return Ok((table, vec![Check::at_most("tv_distance", tv, tol.tv)]));
    }
    let oracle: Vec<GroupElement> = (0..p.oracle_samples.unwrap_or(p.samples))
        .map(|i| ctmc_walk_oracle(&g, p.t, &mut stream(seed, ORACLE_STREAM_OFFSET + i as u64)))
        .collect::<Result<_>>()?;
    let a = empirical_ball_law(&g, &trotter, p.radius);
    let b = empirical_ball_law(&g, &oracle, p.radius);
    let tv = total_variation(&a, &b);
    let mut table = ResultTable::new(["element", "trotter", "oracle"]);
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    for key in keys {
        let pa = a.get(key).copied().unwrap_or(0.0);
        let pb = b.get(key).copied().unwrap_or(0.0);
        table.push_row(vec![key.clone().into(), Cell::float(pa), Cell::float(pb)])?;
    }
    Ok((table, vec![Check::at_most("tv_distance", tv, tol.tv)]))
}

fn uhf_model(p: &UhfParams) -> Result<(LatticeWindow, Vec<crate::uhf::LocalOperator>)> {
    let as_config = |e: Error| Error::Config(format!("uhf model: {e}"));
    if let Some(pr) = &p.preset {
        let w = LatticeWindow::new(pr.n, pr.window.clone()).map_err(as_config)?;
        let (u, v) = clock_shift(pr.n).map_err(as_config)?;
        let r_list =
            pr.r.iter()
                .map(|word| {
                    let m = word
                        .chars()
                        .fold(identity(pr.n), |acc, c| if c == 'U' { acc * &u } else { acc * &v });
                    embed(&m, 0, &w)
                })
                .collect::<Result<_>>()
                .map_err(as_config)?;
        return Ok((w, r_list));
    }
    let doc: UhfModelJson = match (&p.model, &p.model_path) {
        (Some(m), _) => m.clone(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Error::Config("no uhf model given".into())),
    };
    doc.load().map_err(as_config)
}

fn uhf(p: &UhfParams, tol: &Tolerances, seed: u64) -> Run {
    let (w, r_list) = uhf_model(p)?;
    let mut rng = stream(seed, 0);
    let built = build_uhf_flow_structures(&r_list, &w)?;
    let dim = w.dim();
    let mut checks = Vec::new();

    let comm = r_list
        .iter()
        .map(|r| check_commutator_condition(r).map(|c| c.max_eigenvalue))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("commutator_max_eigenvalue", comm, tol.residual));

    let lattice = local_lindbladian(&r_list, &w)?;
    let generator = built.combined.generator();
    checks.push(Check::at_most(
        "generator_entrywise_gap",
        max_abs(&(generator.matrix() - lattice.matrix())),
        tol.entrywise,
    ));

    let rel = verify_structure_relations(&built.combined, p.structure_trials, &mut rng);
    checks.push(Check::at_most(
        "structure_relation_residual",
        rel.relation_residual,
        tol.residual,
    ));
    checks.push(Check::at_most(
        "structure_adjoint_residual",
        rel.adjoint_residual,
        tol.residual,
    ));
    let coc = verify_cocycle(&built.combined, p.structure_trials, &mut rng);
    checks.push(Check::at_most(
        "cocycle_residual",
        coc.max_residual.max(coc.adjoint_residual),
        tol.residual,
    ));

    let diss = verify_weak_dissipativity(&built.combined, p.trials, TraceKind::Normalized, &mut rng);
    checks.push(Check::at_most("dissipativity_max", diss.max_value, tol.residual));

    let one = identity(dim);
    let mut annihilation = 0.0f64;
    for s in &built.terms {
        for mu in 0..=s.k() {
            for nu in 0..=s.k() {
                annihilation = annihilation.max(max_abs(&s.theta(mu, nu, &one)));
            }
        }
    }
    checks.push(Check::at_most("identity_annihilation", annihilation, tol.residual));

    for &t in &p.t_values {
        let et = semigroup(&generator, t)?;
        let mut growth = f64::NEG_INFINITY;
        for _ in 0..20 {
            let x = random_hermitian(&mut rng, dim);
            growth = growth.max(trace_norm(&et.apply(&x))? - trace_norm(&x)?);
        }
        checks.push(Check::at_most(format!("trace_norm_growth_t{t}"), growth, tol.residual));
    }

    let mut table = ResultTable::new(["check", "value", "bound", "passed"]);
    for c in &checks {
        table.push_row(vec![
            c.name.clone().into(),
            Cell::float(c.value),
            Cell::float(c.bound),
            c.passed.into(),
        ])?;
    }
    for (m, r) in r_list.iter().enumerate() {
        let value = matsui_seminorm(r, &w)?;
        table.push_row(vec![
            format!("matsui_seminorm_r{m}").into(),
            Cell::float(value),
            Cell::Null,
            Cell::Null,
        ])?;
    }
    table.set_meta("commutator_warnings", json!(built.warnings));
    table.set_meta("channels", built.combined.k());
    Ok((table, checks))
}
