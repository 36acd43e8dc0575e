//! Declarative experiment configuration (JSON).
//!
//! ```json
//! { "seed": 7, "experiment": { "kind": "semigroup-trotter", "pairs": 20 } }
//! ```
//!
//! Every object rejects unknown keys. Omitted parameters take the defaults below.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::StepScheme;
use crate::group::{FactorOrder, Presentation};
use crate::linalg::NormKind;
use crate::structure::StructureJson;
use crate::table::OutputFormat;
use crate::uhf::UhfModelJson;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "TROTTERFLOW_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

/// Thresholds used by the pass/fail checks. All are echoed into the output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Structure relations, cocycle identity, Choi positivity, dissipativity, `[r, r*] <= 0`.
    pub residual: f64,
    pub semigroup_law: f64,
    /// Errors of splittings that are exact (commuting generators).
    pub exact: f64,
    /// Smallest accepted log-log convergence slope.
    pub min_order: f64,
    /// Largest accepted error at the finest flow grid.
    pub final_error: f64,
    /// Homomorphism defect when one argument is the identity.
    pub identity_defect: f64,
    /// Trotter-vs-reference gap in units of the reference's own error estimate.
    pub reference_factor: f64,
    /// Monte-Carlo means must lie within this many standard errors.
    pub z_score: f64,
    /// Total-variation bound for walk laws.
    pub tv: f64,
    /// Entrywise agreement of assembled lattice generators.
    pub entrywise: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-10,
            semigroup_law: 1e-9,
            exact: 1e-9,
            min_order: 0.9,
            final_error: 1e-3,
            identity_defect: 1e-12,
            reference_factor: 3.0,
            z_score: 3.0,
            tv: 0.02,
            entrywise: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    StructureVerify(StructureVerifyParams),
    SemigroupTrotter(SemigroupTrotterParams),
    FlowSim(FlowSimParams),
    FlowTrotter(FlowTrotterParams),
    LieBm(LieBmParams),
    GroupWalk(GroupWalkParams),
    Uhf(UhfParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::StructureVerify(_) => "structure-verify",
            Experiment::SemigroupTrotter(_) => "semigroup-trotter",
            Experiment::FlowSim(_) => "flow-sim",
            Experiment::FlowTrotter(_) => "flow-trotter",
            Experiment::LieBm(_) => "lie-bm",
            Experiment::GroupWalk(_) => "group-walk",
            Experiment::Uhf(_) => "uhf",
        }
    }
}

/// Random structures with `d in 1..=d_max`, `k in 1..=k_max`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureVerifyParams {
    pub count: usize,
    pub d_max: usize,
    pub k_max: usize,
    pub r_scale: f64,
    /// Random test matrices per identity.
    pub trials: usize,
    /// Size of the injected defect that must be detected; `null` skips the check.
    pub perturbation: Option<f64>,
    /// Horizon of the semigroup checks.
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structures: Option<Vec<StructureJson>>,
}

impl Default for StructureVerifyParams {
    fn default() -> Self {
        Self {
            count: 50,
            d_max: 6,
            k_max: 3,
            r_scale: 1.0,
            trials: 5,
            perturbation: Some(1e-3),
            t: 1.0,
            structures: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Two independent random structures.
    #[default]
    Random,
    /// Diagonal `H` and `R` with `W = 1`: the generators commute.
    Commuting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupTrotterParams {
    pub pairs: usize,
    pub d: usize,
    pub k: usize,
    pub r_scale: f64,
    pub t: f64,
    pub n_values: Vec<usize>,
    pub norm: NormKind,
    pub pair_kind: PairKind,
    /// Explicit pair; overrides the random generation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structures: Option<[StructureJson; 2]>,
}

impl Default for SemigroupTrotterParams {
    fn default() -> Self {
        Self {
            pairs: 20,
            d: 4,
            k: 1,
            r_scale: 1.0,
            t: 1.0,
            n_values: (1..=8).map(|p| 1 << p).collect(),
            norm: NormKind::Operator,
            pair_kind: PairKind::Random,
            structures: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMeasure {
    /// Vacuum and constant-noise matrix elements against the semigroup oracles.
    #[default]
    MatrixElements,
    /// Homomorphism defect under step refinement.
    HomomorphismDefect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSimParams {
    pub measure: FlowMeasure,
    pub d: usize,
    pub k: usize,
    pub r_scale: f64,
    pub t: f64,
    pub steps: Vec<usize>,
    /// Scheme for matrix elements.
    pub scheme: StepScheme,
    /// Schemes whose defect must decay under refinement.
    pub defect_schemes: Vec<StepScheme>,
    /// Random `(x, y)` pairs for the defect study.
    pub samples: usize,
    /// Constant bra-side noise `c` as `[re, im]` pairs; random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<[f64; 2]>>,
    /// Constant ket-side noise `d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_noise: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureJson>,
}

impl Default for FlowSimParams {
    fn default() -> Self {
        Self {
            measure: FlowMeasure::MatrixElements,
            d: 2,
            k: 1,
            r_scale: 0.7,
            t: 1.0,
            steps: vec![128, 256, 512, 1024],
            scheme: StepScheme::Polar,
            defect_schemes: vec![StepScheme::QsdeEuler, StepScheme::Raw],
            samples: 10,
            c: None,
            d_noise: None,
            structure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowTrotterParams {
    pub d: usize,
    pub r_scale: f64,
    pub t: f64,
    /// Levels compared with their successor; the last one is also compared with the reference.
    pub levels: Vec<u32>,
    pub substeps: usize,
    pub scheme: StepScheme,
    /// Cells of the random step functions `f`, `g` (values of modulus at most one).
    pub noise_cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structures: Option<[StructureJson; 2]>,
}

impl Default for FlowTrotterParams {
    fn default() -> Self {
        Self {
            d: 2,
            r_scale: 0.7,
            t: 1.0,
            levels: (2..=6).collect(),
            substeps: crate::flow::DEFAULT_SUBSTEPS,
            scheme: StepScheme::Polar,
            noise_cells: 4,
            structures: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LieGroupSpec {
    Su2,
    So3,
    Torus { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LieMode {
    /// Entrywise mean against the heat-kernel oracle.
    #[default]
    Mean,
    /// Coupled-level rho diagnostic.
    Rho,
    /// One row per trajectory.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LieBmParams {
    pub group: LieGroupSpec,
    pub mode: LieMode,
    pub t: f64,
    pub n: u32,
    pub samples: usize,
    pub levels: Vec<u32>,
    pub order: FactorOrder,
}

impl Default for LieBmParams {
    fn default() -> Self {
        Self {
            group: LieGroupSpec::Su2,
            mode: LieMode::Mean,
            t: 1.0,
            n: 8,
            samples: 100_000,
            levels: (2..=8).collect(),
            order: FactorOrder::Interleaved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    /// Law of the level-`n` walk against Skellam (for `Z^1`) or the CTMC oracle.
    #[default]
    Law,
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupWalkParams {
    pub group: Presentation,
    /// `lambda_1..lambda_2k`: generators first, then their inverses.
    pub intensities: Vec<f64>,
    pub mode: WalkMode,
    pub t: f64,
    pub n: u32,
    pub samples: usize,
    /// CTMC draws for the oracle law; defaults to `samples`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_samples: Option<usize>,
    /// Ball radius for non-lattice laws.
    pub radius: u64,
}

impl Default for GroupWalkParams {
    fn default() -> Self {
        Self {
            group: Presentation::Lattice { d: 1 },
            intensities: vec![1.0, 0.5],
            mode: WalkMode::Law,
            t: 1.0,
            n: 10,
            samples: 100_000,
            oracle_samples: None,
            radius: 4,
        }
    }
}

/// Clock-shift words such as `"U"`, `"V"`, `"UV"` placed at site 0 of an `N`-level window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UhfPreset {
    #[serde(rename = "N")]
    pub n: usize,
    pub window: Vec<usize>,
    pub r: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UhfParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<UhfPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<UhfModelJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    /// Random `x` for the dissipativity check.
    pub trials: usize,
    /// Random test matrices for the structure relations.
    pub structure_trials: usize,
    /// Times of the trace-norm contraction check.
    pub t_values: Vec<f64>,
}

impl Default for UhfParams {
    fn default() -> Self {
        Self {
            preset: Some(UhfPreset {
                n: 2,
                window: vec![4],
                r: vec!["U".into()],
            }),
            model: None,
            model_path: None,
            trials: 100,
            structure_trials: 3,
            t_values: vec![0.1, 1.0],
        }
    }
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(cfg(format!("{what} must be positive and finite, got {x}")))
    }
}

fn increasing<T: PartialOrd + Copy + std::fmt::Debug>(xs: &[T], min_len: usize, what: &str) -> Result<()> {
    if xs.len() < min_len || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(cfg(format!(
            "{what} must be strictly increasing with at least {min_len} entries, got {xs:?}"
        )));
    }
    Ok(())
}

fn dyadic(t: f64, n: u32, what: &str) -> Result<()> {
    crate::group::dyadic_slots(t, n)
        .map(|_| ())
        .map_err(|e| cfg(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(cfg("empty configuration"));
        }
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range checks that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        let tol = &self.tolerances;
        for (x, name) in [
            (tol.residual, "residual"),
            (tol.semigroup_law, "semigroup_law"),
            (tol.exact, "exact"),
            (tol.min_order, "min_order"),
            (tol.final_error, "final_error"),
            (tol.identity_defect, "identity_defect"),
            (tol.reference_factor, "reference_factor"),
            (tol.z_score, "z_score"),
            (tol.tv, "tv"),
            (tol.entrywise, "entrywise"),
        ] {
            positive(x, &format!("tolerance {name}"))?;
        }
        match &self.experiment {
            Experiment::StructureVerify(p) => {
                if p.structures.is_none() && (p.count == 0 || p.d_max == 0 || p.k_max == 0) {
                    return Err(cfg("count, d_max and k_max must be positive"));
                }
                if p.trials == 0 {
                    return Err(cfg("trials must be positive"));
                }
                if let Some(eps) = p.perturbation {
                    positive(eps, "perturbation")?;
                }
                positive(p.r_scale, "r_scale")?;
                positive(p.t, "t")?;
            }
            Experiment::SemigroupTrotter(p) => {
                if p.structures.is_none() && (p.pairs == 0 || p.d == 0 || p.k == 0) {
                    return Err(cfg("pairs, d and k must be positive"));
                }
                if p.n_values.first() == Some(&0) {
                    return Err(cfg("n_values must be positive"));
                }
                increasing(&p.n_values, 2, "n_values")?;
                positive(p.r_scale, "r_scale")?;
                if !(p.t.is_finite() && p.t >= 0.0) {
                    return Err(cfg(format!("t must be finite and non-negative, got {}", p.t)));
                }
            }
            Experiment::FlowSim(p) => {
                if p.structure.is_none() && (p.d == 0 || p.k == 0) {
                    return Err(cfg("d and k must be positive"));
                }
                if p.steps.first() == Some(&0) {
                    return Err(cfg("steps must be positive"));
                }
                increasing(&p.steps, 2, "steps")?;
                positive(p.t, "t")?;
                positive(p.r_scale, "r_scale")?;
                if p.measure == FlowMeasure::HomomorphismDefect && (p.samples == 0 || p.defect_schemes.is_empty()) {
                    return Err(cfg("the defect study needs samples and at least one scheme"));
                }
                for (v, name) in [(&p.c, "c"), (&p.d_noise, "d_noise")] {
                    if let Some(v) = v {
                        if p.structure.is_none() && v.len() != p.k {
                            return Err(cfg(format!("{name} has {} components for k = {}", v.len(), p.k)));
                        }
                        if v.iter().flatten().any(|x| !x.is_finite()) {
                            return Err(cfg(format!("{name} is not finite")));
                        }
                    }
                }
            }
            Experiment::FlowTrotter(p) => {
                if p.structures.is_none() && p.d == 0 {
                    return Err(cfg("d must be positive"));
                }
                increasing(&p.levels, 2, "levels")?;
                positive(p.t, "t")?;
                positive(p.r_scale, "r_scale")?;
                if p.substeps == 0 || p.noise_cells == 0 {
                    return Err(cfg("substeps and noise_cells must be positive"));
                }
                let first = p.levels[0];
                dyadic(p.t, first, "t")?;
                // step functions must refine into the coarsest Trotter grid
                let coarse = crate::group::dyadic_slots(p.t, first).unwrap_or(0) * p.substeps;
                if !coarse.is_multiple_of(p.noise_cells) {
                    return Err(cfg(format!(
                        "{} noise cells do not divide the {coarse}-cell grid of level {first}",
                        p.noise_cells
                    )));
                }
            }
            Experiment::LieBm(p) => {
                if p.group == (LieGroupSpec::Torus { dim: 0 }) {
                    return Err(cfg("torus dimension must be positive"));
                }
                if !(p.t.is_finite() && p.t >= 0.0) {
                    return Err(cfg("t must be finite and non-negative"));
                }
                if p.samples < 2 {
                    return Err(cfg("at least two samples are needed"));
                }
                match p.mode {
                    LieMode::Rho => {
                        increasing(&p.levels, 1, "levels")?;
                        dyadic(p.t, p.levels[0], "t")?;
                    }
                    _ => dyadic(p.t, p.n, "t")?,
                }
            }
            Experiment::GroupWalk(p) => {
                let k = p.group.rank();
                if k == 0 {
                    return Err(cfg("the group needs at least one generator"));
                }
                if p.intensities.len() != 2 * k {
                    return Err(cfg(format!(
                        "{} intensities for {} generators and inverses",
                        p.intensities.len(),
                        2 * k
                    )));
                }
                for &l in &p.intensities {
                    positive(l, "intensity")?;
                }
                if !(p.t.is_finite() && p.t >= 0.0) {
                    return Err(cfg("t must be finite and non-negative"));
                }
                dyadic(p.t, p.n, "t")?;
                if p.samples == 0 || p.oracle_samples == Some(0) {
                    return Err(cfg("sample counts must be positive"));
                }
            }
            Experiment::Uhf(p) => {
                let sources = [p.preset.is_some(), p.model.is_some(), p.model_path.is_some()];
                if sources.iter().filter(|&&b| b).count() != 1 {
                    return Err(cfg("exactly one of preset, model, model_path is required"));
                }
                if let Some(pr) = &p.preset {
                    if pr.r.is_empty()
                        || pr
                            .r
                            .iter()
                            .any(|w| w.is_empty() || !w.chars().all(|c| c == 'U' || c == 'V'))
                    {
                        return Err(cfg("preset r must be non-empty words over U and V"));
                    }
                }
                if p.trials == 0 || p.structure_trials == 0 {
                    return Err(cfg("trials must be positive"));
                }
                for &t in &p.t_values {
                    positive(t, "t_values entry")?;
                }
            }
        }
        Ok(())
    }

    /// Compact JSON with sorted keys and defaults filled in.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn digest(&self) -> Result<String> {
        let bytes = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(bytes.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Cli,
    Env,
    Config,
}

/// `--seed` beats the environment variable, which beats the config file.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: u64) -> Result<(u64, SeedSource)> {
    if let Some(s) = cli {
        return Ok((s, SeedSource::Cli));
    }
    if let Some(text) = env {
        let s = text
            .trim()
            .parse()
            .map_err(|_| cfg(format!("{SEED_ENV}={text:?} is not a 64-bit unsigned integer")))?;
        return Ok((s, SeedSource::Env));
    }
    Ok((config, SeedSource::Config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse_with_defaults() {
        let c = ExperimentConfig::from_json(r#"{"seed": 3, "experiment": {"kind": "semigroup-trotter"}}"#).unwrap();
        assert_eq!(c.seed, 3);
        match c.experiment {
            Experiment::SemigroupTrotter(p) => assert_eq!(p.n_values, vec![2, 4, 8, 16, 32, 64, 128, 256]),
            _ => panic!(),
        }
        for kind in [
            "structure-verify",
            "flow-sim",
            "flow-trotter",
            "lie-bm",
            "group-walk",
            "uhf",
        ] {
            let text = format!(r#"{{"seed": 1, "experiment": {{"kind": "{kind}"}}}}"#);
            let c = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(c.experiment.name(), kind);
        }
    }

    #[test]
    fn unknown_and_malformed_input_is_rejected() {
        for text in [
            "",
            "{",
            r#"{"seed": 1}"#,
            r#"{"seed": -1, "experiment": {"kind": "uhf"}}"#,
            r#"{"seed": 1, "experiment": {"kind": "nope"}}"#,
            r#"{"seed": 1, "extra": 0, "experiment": {"kind": "uhf"}}"#,
            r#"{"seed": 1, "experiment": {"kind": "uhf", "extra": 0}}"#,
            r#"{"seed": 1, "tolerances": {"typo": 1}, "experiment": {"kind": "uhf"}}"#,
            r#"{"seed": 1, "experiment": {"kind": "semigroup-trotter", "n_values": [4, 2]}}"#,
            r#"{"seed": 1, "experiment": {"kind": "lie-bm", "t": 0.3}}"#,
            r#"{"seed": 1, "experiment": {"kind": "group-walk", "intensities": [1.0]}}"#,
            r#"{"seed": 1, "experiment": {"kind": "uhf", "preset": {"N": 2, "window": [2], "r": ["W"]}}}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn digest_ignores_key_order_and_explicit_defaults() {
        let a = ExperimentConfig::from_json(r#"{"seed": 5, "experiment": {"kind": "lie-bm", "n": 6, "samples": 10}}"#)
            .unwrap();
        let b = ExperimentConfig::from_json(
            r#"{"experiment": {"samples": 10, "n": 6, "kind": "lie-bm", "t": 1.0}, "seed": 5}"#,
        )
        .unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let c = ExperimentConfig::from_json(r#"{"seed": 6, "experiment": {"kind": "lie-bm", "n": 6, "samples": 10}}"#)
            .unwrap();
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
        assert_eq!(a.digest().unwrap().len(), 64);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), (1, SeedSource::Cli));
        assert_eq!(resolve_seed(None, Some(" 2 "), 3).unwrap(), (2, SeedSource::Env));
        assert_eq!(resolve_seed(None, None, 3).unwrap(), (3, SeedSource::Config));
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }

    #[test]
    fn config_roundtrips() {
        let c = ExperimentConfig::from_json(
            r#"{"seed": 9, "format": "json", "experiment": {"kind": "group-walk", "group": {"kind": "free", "k": 2}, "intensities": [0.5, 0.5, 0.5, 0.5]}}"#,
        )
        .unwrap();
        let back = ExperimentConfig::from_json(&c.canonical_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
