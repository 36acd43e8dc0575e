//! End-to-end acceptance run: every criterion at its pinned tolerance, one line each.
//!
//! Runs as a plain binary (no libtest harness) so the lines are always printed.

use std::time::{Duration, Instant};

use trotterflow::runner::{run_config_text, RunOutcome, RunStatus};
use trotterflow::table::OutputFormat;

const SEED: u64 = 20_240_601;

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
}

fn config(experiment: &str) -> String {
    format!(r#"{{"seed": {SEED}, "experiment": {experiment}}}"#)
}

fn execute(experiment: &str) -> RunOutcome {
    let out = run_config_text(&config(experiment), None, None).expect("acceptance configs are valid");
    if out.status == RunStatus::NumericFailure || out.status == RunStatus::ConfigError {
        eprintln!("    run error: {:?}", out.table.rows());
    }
    out
}

fn summary(out: &RunOutcome, names: &[&str]) -> (bool, String) {
    let mut ok = out.status != RunStatus::NumericFailure && out.status != RunStatus::ConfigError;
    let mut parts = Vec::new();
    for name in names {
        match out.check(name) {
            Some(c) => {
                ok &= c.passed;
                parts.push(format!("{name}={:.3e}{}{:e}", c.value, c.relation, c.bound));
            }
            None => {
                ok = false;
                parts.push(format!("{name}=missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

const STRUCTURE: &str = r#"{"kind": "structure-verify", "count": 50, "d_max": 6, "k_max": 3, "perturbation": 1e-3}"#;
const TROTTER_RANDOM: &str =
    r#"{"kind": "semigroup-trotter", "pairs": 20, "d": 4, "t": 1.0, "n_values": [2, 4, 8, 16, 32, 64, 128, 256]}"#;
const TROTTER_COMMUTING: &str = r#"{"kind": "semigroup-trotter", "pairs": 20, "d": 4, "t": 1.0, "pair_kind": "commuting", "n_values": [2, 4, 8, 16, 32, 64, 128, 256]}"#;
const FLOW: &str = r#"{"kind": "flow-sim", "d": 2, "k": 1, "steps": [128, 256, 512, 1024]}"#;
const DEFECT: &str = r#"{"kind": "flow-sim", "measure": "homomorphism_defect", "d": 2, "k": 1, "samples": 10, "steps": [128, 256, 512, 1024]}"#;
const FLOW_TROTTER: &str = r#"{"kind": "flow-trotter", "d": 2, "levels": [2, 3, 4, 5, 6]}"#;
const LIE_MEAN: &str =
    r#"{"kind": "lie-bm", "group": {"name": "su2"}, "mode": "mean", "t": 1.0, "n": 8, "samples": 100000}"#;
const LIE_RHO: &str = r#"{"kind": "lie-bm", "group": {"name": "su2"}, "mode": "rho", "t": 1.0, "levels": [2, 3, 4, 5, 6, 7, 8], "samples": 10000}"#;
const WALK_Z: &str = r#"{"kind": "group-walk", "group": {"kind": "lattice", "d": 1}, "intensities": [1.0, 0.5], "t": 1.0, "n": 10, "samples": 100000}"#;
const WALK_F2: &str = r#"{"kind": "group-walk", "group": {"kind": "free", "k": 2}, "intensities": [0.5, 0.5, 0.5, 0.5], "t": 1.0, "n": 10, "samples": 100000, "oracle_samples": 1000000, "radius": 4}"#;
const UHF: &str = r#"{"kind": "uhf", "preset": {"N": 2, "window": [4], "r": ["U"]}, "trials": 100}"#;

fn main() {
    let mut results = Vec::new();
    let mut report = |c: Criterion, started: Instant, ok: bool, detail: String| {
        let elapsed = started.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let pass = ok && in_time;
        let limit = c.limit.map(|l| format!(" limit {}s", l.as_secs())).unwrap_or_default();
        println!(
            "acceptance {:>2} {} {}: {} [{:.1}s{}]",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            detail,
            elapsed.as_secs_f64(),
            limit
        );
        results.push(pass);
    };

    let t = Instant::now();
    let structure = execute(STRUCTURE);
    let (ok, detail) = summary(
        &structure,
        &[
            "relation_residual",
            "adjoint_residual",
            "cocycle_residual",
            "perturbations_detected",
        ],
    );
    report(
        Criterion {
            id: 1,
            title: "structure suite",
            limit: Some(Duration::from_secs(30)),
        },
        t,
        ok,
        detail,
    );

    let t = Instant::now();
    let (ok, detail) = summary(
        &structure,
        &["unital_residual", "choi_min_eigenvalue", "semigroup_law_residual"],
    );
    report(
        Criterion {
            id: 2,
            title: "semigroup suite",
            limit: None,
        },
        t,
        ok,
        detail,
    );

    let t = Instant::now();
    let random = execute(TROTTER_RANDOM);
    let commuting = execute(TROTTER_COMMUTING);
    let (ok_r, d_r) = summary(&random, &["min_loglog_slope"]);
    let (ok_c, d_c) = summary(&commuting, &["max_error"]);
    report(
        Criterion {
            id: 3,
            title: "semigroup Trotter-Kato",
            limit: Some(Duration::from_secs(60)),
        },
        t,
        ok_r && ok_c,
        format!("{d_r} {d_c}"),
    );

    let t = Instant::now();
    let flow = execute(FLOW);
    let (ok, detail) = summary(
        &flow,
        &["vacuum_order", "cd_order", "vacuum_final_error", "cd_final_error"],
    );
    report(
        Criterion {
            id: 4,
            title: "flow simulator consistency",
            limit: Some(Duration::from_secs(120)),
        },
        t,
        ok,
        detail,
    );

    let t = Instant::now();
    let defect = execute(DEFECT);
    let (ok, detail) = summary(
        &defect,
        &["defect_order_qsde_euler", "defect_order_raw", "identity_defect"],
    );
    report(
        Criterion {
            id: 5,
            title: "homomorphism defect",
            limit: None,
        },
        t,
        ok,
        detail,
    );

    let t = Instant::now();
    let ft = execute(FLOW_TROTTER);
    let (ok, detail) = summary(
        &ft,
        &[
            "monotone_zero",
            "reference_ratio_zero",
            "monotone_step",
            "reference_ratio_step",
        ],
    );
    report(
        Criterion {
            id: 6,
            title: "flow-level Trotter",
            limit: Some(Duration::from_secs(300)),
        },
        t,
        ok,
        detail,
    );

    let t = Instant::now();
    let mean = execute(LIE_MEAN);
    let rho = execute(LIE_RHO);
    let (ok_m, d_m) = summary(&mean, &["max_z_score"]);
    let (ok_r, d_r) = summary(&rho, &["rho_strictly_decreasing"]);
    report(
        Criterion {
            id: 7,
            title: "Lie group Brownian motion",
            limit: Some(Duration::from_secs(120)),
        },
        t,
        ok_m && ok_r,
        format!("{d_m} {d_r}"),
    );

    let t = Instant::now();
    let wz = execute(WALK_Z);
    let wf = execute(WALK_F2);
    let (ok_z, d_z) = summary(&wz, &["tv_distance"]);
    let (ok_f, d_f) = summary(&wf, &["tv_distance"]);
    report(
        Criterion {
            id: 8,
            title: "discrete walks",
            limit: Some(Duration::from_secs(120)),
        },
        t,
        ok_z && ok_f,
        format!("Z:{d_z} F2:{d_f}"),
    );

    let t = Instant::now();
    let uhf = execute(UHF);
    let (mut ok, mut detail) = summary(
        &uhf,
        &[
            "commutator_max_eigenvalue",
            "generator_entrywise_gap",
            "structure_relation_residual",
            "cocycle_residual",
            "dissipativity_max",
        ],
    );
    let matsui = uhf
        .table
        .rows()
        .iter()
        .find(|r| r[0] == "matsui_seminorm_r0".into())
        .and_then(|r| r[1].as_f64());
    ok &= matsui == Some(4.0);
    detail.push_str(&format!(" matsui={matsui:?}"));
    report(
        Criterion {
            id: 9,
            title: "UHF lattice",
            limit: Some(Duration::from_secs(60)),
        },
        t,
        ok,
        detail,
    );

    // every acceptance configuration again, compared byte for byte through the CSV emitter
    let t = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let firsts = [
        (STRUCTURE, &structure),
        (TROTTER_RANDOM, &random),
        (TROTTER_COMMUTING, &commuting),
        (FLOW, &flow),
        (DEFECT, &defect),
        (FLOW_TROTTER, &ft),
        (LIE_MEAN, &mean),
        (LIE_RHO, &rho),
        (WALK_Z, &wz),
        (WALK_F2, &wf),
        (UHF, &uhf),
    ];
    let mut identical = 0;
    for (i, (cfg, first)) in firsts.iter().enumerate() {
        let again = execute(cfg);
        let a = dir.path().join(format!("first_{i}.csv"));
        let b = dir.path().join(format!("second_{i}.csv"));
        first.table.emit(OutputFormat::Csv, &a).expect("write csv");
        again.table.emit(OutputFormat::Csv, &b).expect("write csv");
        if std::fs::read(&a).expect("read csv") == std::fs::read(&b).expect("read csv") {
            identical += 1;
        }
    }
    report(
        Criterion {
            id: 10,
            title: "determinism",
            limit: None,
        },
        t,
        identical == firsts.len(),
        format!("identical_csv={identical}/{}", firsts.len()),
    );

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance summary: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
