//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use kenv_core::envelope::{
    eval_psi, verify_center_bound, verify_envelope, EnvelopeTolerances, Psi, PsiM,
};
use kenv_core::geometry::{fs_metric, gm_det_formula, gm_metric, MetricSpec};
use kenv_core::hermitian::{complex_hessian, HessianOptions, Negated};
use kenv_core::integrals::{
    dirichlet_oracle, divergence_sweep, tian_mc_integral, tian_psi_integral, tian_psi_integral_mc,
};
use kenv_core::projective::{check_invariance, make_real_point, sample_chart_points};
use kenv_core::testfuncs::{
    calibrate_admissible, make_test_function, normalize_sup, CalibrationOptions, NormalizedField,
    TestField,
};
use kenv_core::{Generator, GridSpec, ProjectivePoint, TestFamily, TestFunctionSpec, TupleShape};

const SEED: u64 = 20240601;

struct Outcome {
    passed: bool,
    detail: String,
}

type Check<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn shape(n: usize, k: usize) -> TupleShape {
    TupleShape::new(n, k).expect("valid shape")
}

/// The three calibrated, sup-normalized test functions on (n, k) = (2, 2).
fn test_functions() -> Vec<(String, NormalizedField<TestField>)> {
    let s = shape(2, 2);
    let metric = MetricSpec::chern(s);
    let families = [
        ("power_ratio_d2", TestFamily::PowerRatio { degree: 2 }),
        ("power_ratio_d3", TestFamily::PowerRatio { degree: 3 }),
        (
            "tuple_norm_mix",
            TestFamily::TupleNormMix {
                weights: vec![-1.0, 0.5],
            },
        ),
    ];
    families
        .into_iter()
        .map(|(name, family)| {
            let base = make_test_function(TestFunctionSpec {
                family,
                epsilon: 1.0,
                shape: s,
                a_m: 4.0,
            })
            .unwrap();
            let eps = calibrate_admissible(
                &base,
                &metric,
                &GridSpec::linear(0.0, 11),
                CalibrationOptions::default(),
            )
            .unwrap();
            let field = normalize_sup(
                base.with_epsilon(eps).unwrap(),
                s,
                &GridSpec::linear(0.0, 21),
            )
            .unwrap();
            (format!("{name}(eps={eps:.4})"), field)
        })
        .collect()
}

fn compass_max<F: Fn(&[f64]) -> f64>(f: &F, start: Vec<f64>) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut best = f(&x);
    let mut step = 0.25;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(1e-12, 1.0);
                let v = f(&y);
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

fn criterion_1() -> Outcome {
    let s = shape(2, 2);
    let psi = |x: &[f64]| {
        let mut h = vec![1.0];
        h.extend_from_slice(x);
        eval_psi(&make_real_point(&h, s).unwrap(), 4.0).to_f64()
    };
    let starts = sample_chart_points(s, 20, (0.01, 0.99), SEED).unwrap();
    let (x, v) = starts
        .iter()
        .map(|p| compass_max(&psi, p.affine().iter().map(|z| z.norm()).collect()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let want = -4.0 * 4f64.ln();
    let dist = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        (v - want).abs() < 1e-8 && dist < 1e-6,
        format!("max psi = {v:.15} (want {want:.15}), argmax distance from all-ones {dist:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_psi: f64 = 0.0;
    for (n, k) in [(1, 2), (2, 2)] {
        let s = shape(n, k);
        let a_m = (s.m() + 1) as f64;
        for p in sample_chart_points(s, 100, (0.3, 1.5), SEED).unwrap() {
            let h = complex_hessian(&Negated(Psi { a_m }), &p, HessianOptions::default()).unwrap();
            worst_psi = worst_psi.max(h.relative_deviation(&fs_metric(&p, a_m)));
        }
    }
    let mut worst_m: f64 = 0.0;
    for p in sample_chart_points(shape(2, 2), 100, (0.3, 1.5), SEED + 1).unwrap() {
        let h = complex_hessian(&Negated(PsiM), &p, HessianOptions::default()).unwrap();
        worst_m = worst_m.max(h.relative_deviation(&gm_metric(&p).unwrap()));
    }
    outcome(
        worst_psi < 1e-5 && worst_m < 1e-5,
        format!(
            "max rel dev: -psi vs g_FS {worst_psi:.2e} (m in {{1,3}}), -psi_M vs g^M {worst_m:.2e}"
        ),
    )
}

fn criterion_3(functions: &[(String, NormalizedField<TestField>)]) -> Outcome {
    let grid = GridSpec::log(1e-3, 41);
    let tol = EnvelopeTolerances {
        gap: 1e-6,
        monotone: 1e-7,
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, f) in functions {
        let r = verify_envelope(f, shape(2, 2), 4.0, &grid, tol).unwrap();
        passed &= r.min_gap >= -1e-6 && r.violations == 0 && r.points == 41 * 41 * 41;
        parts.push(format!(
            "{name}: min_gap {:.4e}, violations {}",
            r.min_gap, r.violations
        ));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_4(functions: &[(String, NormalizedField<TestField>)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, f) in functions {
        let c = verify_center_bound(f, shape(2, 2), 4.0).unwrap();
        passed &= c >= -1e-6;
        parts.push(format!("{name}: {c:.4e}"));
    }
    outcome(passed, format!("(phi - psi)(1,..,1): {}", parts.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut worst_quad: f64 = 0.0;
    for m in [1, 2] {
        for alpha in [0.25, 0.5, 0.75] {
            let q = tian_psi_integral(alpha, m, 200).unwrap();
            worst_quad =
                worst_quad.max((q.value / dirichlet_oracle(alpha, m).unwrap() - 1.0).abs());
        }
    }
    let mut worst_mc: f64 = 0.0;
    let samples = 10_000_000;
    for alpha in [0.25, 0.5, 0.75] {
        let e = tian_psi_integral_mc(alpha, 3, samples, SEED).unwrap();
        worst_mc = worst_mc.max((e.value / dirichlet_oracle(alpha, 3).unwrap() - 1.0).abs());
    }
    let spot = dirichlet_oracle(0.5, 1).unwrap();
    let spot_err = (spot - std::f64::consts::PI).abs();
    outcome(
        worst_quad < 1e-4 && worst_mc < 1e-2 && spot_err < 1e-12,
        format!(
            "quadrature m in {{1,2}} max rel err {worst_quad:.2e}; Monte Carlo m=3 ({samples} samples) max rel err {worst_mc:.2e}; oracle(0.5, 1) - pi = {spot_err:.1e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let sweep = divergence_sweep(1.0, 1, &[10.0, 100.0, 1000.0]).unwrap();
    let values: Vec<f64> = sweep.iter().map(|s| s.1).collect();
    let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let floor = 0.5 * increments[0];
    let passed = increments.iter().all(|&d| d > 0.0 && d >= floor) && floor > 0.0;
    outcome(
        passed,
        format!("partials {values:.6?}, increments {increments:.6?}"),
    )
}

fn criterion_7(functions: &[(String, NormalizedField<TestField>)]) -> Outcome {
    let bound = tian_psi_integral(0.9, 3, 120).unwrap().value;
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, f) in functions {
        let e = tian_mc_integral(f, 0.9, shape(2, 2), 1_000_000, SEED).unwrap();
        passed &= e.value <= bound + 3.0 * e.abs_error_estimate;
        parts.push(format!(
            "{name}: {:.4} +- {:.1e}",
            e.value, e.abs_error_estimate
        ));
    }
    outcome(
        passed,
        format!("psi bound {bound:.3}; {}", parts.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, k) in [(2, 2), (1, 3)] {
        for p in sample_chart_points(shape(n, k), 50, (0.25, 1.75), SEED).unwrap() {
            let det = gm_metric(&p).unwrap().determinant();
            worst = worst.max((det / gm_det_formula(&p).unwrap() - 1.0).abs());
        }
    }
    outcome(
        worst < 1e-5,
        format!("max rel err {worst:.2e} over 100 points"),
    )
}

fn apply_all(p: &ProjectivePoint, word: &[Generator]) -> ProjectivePoint {
    word.iter().fold(p.clone(), |q, g| q.apply(g).unwrap())
}

fn criterion_9(functions: &[(String, NormalizedField<TestField>)]) -> Outcome {
    let s = shape(2, 2);
    let points: Vec<ProjectivePoint> = sample_chart_points(s, 100, (0.2, 2.0), SEED)
        .unwrap()
        .iter()
        .map(|p| p.to_projective())
        .collect();
    let mut failures = 0;
    for (i, p) in points.iter().enumerate() {
        let t1 = 0.37 + 0.05 * i as f64;
        let t2 = 2.1 - 0.03 * i as f64;
        let index = i % 4;
        let identities: [(Vec<Generator>, Vec<Generator>); 6] = [
            (vec![Generator::Sigma { i: 0, j: 1 }; 2], vec![]),
            (vec![Generator::Gamma { p: 0, q: 1 }; 2], vec![]),
            (vec![Generator::Gamma { p: 2, q: 3 }; 2], vec![]),
            (
                vec![
                    Generator::Tau { index, theta: t1 },
                    Generator::Tau { index, theta: -t1 },
                ],
                vec![],
            ),
            (
                vec![
                    Generator::Tau { index, theta: t1 },
                    Generator::Tau { index, theta: t2 },
                ],
                vec![Generator::Tau {
                    index,
                    theta: t1 + t2,
                }],
            ),
            // σ moves coordinate 0 to position 2: σ τ_0 σ = τ_2
            (
                vec![
                    Generator::Sigma { i: 0, j: 1 },
                    Generator::Tau {
                        index: 0,
                        theta: t1,
                    },
                    Generator::Sigma { i: 0, j: 1 },
                ],
                vec![Generator::Tau {
                    index: 2,
                    theta: t1,
                }],
            ),
        ];
        for (lhs, rhs) in &identities {
            if !apply_all(p, lhs).projectively_eq(&apply_all(p, rhs), 1e-12) {
                failures += 1;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (_, f) in functions {
        for p in points.iter().take(10) {
            worst = worst.max(check_invariance(f, p, 50, SEED).unwrap());
        }
    }
    outcome(
        failures == 0 && worst < 1e-10,
        format!("{failures} identity failures over 600 checks; max orbit deviation {worst:.2e}"),
    )
}

fn data_section(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with(kenv_cli::report::TIMESTAMP_PREFIX))
        .collect::<Vec<_>>()
        .join("\n")
}

fn json_data(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("generated_unix");
    v
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "grid": {"delta": 0.001, "points_per_axis": 9, "log_spacing": true},
            "calibration_grid": {"delta": 0.0, "points_per_axis": 5, "log_spacing": false},
            "sup_grid": {"delta": 0.0, "points_per_axis": 9, "log_spacing": false},
            "seeds": [7, 8],
            "tian": {"dims": [1, 3], "mc_samples": 200000, "mc_tol": 0.1, "domination_samples": 50000},
            "gm": {"samples": 10}
        }"#,
    )
    .unwrap();
    let runs: [(&[&str], &[&str]); 4] = [
        (
            &["envelope-verify"],
            &["envelope_summary", "envelope_points"],
        ),
        (&["tian"], &["tian", "tian_domination"]),
        (&["tian", "--divergence"], &["divergence"]),
        (&["gm-check"], &["gm"]),
    ];
    let mut mismatches = Vec::new();
    let mut bad_exit = Vec::new();
    for (args, outputs) in runs {
        let mut dirs = Vec::new();
        for (run, threads) in ["1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("{}-{run}", args.join("")));
            let status = Command::new(env!("CARGO_BIN_EXE_kenv"))
                .args(args)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .env(kenv_cli::THREADS_ENV, threads)
                .output()
                .unwrap()
                .status;
            if status.code() != Some(0) {
                bad_exit.push(format!("{} -> {:?}", args.join(" "), status.code()));
            }
            dirs.push(out);
        }
        for name in outputs {
            let csv = format!("{name}.csv");
            let json = format!("{name}.json");
            if data_section(&dirs[0].join(&csv)) != data_section(&dirs[1].join(&csv)) {
                mismatches.push(csv);
            }
            if json_data(&dirs[0].join(&json)) != json_data(&dirs[1].join(&json)) {
                mismatches.push(json);
            }
        }
    }
    outcome(
        mismatches.is_empty() && bad_exit.is_empty(),
        format!(
            "4 subcommand runs twice each (1 vs 3 threads); mismatched outputs {mismatches:?}; unexpected exit codes {bad_exit:?}"
        ),
    )
}

fn main() {
    // filter arguments from `cargo test` are ignored; every criterion runs
    let started = Instant::now();
    let functions = test_functions();

    let checks: Vec<Check> = vec![
        (1, "psi maximum", Box::new(criterion_1)),
        (2, "Hessian identities", Box::new(criterion_2)),
        (
            3,
            "envelope phi >= psi",
            Box::new(|| criterion_3(&functions)),
        ),
        (4, "center bound", Box::new(|| criterion_4(&functions))),
        (5, "integral oracle", Box::new(criterion_5)),
        (6, "divergence at alpha = 1", Box::new(criterion_6)),
        (7, "domination", Box::new(|| criterion_7(&functions))),
        (8, "g^M determinant", Box::new(criterion_8)),
        (
            9,
            "group algebra and invariance",
            Box::new(|| criterion_9(&functions)),
        ),
        (10, "CLI determinism", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let t = Instant::now();
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of 10 criteria passed in {:.1}s",
        10 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
