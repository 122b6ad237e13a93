//! The three verification campaigns. Each returns whether every check passed.

use std::path::Path;

use kenv_core::envelope::{scan_envelope, summarize_scan, verify_center_bound, PsiM};
use kenv_core::geometry::{gm_det_formula, gm_metric, MetricSpec};
use kenv_core::hermitian::{complex_hessian, HessianOptions, Negated};
use kenv_core::integrals::{
    default_nodes, dirichlet_oracle, divergence_sweep, tian_mc_integral, tian_psi_integral,
    tian_psi_integral_mc, MAX_TENSOR_DIM,
};
use kenv_core::projective::{check_invariance, sample_chart_points};
use kenv_core::testfuncs::{
    calibrate_admissible, make_test_function, normalize_sup, CalibrationOptions, NormalizedField,
    TestField,
};
use kenv_core::{ChartPoint, Error, ProjectivePoint, TestFamily, TestFunctionSpec, TupleShape};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{FunctionConfig, RunConfig};
use crate::report::{num, write_table, Table};
use crate::CliError;

/// Moduli range of random chart points in gm-check.
const GM_MODULUS_RANGE: (f64, f64) = (0.25, 1.75);

pub struct PreparedFunction {
    pub label: String,
    pub family: TestFamily,
    pub epsilon: f64,
    pub calibrated: bool,
    pub field: NormalizedField<TestField>,
    pub invariant_by_construction: bool,
}

fn family_label(index: usize, family: &TestFamily) -> String {
    match family {
        TestFamily::PowerRatio { degree } => format!("f{index}_power_ratio_d{degree}"),
        TestFamily::TupleNormMix { .. } => format!("f{index}_tuple_norm_mix"),
        TestFamily::CoordinateWeight { index: j } => format!("f{index}_coordinate_weight_{j}"),
    }
}

/// A point with distinct moduli and phases in every coordinate, so that each
/// generator moves it.
fn probe_point(shape: TupleShape) -> Result<ProjectivePoint, CliError> {
    let coords = (0..shape.len())
        .map(|j| {
            let r = 0.35 + 0.6 * ((j as f64 + 1.0) * 0.618_033_988_749_895).fract();
            Complex64::from_polar(r, 2.4 * j as f64 + 0.3)
        })
        .collect();
    Ok(kenv_core::projective::make_point(coords, shape)?)
}

/// Builds, calibrates (when ε is not fixed) and sup-normalizes the configured
/// test functions.
pub fn prepare_functions(cfg: &RunConfig) -> Result<Vec<PreparedFunction>, CliError> {
    let shape = cfg.shape;
    let a_m = cfg.a_m();
    let metric = MetricSpec::fubini_study(shape, a_m)?;
    cfg.functions
        .iter()
        .enumerate()
        .map(|(i, fc): (usize, &FunctionConfig)| {
            let base = make_test_function(TestFunctionSpec {
                family: fc.family.clone(),
                epsilon: 1.0,
                shape,
                a_m,
            })
            .map_err(|e| CliError::Config(e.to_string()))?;
            let (epsilon, calibrated) = match fc.epsilon {
                Some(e) => (e, false),
                None => (
                    calibrate_admissible(
                        &base,
                        &metric,
                        &cfg.calibration_grid,
                        CalibrationOptions::default(),
                    )?,
                    true,
                ),
            };
            let scaled = base
                .with_epsilon(epsilon)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let invariant_by_construction = scaled.is_invariant();
            Ok(PreparedFunction {
                label: family_label(i, &fc.family),
                family: fc.family.clone(),
                epsilon,
                calibrated,
                field: normalize_sup(scaled, shape, &cfg.sup_grid)?,
                invariant_by_construction,
            })
        })
        .collect()
}

pub fn envelope_verify(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let shape = cfg.shape;
    let a_m = cfg.a_m();
    let m = shape.m();
    let functions = prepare_functions(cfg)?;
    let probe = probe_point(shape)?;

    let mut summary = Table::new(
        "envelope_summary",
        &[
            "function",
            "epsilon",
            "calibrated",
            "sup",
            "sup_refinement_gain",
            "invariance_deviation",
            "min_gap",
            "argmin",
            "violations",
            "center_gap",
            "passed",
        ],
    );
    let mut x_cols: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    let mut point_cols = vec!["function".to_string(), "index".to_string()];
    point_cols.append(&mut x_cols);
    point_cols.extend(["gap".to_string(), "violations".to_string()]);
    let mut points = Table {
        name: "envelope_points".into(),
        columns: point_cols,
        rows: Vec::new(),
    };

    let mut all_passed = true;
    let mut reports = Vec::new();
    for pf in &functions {
        let invariance = check_invariance(&pf.field, &probe, cfg.orbit_samples, cfg.seeds[0])?;
        let samples = scan_envelope(&pf.field, shape, a_m, &cfg.grid, cfg.tolerances.monotone)?;
        let report = summarize_scan(&samples, shape, &cfg.grid, cfg.tolerances);
        let center = verify_center_bound(&pf.field, shape, a_m)?;
        let passed =
            report.passed && center >= -cfg.tolerances.gap && invariance < cfg.invariance_tol;
        all_passed &= passed;
        for (idx, s) in samples.iter().enumerate() {
            let mut row = vec![json!(pf.label), json!(idx)];
            row.extend(s.moduli.iter().map(|&x| num(x)));
            row.push(num(s.gap));
            row.push(json!(s.violations));
            points.push(row);
        }
        summary.push(vec![
            json!(pf.label),
            num(pf.epsilon),
            json!(pf.calibrated),
            num(pf.field.sup),
            num(pf.field.refinement_gain),
            num(invariance),
            num(report.min_gap),
            json!(report
                .argmin
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(";")),
            json!(report.violations),
            num(center),
            json!(passed),
        ]);
        println!(
            "{}: epsilon={:.6e} min_gap={:.6e} violations={} center_gap={:.6e} invariance={:.3e} {}",
            pf.label,
            pf.epsilon,
            report.min_gap,
            report.violations,
            center,
            invariance,
            if passed { "PASS" } else { "FAIL" }
        );
        reports.push(json!({
            "function": pf.label,
            "family": pf.family,
            "invariant_by_construction": pf.invariant_by_construction,
            "argmax": pf.field.argmax,
            "report": report,
            "center_gap": num(center),
            "invariance_deviation": num(invariance),
            "passed": passed,
        }));
    }
    let verdict = json!({ "passed": all_passed, "functions": reports });
    write_table(out, "envelope-verify", cfg, &summary, verdict.clone())?;
    write_table(
        out,
        "envelope-verify",
        cfg,
        &points,
        json!({ "passed": all_passed }),
    )?;
    Ok(all_passed)
}

pub fn tian(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let t = &cfg.tian;
    let mut table = Table::new(
        "tian",
        &[
            "alpha",
            "m",
            "quad",
            "quad_error",
            "oracle",
            "ratio",
            "mc_value",
            "mc_stderr",
            "mc_ratio",
            "seed",
            "passed",
        ],
    );
    let mut all_passed = true;
    for &m in &t.dims {
        for &alpha in &cfg.alpha_list {
            let oracle = dirichlet_oracle(alpha, m)?;
            let quad = if m <= MAX_TENSOR_DIM {
                Some(tian_psi_integral(
                    alpha,
                    m,
                    t.nodes.unwrap_or_else(|| default_nodes(m)),
                )?)
            } else {
                None
            };
            for &seed in &cfg.seeds {
                let mc = tian_psi_integral_mc(alpha, m, t.mc_samples, seed)?;
                let ratio = quad.as_ref().map(|q| q.value / oracle);
                let mc_ratio = mc.value / oracle;
                let passed = ratio.is_none_or(|r| (r - 1.0).abs() < t.quadrature_tol)
                    && (mc_ratio - 1.0).abs() < t.mc_tol;
                all_passed &= passed;
                println!(
                    "alpha={alpha} m={m} seed={seed} ratio={} mc_ratio={mc_ratio:.6} {}",
                    ratio.map_or("n/a".to_string(), |r| format!("{r:.10}")),
                    if passed { "PASS" } else { "FAIL" }
                );
                table.push(vec![
                    num(alpha),
                    json!(m),
                    quad.as_ref().map_or(Value::Null, |q| num(q.value)),
                    quad.as_ref()
                        .map_or(Value::Null, |q| num(q.abs_error_estimate)),
                    num(oracle),
                    ratio.map_or(Value::Null, num),
                    num(mc.value),
                    num(mc.abs_error_estimate),
                    num(mc_ratio),
                    json!(seed),
                    json!(passed),
                ]);
            }
        }
    }

    let domination = domination_table(cfg)?;
    let dom_passed = domination
        .rows
        .iter()
        .all(|r| r.last() == Some(&json!(true)));
    all_passed &= dom_passed;
    write_table(out, "tian", cfg, &table, json!({ "passed": all_passed }))?;
    write_table(
        out,
        "tian",
        cfg,
        &domination,
        json!({ "passed": dom_passed }),
    )?;
    Ok(all_passed)
}

// ∫exp(−αφ) against the ψ bound. With general a_m, exp(−αψ) equals the a_m = m + 1
// integrand at exponent α·a_m/(m + 1).
fn domination_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let t = &cfg.tian;
    let shape = cfg.shape;
    let m = shape.m();
    let alpha = t.domination_alpha;
    let effective = alpha * cfg.a_m() / (m + 1) as f64;
    if !(effective > 0.0 && effective < 1.0) {
        return Err(CliError::Config(format!(
            "domination_alpha * a_m / (m + 1) = {effective} must lie in (0, 1)"
        )));
    }
    let bound = if m <= MAX_TENSOR_DIM {
        let q = tian_psi_integral(effective, m, default_nodes(m))?;
        (q.value, q.abs_error_estimate)
    } else {
        let q = tian_psi_integral_mc(effective, m, t.mc_samples, cfg.seeds[0])?;
        (q.value, q.abs_error_estimate)
    };
    let functions = prepare_functions(cfg)?;
    let mut table = Table::new(
        "tian_domination",
        &[
            "function",
            "epsilon",
            "alpha",
            "m",
            "seed",
            "mc_value",
            "mc_stderr",
            "bound",
            "bound_error",
            "passed",
        ],
    );
    for pf in &functions {
        for &seed in &cfg.seeds {
            let est = tian_mc_integral(&pf.field, alpha, shape, t.domination_samples, seed)?;
            let passed = est.value <= bound.0 + 3.0 * est.abs_error_estimate;
            println!(
                "{} alpha={alpha} seed={seed} integral={:.6} +- {:.2e} bound={:.6} {}",
                pf.label,
                est.value,
                est.abs_error_estimate,
                bound.0,
                if passed { "PASS" } else { "FAIL" }
            );
            table.push(vec![
                json!(pf.label),
                num(pf.epsilon),
                num(alpha),
                json!(m),
                json!(seed),
                num(est.value),
                num(est.abs_error_estimate),
                num(bound.0),
                num(bound.1),
                json!(passed),
            ]);
        }
    }
    Ok(table)
}

pub fn tian_divergence(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let d = &cfg.tian.divergence;
    let sweep = divergence_sweep(d.alpha, d.m, &d.cutoffs)?;
    let mut table = Table::new(
        "divergence",
        &["alpha", "m", "cutoff", "partial", "increment", "passed"],
    );
    let first_increment = sweep.windows(2).next().map(|w| w[1].1 - w[0].1);
    let mut all_passed = true;
    for (i, &(r, v)) in sweep.iter().enumerate() {
        let inc = (i > 0).then(|| v - sweep[i - 1].1);
        // growth must not flatten: every step adds at least half the first one
        let passed = match (inc, first_increment) {
            (Some(inc), Some(first)) => inc > 0.0 && inc >= 0.5 * first,
            _ => true,
        };
        all_passed &= passed;
        println!(
            "R={r} partial={v:.10} increment={}",
            inc.map_or("n/a".into(), |x| format!("{x:.10}"))
        );
        table.push(vec![
            num(d.alpha),
            json!(d.m),
            num(r),
            num(v),
            inc.map_or(Value::Null, num),
            json!(passed),
        ]);
    }
    if sweep.len() < 2 {
        all_passed = false;
    }
    write_table(
        out,
        "tian --divergence",
        cfg,
        &table,
        json!({ "passed": all_passed }),
    )?;
    Ok(all_passed)
}

enum GmOutcome {
    Checked {
        det_formula: f64,
        det_numeric: f64,
        min_eigenvalue: f64,
        psi_m_deviation: Option<f64>,
    },
    SkippedZeroTuple(usize),
}

fn gm_point(p: &ChartPoint) -> Result<GmOutcome, CliError> {
    let det_formula = match gm_det_formula(p) {
        Ok(v) => v,
        Err(Error::ZeroTuple(h)) => return Ok(GmOutcome::SkippedZeroTuple(h)),
        Err(e) => return Err(e.into()),
    };
    let g = gm_metric(p)?;
    // ψ_M is −∞ on coordinate hyperplanes, where the identity has no meaning
    let psi_m_deviation = match complex_hessian(&Negated(PsiM), p, HessianOptions::default()) {
        Ok(h) => Some(h.relative_deviation(&g)),
        Err(Error::NonFiniteSample) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(GmOutcome::Checked {
        det_formula,
        det_numeric: g.determinant(),
        min_eigenvalue: g.min_eigenvalue(),
        psi_m_deviation,
    })
}

pub fn gm_check(cfg: &RunConfig, out: &Path) -> Result<bool, CliError> {
    let gm = &cfg.gm;
    let mut points: Vec<(String, ChartPoint)> = Vec::new();
    for s in &gm.shapes {
        for p in sample_chart_points(*s, gm.samples, GM_MODULUS_RANGE, cfg.seeds[0])? {
            points.push(("random".into(), p));
        }
    }
    for e in &gm.points {
        let p = ChartPoint::new(0, e.affine.clone(), e.shape)
            .map_err(|err| CliError::Config(format!("explicit gm point: {err}")))?;
        points.push(("explicit".into(), p));
    }
    let outcomes: Vec<GmOutcome> = points
        .par_iter()
        .map(|(_, p)| gm_point(p))
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(
        "gm",
        &[
            "n",
            "k",
            "source",
            "affine",
            "status",
            "det_formula",
            "det_numeric",
            "det_rel_error",
            "min_eigenvalue",
            "psi_m_deviation",
            "passed",
        ],
    );
    let (mut skipped, mut max_det, mut max_psi) = (0usize, 0.0f64, 0.0f64);
    let mut all_passed = true;
    for ((source, p), outcome) in points.iter().zip(&outcomes) {
        let shape = p.shape();
        let affine = p
            .affine()
            .iter()
            .map(|z| format!("{}{:+}i", z.re, z.im))
            .collect::<Vec<_>>()
            .join(";");
        let mut row = vec![
            json!(shape.n()),
            json!(shape.k()),
            json!(source),
            json!(affine),
        ];
        match outcome {
            GmOutcome::SkippedZeroTuple(h) => {
                skipped += 1;
                row.push(json!(format!("skipped_zero_tuple_{h}")));
                row.extend([
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    Value::Null,
                ]);
                row.push(json!(true));
            }
            GmOutcome::Checked {
                det_formula,
                det_numeric,
                min_eigenvalue,
                psi_m_deviation,
            } => {
                let rel = (det_numeric / det_formula - 1.0).abs();
                max_det = max_det.max(rel);
                if let Some(d) = psi_m_deviation {
                    max_psi = max_psi.max(*d);
                }
                let passed = rel < gm.det_tol
                    && *min_eigenvalue > 0.0
                    && psi_m_deviation.is_none_or(|d| d < gm.hessian_tol);
                all_passed &= passed;
                row.push(json!("checked"));
                row.extend([
                    num(*det_formula),
                    num(*det_numeric),
                    num(rel),
                    num(*min_eigenvalue),
                    psi_m_deviation.map_or(Value::Null, num),
                ]);
                row.push(json!(passed));
            }
        }
        table.push(row);
    }
    let checked = points.len() - skipped;
    println!(
        "checked={checked} skipped_zero_tuple={skipped} max_det_rel_error={max_det:.3e} max_psi_m_deviation={max_psi:.3e} {}",
        if all_passed { "PASS" } else { "FAIL" }
    );
    write_table(
        out,
        "gm-check",
        cfg,
        &table,
        json!({
            "passed": all_passed,
            "checked": checked,
            "skipped_zero_tuple": skipped,
            "max_det_rel_error": num(max_det),
            "max_psi_m_deviation": num(max_psi),
        }),
    )?;
    Ok(all_passed)
}
