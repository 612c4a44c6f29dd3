//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rloc::circuit::{analytic_fault_location, eq1_consistency, solve, solve_network, LocatorParams, NetworkScenario};
use rloc::dataset::Sample;
use rloc::eval::{correlation, mape, rmse};
use rloc::nn::{gradient_flat, mse_flat, n_params};
use rloc::optim::{train_ica, train_pso, IcaConfig, PsoConfig};
use rloc::ripple::{extract_phasor, synthesize_12pulse};
use serde_json::Value;

use common::{random_scenario, rloc, rng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn locator_round_trip() -> Outcome {
    let start = Instant::now();
    let base = NetworkScenario::default();
    let params = LocatorParams::from_scenario(&base);
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let x = base.train_pos_km * k as f64 / 51.0;
        let m = match solve_network(&base.with_fault_at(x)) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("solve failed at {x} km: {e}")),
        };
        match analytic_fault_location(&m, &params) {
            Ok(est) => worst = worst.max((est.distance_km - x).abs()),
            Err(e) => return outcome(false, format!("locator failed at {x} km: {e}")),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && elapsed < 1.0,
        format!("max |error| {worst:.3e} km (< 1e-6), {elapsed:.4} s (< 1 s)"),
    )
}

fn eq1_identity() -> Outcome {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_scenario(&mut r);
        let m = match solve_network(&s) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("solve failed: {e}")),
        };
        let rel = eq1_consistency(&m, s.bleed_pos_ohm, s.bleed_neg_ohm) / (m.v_p - m.v_n).norm();
        worst = worst.max(rel);
    }
    outcome(worst < 1e-9, format!("max relative residual {worst:.3e} over 100 scenarios (< 1e-9)"))
}

fn kcl() -> Outcome {
    let mut r = rng(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_scenario(&mut r);
        match solve(&s) {
            Ok(sol) => worst = worst.max(sol.kcl_relative_residual()),
            Err(e) => return outcome(false, format!("solve failed: {e}")),
        }
    }
    outcome(worst < 1e-9, format!("max relative KCL residual {worst:.3e} over 100 scenarios (< 1e-9)"))
}

fn ripple_ratio() -> Outcome {
    let w = match synthesize_12pulse(1.0, 50.0, 4096, 1) {
        Ok(w) => w,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mean = w.mean();
    let (Ok(h600), Ok(h300)) = (extract_phasor(&w, 600.0), extract_phasor(&w, 6.0 * 50.0)) else {
        return outcome(false, "phasor extraction failed".into());
    };
    let ratio = h600.norm() / mean;
    let leak = h300.norm() / h600.norm();
    let target = 2.0 / 143.0;
    outcome(
        (ratio - target).abs() < 1e-4 && leak < 1e-6,
        format!("600 Hz / DC = {ratio:.10} vs 2/143 = {target:.10} (±1e-4), 300 Hz / 600 Hz = {leak:.3e} (< 1e-6)"),
    )
}

fn gradient_check() -> Outcome {
    let mut r = rng(303);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let hidden = r.random_range(1..=20);
        let layers = [4, hidden, 1];
        let w: Vec<f64> = (0..n_params(&layers)).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = r.random_range(5..=40);
        let data: Vec<Sample> = (0..n)
            .map(|_| Sample {
                features: std::array::from_fn(|_| r.random_range(-1.0..1.0)),
                target: r.random_range(-1.0..1.0),
            })
            .collect();
        let g = gradient_flat(&layers, &w, &data);
        let h = 1e-5;
        for i in 0..w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd = (mse_flat(&layers, &wp, &data) - mse_flat(&layers, &wm, &data)) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / fd.abs().max(1e-4));
        }
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.3e} over 20 random models (< 1e-5)"))
}

fn sphere_sanity() -> Outcome {
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let ica = train_ica(&sphere, 5, &IcaConfig::default()).map(|r| r.best_cost);
    let pso = train_pso(&sphere, 5, &PsoConfig::default()).map(|r| r.best_cost);
    match (ica, pso) {
        (Ok(i), Ok(p)) => outcome(i < 1e-3 && p < 1e-3, format!("ICA {i:.3e}, PSO {p:.3e} (< 1e-3)")),
        (i, p) => outcome(false, format!("ICA {i:?}, PSO {p:?}")),
    }
}

const METHODS: [&str; 3] = ["ica", "pso", "gd"];

/// simulate → train ×3 → evaluate with default flags, all files in `dir`.
fn pipeline(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_str().expect("utf-8 temp path").to_owned();
    let data = p("data.csv");
    if rloc(&["simulate", "--out", &data]) != 0 {
        return Err("simulate failed".into());
    }
    for m in METHODS {
        let model = p(&format!("{m}.txt"));
        if rloc(&["train", "--method", m, "--data", &data, "--out", &model]) != 0 {
            return Err(format!("train --method {m} failed"));
        }
    }
    let specs: Vec<String> = METHODS.iter().map(|m| format!("{m}={}", p(&format!("{m}.txt")))).collect();
    let mut args = vec!["evaluate", "--data", &data];
    for s in &specs {
        args.extend(["--model", s.as_str()]);
    }
    let report = p("report.json");
    args.extend(["--out", &report]);
    if rloc(&args) != 0 {
        return Err("evaluate failed".into());
    }
    Ok(())
}

fn table_analogue(dir: &Path) -> Outcome {
    let start = Instant::now();
    if let Err(e) = pipeline(dir) {
        return outcome(false, e);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let report: Value = match fs::read_to_string(dir.join("report.json")).map(|s| serde_json::from_str(&s)) {
        Ok(Ok(v)) => v,
        _ => return outcome(false, "unreadable report".into()),
    };
    let mut pass = elapsed < 300.0;
    let mut parts = Vec::new();
    for (m, threshold) in [("ica", 0.98), ("pso", 0.98), ("gd", 0.97)] {
        let ours = report["methods"][m]["test"]["correlation"].as_f64().unwrap_or(f64::NAN);
        let paper = report["paper"][m]["test"]["correlation"].as_f64().unwrap_or(f64::NAN);
        let ok = ours >= threshold;
        pass &= ok;
        parts.push(format!(
            "{m} test r = {ours:.4} (>= {threshold}, {}; paper {paper:.4})",
            if ok { "ok" } else { "below" }
        ));
    }
    parts.push(format!("pipeline {elapsed:.1} s (< 300 s)"));
    outcome(pass, parts.join("; "))
}

/// Reruns the pipeline in `dir` with identical flags and compares every
/// output file against the previous run.
fn determinism(dir: &Path) -> Outcome {
    let files = ["data.csv", "ica.txt", "pso.txt", "gd.txt", "report.json"];
    let before: Vec<Option<Vec<u8>>> = files.iter().map(|f| fs::read(dir.join(f)).ok()).collect();
    if let Err(e) = pipeline(dir) {
        return outcome(false, e);
    }
    let differing: Vec<&str> = files
        .iter()
        .zip(&before)
        .filter(|(f, old)| match (old, fs::read(dir.join(f))) {
            (Some(a), Ok(b)) => *a != b,
            _ => true,
        })
        .map(|(f, _)| *f)
        .collect();
    if differing.is_empty() {
        outcome(true, format!("{} files byte-identical across two runs", files.len()))
    } else {
        outcome(false, format!("differing: {}", differing.join(", ")))
    }
}

fn metric_oracles() -> Outcome {
    let mut r = rng(909);
    let mut worst: f64 = 0.0;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
    for _ in 0..1000 {
        let n = r.random_range(2..=200);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.05..10.0)).collect();
        let f: Vec<f64> = a.iter().map(|x| x + r.random_range(-1.0..1.0)).collect();
        let nf = n as f64;

        let mut m = 0.0;
        let mut s = 0.0;
        for i in 0..n {
            m += (a[i] - f[i]).abs() / a[i];
            s += (a[i] - f[i]) * (a[i] - f[i]);
        }
        let mape_loop = m / nf * 100.0;
        let rmse_loop = (s / nf).sqrt();
        let (mut ma, mut mf) = (0.0, 0.0);
        for i in 0..n {
            ma += a[i];
            mf += f[i];
        }
        ma /= nf;
        mf /= nf;
        let (mut sab, mut saa, mut sff) = (0.0, 0.0, 0.0);
        for i in 0..n {
            sab += (a[i] - ma) * (f[i] - mf);
            saa += (a[i] - ma) * (a[i] - ma);
            sff += (f[i] - mf) * (f[i] - mf);
        }
        let corr_loop = sab / (saa * sff).sqrt();

        let (Ok(m1), Ok(r1), Ok(c1)) = (mape(&a, &f), rmse(&a, &f), correlation(&a, &f)) else {
            return outcome(false, "metric returned an error".into());
        };
        worst = worst.max(rel(m1, mape_loop)).max(rel(r1, rmse_loop)).max(rel(c1, corr_loop));

        if mape(&a, &a).ok() != Some(0.0) || rmse(&a, &a).ok() != Some(0.0) || correlation(&a, &a).ok() != Some(1.0)
        {
            return outcome(false, "self-comparison identities do not hold exactly".into());
        }
    }
    outcome(worst < 1e-12, format!("max relative deviation {worst:.3e} over 1000 pairs (< 1e-12); identities exact"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");

    let mut all = true;
    let mut report = |n: usize, name: &str, o: Outcome| {
        all &= o.pass;
        println!("[{}] {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "analytic locator round trip", locator_round_trip());
    report(2, "pole voltage consistency", eq1_identity());
    report(3, "KCL residual", kcl());
    report(4, "12-pulse ripple", ripple_ratio());
    report(5, "MLP gradient vs finite differences", gradient_check());
    report(6, "trainer sanity on 5-D sphere", sphere_sanity());
    report(7, "trained locator accuracy", table_analogue(dir.path()));
    report(8, "pipeline determinism", determinism(dir.path()));
    report(9, "metric oracles", metric_oracles());

    if !all {
        std::process::exit(1);
    }
}
