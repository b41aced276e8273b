//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use serde_json::Value;
use volgrow_core::bowen::BundleChoice;
use volgrow_core::cli::{run, Command, ExperimentConfig};
use volgrow_core::cocycle::accumulate;
use volgrow_core::rng::{uniform_point, Stream};
use volgrow_core::splitting::{
    compare_bundle_growth, max_gap_over_grassmannian, verify_domination, SplittingOptions,
};
use volgrow_core::volume::max_subspace_log_det;
use volgrow_core::SystemSpec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn f(v: &Value, path: &str) -> f64 {
    v.pointer(path)
        .and_then(Value::as_f64)
        .unwrap_or(f64::NEG_INFINITY)
}

fn run_json(cfg: &ExperimentConfig, c: Command) -> Value {
    run(cfg, c)
        .unwrap_or_else(|e| panic!("{c}: {}", e.to_json()))
        .json
}

fn timed<T>(g: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = g();
    (out, t.elapsed().as_secs_f64())
}

fn cat_exactness() -> Outcome {
    let h = cat_entropy();
    let cfg = ExperimentConfig::new(SystemSpec::cat_map());
    let (v, t) = timed(|| run_json(&cfg, Command::EntropyVolume));
    let rate = f(&v, "/result/fitted_rate");
    Outcome {
        pass: (rate - h).abs() <= 1e-6 && t < 1.0,
        detail: format!(
            "fitted_rate={rate:.9} oracle={h:.9} err={:.2e} time={t:.3}s",
            (rate - h).abs()
        ),
    }
}

fn bowen_config(system: SystemSpec) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(system);
    cfg.params.delta = 0.05;
    cfg.params.bowen_n = 12;
    cfg.params.resolution = 1024;
    cfg.params.samples = 10_000;
    cfg.params.tolerance = 0.1;
    cfg
}

fn cat_bowen() -> Outcome {
    let h = cat_entropy();
    let cfg = bowen_config(SystemSpec::cat_map());
    let (b, t1) = timed(|| run_json(&cfg, Command::EntropyBowen));
    let value = f(&b, "/result/value");
    let cover = f(&b, "/result/cover_size");
    let (c, t2) = timed(|| run_json(&cfg, Command::Compare));
    let verdict = c
        .pointer("/result/verdict")
        .and_then(Value::as_str)
        .unwrap_or("?")
        .to_string();
    Outcome {
        pass: (value - h).abs() <= 0.08 && verdict == "pass" && t1 < 60.0 && t2 < 60.0,
        detail: format!(
            "spanning={value:.6} (cover {cover}) |err|={:.4} (tol 0.08, time {t1:.1}s); compare verdict={verdict} (time {t2:.1}s)",
            (value - h).abs()
        ),
    }
}

fn skew_product() -> Outcome {
    let h = cat_entropy();
    let mut cfg = ExperimentConfig::new(SystemSpec::skew_product(0.0).unwrap());
    cfg.params.lyapunov_n = 10_000;
    let (out, t) = timed(|| {
        let l = run_json(&cfg, Command::Lyapunov);
        let v = run_json(&cfg, Command::EntropyVolume);
        (l, v)
    });
    let exps: Vec<f64> = (0..3)
        .map(|i| f(&out.0, &format!("/result/exponents/{i}")))
        .collect();
    let lyap_err = exps
        .iter()
        .zip([h, 0.0, -h])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rate = f(&out.1, "/result/fitted_rate");
    Outcome {
        pass: lyap_err <= 1e-3 && (rate - h).abs() <= 1e-3 && t < 10.0,
        detail: format!(
            "exponents=[{:.6}, {:.6}, {:.6}] max err={lyap_err:.2e}; fitted_rate={rate:.6}; time={t:.2}s",
            exps[0], exps[1], exps[2]
        ),
    }
}

fn perturbed_agreement() -> Outcome {
    let cfg = bowen_config(SystemSpec::perturbed_cat(0.05).unwrap());
    let (c, t) = timed(|| run_json(&cfg, Command::Compare));
    let vol = f(&c, "/result/volume_rate");
    let bowen = f(&c, "/result/bowen_value");
    let gap = (vol - bowen).abs();
    Outcome {
        pass: gap <= 0.1 && t < 120.0,
        detail: format!(
            "volume_rate={vol:.6} spanning={bowen:.6} gap={gap:.4} (tol 0.1); time={t:.1}s"
        ),
    }
}

fn grassmann_gap() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let ((), t) = timed(|| {
        for (name, sys) in [
            ("cat", SystemSpec::cat_map()),
            ("skew(0)", SystemSpec::skew_product(0.0).unwrap()),
            ("skew(0.1)", SystemSpec::skew_product(0.1).unwrap()),
        ] {
            let opts = SplittingOptions::for_system(&sys).unwrap();
            let blocks = opts.dims.len() - 1;
            for bundle in 0..blocks {
                let g = max_gap_over_grassmannian(&sys, &opts, bundle, 200, 100, 20, 5).unwrap();
                pass &= g <= 0.02;
                parts.push(format!("{name} F^{bundle}={g:.2e}"));
            }
        }
    });
    Outcome {
        pass,
        detail: format!("max gap: {} (tol 0.02); time={t:.1}s", parts.join(", ")),
    }
}

fn bundle_growth() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sys) in [
        ("skew(0)", SystemSpec::skew_product(0.0).unwrap()),
        ("skew(0.1)", SystemSpec::skew_product(0.1).unwrap()),
    ] {
        let opts = SplittingOptions::for_system(&sys).unwrap();
        let c = compare_bundle_growth(&sys, &opts, 200, 100, 6).unwrap();
        pass &= c.max_abs_gap <= 0.02;
        parts.push(format!("{name}={:.2e}", c.max_abs_gap));
    }
    Outcome {
        pass,
        detail: format!(
            "max |max_i F^i rate - max_V rate|: {} (tol 0.02)",
            parts.join(", ")
        ),
    }
}

fn ball_growth() -> Outcome {
    let mut cfg = ExperimentConfig::new(SystemSpec::cat_map());
    cfg.params.delta = 0.05;
    cfg.params.ball_n = (8..=20).collect();
    cfg.params.ball_bundle = BundleChoice::MaxOverV;
    cfg.params.centers = 20;
    cfg.params.mc_count = 100_000;
    cfg.params.ball_tolerance = 0.05;
    let (v, t) = timed(|| run_json(&cfg, Command::BallGrowth));
    let r = &v["result"];
    let upper = r["upper_bound_holds"].as_bool().unwrap_or(false);
    let frac = r["lower_bound_fraction"].as_f64().unwrap_or(0.0);
    let majority = r["lower_bound_majority"].as_bool().unwrap_or(false);
    let unreliable = r["any_unreliable"].as_bool().unwrap_or(false);
    // -inf (empty estimate) is serialized as null
    let mut in_band = true;
    let mut empties = 0;
    for rep in r["reports"].as_array().into_iter().flatten() {
        for x in rep["normalized_log_integrals"]
            .as_array()
            .into_iter()
            .flatten()
        {
            match x.as_f64() {
                Some(x) => in_band &= x.abs() <= 0.05,
                None => {
                    in_band = false;
                    empties += 1;
                }
            }
        }
    }
    // exact values for the linear model: every center has the same ball
    let a = [[2.0, 1.0], [1.0, 1.0]];
    let exact: Vec<String> = [8, 12, 16, 20]
        .iter()
        .map(|&n| {
            format!(
                "n={n}:{:.4}",
                (linear_ball_area(a, n, 0.05).ln() + n as f64 * cat_entropy()) / n as f64
            )
        })
        .collect();
    Outcome {
        pass: in_band && upper && majority,
        detail: format!(
            "upper_bound_holds={upper} all_in_band={in_band} (empty estimates {empties}/260) lower_bound_fraction={frac:.2} any_unreliable={unreliable}; exact oracle {}; time={t:.1}s",
            exact.join(" ")
        ),
    }
}

fn property_suites() -> Outcome {
    let mut notes = Vec::new();

    // brute-force top-k maximum over random spectra
    let mut spectra_ok = true;
    for i in 0..10_000u64 {
        let d = 1 + (i % 4) as usize;
        let mut s: Vec<f64> = uniform_point(21, Stream::Test, i, d)
            .coords()
            .iter()
            .map(|c| 100.0 * (c - 0.5))
            .collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let brute = (0..=d)
            .map(|k| s[..k].iter().sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        spectra_ok &= max_subspace_log_det(&s).unwrap() == brute;
    }
    notes.push(format!("max_subspace exact on 1e4 spectra: {spectra_ok}"));

    let mut worst = 0.0f64;
    for sys in [
        SystemSpec::cat_map(),
        SystemSpec::skew_product(0.1).unwrap(),
        SystemSpec::perturbed_cat(0.05).unwrap(),
        SystemSpec::linear(vec![vec![1, 1, 0], vec![1, 2, 1], vec![0, 1, 2]]).unwrap(),
    ] {
        let d = sys.dimension();
        for i in 0..5 {
            let x = uniform_point(22, Stream::Test, i, d);
            for n in 1..=20 {
                let got = accumulate(&sys, &x, n).unwrap().log_singular;
                let want = compound_log_singular(&orbit_jacobians(&sys, &x, n));
                for (g, w) in got.iter().zip(&want) {
                    worst = worst.max((g - w).abs());
                }
            }
        }
    }
    notes.push(format!("cocycle vs compound max err={worst:.2e}"));

    let cat = SystemSpec::cat_map();
    let want = (3.0 - 5f64.sqrt()) / (3.0 + 5f64.sqrt());
    let dom =
        verify_domination(&cat, &SplittingOptions::new(vec![1, 1]), 1, 1.0, 1, 100, 4).unwrap();
    let dom_err = (dom.empirical_lambda - want).abs();
    notes.push(format!("domination lambda err={dom_err:.2e}"));

    let mut cfg = ExperimentConfig::new(SystemSpec::perturbed_cat(0.05).unwrap());
    cfg.seed = 31;
    cfg.params.samples = 2000;
    cfg.params.resolution = 128;
    cfg.params.bowen_n = 6;
    cfg.params.delta = 0.1;
    cfg.params.centers = 3;
    cfg.params.ball_n = vec![2, 4, 6];
    cfg.params.mc_count = 5000;
    cfg.params.point_samples = 5;
    cfg.params.frame_samples = 3;
    cfg.params.gap_n = 30;
    cfg.params.lyapunov_n = 500;
    cfg.params.domination_samples = 10;
    let mut identical = true;
    for c in Command::ALL {
        let a = run(&cfg, c).unwrap().json_text();
        let b = run(&cfg, c).unwrap().json_text();
        identical &= a == b;
    }
    notes.push(format!(
        "byte-identical reports for all commands: {identical}"
    ));

    Outcome {
        pass: spectra_ok && worst <= 1e-8 && dom.passed && dom_err <= 1e-10 && identical,
        detail: notes.join("; "),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("cat map volume-growth rate", cat_exactness),
        ("cat map spanning entropy and compare verdict", cat_bowen),
        (
            "skew product Lyapunov spectrum and volume rate",
            skew_product,
        ),
        (
            "perturbed cat volume vs spanning agreement",
            perturbed_agreement,
        ),
        ("Grassmannian gap vanishes", grassmann_gap),
        ("center-bundle growth equals max_V growth", bundle_growth),
        ("Bowen-ball volume growth bounds", ball_growth),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
