//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. The LeanCraft comparisons train every variant over
//! five seeds and take roughly twenty minutes on one core.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use prism_core::envs::{optimal_start_value, Env, LeanCraftParams, MirrorChainParams};
use prism_core::harness::verify::{self, Operators, PropertyResult};
use prism_core::harness::{
    collect_random_episodes, parse_config_str, run_experiment, run_seed, train_initial_ensemble, write_outputs,
    RunConfig, RunOutput, Variant,
};
use prism_core::morl::{evaluate_scalarized, weight_grid};
use prism_core::seeds::derive_rng;

struct Line {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn properties(name: &'static str, limit: Duration, f: impl FnOnce() -> Vec<PropertyResult>) -> Line {
    let (props, took) = timed(f);
    let failed: Vec<String> = props
        .iter()
        .filter(|p| !p.passed)
        .map(|p| format!("{} worst={:e} tol={:e}", p.id, p.worst, p.tolerance))
        .collect();
    let worst: Vec<String> = props.iter().map(|p| format!("{}={:.3e}", p.id, p.worst)).collect();
    Line {
        name,
        passed: failed.is_empty() && took <= limit,
        detail: if failed.is_empty() {
            format!("{} in {:.1?} (limit {:?})", worst.join(" "), took, limit)
        } else {
            format!("failed: {} in {:.1?}", failed.join("; "), took)
        },
    }
}

fn rng(label: &str) -> prism_core::seeds::Rng64 {
    derive_rng(2024, label, 0)
}

fn mean_hv(run: &RunOutput) -> f64 {
    let hv: Vec<f64> = run.rows.iter().filter(|r| r.metric == "HV").map(|r| r.value).collect();
    hv.iter().sum::<f64>() / hv.len() as f64
}

/// Desk-scale LeanCraft settings shared by every comparison: a fifth of the
/// reference budget and a narrow reward network capped at 60 epochs.
fn leancraft(variant: &str, p_rel: f64) -> RunConfig {
    parse_config_str(&format!(
        r#"{{"env":"leancraft","variant":"{variant}","p_rel":{p_rel},"seeds":[0,1,2,3,4],"scale":0.2,
            "reward_model":{{"hidden_dim":32,"train":{{"epochs":60}}}}}}"#
    ))
    .expect("static config")
}

fn reconstruction() -> Line {
    let (res, took) = timed(|| {
        let env = Env::LeanCraft(LeanCraftParams::training());
        let cfg = leancraft("prism", 0.0);
        let train = collect_random_episodes(&env, 1000, 0).unwrap();
        let ens = train_initial_ensemble(&cfg, 0, &train).unwrap();
        let held = collect_random_episodes(&env, 100, 1).unwrap();
        let (mut rel, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
        for tr in &held {
            let shaped = ens.shape_trajectory(tr).unwrap();
            let truth: Vec<f64> = tr.steps.iter().map(|s| s.reward[cfg.sparse_channel]).collect();
            let (p, r): (f64, f64) = (shaped.iter().sum(), truth.iter().sum());
            rel.push((p - r).abs() / (r.abs() + 1.0));
            xs.extend(shaped);
            ys.extend(truth);
        }
        rel.sort_by(f64::total_cmp);
        let median = (rel[49] + rel[50]) / 2.0;
        (median, pearson(&xs, &ys))
    });
    let (median, corr) = res;
    Line {
        name: "reconstruction",
        passed: median < 0.1 && corr > 0.8 && took <= Duration::from_secs(600),
        detail: format!("median rel err {median:.4} (<0.1), per-step pearson {corr:.4} (>0.8) in {took:.0?}"),
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn mirrorchain_optimality() -> Line {
    let (gaps, took) = timed(|| {
        let params = MirrorChainParams::default();
        let cfg = RunConfig::new(Env::MirrorChain(params.clone()), Variant::Oracle, vec![0]);
        let out = run_seed(&cfg, 0).unwrap();
        weight_grid(cfg.n_weights, 2)
            .unwrap()
            .iter()
            .zip(&out.policies)
            .enumerate()
            .map(|(i, (w, pol))| {
                let got = evaluate_scalarized(&cfg.env, pol, w, 20, &mut derive_rng(0, "optimality", i as u64)).unwrap();
                let opt = optimal_start_value(w.pair(), &params);
                (got, opt)
            })
            .collect::<Vec<_>>()
    });
    let short: Vec<String> = gaps
        .iter()
        .filter(|(got, opt)| opt - got > 0.1 * opt.abs() + 1e-12)
        .map(|(g, o)| format!("{g:.3}/{o:.3}"))
        .collect();
    Line {
        name: "mirrorchain_optimality",
        passed: short.is_empty() && took <= Duration::from_secs(120),
        detail: format!(
            "{}/{} weights within 90% of optimum in {took:.1?}{}",
            gaps.len() - short.len(),
            gaps.len(),
            if short.is_empty() { String::new() } else { format!("; short: {}", short.join(", ")) }
        ),
    }
}

fn determinism() -> Line {
    let configs = [
        r#"{"env":"mirrorchain","variant":"oracle","seeds":[0,1]}"#,
        r#"{"env":"leancraft","variant":"prism","seeds":[7],"scale":0.01,"n_weights":3,
            "reward_model":{"hidden_dim":8,"train":{"epochs":5}}}"#,
    ];
    let mut same = true;
    for text in configs {
        let cfg = parse_config_str(text).unwrap();
        let bytes: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                write_outputs(dir.path(), &[run_experiment(&cfg).unwrap()], false).unwrap();
                std::fs::read(dir.path().join("metrics.csv")).unwrap()
            })
            .collect();
        same &= !bytes[0].is_empty() && bytes[0] == bytes[1];
    }
    Line {
        name: "determinism",
        passed: same,
        detail: format!("metrics.csv byte-identical across reruns: {same}"),
    }
}

fn main() -> ExitCode {
    let ops = Operators::default();
    let mut lines = Vec::new();
    let mut emit = |l: Line| {
        println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
        lines.push(l.passed);
    };

    emit(properties("group_laws", Duration::from_secs(10), || {
        let mut v = vec![
            verify::involution_state(&ops, &mut rng("inv-s")).unwrap(),
            verify::involution_action(&ops, &mut rng("inv-a")).unwrap(),
            verify::isometry(&ops, &mut rng("iso")).unwrap(),
        ];
        v.extend(verify::orbit_lemmas(&ops, &mut rng("orbit")).unwrap());
        v
    }));
    emit(properties("non_expansiveness", Duration::from_secs(30), || {
        vec![verify::non_expansive(&ops, &mut rng("nonexp"), 200).unwrap()]
    }));
    emit(properties("projection_distance", Duration::from_secs(60), || {
        vec![
            verify::projection_identity(&mut rng("proj"), 100).unwrap(),
            verify::xi_property(&mut rng("xi")).unwrap(),
        ]
    }));
    emit(properties("gradient_checks", Duration::from_secs(60), || {
        vec![
            verify::gradient_property("backprop", 100, &mut rng("g-net"), verify::network_gradient_error).unwrap(),
            verify::gradient_property("trajectory_loss", 100, &mut rng("g-traj"), verify::trajectory_gradient_error)
                .unwrap(),
        ]
    }));
    emit(properties("metric_oracles", Duration::from_secs(60), || {
        vec![
            verify::hv_exact(&mut rng("hv")).unwrap(),
            verify::hv_monte_carlo(&mut rng("hv-mc")).unwrap(),
            verify::eum_hand().unwrap(),
            verify::pareto_idempotence(&mut rng("pareto")).unwrap(),
        ]
    }));
    emit(properties("sparsity_conservation", Duration::from_secs(10), || {
        vec![verify::sparsity_conservation(&mut rng("sparsity"), 10_000).unwrap()]
    }));
    emit(reconstruction());
    emit(mirrorchain_optimality());

    let t = Instant::now();
    let prism = run_experiment(&leancraft("prism", 0.0)).unwrap();
    let baseline = run_experiment(&leancraft("baseline", 0.0)).unwrap();
    let head_to_head = t.elapsed();
    let (hp, hb) = (mean_hv(&prism), mean_hv(&baseline));
    emit(Line {
        name: "prism_vs_baseline",
        passed: hp > hb && hp >= 1.2 * hb && head_to_head <= Duration::from_secs(1800),
        detail: format!("mean HV prism {hp:.0} vs baseline {hb:.0} (ratio {:.3}, need >=1.2) in {head_to_head:.0?}", hp / hb),
    });

    let hu = mean_hv(&run_experiment(&leancraft("uniform", 0.0)).unwrap());
    let hr = mean_hv(&run_experiment(&leancraft("random", 0.0)).unwrap());
    emit(Line {
        name: "redistribution_ablation",
        passed: hp >= hu && hu >= hr,
        detail: format!("mean HV prism {hp:.0} >= uniform {hu:.0} >= random {hr:.0}"),
    });

    let dense = mean_hv(&run_experiment(&leancraft("baseline", 1.0)).unwrap());
    emit(Line {
        name: "sparsity_sensitivity",
        passed: hb <= 0.9 * dense,
        detail: format!("baseline mean HV p_rel=0 {hb:.0} vs p_rel=1 {dense:.0} (drop {:.1}%, need >=10%)", 100.0 * (1.0 - hb / dense)),
    });

    emit(determinism());

    let failed = lines.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
