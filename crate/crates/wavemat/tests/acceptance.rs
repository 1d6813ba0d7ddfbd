//! Acceptance gate. Each test prints one `PASS`/`FAIL` line, written
//! straight to stderr so it shows even when output is captured.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use wavemat::dataset_io::read_dataset;
use wavemat_core::ablation::{ablation_pair, SceneSpec};
use wavemat_core::config::KvConfig;
use wavemat_core::experiment::{
    fit, flat_head_len, importance_report, main_lobe_span, run_experiment, AngleMode, ExperimentSpec,
    MaterialSet, ModelKind, ModelSettings, TrainedModel,
};
use wavemat_core::forest::{self, ForestParams, TreeNode};
use wavemat_core::tcn::{self, InputLayout, TcnParams};
use wavemat_core::{metrics, rng, simgen, split_by_repetition, ClassId};

const NAMES: [&str; 8] = [
    "gradient oracle",
    "forest oracle",
    "metric oracle",
    "experiment trends",
    "feature importance",
    "material channel ablation",
    "cli determinism",
    "protocol counting",
];

fn report(n: usize, pass: bool, detail: &str) {
    let name = NAMES[n - 1];
    let line = format!("[{n}] {name}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

#[test]
fn gradient_oracle() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut checked = 0;
    let cases = [
        (InputLayout::Channels, 1, None),
        (InputLayout::Channels, 1, Some(17)),
        (InputLayout::Sequence, 2, None),
        (InputLayout::Sequence, 2, Some(18)),
    ];
    for (i, (layout, kernel_size, dropout_seed)) in cases.into_iter().enumerate() {
        let p = TcnParams { channel_sizes: vec![4, 4], layout, kernel_size, ..TcnParams::default() };
        let model = tcn::init_tcn(&p, 8, 3, i as u64).unwrap();
        let mut r = rng::stream(i as u64, &[1]);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<ClassId> = (0..6).map(|j| ClassId(j % 3)).collect();
        let c = tcn::gradient_check(&model, &rows, &labels, dropout_seed, 1e-5, 1e-9).unwrap();
        assert_eq!(c.checked, model.parameter_count());
        checked += c.checked;
        worst = worst.max(c.max_rel_error);
        worst_abs = worst_abs.max(c.max_abs_error);
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        1,
        worst < 1e-4 && secs < 10.0,
        &format!("{checked} gradients, max relative error {worst:.2e} (max absolute {worst_abs:.2e}), {secs:.2}s"),
    );
}

#[test]
fn forest_oracle() {
    let t = Instant::now();
    let mut root_ok = 0;
    let mut pred_ok = 0;
    for seed in 0..20 {
        let (rows, labels, k) = oracles::random_dataset(seed);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            features_per_node: rows[0].len(),
            bootstrap: false,
            seed,
            ..ForestParams::default()
        };
        let f = forest::train_on_rows(&rows, &labels, &oracles::classes(k), &params).unwrap();
        let same = match (oracles::exhaustive_root(&rows, &labels, k), &f.trees()[0].nodes()[0]) {
            (None, TreeNode::Leaf { .. }) => true,
            (Some((ef, et)), TreeNode::Internal { feature, threshold, .. }) => ef == *feature && et == *threshold,
            _ => false,
        };
        root_ok += same as usize;

        let deep = ForestParams { n_trees: 9, features_per_node: 3, seed, ..ForestParams::default() };
        let f = forest::train_on_rows(&rows, &labels, &oracles::classes(k), &deep).unwrap();
        let mut r = rng::stream(seed, &[2]);
        let probes: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..rows[0].len()).map(|_| r.random_range(-1.0..11.0)).collect())
            .chain(rows.iter().cloned())
            .collect();
        pred_ok += probes.iter().all(|x| f.predict(x) == oracles::traverse(&f, x)) as usize;
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        2,
        root_ok == 20 && pred_ok == 20 && secs < 10.0,
        &format!("root split {root_ok}/20, traversal {pred_ok}/20, {secs:.2}s"),
    );
}

#[test]
fn metric_oracle() {
    let mut matched = 0;
    for seed in 0..100 {
        let (p, t) = oracles::random_pair(seed);
        let rep = metrics::evaluate(&p, &t).unwrap();
        let (per, miou) = oracles::brute_force(&p, &t);
        let same = rep.per_class_iou.len() == per.len()
            && rep
                .per_class_iou
                .iter()
                .zip(&per)
                .all(|((c, v), (bc, bv))| c.0 == *bc && (v - bv).abs() <= 1e-12)
            && (rep.miou - miou).abs() <= 1e-12;
        matched += same as usize;
    }
    let truth: Vec<ClassId> = [0, 1, 1, 0, 1, 0].iter().map(|&c| ClassId(c)).collect();
    let swapped: Vec<ClassId> = truth.iter().map(|c| ClassId(1 - c.0)).collect();
    let perfect = metrics::evaluate(&truth, &truth).unwrap().miou;
    let zero = metrics::evaluate(&swapped, &truth).unwrap().miou;
    report(
        3,
        matched == 100 && perfect == 1.0 && zero == 0.0,
        &format!("{matched}/100 pairs match brute force, perfect {perfect}, swapped {zero}"),
    );
}

#[test]
fn experiment_trends() {
    let settings = ModelSettings::from_config(&KvConfig::builtin()).unwrap();
    let t = Instant::now();
    let mut table = std::collections::BTreeMap::new();
    for model in [ModelKind::Rf, ModelKind::Tcn] {
        for set in MaterialSet::ALL {
            for angles in [AngleMode::Zero, AngleMode::All] {
                let r = run_experiment(&ExperimentSpec { set, angles, model, settings: settings.clone() }).unwrap();
                table.insert((model, set, angles), r.row.miou);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let m = |model, set, angles| table[&(model, set, angles)];
    let mut failures = Vec::new();
    let mut lines = String::new();
    for model in [ModelKind::Rf, ModelKind::Tcn] {
        let name = model.as_str();
        lines.push_str(&format!("\n  {name}:"));
        for set in MaterialSet::ALL {
            let (z, a) = (m(model, set, AngleMode::Zero), m(model, set, AngleMode::All));
            lines.push_str(&format!(" {} {z:.3}/{a:.3}", set.as_str()));
            if z <= a {
                failures.push(format!("{name} {} zero {z:.4} <= all {a:.4}", set.as_str()));
            }
        }
        let pz = m(model, MaterialSet::Pair, AngleMode::Zero);
        if pz < 0.90 {
            failures.push(format!("{name} pair/zero {pz:.4} < 0.90"));
        }
        for angles in [AngleMode::Zero, AngleMode::All] {
            let (p, am, c) = (
                m(model, MaterialSet::Pair, angles),
                m(model, MaterialSet::AllMaterials, angles),
                m(model, MaterialSet::Colours, angles),
            );
            if !(p >= am && am >= c) {
                failures.push(format!("{name} {} ordering {p:.4} {am:.4} {c:.4}", angles.as_str()));
            }
        }
    }
    if secs >= 900.0 {
        failures.push(format!("grid took {secs:.0}s"));
    }
    report(
        4,
        failures.is_empty(),
        &format!("12 experiments in {secs:.0}s (zero/all per set){lines}\n  {}", failures.join("; ")),
    );
}

#[test]
fn feature_importance() {
    let settings = ModelSettings::from_config(&KvConfig::builtin()).unwrap();
    let seed = settings.dataset_seeds[0];
    let data = simgen::generate_dataset(
        &settings.protocol(MaterialSet::AllMaterials, AngleMode::All, seed).unwrap(),
        &settings.sensor,
    )
    .unwrap();
    let TrainedModel::Forest(f) = fit(ModelKind::Rf, &data, &settings, seed).unwrap().model else {
        unreachable!()
    };
    let imp = importance_report(&f).unwrap();
    let head = flat_head_len(&data, settings.sensor.baseline);
    let (lo, hi) = main_lobe_span(&data, settings.sensor.baseline).unwrap();
    let head_mass: f64 = imp[..head].iter().map(|(_, v)| v).sum();
    let total: f64 = imp.iter().map(|(_, v)| v).sum();
    let (arg, _) = imp.iter().fold((0, f64::MIN), |b, &(i, v)| if v > b.1 { (i, v) } else { b });
    report(
        5,
        head_mass < 0.01 && (lo..=hi).contains(&arg) && (total - 1.0).abs() <= 1e-12,
        &format!(
            "flat head 0..{head} holds {:.3}% of importance, argmax bin {arg} in main lobe {lo}..={hi}, sum - 1 = {:.1e}",
            100.0 * head_mass,
            total - 1.0
        ),
    );
}

#[test]
fn material_channel_ablation() {
    let cfg = KvConfig::builtin();
    let spec = SceneSpec::from_config(&cfg).unwrap();
    let params = ForestParams::from_config(&cfg, "ablation").unwrap();
    let deltas: Vec<f64> = (0..10)
        .map(|s| {
            let (without, with) = ablation_pair(&spec, s, &params).unwrap();
            with - without
        })
        .collect();
    let wins = deltas.iter().filter(|d| **d > 0.0).count();
    let mean = deltas.iter().sum::<f64>() / 10.0;
    report(6, wins >= 9, &format!("material channel helps on {wins}/10 scenes, mean gain {mean:+.3} mIOU"));
}

fn wavemat(args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_wavemat")).args(args).env_remove("CI").output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn run_dir(stdout: &str) -> PathBuf {
    PathBuf::from(stdout.lines().find_map(|l| l.strip_prefix("run_dir ")).unwrap())
}

/// Every file under `dir`, relative path and bytes, sorted.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs every subcommand once under `root`; paths inside `root` are
/// relative so that two roots can be compared.
fn session(root: &Path) {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = root.join("data.csv");
    let runs = root.join("runs");
    let (d, r) = (s(&data), s(&runs));
    wavemat(&["generate", "--preset", "pair", "--angles", "all", "--seed", "12", "--out", &d]);
    let out = wavemat(&["train", "--model", "rf", "--data", &d, "--seed", "3", "--out", &r, "--set", "forest.n_trees=20"]);
    let ck = run_dir(&out).join("model.ckpt");
    wavemat(&["train", "--model", "tcn", "--iterations", "30", "--data", &d, "--seed", "3", "--out", &r]);
    wavemat(&["evaluate", "--data", &d, "--checkpoint", &s(&ck), "--out", &r]);
    wavemat(&[
        "experiment", "--grid", "full", "--seed", "1", "--dataset-seeds", "8", "--iterations", "15",
        "--set", "forest.n_trees=5", "--set", "tcn.channel_sizes=8,8", "--out", &r,
    ]);
    wavemat(&["importance", "--preset", "pair", "--angles", "all", "--seed", "12", "--out", &r, "--set", "forest.n_trees=10"]);
    wavemat(&["ablation", "--seed", "0", "--count", "2", "--out", &r]);
}

#[test]
fn cli_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    session(a.path());
    session(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let names = |s: &[(String, Vec<u8>)]| s.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    let csvs = sa.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    // checkpoints and config echoes embed no paths, so every file must match
    let differing: Vec<&String> = sa.iter().zip(&sb).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    report(
        7,
        names(&sa) == names(&sb) && differing.is_empty() && csvs >= 10,
        &format!("{} files ({csvs} CSV) from 7 subcommands, {} differ between reruns", sa.len(), differing.len()),
    );
}

#[test]
fn protocol_counting() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("all.csv");
    let out = wavemat(&["generate", "--preset", "all-materials", "--angles", "all", "--seed", "1", "--out", p.to_str().unwrap()]);
    let data = read_dataset(&p, true).unwrap();
    let rows = fs::read_to_string(&p).unwrap().lines().count() - 1;
    let (train, test) = split_by_repetition(&data, &[5]).unwrap();
    report(
        8,
        out.starts_with("180 samples") && rows == 180 && data.len() == 180 && (train.len(), test.len()) == (144, 36),
        &format!("{rows} rows, split {}/{}", train.len(), test.len()),
    );
}
