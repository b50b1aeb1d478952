//! Acceptance run: one timed pass/fail line per criterion, nonzero exit on
//! any failure. Built with `harness = false` so the lines always print.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_pairs, random_scene, rotate_pairs};
use rotlayout::eval::{brute_force_oracles, compute_metrics, evaluate_model, metrics_close, roundtrip_pairs};
use rotlayout::layout::{rotate_layout, validate_layout, RoomType, Rotation, SceneLayout, N_CATEGORIES};
use rotlayout::model::{layer_checks, network_checks, ModelConfig, KINK_MARGIN_MIN, NETWORK_COORDS_PER_TENSOR};
use rotlayout::raster::{render_layout, LayoutImage, RasterConfig};
use rotlayout::synthgen::{build_dataset, build_dataset_for, generate_scene, GenSpec, Split};
use rotlayout::tensor::{gradient_check, quarter_turn_planes, Graph, Tensor, TensorError, GRADCHECK_STEP};
use rotlayout::training::{d_loss, g_loss, prepare_samples, Ablation, TrainConfig, Trainer};

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn metric_oracle() -> Outcome {
    for seed in 0..100 {
        let (_, pairs) = random_pairs(seed);
        let fast = compute_metrics(&pairs).map_err(fail)?;
        let slow = brute_force_oracles(&pairs).map_err(fail)?;
        ensure(metrics_close(&fast, &slow, 1e-12), || format!("seed {seed}: {fast:?} vs {slow:?}"))?;
    }
    Ok("100 sets agree within 1e-12".into())
}

fn round_trip() -> Outcome {
    let d = build_dataset(13, 0).map_err(fail)?;
    let scenes: Vec<&SceneLayout> = d.scenes.iter().take(200).collect();
    ensure(scenes.len() == 200, || format!("only {} scenes", scenes.len()))?;
    let rc = RasterConfig::new(64).map_err(fail)?;
    let m = compute_metrics(&roundtrip_pairs(&scenes, &rc).map_err(fail)?).map_err(fail)?;
    ensure(m.mode == 1.0 && m.map50 == 1.0 && m.rot == 1.0, || format!("{m:?}"))?;
    Ok(format!("Mode {} mAP {} RoT {} over 200 scenes at R=64", m.mode, m.map50, m.rot))
}

fn group_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..500 {
        let s = random_scene(&mut rng);
        let a = Rotation::ALL[rng.random_range(0..4)];
        let b = Rotation::ALL[rng.random_range(0..4)];
        ensure(rotate_layout(&s, Rotation::R0) == s, || format!("scene {i}: identity"))?;
        ensure(rotate_layout(&rotate_layout(&s, a), b) == rotate_layout(&s, a.then(b)), || format!("scene {i}: composition"))?;
        ensure(rotate_layout(&rotate_layout(&s, a), a.inverse()) == s, || format!("scene {i}: inverse"))?;
        ensure(validate_layout(&rotate_layout(&s, a)).is_empty(), || format!("scene {i}: invalid after turn"))?;
    }
    for seed in 0..100 {
        let (scenes, pairs) = random_pairs(seed);
        let base = compute_metrics(&pairs).map_err(fail)?;
        for k in Rotation::ALL {
            let m = compute_metrics(&rotate_pairs(&scenes, &pairs, k)).map_err(fail)?;
            ensure(m == base, || format!("seed {seed}, {k:?}: {m:?} vs {base:?}"))?;
        }
    }
    Ok("500 scenes obey the group laws; metrics unchanged under 4 turns of 100 sets".into())
}

fn rotation_adjoint() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let side = 8;
    let n = 2 * 3 * side * side;
    let mut worst: f64 = 0.0;
    for k in Rotation::ALL {
        let h = Tensor::from_vec(&[2, 3, side, side], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).map_err(fail)?;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g = Graph::new();
        let x = g.input(&h, true);
        let y = g.quarter_turn(x, &[k, k]).map_err(fail)?;
        let loss = g.dot(y, w.clone()).map_err(fail)?;
        g.backward(loss).map_err(fail)?;
        let expect: Vec<f64> = w.chunks(side * side).flat_map(|p| quarter_turn_planes(p, side, k.inverse())).collect();
        ensure(g.grad(x) == Some(expect.as_slice()), || format!("{k:?}: gradient is not the inverse turn"))?;
        let r = gradient_check(std::slice::from_ref(&h), GRADCHECK_STEP, |g, ids| -> Result<_, TensorError> {
            let y = g.quarter_turn(ids[0], &[k, k])?;
            g.dot(y, w.clone())
        })
        .map_err(fail)?;
        worst = worst.max(r.max_rel_error);
    }
    ensure(worst < 1e-6, || format!("max rel error {worst:.3e}"))?;
    Ok(format!("max rel error {worst:.3e} over 4 turns"))
}

fn gradchecks() -> Outcome {
    let cfg = ModelConfig { resolution: 16, base_channels: 4, ..ModelConfig::default() };
    let (mut worst, mut margin, mut count) = (0.0f64, f64::INFINITY, 0);
    for seed in 0..10 {
        let mut checks = layer_checks(seed).map_err(fail)?;
        checks.extend(network_checks(&cfg, seed, Some(NETWORK_COORDS_PER_TENSOR)).map_err(fail)?);
        for c in checks {
            ensure(c.passed(), || format!("seed {seed}: {} {:?}", c.name, c.report))?;
            worst = worst.max(c.report.max_rel_error);
            margin = margin.min(c.report.kink_margin);
            count += 1;
        }
    }
    ensure(margin >= KINK_MARGIN_MIN, || format!("kink margin {margin:.2e}"))?;
    Ok(format!("{count} checks, max rel error {worst:.3e}, min kink margin {margin:.2e}"))
}

fn loss_sanity() -> Outcome {
    let d = d_loss(0.5, 0.5);
    ensure((d - 2.0 * 2f64.ln()).abs() <= 1e-12, || format!("d_loss(.5,.5) = {d}"))?;
    let s = generate_scene(&GenSpec { room_type: RoomType::Bedroom, seed: 1 }, "s").map_err(fail)?;
    let gt = render_layout(&s, &RasterConfig::new(32).map_err(fail)?).map_err(fail)?;
    let c = N_CATEGORIES + 1;
    let uniform = LayoutImage { resolution: 32, cat: vec![1.0 / c as f64; c * 1024], dir: vec![0.25; 4 * 1024] };
    let l = g_loss(&uniform, &gt, 0.3, 0.7).map_err(fail)?;
    ensure((l.cat - 14f64.ln()).abs() <= 1e-9, || format!("uniform cat loss {}", l.cat))?;
    ensure(l.total(0.0, 0.0) == l.gc(), || "lambda = 0 is not the content loss".into())?;

    let scenes = [&s];
    let model = ModelConfig::default();
    let samples = prepare_samples(&scenes, &model).map_err(fail)?;
    let cfg = TrainConfig { iterations: 2, lambda_adv1: 0.0, lambda_adv2: 0.0, ..TrainConfig::default() };
    let mut t = Trainer::new(&model, &cfg).map_err(fail)?;
    for _ in 0..2 {
        let m = t.train_step(&samples).map_err(fail)?;
        ensure(m.l_g.to_bits() == m.l_gc.to_bits(), || format!("step {}: L_g {} vs L_gc {}", m.step, m.l_g, m.l_gc))?;
    }
    Ok(format!("d_loss {d:.15}, uniform cat {:.12}, L_g = L_gc at lambda 0", l.cat))
}

fn memorization() -> Outcome {
    let scene = generate_scene(&GenSpec { room_type: RoomType::Bedroom, seed: 0 }, "bedroom-0000").map_err(fail)?;
    let model = ModelConfig::default();
    let cfg = TrainConfig { iterations: 500, seed: 0, ..TrainConfig::default() };
    let samples = prepare_samples(&[&scene], &model).map_err(fail)?;
    let mut t = Trainer::new(&model, &cfg).map_err(fail)?;
    let mut last = f64::NAN;
    t.run(&samples, |_, m| {
        last = m.l_gc;
        Ok(())
    })
    .map_err(fail)?;
    let (rep, _) = evaluate_model(&t.params, &t.model, &[&scene]).map_err(fail)?;
    let mode = rep.overall.mode;
    ensure(last < 0.1 && mode >= 0.9, || format!("L_gc {last:.4}, Mode {mode:.3}"))?;
    Ok(format!("L_gc {last:.4}, Mode {mode:.3}"))
}

/// Test-split RoT of the full model and of the rotation ablation from the
/// first verified run; a rerun has to reproduce them.
const PINNED_ROT_FULL: f64 = -0.9583;
const PINNED_ROT_NO_ROTATION: f64 = -1.0;
const PIN_TOL: f64 = 0.02;

fn rotation_ablation() -> Outcome {
    let d = build_dataset_for(&[RoomType::Bedroom], 25, 0).map_err(fail)?;
    let train: Vec<&SceneLayout> = d.scenes_in(Split::Train).collect();
    let test: Vec<&SceneLayout> = d.scenes_in(Split::Test).collect();
    let model = ModelConfig::default();
    let mut rot = Vec::new();
    for ablation in [Ablation::None, Ablation::Rotation] {
        let cfg = TrainConfig { iterations: 2000, seed: 0, ablation, ..TrainConfig::default() };
        let mut t = Trainer::new(&model, &cfg).map_err(fail)?;
        let samples = prepare_samples(&train, &t.model).map_err(fail)?;
        t.run(&samples, |_, _| Ok(())).map_err(fail)?;
        let (rep, _) = evaluate_model(&t.params, &t.model, &test).map_err(fail)?;
        rot.push(rep.overall.rot);
    }
    let (full, ablated) = (rot[0], rot[1]);
    let detail = format!("RoT full {full:.4}, without rotation filters {ablated:.4}");
    ensure(full >= ablated, || detail.clone())?;
    ensure((full - PINNED_ROT_FULL).abs() <= PIN_TOL && (ablated - PINNED_ROT_NO_ROTATION).abs() <= PIN_TOL, || {
        format!("{detail}; pinned {PINNED_ROT_FULL} and {PINNED_ROT_NO_ROTATION}")
    })?;
    Ok(detail)
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn same_tree(a: &Path, b: &Path, skip: &[&str]) -> Result<usize, String> {
    let (fa, fb) = (files(a), files(b));
    let rel = |root: &Path, v: &[PathBuf]| -> Vec<PathBuf> { v.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect() };
    ensure(rel(a, &fa) == rel(b, &fb), || format!("{} and {} hold different files", a.display(), b.display()))?;
    let mut n = 0;
    for (x, y) in fa.iter().zip(&fb) {
        if skip.iter().any(|s| x.ends_with(s)) {
            continue;
        }
        ensure(fs::read(x).ok() == fs::read(y).ok(), || format!("{} differs", x.display()))?;
        n += 1;
    }
    Ok(n)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let root = tmp.path();
    let run = |threads: &str, args: &[&str]| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_rotlayout"))
            .args(args)
            .env("RL_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .map_err(fail)?;
        ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    };
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let mut compared = 0;
    for (tag, threads) in [("a", "1"), ("b", "4")] {
        let data = p(&format!("{tag}/data"));
        run(threads, &["dataset", "gen", "--n-per-type", "5", "--seed", "7", "--out", &data])?;
        run(
            threads,
            &[
                "train",
                "--data",
                &data,
                "--room-type",
                "bedroom,study",
                "--seed",
                "7",
                "--iterations",
                "10",
                "--resolution",
                "16",
                "--out",
                &p(&format!("{tag}/runs/r")),
            ],
        )?;
        let ckpt = p(&format!("{tag}/runs/r/ckpt-000010.rltw"));
        run(
            threads,
            &["eval", "--data", &data, "--seed", "7", "--resolution", "16", "--ckpt", &ckpt, "--out", &p(&format!("{tag}/eval"))],
        )?;
        run(threads, &["report", "--data", &p(&format!("{tag}/runs")), "--out", &p(&format!("{tag}/report"))])?;
    }
    for sub in ["data", "runs", "eval", "report"] {
        compared += same_tree(&root.join("a").join(sub), &root.join("b").join(sub), &["timing.csv"])?;
    }
    Ok(format!("{compared} files byte-identical across two runs with 1 and 4 threads"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle agrees with the fast path", 5, metric_oracle),
        ("raster round trip scores exactly one", 10, round_trip),
        ("rotation group laws and metric invariance", 5, group_laws),
        ("rotation filter adjoint", 60, rotation_adjoint),
        ("gradient checks of layers and networks", 60, gradchecks),
        ("loss sanity values", 60, loss_sanity),
        ("single-scene memorization", 180, memorization),
        ("rotation filters help on bedrooms", 900, rotation_ablation),
        ("determinism of every output", 300, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = f();
        let took = t0.elapsed();
        let outcome = match outcome {
            Ok(d) if took > Duration::from_secs(*limit) => Err(format!("{d}; took longer than {limit} s")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        println!("{tag} {} {name} ({:.1} s): {detail}", i + 1, took.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
