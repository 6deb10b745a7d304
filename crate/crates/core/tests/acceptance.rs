//! Acceptance suite: one numbered check per line, PASS or FAIL, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leadsel::bandit::{KernelMode, NeuralThompson, NtsConfig, RewardNetwork};
use leadsel::classifier::{dap_pool, DapSpec, Pooling, ReducedClassifierSpec, VerdictRow, VerdictTable};
use leadsel::context::{detect_r_peaks, embed_features};
use leadsel::energy::{
    comm_energy, conv_flops, model_flops, ConvLayerSpec, DeviceProfile, EnergyConfig, EnergyModel, ProtocolProfile,
};
use leadsel::harness::{
    debias_training_set, entropy, optimal_arm, planted_environment, prepare_rounds, reward_of, run_prepared,
    EpisodeConfig, EpisodeOutcome, PlantedSpec, PolicyKind, PreparedRound, RewardRule,
};
use leadsel::signal::{
    generate_synthetic_segment, write_segments, ArmCatalog, Label, LeadId, Matrix, SegmentRecord, SyntheticEcgParams,
    WaveTemplate, NUM_LEADS,
};
use leadsel::Execution;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Independent dense evaluation of `w2 . relu(W1 x + b1) + b2`.
fn reference_forward(theta: &[f64], x: &[f64], m: usize) -> f64 {
    let d = x.len();
    let (w1, rest) = theta.split_at(m * d);
    let (b1, rest) = rest.split_at(m);
    let (w2, b2) = rest.split_at(m);
    let mut out = b2[0];
    for h in 0..m {
        let z: f64 = b1[h] + (0..d).map(|j| w1[h * d + j] * x[j]).sum::<f64>();
        out += w2[h] * z.max(0.0);
    }
    out
}

fn c01_gradient() -> Check {
    let start = Instant::now();
    let (m, d, k) = (16, 8, 3);
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + draw);
        let p = RewardNetwork::param_count(k * d, m);
        let theta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let net = RewardNetwork::from_theta(k * d, m, theta.clone()).map_err(|e| e.to_string())?;
        let features: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = embed_features(&features, k).map_err(|e| e.to_string())?;
        let x = emb.vector(rng.random_range(0..k));
        let g = net.gradient(x).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut num = 0.0;
        let mut den_a = 0.0;
        let mut den_b = 0.0;
        for i in 0..p {
            let mut tp = theta.clone();
            tp[i] += h;
            let mut tm = theta.clone();
            tm[i] -= h;
            let fd = (reference_forward(&tp, x, m) - reference_forward(&tm, x, m)) / (2.0 * h);
            num += (g[i] - fd).powi(2);
            den_a += g[i].powi(2);
            den_b += fd.powi(2);
        }
        let rel = num.sqrt() / den_a.sqrt().max(den_b.sqrt()).max(1e-300);
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && secs < 5.0,
        format!("max relative error {worst:.2e} over 20 draws (m=16, d=8, K=3) in {secs:.2}s"),
    )
}

fn tiny_bandit(d: usize, k: usize, m: usize, seed: u64) -> NeuralThompson {
    NeuralThompson::new(
        NtsConfig {
            hidden: m,
            input_dim: d * k,
            nu: 0.1,
            sgd_steps_per_round: 3,
            batch_cap: 8,
            kernel: KernelMode::Full,
            ..Default::default()
        },
        seed,
    )
    .expect("valid config")
    .with_execution(Execution::Sequential)
}

fn random_context(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<f64> {
    let f: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    embed_features(&f, k).expect("k > 0").vector(rng.random_range(0..k)).to_vec()
}

/// `lambda I + sum g g^T / m`, dense.
fn dense_kernel(p: usize, lambda: f64, m: f64, grads: &[Vec<f64>]) -> DMatrix<f64> {
    let mut u = DMatrix::<f64>::identity(p, p) * lambda;
    for g in grads {
        let v = DVector::from_column_slice(g);
        u += &v * v.transpose() / m;
    }
    u
}

fn c02_kernel() -> Check {
    let start = Instant::now();
    let (d, k, m) = (4, 2, 4);
    let mut b = tiny_bandit(d, k, m, 2);
    let p = b.config().param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut grads = Vec::new();
    for _ in 0..100 {
        let x = random_context(&mut rng, d, k);
        grads.push(b.gradient(&x).map_err(|e| e.to_string())?);
        b.update(&x, rng.random_range(0.0..1.0)).map_err(|e| e.to_string())?;
    }
    let inv = dense_kernel(p, b.config().lambda, m as f64, &grads)
        .try_inverse()
        .ok_or("dense kernel is singular")?;
    let kernel = b.kernel().as_full().ok_or("kernel is not full")?;
    let mut err: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            err = err.max((kernel.get(i, j) - inv[(i, j)]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        p <= 50 && err < 1e-6 && secs < 10.0,
        format!("p={p}, 100 updates, max |diff| {err:.2e} in {secs:.2}s"),
    )
}

fn c03_variance() -> Check {
    let (d, k, m) = (3, 3, 4);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for seq in 0..50u64 {
        let mut b = tiny_bandit(d, k, m, seq);
        let p = b.config().param_count();
        let lambda = b.config().lambda;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seq);
        let query: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grads = Vec::new();
        let mut prev = b.posterior_variance_dense(&query).map_err(|e| e.to_string())?;
        let steps = rng.random_range(5..40);
        for _ in 0..steps {
            let x = random_context(&mut rng, d, k);
            grads.push(b.gradient(&x).map_err(|e| e.to_string())?);
            b.update(&x, rng.random_range(0.0..1.0)).map_err(|e| e.to_string())?;
            let s = b.posterior_variance_dense(&query).map_err(|e| e.to_string())?;
            if s > prev * (1.0 + 1e-12) {
                monotone = false;
            }
            prev = s;
        }
        let x = random_context(&mut rng, d, k);
        let g = b.gradient(&x).map_err(|e| e.to_string())?;
        let maintained = b.posterior_variance_dense(&g).map_err(|e| e.to_string())?;
        let u = dense_kernel(p, lambda, m as f64, &grads);
        let gv = DVector::from_column_slice(&g);
        let solved = u.lu().solve(&gv).ok_or("dense solve failed")?;
        let direct = lambda * gv.dot(&solved) / m as f64;
        worst = worst.max((maintained - direct).abs() / direct.abs().max(1e-300));
    }
    ensure(
        worst < 1e-9 && monotone,
        format!("50 sequences: max relative error {worst:.2e}; variance non-increasing: {monotone}"),
    )
}

fn c04_flops_and_comm() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let s = ConvLayerSpec {
            h: rng.random_range(1..=5000),
            w: rng.random_range(1..=12),
            c_in: rng.random_range(1..=64),
            k: rng.random_range(1..=15),
            c_out: rng.random_range(1..=128),
        };
        // walk every output position and channel
        let per_output = 2 * (u128::from(s.c_in) * u128::from(s.k) + 1);
        let mut recount: u128 = 0;
        for _ in 0..s.h * s.w {
            recount += per_output * u128::from(s.c_out);
        }
        let got = conv_flops(&s).map_err(|e| e.to_string())?;
        if u128::from(got) != recount {
            return Err(format!("{s:?}: {got} != {recount}"));
        }
    }
    let spec = ReducedClassifierSpec::default();
    for (len, ch) in [(1000usize, 2usize), (1000, 12), (733, 5)] {
        let mut h = len as u64;
        let mut want: u64 = 0;
        for b in &spec.blocks {
            want += 2 * h * ch as u64 * (b.in_channels as u64 * b.kernel as u64 + 1) * b.out_channels as u64;
            h = h.div_ceil(b.stride as u64);
        }
        let mut fan_in = (spec.blocks.last().unwrap().out_channels * spec.dap.target_length * spec.dap.target_channels) as u64;
        for &out in spec.dense.iter().chain(std::iter::once(&5)) {
            want += 2 * (fan_in + 1) * out as u64;
            fan_in = out as u64;
        }
        let got = model_flops(&spec, len, ch).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("model FLOPs {got} != layer walk {want} at {len}x{ch}"));
        }
    }
    let cat = ArmCatalog::default();
    let (narrow, wide) = (cat.narrowest_arm(), cat.widest_arm());
    let mut ratios = Vec::new();
    for p in ProtocolProfile::example_profiles() {
        for (dur, fs) in [(3600.0, 100.0), (10.0, 100.0), (3600.0, 500.0)] {
            let e12 = comm_energy(wide, &cat, &p, dur, fs, 16).map_err(|e| e.to_string())?;
            let e2 = comm_energy(narrow, &cat, &p, dur, fs, 16).map_err(|e| e.to_string())?;
            ratios.push(e12 / e2);
        }
    }
    ensure(
        ratios.iter().all(|&r| r == 6.0),
        format!("1000 conv specs integer-exact; 12-lead/2-lead comm ratios {ratios:?}"),
    )
}

/// Desk-scale bandit used for the regret and energy sweeps.
fn sweep_config() -> EpisodeConfig {
    EpisodeConfig {
        nts: NtsConfig {
            nu: 0.1,
            hidden: 2,
            input_dim: 5 * 55,
            learning_rate: 0.05,
            sgd_steps_per_round: 10,
            batch_cap: 16,
            kernel: KernelMode::Full,
            ..Default::default()
        },
        shuffle: true,
        bandit_exec: Execution::Sequential,
        ..Default::default()
    }
}

struct SeedRun {
    nts: EpisodeOutcome,
    random: f64,
    fixed: Vec<f64>,
    fixed_wide_energy: Vec<f64>,
    rounds: Vec<PreparedRound>,
}

struct Sweep {
    runs: Vec<SeedRun>,
    elapsed: Duration,
    energy: Vec<EnergyModel>,
}

fn energy_models(cat: &ArmCatalog) -> Vec<EnergyModel> {
    ProtocolProfile::example_profiles()
        .into_iter()
        .map(|p| {
            EnergyModel::new(
                cat.clone(),
                DeviceProfile::default(),
                p,
                ReducedClassifierSpec::default(),
                EnergyConfig::default(),
            )
            .expect("valid energy model")
        })
        .collect()
}

fn run_sweep() -> Result<Sweep, String> {
    let start = Instant::now();
    let cat = ArmCatalog::default();
    let energy = energy_models(&cat);
    let cfg = sweep_config();
    let runs = Execution::default()
        .map_range(100, |seed| -> Result<SeedRun, String> {
            let seed = seed as u64;
            let spec = PlantedSpec {
                n_segments: 2000,
                seed: 10_000 + seed,
                ..Default::default()
            };
            let (segments, verdicts) = planted_environment(&spec, cat.len()).map_err(|e| e.to_string())?;
            let rounds = prepare_rounds(&segments, &verdicts, &cat, 55, Default::default(), Execution::Sequential)
                .map_err(|e| e.to_string())?;
            drop(segments);
            let run = |p| run_prepared(&rounds, &cat, &energy, &cfg, p, seed, None).map_err(|e| e.to_string());
            let nts = run(PolicyKind::Nts)?;
            let random = run(PolicyKind::Random)?.regret.total();
            let mut fixed = Vec::new();
            let mut fixed_wide_energy = Vec::new();
            for a in 0..cat.len() {
                let o = run(PolicyKind::Fixed(a))?;
                fixed.push(o.regret.total());
                if a == cat.widest_arm() {
                    fixed_wide_energy = o.energy.iter().map(|l| l.total_uj()).collect();
                }
            }
            Ok(SeedRun {
                nts,
                random,
                fixed,
                fixed_wide_energy,
                rounds,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep {
        runs,
        elapsed: start.elapsed(),
        energy,
    })
}

fn c05_regret(sweep: &Sweep) -> Check {
    let beats_random = sweep.runs.iter().filter(|r| r.nts.regret.total() < r.random).count();
    let beats_fixed = sweep
        .runs
        .iter()
        .filter(|r| r.fixed.iter().all(|&f| r.nts.regret.total() < f))
        .count();
    let mean = |f: &dyn Fn(&SeedRun) -> f64| sweep.runs.iter().map(f).sum::<f64>() / sweep.runs.len() as f64;
    let secs = sweep.elapsed.as_secs_f64();
    ensure(
        beats_random >= 95 && beats_fixed >= 80 && secs < 300.0,
        format!(
            "NTS < random on {beats_random}/100, < every fixed arm on {beats_fixed}/100 \
             (mean regret nts {:.1}, random {:.1}, best fixed {:.1}); {secs:.1}s",
            mean(&|r| r.nts.regret.total()),
            mean(&|r| r.random),
            mean(&|r| r.fixed.iter().cloned().fold(f64::INFINITY, f64::min)),
        ),
    )
}

/// Per-round energy of `arm` re-derived from first principles.
fn analytic_round(model: &EnergyModel, arm: Option<usize>, n_samples: usize, fs: f64) -> f64 {
    let overhead = 580.2 + 1.17 + 8.0;
    match arm {
        None => overhead,
        Some(a) => {
            let ch = model.catalog.arms()[a].leads.len();
            let comm = ch as f64 * (n_samples as f64 / fs) * fs * 16.0 * model.protocol.energy_per_bit_uj;
            let flops = model_flops(&model.classifier, n_samples, ch).expect("valid spec");
            comm + flops as f64 * 1e-5 + overhead
        }
    }
}

fn c06_energy(sweep: &Sweep) -> Check {
    let mut dominated = 0;
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for run in &sweep.runs {
        let mut ok = true;
        for (pi, (ledger, model)) in run.nts.energy.iter().zip(&sweep.energy).enumerate() {
            ok &= ledger.total_uj() <= run.fixed_wide_energy[pi];
            let summary = ledger.summary();
            let reported = summary.widest_over_adaptive.overall.ok_or("no adaptive energy")?;
            // histogram-weighted prediction from the logged arms
            let mut adaptive = 0.0;
            let mut widest = 0.0;
            for (log, r) in run.nts.logs.iter().zip(order_of(&run.nts, &run.rounds)) {
                adaptive += analytic_round(model, log.arm, r.n_samples, r.fs);
                widest += analytic_round(model, log.arm.map(|_| model.catalog.widest_arm()), r.n_samples, r.fs);
            }
            let predicted = widest / adaptive;
            worst = worst.max((reported - predicted).abs() / predicted);
            checks += 1;
        }
        dominated += usize::from(ok);
    }
    ensure(
        dominated == sweep.runs.len() && worst < 1e-9,
        format!(
            "adaptive <= fixed 12-lead on {dominated}/{} seeds (all protocols); \
             reported vs predicted savings ratio max rel diff {worst:.2e} over {checks} ledgers",
            sweep.runs.len()
        ),
    )
}

/// Prepared rounds in the order the episode visited them.
fn order_of<'a>(out: &EpisodeOutcome, rounds: &'a [PreparedRound]) -> Vec<&'a PreparedRound> {
    out.logs
        .iter()
        .map(|l| rounds.iter().find(|r| r.segment_id == l.segment_id).expect("logged segment exists"))
        .collect()
}

fn c07_peaks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for i in 0..100u64 {
        let fs = [100.0, 250.0, 500.0][i as usize % 3];
        let params = SyntheticEcgParams {
            heart_rate_bpm: rng.random_range(45.0..140.0),
            noise_std: 0.0,
            waves: WaveTemplate::for_label(Label::from_index(i as usize % 5).expect("in range")),
            rng_seed: i,
            ..Default::default()
        };
        let (seg, truth) = generate_synthetic_segment(&params, 10.0, fs).map_err(|e| e.to_string())?;
        let found = detect_r_peaks(&seg.lead(LeadId::II), fs).map_err(|e| e.to_string())?;
        let tol = (0.05 * fs).round() as i64;
        let mut used = vec![false; found.len()];
        for &t in &truth {
            let hit = found
                .iter()
                .enumerate()
                .find(|(j, &f)| !used[*j] && (f as i64 - t as i64).abs() <= tol);
            match hit {
                Some((j, _)) => {
                    used[j] = true;
                    tp += 1;
                }
                None => fneg += 1,
            }
        }
        fp += used.iter().filter(|u| !**u).count();
    }
    let se = tp as f64 / (tp + fneg) as f64;
    let ppv = tp as f64 / (tp + fp) as f64;
    ensure(
        se >= 0.99 && ppv >= 0.99,
        format!("100 noiseless segments: sensitivity {se:.4}, PPV {ppv:.4} (TP {tp}, FN {fneg}, FP {fp})"),
    )
}

fn c08_dap() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for pooling in [Pooling::Max, Pooling::Mean] {
        let spec = DapSpec {
            target_length: 16,
            target_channels: 2,
            pooling,
        };
        for _ in 0..500 {
            let (l, c) = (rng.random_range(10..=1000), rng.random_range(1..=12));
            let data: Vec<f64> = (0..l * c).map(|_| rng.random_range(-5.0..5.0)).collect();
            let out = dap_pool(&Matrix::from_vec(l, c, data).map_err(|e| e.to_string())?, &spec).map_err(|e| e.to_string())?;
            if (out.rows, out.cols) != (16, 2) || out.data.iter().any(|v| !v.is_finite()) {
                return Err(format!("{l}x{c} -> {}x{}", out.rows, out.cols));
            }
        }
        let data: Vec<f64> = (0..32).map(|_| rng.random_range(-5.0..5.0)).collect();
        let input = Matrix::from_vec(16, 2, data).map_err(|e| e.to_string())?;
        if dap_pool(&input, &spec).map_err(|e| e.to_string())? != input {
            return Err(format!("{pooling:?} identity case differs"));
        }
    }
    Ok("1000 random shapes (L 10..1000, C 1..12) map to 16x2; identity exact for max and mean".into())
}

fn c09_debias() -> Check {
    let cat = ArmCatalog::default();
    let rule = RewardRule::default();
    let mut details = Vec::new();
    for (case, hist) in [[900usize, 50, 30, 15, 5], [820, 90, 40, 30, 20], [30, 12, 850, 60, 48]].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(90 + case as u64);
        let mut segs = Vec::new();
        let mut rows = Vec::new();
        let mut i = 0;
        for (a, &n) in hist.iter().enumerate() {
            for _ in 0..n {
                // arms before `a` wrong, `a` right, the rest random
                let correct: Vec<bool> = (0..5).map(|k| k == a || (k > a && rng.random_bool(0.5))).collect();
                let id = format!("s{i}");
                let fold = if i % 10 == 0 { 10 } else { 1 + (i % 9) as u8 };
                segs.push(SegmentRecord::new(&id, fold, Label::Norm, 100.0, Matrix::zeros(2, NUM_LEADS)).map_err(|e| e.to_string())?);
                rows.push(VerdictRow {
                    segment_id: id,
                    predicted: vec![Label::Norm; 5],
                    correct,
                });
                i += 1;
            }
        }
        let verdicts = VerdictTable::new(5, rows).map_err(|e| e.to_string())?;
        let out = debias_training_set(&segs, 10, &verdicts, &rule, &cat, case as u64).map_err(|e| e.to_string())?;
        let before = &out.report.histogram_before;
        let after = &out.report.histogram_after;
        let share = |h: &[usize]| {
            let n: usize = h.iter().sum();
            let mut s: Vec<f64> = h.iter().map(|&c| c as f64 / n as f64).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            (s[0], s[1])
        };
        let (modal_before, _) = share(before);
        let (modal_after, second_after) = share(after);
        let ok = modal_before > 0.8
            && modal_after <= second_after
            && entropy(after) >= entropy(before)
            && out.dataset.iter().filter(|s| s.fold == 10).count() == out.report.validation_segments;
        if !ok {
            return Err(format!("case {case}: {before:?} -> {after:?}"));
        }
        details.push(format!(
            "{:.0}% -> {:.0}% modal, H {:.3} -> {:.3}",
            modal_before * 100.0,
            modal_after * 100.0,
            out.report.entropy_before,
            out.report.entropy_after
        ));
    }
    Ok(details.join("; "))
}

fn c10_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cat = ArmCatalog::default();
    let (segments, verdicts) = planted_environment(
        &PlantedSpec {
            n_segments: 120,
            seed: 77,
            ..Default::default()
        },
        cat.len(),
    )
    .map_err(|e| e.to_string())?;
    let data = dir.path().join("segments.csv");
    let vpath = dir.path().join("verdicts.csv");
    write_segments(&data, &segments).map_err(|e| e.to_string())?;
    verdicts.write_csv(&vpath).map_err(|e| e.to_string())?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");

    let simulate = |out: &str| -> Result<Vec<u8>, String> {
        let out_dir = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_leadsel"))
            .args(["simulate", "--policy", "nts", "--seed", "7"])
            .arg("--dataset")
            .arg(&data)
            .arg("--verdicts")
            .arg(&vpath)
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(&out_dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        std::fs::read(out_dir.join("rounds.csv")).map_err(|e| e.to_string())
    };
    let a = simulate("a")?;
    let b = simulate("b")?;
    if a != b || a.is_empty() {
        return Err("round logs differ between identical runs".into());
    }

    // checkpoint mid-episode, reload, continue
    let cfg = sweep_config();
    let energy = energy_models(&cat);
    let cfg = EpisodeConfig { shuffle: false, ..cfg };
    let rounds = prepare_rounds(&segments, &verdicts, &cat, 55, Default::default(), Execution::Sequential)
        .map_err(|e| e.to_string())?;
    let (head, tail) = rounds.split_at(60);
    let first = run_prepared(head, &cat, &energy, &cfg, PolicyKind::Nts, 7, None).map_err(|e| e.to_string())?;
    let ck = dir.path().join("bandit.json");
    first.bandit.as_ref().ok_or("no bandit")?.save(&ck).map_err(|e| e.to_string())?;
    let loaded = NeuralThompson::load(&ck).map_err(|e| e.to_string())?;
    let resumed = run_prepared(tail, &cat, &energy, &cfg, PolicyKind::Nts, 7, Some(loaded)).map_err(|e| e.to_string())?;
    let in_memory =
        run_prepared(tail, &cat, &energy, &cfg, PolicyKind::Nts, 7, first.bandit.clone()).map_err(|e| e.to_string())?;
    let full = run_prepared(&rounds, &cat, &energy, &cfg, PolicyKind::Nts, 7, None).map_err(|e| e.to_string())?;
    let arms = |logs: &[leadsel::harness::RoundLog]| logs.iter().map(|l| (l.arm, l.reward)).collect::<Vec<_>>();
    let same = arms(&resumed.logs) == arms(&in_memory.logs) && arms(&resumed.logs) == arms(&full.logs[60..]);
    ensure(
        same,
        format!(
            "two `simulate --seed 7` runs byte-identical ({} bytes); resumed trajectory matches over {} rounds",
            a.len(),
            tail.len()
        ),
    )
}

fn c11_reward_rule() -> Check {
    let cat = ArmCatalog::default();
    let rule = RewardRule::default();
    let mut by_leads: Vec<usize> = (0..cat.len()).collect();
    by_leads.sort_by_key(|&a| (cat.arms()[a].leads.len(), a));
    for bits in 0u32..32 {
        let bitmap: Vec<bool> = (0..5).map(|k| bits >> k & 1 == 1).collect();
        let rewards: Vec<f64> = (0..5)
            .map(|a| reward_of(a, &bitmap, &rule, &cat))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let mut brute = 0;
        for a in 1..5 {
            if rewards[a] > rewards[brute] {
                brute = a;
            }
        }
        let verbal = by_leads.iter().copied().find(|&a| bitmap[a]).unwrap_or(by_leads[0]);
        let got = optimal_arm(&bitmap, &rule, &cat).map_err(|e| e.to_string())?;
        let dominance = (0..5).all(|a| (0..5).all(|b| !(bitmap[a] && !bitmap[b]) || rewards[a] > rewards[b]));
        if got != brute || got != verbal || !dominance {
            return Err(format!("bitmap {bitmap:?}: optimal {got}, argmax {brute}, rule {verbal}"));
        }
    }
    Ok("all 32 bitmaps: optimal arm = brute-force argmax = fewest-lead correct arm (else fewest leads)".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, f: &dyn Fn() -> Check| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d}");
            }
        }
    };
    report(1, "gradient vs finite differences", &c01_gradient);
    report(2, "kernel inverse vs dense inverse", &c02_kernel);
    report(3, "posterior variance vs dense solve", &c03_variance);
    report(4, "FLOPs recount and comm ratio", &c04_flops_and_comm);
    let sweep = run_sweep();
    match &sweep {
        Ok(s) => {
            report(5, "regret on planted environment", &|| c05_regret(s));
            report(6, "energy dominance and accounting", &|| c06_energy(s));
        }
        Err(e) => {
            report(5, "regret on planted environment", &|| Err(e.clone()));
            report(6, "energy dominance and accounting", &|| Err(e.clone()));
        }
    }
    report(7, "R-peak detection", &c07_peaks);
    report(8, "dimension-adaptive pooling shape", &c08_dap);
    report(9, "training-set debiasing", &c09_debias);
    report(10, "determinism and checkpoint resume", &c10_determinism);
    report(11, "reward rule over all bitmaps", &c11_reward_rule);
    if failed == 0 {
        println!("acceptance: 11/11 passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 11 failed");
        ExitCode::FAILURE
    }
}
