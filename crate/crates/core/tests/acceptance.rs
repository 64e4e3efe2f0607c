//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 9–12 train every model at full preset size over five seeds and
//! take many hours on one core. They are skipped unless the binary is run
//! with `--include-ignored` (or `--ignored` to run only them):
//!
//! ```text
//! cargo test -p paraqnn-core --test acceptance -- --include-ignored
//! ```

use std::fs;
use std::path::Path;
use std::time::Instant;

use rustfft::{num_complex::Complex, FftPlanner};

use paraqnn_core::bench::{self, BenchConfig};
use paraqnn_core::dataio;
use paraqnn_core::dyngen::{self, DensityMatrix2, DriveSchedule, QubitPhysics, Regime};
use paraqnn_core::noise::{self, SeededRng};
use paraqnn_core::paranet::piaf;
use paraqnn_core::params::sigmoid;
use paraqnn_core::training::{loss_contradiction, paraconsistent_loss, LossWeights};
use paraqnn_core::{ModelKind, ModelSpec, ParaNetConfig, ParaNetParams, ParamSet, SplitMode, TrainMode};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn integrator_oracle() -> Outcome {
    let start = Instant::now();
    let t1 = 10.0;
    // Γφ = 0 means T2 = 2·T1
    let phys = QubitPhysics::new(0.0, t1, 2.0 * t1).unwrap();
    let sched = DriveSchedule::single(phys, 8.0).unwrap();
    let times = dataio::time_grid(8001, 8.0);
    let p = dyngen::integrate(&sched, &DensityMatrix2::excited(), &times, 1e-3).unwrap();
    let sup = times
        .iter()
        .zip(&p)
        .map(|(t, p)| (p - (-t / t1).exp()).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(sup < 1e-8 && secs < 1.0, format!("sup |P1 − e^(−t/T1)| = {sup:.2e} (< 1e-8), {secs:.3} s (< 1 s)"))
}

// ---------------------------------------------------------------- 2

fn rk4_order() -> Outcome {
    let sched = dyngen::make_regime_schedule(Regime::Lindblad);
    let times = dataio::time_grid(501, sched.total_span());
    let run = |dt: f64| dyngen::integrate(&sched, &DensityMatrix2::ground(), &times, dt).unwrap();
    let (a, b, c) = (run(1e-2), run(5e-3), run(2.5e-3));
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let ratio = sup(&a, &b) / sup(&b, &c);
    outcome(
        (12.0..=20.0).contains(&ratio),
        format!("step-halving error ratio {ratio:.3} over dt ∈ {{1e-2, 5e-3}} (in [12, 20])"),
    )
}

// ---------------------------------------------------------------- 3

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rng = SeededRng::new(2024, "acceptance/gradients");
    use rand::Rng;
    for case in 0..20u64 {
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
        let cfg = ParaNetConfig {
            hidden,
            k: rng.random_range(0.5..4.0),
            alpha_init: rng.random_range(0.5..8.0),
            first_layer_scale: rng.random_range(0.5..4.0),
            output_scale: 1.0,
        };
        let net = ParaNetParams::init(&cfg, case).unwrap();
        let n = 6;
        let tau: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t_star: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = t_star.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
        let w = LossWeights {
            lambda_s: 1.0,
            lambda_n: rng.random_range(0.1..1.0),
            lambda_c: rng.random_range(0.1..1.0),
        };
        let objective = |p: &ParaNetParams| {
            let o = p.forward(&tau);
            paraconsistent_loss(&o.t_hat, &o.f_hat, &y, &t_star, &w).unwrap().0.value
        };
        let out = net.forward(&tau);
        let (loss, _) = paraconsistent_loss(&out.t_hat, &out.f_hat, &y, &t_star, &w).unwrap();
        let analytic = net.backward(&out.cache, &loss.d_t, &loss.d_f).unwrap().param_slices().concat();
        let mut probe = net.clone();
        let mut flat = 0;
        for s in 0..probe.param_slices().len() {
            for i in 0..probe.param_slices()[s].len() {
                let orig = probe.param_slices()[s][i];
                probe.param_slices_mut()[s][i] = orig + h;
                let up = objective(&probe);
                probe.param_slices_mut()[s][i] = orig - h;
                let dn = objective(&probe);
                probe.param_slices_mut()[s][i] = orig;
                let fd = (up - dn) / (2.0 * h);
                let a = analytic[flat];
                // relative to the gradient scale; absolute floor for entries that vanish
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                flat += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 30.0,
        format!("max relative error {worst:.2e} over 20 nets incl. alpha (< 1e-4), {secs:.2} s (< 30 s)"),
    )
}

// ---------------------------------------------------------------- 4

fn unit_values() -> Outcome {
    let c = loss_contradiction(&[0.8], &[0.5]).unwrap().value;
    let d = piaf(1.0, 0.5, 6.0, 1.0);
    let s = noise::apply_spam(1.0, 0.02);
    let (ec, et, ef, es) = (
        (c - 0.09).abs(),
        (d.t - sigmoid(-2.0)).abs(),
        (d.f - sigmoid(0.5)).abs(),
        (s - 0.98).abs(),
    );
    let worst = ec.max(et).max(ef).max(es);
    outcome(
        worst <= 1e-12,
        format!("contradiction {c}, PIAF ({:.5}, {:.5}), SPAM {s}; max error {worst:.1e} (≤ 1e-12)", d.t, d.f),
    )
}

// ---------------------------------------------------------------- 5

fn periodogram_slope(x: &[f64]) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let pts: Vec<(f64, f64)> = (1..n / 2)
        .map(|k| ((k as f64).ln(), buf[k].norm_sqr().ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn noise_statistics() -> Outcome {
    let n = 100_000;
    let p = 0.02;
    let tel = noise::telegraph_noise(&mut SeededRng::new(42, "acceptance/telegraph"), n, 0.1, p);
    let flips = tel.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let frac = flips / (n - 1) as f64;
    let se_flip = (p * (1.0 - p) / (n - 1) as f64).sqrt();
    let tel_ok = (frac - p).abs() < 3.0 * se_flip;

    let sigma = 0.08;
    let g = noise::gaussian_noise(&mut SeededRng::new(42, "acceptance/gaussian"), n, sigma);
    let mean = g.iter().sum::<f64>() / n as f64;
    let std = (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se_std = sigma / (2.0 * (n - 1) as f64).sqrt();
    let g_ok = (std - sigma).abs() < 3.0 * se_std;

    let pink = noise::pink_noise(&mut SeededRng::new(42, "acceptance/pink"), 1 << 16, 0.06).unwrap();
    let slope = periodogram_slope(&pink);
    let pink_ok = (-1.3..=-0.7).contains(&slope);
    outcome(
        tel_ok && g_ok && pink_ok,
        format!(
            "telegraph flips {frac:.5} (|Δ| {:.1} SE), gaussian std {std:.5} (|Δ| {:.1} SE), pink slope {slope:.3} (in [−1.3, −0.7])",
            (frac - p).abs() / se_flip,
            (std - sigma).abs() / se_std
        ),
    )
}

// ---------------------------------------------------------------- 6

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn pipeline(root: &Path) {
    let cfg = BenchConfig {
        scale: 0.02,
        ..BenchConfig::new(Regime::ALL.to_vec(), ModelKind::ALL.to_vec(), (42..=46).collect())
    };
    let out = bench::run_matrix(&cfg, workers()).unwrap();
    bench::write_matrix(&out, root).unwrap();
    let report = paraqnn_core::BenchReport::load(&root.join(bench::REPORT_FILE)).unwrap();
    let inputs = bench::load_figure_inputs(&report, root);
    bench::emit_figures(&report, &inputs, &root.join("figures")).unwrap();
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != bench::TIMINGS_FILE {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&str> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = ta.len() == tb.len() && differing.is_empty() && ta.len() > 60 && secs < 300.0;
    outcome(
        pass,
        format!(
            "{} files compared (timings excluded), {} differ, {secs:.0} s for two runs (< 300 s)",
            ta.len(),
            differing.len()
        ),
    )
}

// ---------------------------------------------------------------- 7, 8

struct QuarterRun {
    regime: Regime,
    alpha: Vec<f64>,
    contradiction: f64,
    mse: f64,
}

fn quarter_scale_runs() -> Vec<QuarterRun> {
    Regime::ALL
        .iter()
        .map(|&regime| {
            let cfg = BenchConfig {
                scale: 0.25,
                ..BenchConfig::new(vec![regime], vec![ModelKind::ParaQnn], vec![42])
            };
            let ds = dataio::build_dataset(&cfg.regime_config(regime)).unwrap();
            let (_, run) = bench::train_one(
                &ds,
                &ModelSpec::for_kind(ModelKind::ParaQnn),
                &cfg.train_config(regime, 42),
                &LossWeights::for_regime(regime),
                TrainMode::Benchmark,
            )
            .unwrap();
            QuarterRun {
                regime,
                alpha: run.telemetry.alpha_series(),
                contradiction: run.telemetry.contradiction_rate.unwrap(),
                mse: run.telemetry.test_mse_clean,
            }
        })
        .collect()
}

fn alpha_convergence(runs: &[QuarterRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let a = &r.alpha;
        let epochs = a.len() - 1;
        let back = (epochs as f64 * 0.1).ceil() as usize;
        let last = a[epochs];
        let drift = (last - a[epochs - back]).abs() / last;
        let bounded = a.iter().all(|&x| x > 0.0 && x < 100.0);
        pass &= bounded && drift < 0.05;
        parts.push(format!("{} α {last:.4} drift {:.2}%", r.regime, 100.0 * drift));
    }
    outcome(pass, format!("{} (α in (0, 100), drift < 5%)", parts.join(", ")))
}

fn soft_paraconsistency(runs: &[QuarterRun]) -> Outcome {
    let pass = runs.iter().all(|r| r.contradiction < 0.05);
    let parts: Vec<String> = runs
        .iter()
        .map(|r| format!("{} {:.2}% (test MSE {:.2e})", r.regime, 100.0 * r.contradiction, r.mse))
        .collect();
    outcome(pass, format!("t̂+f̂ > 1 on {} (< 5%)", parts.join(", ")))
}

// ---------------------------------------------------------------- 9–12

fn full_matrix(regime: Regime, split: SplitMode, models: Vec<ModelKind>) -> paraqnn_core::BenchReport {
    let mut cfg = BenchConfig::new(vec![regime], models, (42..=46).collect());
    cfg.split_mode = split;
    let out = bench::run_matrix(&cfg, workers()).unwrap();
    if let Ok(dir) = std::env::var("PARAQNN_ACCEPTANCE_OUT") {
        let root = Path::new(&dir).join(format!("{regime}-{split:?}").to_lowercase());
        bench::write_matrix(&out, &root).unwrap();
    }
    out.report
}

fn mean(report: &paraqnn_core::BenchReport, regime: Regime, model: ModelKind) -> f64 {
    report
        .summary(regime, model)
        .and_then(|s| s.mean_mse_clean)
        .unwrap_or(f64::INFINITY)
}

fn ordering_line(report: &paraqnn_core::BenchReport, regime: Regime) -> (bool, String) {
    let para = mean(report, regime, ModelKind::ParaQnn);
    let mut below = true;
    let mut parts = vec![format!("ParaQNN {para:.2e}")];
    for m in [ModelKind::PinnIncomplete, ModelKind::PinnKnown, ModelKind::Mlp] {
        let v = mean(report, regime, m);
        below &= para < v;
        parts.push(format!("{m} {v:.2e}"));
    }
    (below, parts.join(", "))
}

fn rabi_full() -> Outcome {
    let r = full_matrix(Regime::Rabi, SplitMode::Random, ModelKind::ALL.to_vec());
    let para = mean(&r, Regime::Rabi, ModelKind::ParaQnn);
    let (below, line) = ordering_line(&r, Regime::Rabi);
    outcome(para <= 5e-3 && below, format!("{line} (ParaQNN ≤ 5e-3 and lowest)"))
}

fn lindblad_full() -> Outcome {
    let r = full_matrix(Regime::Lindblad, SplitMode::Random, ModelKind::ALL.to_vec());
    let para = mean(&r, Regime::Lindblad, ModelKind::ParaQnn);
    let known = mean(&r, Regime::Lindblad, ModelKind::PinnKnown);
    let (below, line) = ordering_line(&r, Regime::Lindblad);
    outcome(
        para <= 1e-3 && below && known >= 10.0 * para,
        format!("{line}; PINN-Known / ParaQNN = {:.1} (ParaQNN ≤ 1e-3, lowest, ratio ≥ 10)", known / para),
    )
}

fn mixed_full() -> Outcome {
    let r = full_matrix(Regime::Mixed, SplitMode::Random, ModelKind::ALL.to_vec());
    let para = mean(&r, Regime::Mixed, ModelKind::ParaQnn);
    let (below, line) = ordering_line(&r, Regime::Mixed);
    // per-phase MSE averaged over seeds
    let runs: Vec<_> = r
        .entries
        .iter()
        .filter(|e| e.model == ModelKind::ParaQnn && e.error.is_none())
        .collect();
    let phases: Vec<f64> = (0..3)
        .map(|k| {
            runs.iter()
                .map(|e| e.phase_mse.get(k).copied().flatten().unwrap_or(f64::INFINITY))
                .sum::<f64>()
                / runs.len().max(1) as f64
        })
        .collect();
    let phases_ok = !runs.is_empty() && phases.iter().all(|&p| p <= 1e-2);
    outcome(
        para <= 5e-3 && below && phases_ok,
        format!(
            "{line}; phase MSE [{:.2e}, {:.2e}, {:.2e}] (ParaQNN ≤ 5e-3, lowest, each phase ≤ 1e-2)",
            phases[0], phases[1], phases[2]
        ),
    )
}

fn holdout_full() -> Outcome {
    let r = full_matrix(
        Regime::Rabi,
        SplitMode::TemporalHoldout,
        vec![ModelKind::ParaQnn, ModelKind::Mlp],
    );
    let para = mean(&r, Regime::Rabi, ModelKind::ParaQnn);
    let mlp = mean(&r, Regime::Rabi, ModelKind::Mlp);
    outcome(
        para < mlp,
        format!("Rabi last-15% holdout: ParaQNN {para:.2e}, MLP {mlp:.2e} (ParaQNN < MLP)"),
    )
}

// ----------------------------------------------------------------

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include_full = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let only_full = args.iter().any(|a| a == "--ignored");
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} {name}: {}", o.detail);
        if !o.pass {
            failures += 1;
        }
    };

    if !only_full {
        report(1, "integrator oracle", integrator_oracle());
        report(2, "rk4 order", rk4_order());
        report(3, "gradient oracle", gradient_oracle());
        report(4, "unit values", unit_values());
        report(5, "noise statistics", noise_statistics());
        report(6, "determinism", determinism());
        let runs = quarter_scale_runs();
        report(7, "alpha convergence", alpha_convergence(&runs));
        report(8, "soft paraconsistency", soft_paraconsistency(&runs));
    }
    if include_full {
        report(9, "rabi reproduction", rabi_full());
        report(10, "lindblad reproduction", lindblad_full());
        report(11, "mixed reproduction", mixed_full());
        report(12, "temporal holdout", holdout_full());
    } else {
        for (id, name) in [
            (9, "rabi reproduction"),
            (10, "lindblad reproduction"),
            (11, "mixed reproduction"),
            (12, "temporal holdout"),
        ] {
            println!("SKIP criterion {id:>2} {name}: full preset scale, run with -- --include-ignored");
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
