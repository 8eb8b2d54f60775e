//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_locate_cli::config::RunConfig;
use ris_locate_cli::{render, Command};
use ris_locate_core::channel::{lambda_closed_form, optimal_ramp, PhaseProfile};
use ris_locate_core::geometry::{distance, path_loss, Position3};
use ris_locate_core::harness::{
    run_baseline_comparison, run_elements_sweep, run_noiseless, run_snr_sweep, ExperimentConfig,
};
use ris_locate_core::localizer::{calibration_schedule, estimate_distance, separate_components};
use ris_locate_core::scene::{AngleMode, ExplicitAngles};
use ris_locate_core::sim::LinkSimulator;
use ris_locate_core::{EstimatorKnowledge, Scene};

const WOBBLE: f64 = 1.10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn noiseless_exactness() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let points = run_noiseless(&cfg.experiment.scene, &cfg.trajectory, 16).unwrap();
    let worst = points.iter().map(|p| p.error).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        points.len() == 20 && worst <= 1e-2 && elapsed <= Duration::from_secs(60),
        format!(
            "{} positions, max error {worst:.3e} m, {elapsed:.2?}",
            points.len()
        ),
    )
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    loop {
        let mut s = Scene::reference();
        let mut p = |lo: f64, hi: f64| rng.random_range(lo..hi);
        s.geometry.bs = Position3::new(p(-20.0, 20.0), p(-20.0, 20.0), p(0.0, 30.0));
        for r in &mut s.geometry.ris {
            *r = Position3::new(p(-60.0, 60.0), p(-60.0, 60.0), p(12.0, 30.0));
        }
        s.geometry.ms = Position3::new(p(-80.0, 80.0), p(-80.0, 80.0), p(-2.0, 2.0));
        s.geometry.mu = p(1.5, 4.0);
        s.pilot = Complex64::from_polar(p(0.2, 2.0), p(0.0, TAU));
        s.angles = AngleMode::Explicit(ExplicitAngles {
            phi_br: [p(0.0, PI), p(0.0, PI), p(0.0, PI)],
            theta_br: [p(0.0, PI), p(0.0, PI), p(0.0, PI)],
            theta_rm: [p(0.0, PI), p(0.0, PI), p(0.0, PI)],
            theta_bm: p(0.0, PI),
        });
        s.n_bs = rng.random_range(1..24);
        s.n_ris = [
            rng.random_range(2..128),
            rng.random_range(2..128),
            rng.random_range(2..128),
        ];
        s.los_blocked = rng.random_bool(0.2);
        let g = &s.geometry;
        let nodes = [g.bs, g.ms, g.ris[0], g.ris[1], g.ris[2]];
        let separated = (0..5).all(|i| (i + 1..5).all(|j| distance(&nodes[i], &nodes[j]) > 1.0));
        if separated && s.validate().is_ok() {
            return s;
        }
    }
}

fn separation_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let scene = random_scene(&mut rng);
        let links = scene.links().unwrap();
        let x = scene.pilot_vector();
        let dot = |h: Vec<Complex64>| -> Complex64 { h.iter().zip(&x).map(|(a, b)| a * b).sum() };
        let direct = dot(links.direct_channel());
        let ris: Vec<Complex64> = (0..3)
            .map(|i| dot(links.ris_channel(i, &PhaseProfile::zero()).unwrap()))
            .collect();
        let sim = LinkSimulator::from_links(&links, &x).unwrap();
        let y = sim.noiseless_schedule(&calibration_schedule()).unwrap();
        let sep = separate_components(&[y[0], y[1], y[2], y[3]]);
        let scale = ris
            .iter()
            .chain([&direct])
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        let err = std::iter::once((sep.direct - direct).norm())
            .chain((0..3).map(|i| (sep.ris[i] - ris[i]).norm()))
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    outcome(
        worst <= 1e-12,
        format!("200 scenes, max relative error {worst:.3e}"),
    )
}

fn lambda_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum = 0.0f64;
    let mut worst_peak = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=256usize);
        let k = rng.random_range(0.0..6.0);
        let phi = rng.random_range(0.0..PI);
        let theta = rng.random_range(0.0..PI);
        let rho = rng.random_range(-10.0..10.0);
        let u = k * (phi.cos() - theta.cos()) + rho;
        let brute: Complex64 = (0..n).map(|t| Complex64::cis(t as f64 * u)).sum();
        worst_sum = worst_sum.max((lambda_closed_form(rho, k, phi, theta, n) - brute).norm());
        let peak = lambda_closed_form(optimal_ramp(k, phi, theta), k, phi, theta, n);
        worst_peak = worst_peak.max((peak.norm() - n as f64).abs());
    }
    outcome(
        worst_sum <= 1e-9 && worst_peak <= 1e-9,
        format!(
            "1000 draws, max |closed - sum| {worst_sum:.3e}, max ||peak| - N| {worst_peak:.3e}"
        ),
    )
}

fn distance_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base = EstimatorKnowledge::from_scene(&Scene::reference()).unwrap();
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < 1000 {
        let mut k = base.clone();
        k.mu = rng.random_range(1.0..5.0);
        k.n_bs = rng.random_range(1..64);
        k.n_ris = [rng.random_range(1..512); 3];
        k.theta_br = [rng.random_range(0.0..PI); 3];
        let xi = k.xi(0).norm();
        if xi <= 1e-6 * k.n_bs as f64 {
            continue;
        }
        let d = rng.random_range(0.5..500.0);
        let peak =
            k.rho_br[0] * path_loss(d, k.mu).unwrap() * k.n_ris[0] as f64 * k.pilot.norm() * xi;
        let est = estimate_distance(peak, 0, &k).unwrap();
        worst = worst.max((est - d).abs() / d);
        draws += 1;
    }
    outcome(
        worst <= 1e-10,
        format!("1000 draws, max relative error {worst:.3e}"),
    )
}

/// Each median may exceed its predecessor by at most 10%.
fn trend(medians: &[f64]) -> bool {
    medians.windows(2).all(|w| w[1] <= WOBBLE * w[0])
}

fn fmt_medians(m: &[f64]) -> String {
    m.iter()
        .map(|v| format!("{v:.2}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn snr_trend() -> Outcome {
    let start = Instant::now();
    let out = run_snr_sweep(&ExperimentConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let medians: Vec<f64> = out.summary.iter().map(|r| r.median).collect();
    outcome(
        trend(&medians) && elapsed <= Duration::from_secs(300),
        format!(
            "medians [{}] m at 0..24 dB, {elapsed:.2?}",
            fmt_medians(&medians)
        ),
    )
}

fn elements_trend() -> Outcome {
    let out = run_elements_sweep(&ExperimentConfig::default()).unwrap();
    let medians: Vec<f64> = out.summary.iter().map(|r| r.median).collect();
    outcome(
        trend(&medians),
        format!(
            "medians [{}] m at N_R 25, 50, 100, 200",
            fmt_medians(&medians)
        ),
    )
}

fn baseline_superiority() -> Outcome {
    let cfg = ExperimentConfig {
        snr_grid: vec![12.0],
        ..ExperimentConfig::default()
    };
    let out = run_baseline_comparison(&cfg).unwrap();
    let row = &out.rows[0];
    let share = row.proposed_wins as f64 / row.proposed.trials as f64;
    outcome(
        row.proposed.median < row.baseline.median && share >= 0.8,
        format!(
            "median {:.2} m vs {:.2} m, proposed better in {:.1}% of pairs",
            row.proposed.median,
            row.baseline.median,
            100.0 * share
        ),
    )
}

fn determinism() -> Outcome {
    let commands = [
        Command::Noiseless,
        Command::SnrSweep,
        Command::ElementsSweep,
        Command::CompareBaseline,
    ];
    let mut mismatches = Vec::new();
    for command in commands {
        let mut cfg = RunConfig::default();
        cfg.experiment.trials = 100;
        cfg.experiment.master_seed = 2024;
        let first = render(command, &cfg).unwrap();
        let again = render(command, &cfg).unwrap();
        cfg.experiment.parallel = false;
        let serial = render(command, &cfg).unwrap();
        if first != again || first != serial {
            mismatches.push(format!("{command:?}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "4 experiments byte-identical across rerun and serial/parallel".into()
        } else {
            format!("differing output: {}", mismatches.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("noiseless exactness", noiseless_exactness),
        ("separation identity", separation_identity),
        ("array gain closed form", lambda_oracle),
        ("distance inversion", distance_inversion),
        ("SNR trend", snr_trend),
        ("element-count trend", elements_trend),
        ("baseline superiority", baseline_superiority),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
