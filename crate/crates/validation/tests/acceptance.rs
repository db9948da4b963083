//! Acceptance criteria P1–P10. Runs as a plain binary so that every
//! criterion prints its own PASS/FAIL line, and exits non-zero if any fail.

use std::f64::consts::{PI, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use jcbeat_core::conditioning::{effective_g2, origin_transient, steady_emission};
use jcbeat_core::four_level::{
    analytic_transient, cavity_coefficients, eps_for_p3, evolve_effective, flux_ratio, steady_state_4l,
    TransientInit, LAMBDA_MINUS, LAMBDA_PLUS,
};
use jcbeat_core::lindblad::{evolve, evolve_expectations, g2_forward, steady_state};
use jcbeat_core::phase_space::{wigner_general_point, wigner_point, GridSpec, WignerGrid};
use jcbeat_core::quantum::build_operators;
use jcbeat_core::series::{global_maximum, global_minimum, next_maximum};
use jcbeat_core::trajectories::{
    ensemble_average, run_ensemble, run_mc_trajectory, run_qsd_trajectory, InitLabel, InitialEnsemble,
    TrajectoryConfig, TrajectoryRecord, Unraveling,
};
use jcbeat_core::*;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::FftPlanner;

const G_OVER_GAMMA: f64 = 500.0;
const KAPPA: f64 = 0.5;
const GAMMA: f64 = 1.0;
const P3_FIG2: f64 = 0.2475;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn shifted(g: f64, eps: f64) -> f64 {
    -g / SQRT_2 - SQRT_2 * eps * eps / g
}

fn fig2_params() -> EffectiveParams {
    let eps = eps_for_p3(G_OVER_GAMMA, KAPPA, GAMMA, P3_FIG2).unwrap();
    EffectiveParams::new(G_OVER_GAMMA, KAPPA, GAMMA, eps, shifted(G_OVER_GAMMA, eps)).unwrap()
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn p1() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (ratio, target) in [(0.04, 0.2384), (0.075, 0.2490), (0.12, 0.2498)] {
        let params = SystemParams::scaled(G_OVER_GAMMA, ratio, DetuningMode::TwoPhotonShifted, 4).unwrap();
        let p3 = EffectiveParams::from_system(&params).unwrap().p3;
        pass &= within(p3, target, 5e-4);
        parts.push(format!("eps/g={ratio}: p3={p3:.5} (want {target}±5e-4)"));
    }
    outcome(pass, parts.join("; "))
}

fn p2() -> Outcome {
    let eff = fig2_params();
    let period = eff.beat_period() * GAMMA;
    outcome(within(period, 0.0062, 2e-4), format!("gamma*T={period:.6} (want 0.0062±2e-4), nu={:.3}", eff.nu))
}

/// Search window for the transient extrema; a scan step well below the beat
/// period keeps every beat extremum bracketed.
const WINDOW: (f64, f64) = (0.0, 2.0);
const SCAN: f64 = 2e-4;
const REFINE: f64 = 1e-10;

fn p3() -> Outcome {
    let eff = fig2_params();
    let fwd = origin_transient(&eff, EmissionChannel::Forward).unwrap();
    let side = origin_transient(&eff, EmissionChannel::Side).unwrap();
    let two = origin_transient(&eff, EmissionChannel::TwoPhoton).unwrap();
    let f_min = global_minimum(|t| fwd.eval(t), WINDOW.0, WINDOW.1, SCAN, REFINE).unwrap();
    let s_min = global_minimum(|t| side.eval(t), WINDOW.0, WINDOW.1, SCAN, REFINE).unwrap();
    let s_next = next_maximum(|t| side.eval(t), s_min.tau, WINDOW.1, SCAN, REFINE).unwrap();
    let t_min = global_minimum(|t| two.eval(t), WINDOW.0, WINDOW.1, SCAN, REFINE).unwrap();
    let checks = [
        within(f_min.tau, 0.3297, 0.002),
        within(s_min.tau, 0.3327, 0.002),
        within(s_next.tau, 0.3390, 0.002),
    ];
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "forward min at {:.5} [{}] (want 0.3297±0.002); side min at {:.5} [{}] (want 0.3327±0.002); \
             side next max at {:.5} [{}] (want 0.3390±0.002); diagnostic: two-photon min at {:.5}",
            f_min.tau,
            tag(checks[0]),
            s_min.tau,
            tag(checks[1]),
            s_next.tau,
            tag(checks[2]),
            t_min.tau
        ),
    )
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "out"
    }
}

fn p4() -> Outcome {
    let eff = fig2_params();
    let g2 = effective_g2(&eff).unwrap();
    let width = eff.beat_period();
    let avg_peak = global_maximum(|t| g2.window_mean(t, width), WINDOW.0, WINDOW.1, SCAN, REFINE).unwrap();
    let raw_peak = global_maximum(|t| g2.eval(t), WINDOW.0, WINDOW.1, SCAN, REFINE).unwrap();
    let peak_ok = within(avg_peak.tau, 0.3235, 0.005);

    let params = SystemParams {
        g: G_OVER_GAMMA,
        kappa: KAPPA,
        gamma: GAMMA,
        eps_d: eff.eps_d,
        detuning: DetuningMode::TwoPhotonShifted,
        spec: HilbertSpec::new(6).unwrap(),
    };
    let grid: Vec<f64> = (0..=4000).map(|k| k as f64 * 5e-4).collect();
    let full = g2_forward(&params, &grid).unwrap();
    let worst = grid
        .iter()
        .zip(&full)
        .map(|(t, v)| {
            let e = g2.eval(*t);
            (v - e).abs() / e.abs()
        })
        .fold(0.0, f64::max);
    let me_ok = worst <= 0.05;
    outcome(
        peak_ok && me_ok,
        format!(
            "beat-averaged peak at {:.5} [{}] (want 0.3235±0.005; raw peak {:.5}); \
             full ME vs effective g2 max relative deviation {:.4} over [0,2] [{}] (want ≤0.05)",
            avg_peak.tau,
            tag(peak_ok),
            raw_peak.tau,
            worst,
            tag(me_ok)
        ),
    )
}

fn p5() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst_n: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for _ in 0..20 {
        let p3 = rng.random_range(0.01..0.2499);
        let eps = eps_for_p3(G_OVER_GAMMA, KAPPA, GAMMA, p3).unwrap();
        let eff = EffectiveParams::new(G_OVER_GAMMA, KAPPA, GAMMA, eps, shifted(G_OVER_GAMMA, eps)).unwrap();
        let ss = steady_state_4l(&eff);
        worst_n = worst_n.max((ss.photon_number() - 2.5 * eff.p3).abs());
        worst_r = worst_r.max((flux_ratio(&ss, GAMMA, KAPPA).unwrap() - 5.0 / 3.0).abs());
    }
    outcome(
        worst_n <= 1e-12 && worst_r <= 1e-12,
        format!("max |<n>-5p3/2| = {worst_n:.2e}, max |r-5/3| = {worst_r:.2e} over 20 draws (want ≤1e-12)"),
    )
}

fn p6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (ratio, target) in [(6.0, 0.60), (12.0, 0.80), (24.0, 0.87)] {
        let params = SystemParams::scaled(ratio, 0.23, DetuningMode::TwoPhotonBare, 35).unwrap();
        let ss = steady_state(&params).unwrap();
        let ops = build_operators(params.spec).unwrap();
        let n = ss.expectation(&ops.number).unwrap().re;
        pass &= within(n, target, 0.02);
        parts.push(format!("g/gamma={ratio}: <n>={n:.4} (want {target}±0.02)"));
    }
    outcome(pass, parts.join("; "))
}

fn p7() -> Outcome {
    let mut worst: f64 = 0.0;
    for p3 in [0.02, 0.1, 0.2, 0.2475] {
        let eps = eps_for_p3(G_OVER_GAMMA, KAPPA, GAMMA, p3).unwrap();
        let eff = EffectiveParams::new(G_OVER_GAMMA, KAPPA, GAMMA, eps, shifted(G_OVER_GAMMA, eps)).unwrap();
        let f = steady_emission(&eff, EmissionChannel::Forward).unwrap().state;
        let s = steady_emission(&eff, EmissionChannel::Side).unwrap().state;
        let t = steady_emission(&eff, EmissionChannel::TwoPhoton).unwrap().state;
        let errs = [
            f.rho00 - 0.4,
            f.rho11 + f.rho22 - 0.6,
            f.rho11 - 0.4 * LAMBDA_PLUS * LAMBDA_PLUS,
            f.rho22 - 0.4 * LAMBDA_MINUS * LAMBDA_MINUS,
            (f.rho12 - C64::new(0.1, 0.0)).norm(),
            f.rho33,
            s.rho00 - 2.0 / 3.0,
            s.rho11 + s.rho22 - 1.0 / 3.0,
            (s.rho12 - C64::new(1.0 / 6.0, 0.0)).norm(),
            s.rho33,
            t.rho00 - 1.0,
            t.rho11,
            t.rho22,
            t.rho33,
            t.rho12.norm(),
            t.rho03.norm(),
            f.rho03.norm(),
            s.rho03.norm(),
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(e.abs()));
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e} over p3 in {{0.02,0.1,0.2,0.2475}} (want ≤1e-12)"))
}

fn random_state(rng: &mut ChaCha20Rng) -> FourLevelState {
    let w: Vec<f64> = (0..4).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    let d: Vec<f64> = w.iter().map(|x| x / s).collect();
    let coherence = |a: f64, b: f64, rng: &mut ChaCha20Rng| {
        C64::from_polar(rng.random::<f64>() * (a * b).sqrt(), rng.random_range(0.0..2.0 * PI))
    };
    let rho12 = coherence(d[1], d[2], rng);
    let rho03 = coherence(d[0], d[3], rng);
    FourLevelState::new(d[0], d[1], d[2], d[3], rho12, rho03).unwrap()
}

fn max_state_diff(a: &FourLevelState, b: &FourLevelState) -> f64 {
    [
        a.rho00 - b.rho00,
        a.rho11 - b.rho11,
        a.rho22 - b.rho22,
        a.rho33 - b.rho33,
        (a.rho12 - b.rho12).norm(),
        (a.rho03 - b.rho03).norm(),
    ]
    .iter()
    .fold(0.0, |m, e| m.max(e.abs()))
}

fn p8() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut worst_transient: f64 = 0.0;
    for _ in 0..100 {
        let g = rng.random_range(50.0..1000.0);
        let kappa = rng.random_range(0.2..2.0);
        let eps = g * rng.random_range(0.02..0.12);
        let offset = rng.random_range(-1.0..1.0) * eps * eps / g;
        let eff = EffectiveParams::new(g, kappa, GAMMA, eps, shifted(g, eps) + offset).unwrap();
        let init = TransientInit::new(random_state(&mut rng), &eff).unwrap();
        let tau = rng.random_range(0.0..2.0);
        let a = analytic_transient(&init, &eff, tau).unwrap();
        let n = evolve_effective(&init.state, &eff, &[0.0, tau]).unwrap();
        worst_transient = worst_transient.max(max_state_diff(&a, &n[1]));
    }
    let transient_ok = worst_transient <= 1e-10;

    let mut worst_wigner: f64 = 0.0;
    for _ in 0..100 {
        let c = cavity_coefficients(&random_state(&mut rng));
        let rho = c.to_cavity(2).unwrap();
        for _ in 0..10 {
            let alpha = C64::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
            let diff = (wigner_general_point(&rho, alpha).unwrap() - wigner_point(&c, alpha)).abs();
            worst_wigner = worst_wigner.max(diff);
        }
    }
    let wigner_ok = worst_wigner <= 1e-10;

    let params = SystemParams::scaled(G_OVER_GAMMA, 0.075, DetuningMode::TwoPhotonShifted, 6).unwrap();
    let eff = EffectiveParams::from_system(&params).unwrap();
    let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 5e-4).collect();
    let ops = build_operators(params.spec).unwrap();
    let full = evolve_expectations(&params, &DensityMatrix::vacuum(params.spec), &times, &[&ops.number]).unwrap();
    let reduced = evolve_effective(&FourLevelState::ground(), &eff, &times).unwrap();
    let scale = reduced.iter().map(|s| s.photon_number()).fold(0.0, f64::max);
    let worst_me = full[0]
        .iter()
        .zip(&reduced)
        .map(|(a, b)| (a - b.photon_number()).abs())
        .fold(0.0, f64::max)
        / scale;
    let me_ok = worst_me <= 0.03;
    outcome(
        transient_ok && wigner_ok && me_ok,
        format!(
            "analytic vs integrated transient {worst_transient:.2e} [{}] (want ≤1e-10); closed-form vs general \
             Wigner {worst_wigner:.2e} [{}] (want ≤1e-10); full ME vs effective <n> for gamma*tau≤1: max \
             deviation {:.3} of peak [{}] (want ≤0.03)",
            tag(transient_ok),
            tag(wigner_ok),
            worst_me,
            tag(me_ok)
        ),
    )
}

/// Largest-power angular frequency of `samples` above `floor`.
fn dominant_frequency(samples: &[f64], dt: f64, floor: f64) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        samples.iter().map(|v| rustfft::num_complex::Complex::new(v - mean, 0.0)).collect();
    let n = buf.len();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dw = 2.0 * PI / (n as f64 * dt);
    (1..n / 2)
        .filter(|k| *k as f64 * dw >= floor)
        .max_by(|a, b| buf[*a].norm_sqr().total_cmp(&buf[*b].norm_sqr()))
        .map(|k| k as f64 * dw)
        .unwrap()
}

fn p9() -> Outcome {
    let params = SystemParams::scaled(G_OVER_GAMMA, 0.075, DetuningMode::TwoPhotonShifted, 6).unwrap();
    let spec = params.spec;
    let init = InitialEnsemble {
        components: vec![
            (2.0 / 3.0, spec.basis(Atom::Lower, 0), InitLabel::Ground),
            (1.0 / 3.0, spec.basis(Atom::Lower, 1), InitLabel::OnePhoton),
        ],
    };
    let config = TrajectoryConfig::new(params, 0.5, 0.05);
    let times = config.sample_times();
    let ops = build_operators(spec).unwrap();
    let exact =
        evolve_expectations(&params, &init.density().unwrap(), &times, &[&ops.number, &ops.excitation]).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for method in [Unraveling::Diffusion, Unraveling::Jump] {
        let records = run_ensemble(method, &config, &init, 2000, 2024, 1).unwrap();
        let stats = ensemble_average(&records).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..times.len() {
            worst = worst.max((stats.n_mean[k] - exact[0][k]).abs() / stats.n_stderr[k]);
            worst = worst.max((stats.sigma_mean[k] - exact[1][k]).abs() / stats.sigma_stderr[k]);
        }
        pass &= worst <= 3.0;
        parts.push(format!("{method:?}: max |mean-ME|/stderr = {worst:.2} over {} times (want ≤3)", times.len()));
    }

    let eff = EffectiveParams::from_system(&params).unwrap();
    let dt = 1e-4;
    let beat_config = TrajectoryConfig::new(params, 1.0, dt);
    let one = spec.basis(Atom::Lower, 1);
    type Runner = fn(&TrajectoryConfig, &Array1<C64>, InitLabel, u64, u64) -> Result<TrajectoryRecord>;
    for (name, run) in [("diffusion", run_qsd_trajectory as Runner), ("jump", run_mc_trajectory as Runner)] {
        let rec = run(&beat_config, &one, InitLabel::OnePhoton, 99, 0).unwrap();
        // Skip the slow population dynamics; the beat is the only component above this.
        let peak = dominant_frequency(&rec.n_cond, dt, 0.2 * eff.nu);
        let rel = (peak - eff.nu).abs() / eff.nu;
        pass &= rel <= 0.02;
        parts.push(format!("{name} |1,-> beat peak {peak:.1} vs nu {:.1} (rel {rel:.4}, want ≤0.02)", eff.nu));
    }
    outcome(pass, parts.join("; "))
}

fn p10() -> Outcome {
    let params = SystemParams::scaled(12.0, 0.23, DetuningMode::TwoPhotonBare, 12).unwrap();
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
    let run = evolve(&params, &DensityMatrix::vacuum(params.spec), &times).unwrap();
    let mut trace_err: f64 = 0.0;
    let mut herm_err: f64 = 0.0;
    let mut min_eig: f64 = 0.0;
    for rho in &run.states {
        let m = rho.as_array();
        trace_err = trace_err.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        herm_err = herm_err.max(m.indexed_iter().map(|((i, j), z)| (z - m[[j, i]].conj()).norm()).fold(0.0, f64::max));
        min_eig = min_eig.min(rho.min_eigenvalue().unwrap());
    }
    let me_ok = trace_err <= 1e-10 && herm_err <= 1e-12 && min_eig >= -1e-9;

    let eff = fig2_params();
    let grid = GridSpec::square(6.0, 0.01);
    let mut norm_err: f64 = 0.0;
    let mut coeff_err: f64 = 0.0;
    for channel in [EmissionChannel::Forward, EmissionChannel::Side, EmissionChannel::TwoPhoton] {
        let init = steady_emission(&eff, channel).unwrap().state;
        for s in evolve_effective(&init, &eff, &[0.0, 0.1, 0.3297, 1.0]).unwrap() {
            let c = cavity_coefficients(&s);
            coeff_err = coeff_err.max((c.d0 + c.d1 + c.d2 - 1.0).abs());
            let w = WignerGrid::closed_form(&c, &grid).unwrap();
            norm_err = norm_err.max((w.riemann_sum() - 1.0).abs());
        }
    }
    let ss = steady_state_4l(&eff);
    coeff_err = coeff_err.max({
        let c = cavity_coefficients(&ss);
        (c.d0 + c.d1 + c.d2 - 1.0).abs()
    });

    let p = SystemParams::scaled(G_OVER_GAMMA, 0.075, DetuningMode::TwoPhotonShifted, 6).unwrap();
    let config = TrajectoryConfig::new(p, 0.2, 0.01);
    let init = InitialEnsemble::pure(p.spec.basis(Atom::Lower, 1), InitLabel::OnePhoton);
    let mut replay_ok = true;
    for method in [Unraveling::Jump, Unraveling::Diffusion] {
        let a = run_ensemble(method, &config, &init, 8, 7, 1).unwrap();
        let b = run_ensemble(method, &config, &init, 8, 7, 2).unwrap();
        replay_ok &= a == b;
    }
    let pass = me_ok && norm_err <= 1e-6 && coeff_err <= 1e-12 && replay_ok;
    outcome(
        pass,
        format!(
            "ME trace {trace_err:.1e}, hermiticity {herm_err:.1e}, min eigenvalue {min_eig:.1e} [{}]; Wigner \
             normalization {norm_err:.1e} (want ≤1e-6); |d0+d1+d2-1| {coeff_err:.1e}; bit-exact replay across \
             worker counts [{}]",
            tag(me_ok),
            tag(replay_ok)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("P1", p1),
        ("P2", p2),
        ("P3", p3),
        ("P4", p4),
        ("P5", p5),
        ("P6", p6),
        ("P7", p7),
        ("P8", p8),
        ("P9", p9),
        ("P10", p10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        if !result.pass {
            failed += 1;
        }
        println!(
            "{name} {} ({:.1}s) {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
