use jcbeat_core::lindblad::evolve_expectations;
use jcbeat_core::quantum::build_operators;
use jcbeat_core::trajectories::*;
use jcbeat_core::*;
use rustfft::{num_complex::Complex, FftPlanner};

fn params(g: f64, kappa: f64, gamma: f64, eps: f64, detuning: DetuningMode, n: usize) -> SystemParams {
    SystemParams { g, kappa, gamma, eps_d: eps, detuning, spec: HilbertSpec::new(n).unwrap() }
}

/// Excited atom, no coupling or drive: the first side jump is exponential
/// with rate γ. Pearson χ² over ten equiprobable bins.
#[test]
fn single_excitation_waiting_times() {
    let p = params(0.0, 0.5, 1.0, 0.0, DetuningMode::Explicit(0.0), 2);
    let config = TrajectoryConfig::new(p, 8.0, 0.5);
    let init = InitialEnsemble::pure(p.spec.basis(Atom::Upper, 0), InitLabel::Custom);
    let records = run_ensemble(Unraveling::Jump, &config, &init, 4000, 11, 1).unwrap();
    let mut counts = [0usize; 10];
    let mut late = 0;
    for r in &records {
        assert!(r.jumps.len() <= 1);
        match r.jumps.first() {
            Some(j) => {
                assert_eq!(j.channel, EmissionChannel::Side);
                let u = 1.0 - (-j.tau).exp();
                counts[((u * 10.0) as usize).min(9)] += 1;
            }
            None => late += 1,
        }
    }
    // Survival past T = 8 has probability e⁻⁸; fold it into the last bin.
    counts[9] += late;
    let expected = records.len() as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 9 degrees of freedom.
    assert!(chi2 < 27.88, "chi2 = {chi2}, counts {counts:?}");
}

fn ensemble_vs_master_equation(method: Unraveling) {
    let p = params(2.0, 0.5, 1.0, 0.8, DetuningMode::VacuumRabi, 6);
    let config = TrajectoryConfig { noise_dt: Some(2e-3), ..TrajectoryConfig::new(p, 2.0, 0.25) };
    let init = InitialEnsemble::pure(p.spec.basis(Atom::Lower, 0), InitLabel::Ground);
    let records = run_ensemble(method, &config, &init, 1500, 5, 1).unwrap();
    let stats = ensemble_average(&records).unwrap();
    let ops = build_operators(p.spec).unwrap();
    let exact =
        evolve_expectations(&p, &init.density().unwrap(), &stats.times, &[&ops.number, &ops.excitation]).unwrap();
    for k in 1..stats.times.len() {
        let zn = (stats.n_mean[k] - exact[0][k]).abs() / stats.n_stderr[k];
        let zs = (stats.sigma_mean[k] - exact[1][k]).abs() / stats.sigma_stderr[k];
        assert!(zn < 4.0 && zs < 4.0, "{method:?} t={} z=({zn:.2}, {zs:.2})", stats.times[k]);
    }
}

#[test]
fn jump_ensemble_reproduces_master_equation() {
    ensemble_vs_master_equation(Unraveling::Jump);
}

#[test]
fn diffusion_ensemble_reproduces_master_equation() {
    ensemble_vs_master_equation(Unraveling::Diffusion);
}

fn peak_frequency(samples: &[f64], dt: f64) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let n = buf.len();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2).max_by(|a, b| buf[*a].norm_sqr().total_cmp(&buf[*b].norm_sqr())).unwrap();
    2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt)
}

/// |1,−⟩ is an equal superposition of the first couplet, so the conditional
/// photon number beats at the splitting 2g.
#[test]
fn single_photon_record_beats_at_the_couplet_splitting() {
    let g = 40.0;
    let p = params(g, 0.05, 0.1, 0.0, DetuningMode::Explicit(0.0), 3);
    let dt = 2e-3;
    let config = TrajectoryConfig::new(p, 4.0, dt);
    let psi = p.spec.basis(Atom::Lower, 1);
    for rec in [
        run_qsd_trajectory(&config, &psi, InitLabel::OnePhoton, 3, 0).unwrap(),
        run_mc_trajectory(&config, &psi, InitLabel::OnePhoton, 3, 0).unwrap(),
    ] {
        let quiet: Vec<f64> = match rec.jumps.first() {
            Some(j) => rec.times.iter().zip(&rec.n_cond).filter(|(t, _)| **t < j.tau).map(|(_, n)| *n).collect(),
            None => rec.n_cond.clone(),
        };
        if quiet.len() < 500 {
            continue;
        }
        let w = peak_frequency(&quiet, dt);
        assert!((w - 2.0 * g).abs() / (2.0 * g) < 0.02, "{:?}: peak {w}", rec.method);
    }
}

#[test]
fn worker_count_does_not_change_records() {
    let p = SystemParams::scaled(5.0, 0.2, DetuningMode::TwoPhotonBare, 5).unwrap();
    let config = TrajectoryConfig::new(p, 1.0, 0.1);
    let init = InitialEnsemble {
        components: vec![
            (2.0, p.spec.basis(Atom::Lower, 0), InitLabel::Ground),
            (1.0, p.spec.basis(Atom::Lower, 1), InitLabel::OnePhoton),
        ],
    };
    for method in [Unraveling::Jump, Unraveling::Diffusion] {
        let one = run_ensemble(method, &config, &init, 6, 17, 1).unwrap();
        let three = run_ensemble(method, &config, &init, 6, 17, 3).unwrap();
        assert_eq!(one, three);
        for (k, r) in one.iter().enumerate() {
            assert_eq!(r.stream, k as u64);
            assert_eq!(r.seed, 17);
        }
    }
}

#[test]
fn record_files_round_trip() {
    let p = SystemParams::scaled(5.0, 0.2, DetuningMode::TwoPhotonBare, 4).unwrap();
    let config = TrajectoryConfig::new(p, 0.5, 0.1);
    let rec = run_mc_trajectory(&config, &p.spec.basis(Atom::Lower, 1), InitLabel::OnePhoton, 1, 2).unwrap();
    let mut csv = Vec::new();
    rec.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau,n_cond,sigma_cond,r_cond");
    assert_eq!(lines.count(), rec.times.len());
    let mut side = Vec::new();
    rec.write_sidecar(&mut side, "abc").unwrap();
    let v: serde_json::Value = serde_json::from_slice(&side).unwrap();
    assert_eq!(v["seed"], 1);
    assert_eq!(v["stream"], 2);
    assert_eq!(v["method"], "jump");
}
