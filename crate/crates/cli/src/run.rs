//! Experiment execution: numbers to CSV files plus a JSON manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use jcbeat_core::conditioning::{apply_jump, effective_g2, origin_transient, steady_emission};
use jcbeat_core::four_level::{cavity_coefficients, flux_ratio, steady_state_4l, TransientSolver};
use jcbeat_core::lindblad::{g2_forward_from, propagate, steady_state};
use jcbeat_core::phase_space::{negativity_region, wigner_general, wigner_origin};
use jcbeat_core::series::{global_maximum, global_minimum, next_maximum, ExponentialSum};
use jcbeat_core::trajectories::{
    ensemble_average, run_ensemble, run_record, InitLabel, InitialEnsemble, TrajectoryConfig, TrajectoryRecord,
};
use jcbeat_core::{
    Atom, DensityMatrix, EffectiveParams, EmissionChannel, FourLevelState, GridSpec, SystemParams, WignerGrid,
};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind, Model, TrajectoryInit, TrajectorySettings};
use crate::presets::{PresetName, FIG4_COUPLINGS};
use crate::CliError;

/// Population allowed in the top three Fock levels before a warning.
const TAIL_LIMIT: f64 = 1e-6;
/// Scan spacing for locating extrema; well below the fastest beat period.
const EXTREMUM_SCAN: f64 = 2e-4;
const EXTREMUM_TOL: f64 = 1e-10;
/// Snapshot times of the three phase-space panels of the transient figure.
const FIG2_SNAPSHOTS: [(&str, EmissionChannel, f64); 3] = [
    ("wigner_b.csv", EmissionChannel::Forward, 0.3297),
    ("wigner_c.csv", EmissionChannel::TwoPhoton, 0.3327),
    ("wigner_d.csv", EmissionChannel::Side, 0.3390),
];

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub manifest: PathBuf,
}

struct Ctx<'a> {
    dir: &'a Path,
    fingerprint: String,
    seed: u64,
    workers: usize,
    files: Vec<String>,
    warnings: Vec<String>,
    results: Map<String, Value>,
}

fn num(e: jcbeat_core::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl Ctx<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?))
    }

    fn io(&self, name: &str, e: std::io::Error) -> CliError {
        CliError::Io(self.dir.join(name).display().to_string(), e)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut out = self.create(name)?;
        let body = || -> std::io::Result<()> {
            writeln!(out, "{}", header.join(","))?;
            for row in rows {
                debug_assert_eq!(row.len(), header.len());
                let line: Vec<String> = row.into_iter().map(fmt).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            out.flush()
        };
        body().map_err(|e| self.io(name, e))
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    fn check_tail(&mut self, what: &str, tail: f64, n_trunc: usize) {
        if tail > TAIL_LIMIT {
            self.warn(format!(
                "{what}: population {tail:.2e} in Fock levels n >= {} exceeds {TAIL_LIMIT:e}; raise n_trunc",
                n_trunc.saturating_sub(2)
            ));
        }
    }

    fn effective(&mut self, params: &SystemParams) -> Result<EffectiveParams, CliError> {
        let eff = EffectiveParams::from_system(params).map_err(num)?;
        // Already logged by the core crate; only recorded here.
        self.warnings.extend(eff.warnings().iter().map(|w| format!("effective model: {w}")));
        Ok(eff)
    }

    fn wigner(&mut self, name: &str, grid: &WignerGrid, binary: bool) -> Result<(), CliError> {
        let mut out = self.create(name)?;
        grid.write_csv(&mut out).and_then(|_| out.flush()).map_err(|e| self.io(name, e))?;
        if binary {
            let bin = name.replace(".csv", ".bin");
            let mut out = self.create(&bin)?;
            grid.write_binary(&mut out).and_then(|_| out.flush()).map_err(|e| self.io(&bin, e))?;
        }
        let key = name.trim_end_matches(".csv").to_string();
        match negativity_region(grid) {
            Ok(report) => self.result(
                &key,
                json!({
                    "topology": report.topology,
                    "contours": report.contours.len(),
                    "min_value": report.min_value,
                    "min_location": report.min_location,
                    "tau": grid.tau,
                }),
            ),
            // Coarse grids get only the minimum; contours would be unreliable.
            Err(_) => {
                let (min_value, x, y) = grid.minimum();
                self.result(&key, json!({ "min_value": min_value, "min_location": (x, y), "tau": grid.tau }));
            }
        }
        Ok(())
    }

    fn record(&mut self, stem: &str, rec: &TrajectoryRecord) -> Result<(), CliError> {
        let csv = format!("{stem}.csv");
        let mut out = self.create(&csv)?;
        rec.write_csv(&mut out).and_then(|_| out.flush()).map_err(|e| self.io(&csv, e))?;
        let side = format!("{stem}.json");
        let mut out = self.create(&side)?;
        let fp = self.fingerprint.clone();
        rec.write_sidecar(&mut out, &fp).and_then(|_| out.flush()).map_err(|e| self.io(&side, e))?;
        let n = rec.config.params.spec.n_trunc();
        self.check_tail(stem, rec.max_tail, n);
        self.result(stem, json!({ "jumps": rec.jumps.len(), "steps": rec.steps, "max_norm_defect": rec.max_norm_defect }));
        Ok(())
    }
}

/// Observables of a full-space density matrix stored row-major.
#[derive(Debug, Clone, Copy)]
struct FullObservables {
    n: f64,
    sigma: f64,
    w0: f64,
    tail: f64,
}

impl FullObservables {
    fn of(params: &SystemParams, diag: impl Fn(usize) -> f64) -> Self {
        let spec = params.spec;
        let top = spec.n_trunc();
        let mut o = Self { n: 0.0, sigma: 0.0, w0: 0.0, tail: 0.0 };
        for n in 0..=top {
            for atom in [Atom::Lower, Atom::Upper] {
                let p = diag(spec.index(atom, n));
                o.n += n as f64 * p;
                if atom == Atom::Upper {
                    o.sigma += p;
                }
                o.w0 += if n % 2 == 0 { p } else { -p };
                if n + 2 >= top {
                    o.tail += p;
                }
            }
        }
        o.w0 *= std::f64::consts::FRAC_2_PI;
        o
    }

    fn ratio(&self, params: &SystemParams) -> f64 {
        if self.sigma > 1e-14 && params.gamma > 0.0 {
            2.0 * params.kappa * self.n / (params.gamma * self.sigma)
        } else {
            f64::NAN
        }
    }

    fn of_state(params: &SystemParams, rho: &DensityMatrix) -> Self {
        Self::of(params, |k| rho.as_array()[[k, k]].re)
    }
}

fn effective_ratio(s: &FourLevelState, eff: &EffectiveParams) -> f64 {
    flux_ratio(s, eff.gamma, eff.kappa).unwrap_or(f64::NAN)
}

fn grid_of(c: &ExperimentConfig) -> GridSpec {
    c.grid.unwrap_or_default()
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Validates `config`, runs it and writes its files and `manifest.json`
/// into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunSummary, CliError> {
    config.validate()?;
    let kind = config.kind()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(out_dir.display().to_string(), e))?;
    let start = Instant::now();
    let mut ctx = Ctx {
        dir: out_dir,
        fingerprint: config.fingerprint(),
        seed: config.seed.unwrap_or(0),
        workers: workers.max(1),
        files: Vec::new(),
        warnings: Vec::new(),
        results: Map::new(),
    };
    info!("running {} into {}", kind.name(), out_dir.display());
    match kind {
        ExperimentKind::Steady => steady(&mut ctx, config)?,
        ExperimentKind::Transient => transient(&mut ctx, config)?,
        ExperimentKind::WignerGrid => wigner_grid(&mut ctx, config)?,
        ExperimentKind::WignerOrigin => wigner_origin_experiment(&mut ctx, config)?,
        ExperimentKind::G2 => g2(&mut ctx, config)?,
        ExperimentKind::Trajectory => trajectory(&mut ctx, config)?,
        ExperimentKind::Ensemble => ensemble(&mut ctx, config)?,
        ExperimentKind::FigurePreset => figure(&mut ctx, config)?,
    }
    let mut files = Vec::new();
    for name in &ctx.files {
        let bytes = fs::read(out_dir.join(name)).map_err(|e| ctx.io(name, e))?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        files.push(json!({ "name": name, "sha256": digest }));
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind.name(),
        "fingerprint": ctx.fingerprint,
        "seed": ctx.seed,
        "workers": ctx.workers,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "config": config,
        "files": files,
        "warnings": ctx.warnings,
        "results": ctx.results,
    });
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), files: ctx.files, warnings: ctx.warnings, manifest: path })
}

const STEADY_HEADER: [&str; 5] = ["n_ss", "sigma_ss", "flux_ratio", "w0", "tail_population"];

fn full_steady(ctx: &mut Ctx, params: &SystemParams) -> Result<(DensityMatrix, FullObservables), CliError> {
    let ss = steady_state(params).map_err(num)?;
    let o = FullObservables::of_state(params, &ss);
    ctx.check_tail("steady state", o.tail, params.spec.n_trunc());
    Ok((ss, o))
}

fn steady(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let row = match c.model {
        Model::Full => {
            let (_, o) = full_steady(ctx, &c.params)?;
            vec![o.n, o.sigma, o.ratio(&c.params), o.w0, o.tail]
        }
        Model::Effective => {
            let eff = ctx.effective(&c.params)?;
            let s = steady_state_4l(&eff);
            ctx.result("p3", eff.p3);
            vec![s.photon_number(), s.atomic_excitation(), effective_ratio(&s, &eff), wigner_origin(&s), 0.0]
        }
    };
    ctx.table("steady.csv", &STEADY_HEADER, [row])
}

/// Initial state of the full model: the jump applied to the stationary state,
/// or the vacuum.
fn full_initial(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<DensityMatrix, CliError> {
    match c.channel {
        Some(ch) => {
            let (ss, _) = full_steady(ctx, &c.params)?;
            Ok(apply_jump(ch, &ss, ch.prefactor(c.params.kappa, c.params.gamma, 1.0)).map_err(num)?.state)
        }
        None => Ok(DensityMatrix::vacuum(c.params.spec)),
    }
}

fn full_series(params: &SystemParams, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<FullObservables>, CliError> {
    let mut out = Vec::with_capacity(times.len());
    propagate(params, rho0, times, |_, m| {
        out.push(FullObservables::of(params, |k| m[[k, k]].re));
        Ok(())
    })
    .map_err(num)?;
    Ok(out)
}

fn effective_initial(eff: &EffectiveParams, channel: Option<EmissionChannel>) -> Result<FourLevelState, CliError> {
    match channel {
        Some(ch) => Ok(steady_emission(eff, ch).map_err(num)?.state),
        None => Ok(FourLevelState::ground()),
    }
}

fn write_full_series(ctx: &mut Ctx, name: &str, params: &SystemParams, times: &[f64], obs: &[FullObservables]) -> Result<(), CliError> {
    let tail = obs.iter().map(|o| o.tail).fold(0.0, f64::max);
    ctx.check_tail(name, tail, params.spec.n_trunc());
    let rows = times.iter().zip(obs).map(|(t, o)| vec![*t, o.n, o.sigma, o.w0, o.ratio(params)]);
    ctx.table(name, &["tau", "n", "sigma", "w0", "r"], rows)
}

fn write_effective_series(ctx: &mut Ctx, name: &str, eff: &EffectiveParams, init: &FourLevelState, times: &[f64]) -> Result<(), CliError> {
    let solver = TransientSolver::new(eff).map_err(num)?;
    let rows = times.iter().map(|t| {
        let s = solver.state_at(init, *t);
        vec![
            *t,
            s.rho00,
            s.rho11,
            s.rho22,
            s.rho33,
            s.rho12.re,
            s.rho12.im,
            s.rho03.re,
            s.rho03.im,
            s.photon_number(),
            s.atomic_excitation(),
            wigner_origin(&s),
            effective_ratio(&s, eff),
        ]
    });
    let header = [
        "tau", "rho00", "rho11", "rho22", "rho33", "rho12_re", "rho12_im", "rho03_re", "rho03_im", "n", "sigma", "w0", "r",
    ];
    ctx.table(name, &header, rows.collect::<Vec<_>>())
}

fn transient(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let times = c.time_grid()?;
    match c.model {
        Model::Full => {
            let rho0 = full_initial(ctx, c)?;
            let obs = full_series(&c.params, &rho0, &times)?;
            write_full_series(ctx, "transient.csv", &c.params, &times, &obs)
        }
        Model::Effective => {
            let eff = ctx.effective(&c.params)?;
            let init = effective_initial(&eff, c.channel)?;
            write_effective_series(ctx, "transient.csv", &eff, &init, &times)
        }
    }
}

fn file_label(ch: EmissionChannel) -> &'static str {
    match ch {
        EmissionChannel::Forward => "forward",
        EmissionChannel::Side => "side",
        EmissionChannel::TwoPhoton => "twophoton",
    }
}

const ALL_CHANNELS: [EmissionChannel; 3] = [EmissionChannel::Forward, EmissionChannel::Side, EmissionChannel::TwoPhoton];

/// W(0, τ) after each detection, with the beat average and the extrema.
fn origin_curves(ctx: &mut Ctx, eff: &EffectiveParams, channels: &[EmissionChannel], times: &[f64]) -> Result<(), CliError> {
    let width = eff.beat_period();
    let (a, b) = (times[0], *times.last().expect("non-empty grid"));
    for ch in channels {
        let w = origin_transient(eff, *ch).map_err(num)?;
        let name = format!("w0_{}.csv", file_label(*ch));
        ctx.table(&name, &["tau", "w0", "w0_beat_avg"], times.iter().map(|t| vec![*t, w.eval(*t), w.window_mean(*t, width)]))?;
        let min = global_minimum(|t| w.eval(t), a, b, EXTREMUM_SCAN, EXTREMUM_TOL);
        let next = min.and_then(|m| next_maximum(|t| w.eval(t), m.tau, b, EXTREMUM_SCAN, EXTREMUM_TOL));
        ctx.result(
            &format!("w0_{}", file_label(*ch)),
            json!({ "global_min": min.map(|m| (m.tau, m.value)), "next_max": next.map(|m| (m.tau, m.value)) }),
        );
    }
    Ok(())
}

fn wigner_origin_experiment(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let times = c.time_grid()?;
    let channels: Vec<EmissionChannel> = c.channel.map_or(ALL_CHANNELS.to_vec(), |ch| vec![ch]);
    match c.model {
        Model::Effective => {
            let eff = ctx.effective(&c.params)?;
            origin_curves(ctx, &eff, &channels, &times)
        }
        Model::Full => {
            let (ss, _) = full_steady(ctx, &c.params)?;
            for ch in channels {
                let rho0 = apply_jump(ch, &ss, 1.0).map_err(num)?.state;
                let obs = full_series(&c.params, &rho0, &times)?;
                let tail = obs.iter().map(|o| o.tail).fold(0.0, f64::max);
                ctx.check_tail("w0 transient", tail, c.params.spec.n_trunc());
                let name = format!("w0_{}.csv", file_label(ch));
                ctx.table(&name, &["tau", "w0"], times.iter().zip(&obs).map(|(t, o)| vec![*t, o.w0]))?;
            }
            Ok(())
        }
    }
}

fn g2_curve(ctx: &mut Ctx, eff: &EffectiveParams, times: &[f64]) -> Result<ExponentialSum, CliError> {
    let g2 = effective_g2(eff).map_err(num)?;
    let width = eff.beat_period();
    ctx.table("g2_forward.csv", &["tau", "g2", "g2_beat_avg"], times.iter().map(|t| vec![*t, g2.eval(*t), g2.window_mean(*t, width)]))?;
    let (a, b) = (times[0], *times.last().expect("non-empty grid"));
    let raw = global_maximum(|t| g2.eval(t), a, b, EXTREMUM_SCAN, EXTREMUM_TOL);
    let avg = global_maximum(|t| g2.window_mean(t, width), a, b, EXTREMUM_SCAN, EXTREMUM_TOL);
    ctx.result("g2_peak", json!({ "raw": raw.map(|m| (m.tau, m.value)), "beat_averaged": avg.map(|m| (m.tau, m.value)) }));
    Ok(g2)
}

fn g2(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let times = c.time_grid()?;
    match c.model {
        Model::Effective => {
            let eff = ctx.effective(&c.params)?;
            g2_curve(ctx, &eff, &times).map(|_| ())
        }
        Model::Full => {
            let (ss, _) = full_steady(ctx, &c.params)?;
            let values = g2_forward_from(&c.params, &ss, &times).map_err(num)?;
            ctx.table("g2_forward.csv", &["tau", "g2"], times.iter().zip(values).map(|(t, v)| vec![*t, v]))
        }
    }
}

fn effective_snapshot(eff: &EffectiveParams, channel: Option<EmissionChannel>, tau: f64, grid: &GridSpec) -> Result<WignerGrid, CliError> {
    let state = match channel {
        Some(ch) => {
            let init = steady_emission(eff, ch).map_err(num)?.state;
            TransientSolver::new(eff).map_err(num)?.state_at(&init, tau)
        }
        None => steady_state_4l(eff),
    };
    let mut w = WignerGrid::closed_form(&cavity_coefficients(&state), grid).map_err(num)?;
    w.tau = channel.map(|_| tau);
    Ok(w)
}

fn full_snapshot(ctx: &mut Ctx, c: &ExperimentConfig, params: &SystemParams, grid: &GridSpec) -> Result<WignerGrid, CliError> {
    let (ss, _) = full_steady(ctx, params)?;
    let (rho, tau) = match c.channel {
        Some(ch) => {
            let jumped = apply_jump(ch, &ss, 1.0).map_err(num)?.state;
            let tau = c.tau.unwrap_or(0.0);
            let run = jcbeat_core::lindblad::evolve(params, &jumped, &[tau]).map_err(num)?;
            (run.states.into_iter().last().expect("one state"), Some(tau))
        }
        None => (ss, None),
    };
    let o = FullObservables::of_state(params, &rho);
    ctx.check_tail("wigner state", o.tail, params.spec.n_trunc());
    let cavity = rho.reduce_to_cavity().map_err(num)?;
    let mut w = wigner_general(&cavity, grid).map_err(num)?;
    w.tau = tau;
    Ok(w)
}

fn wigner_grid(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let grid = grid_of(c);
    let w = match c.model {
        Model::Effective => {
            let eff = ctx.effective(&c.params)?;
            effective_snapshot(&eff, c.channel, c.tau.unwrap_or(0.0), &grid)?
        }
        Model::Full => full_snapshot(ctx, c, &c.params, &grid)?,
    };
    ctx.wigner("wigner.csv", &w, c.binary)
}

fn initial_ensemble(params: &SystemParams, init: TrajectoryInit) -> InitialEnsemble {
    let spec = params.spec;
    let ground = spec.basis(Atom::Lower, 0);
    let one = spec.basis(Atom::Lower, 1);
    match init {
        TrajectoryInit::Ground => InitialEnsemble::pure(ground, InitLabel::Ground),
        TrajectoryInit::OnePhoton => InitialEnsemble::pure(one, InitLabel::OnePhoton),
        TrajectoryInit::SideMixture => InitialEnsemble {
            components: vec![(2.0 / 3.0, ground, InitLabel::Ground), (1.0 / 3.0, one, InitLabel::OnePhoton)],
        },
    }
}

fn trajectory_config(params: &SystemParams, s: &TrajectorySettings) -> TrajectoryConfig {
    TrajectoryConfig { params: *params, t_end: s.t_end, sample_dt: s.sample_dt, tolerance: s.tolerance, noise_dt: s.noise_dt }
}

fn reference_series(
    ctx: &mut Ctx,
    params: &SystemParams,
    init: &InitialEnsemble,
    times: &[f64],
) -> Result<Vec<FullObservables>, CliError> {
    let rho0 = init.density().map_err(num)?;
    let obs = full_series(params, &rho0, times)?;
    write_full_series(ctx, "reference.csv", params, times, &obs)?;
    Ok(obs)
}

fn trajectory(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let s = c.trajectory_settings()?;
    let tc = trajectory_config(&c.params, &s);
    let init = initial_ensemble(&c.params, s.init);
    let rec = run_record(s.method, &tc, &init, ctx.seed, s.stream).map_err(num)?;
    ctx.record("trajectory", &rec)?;
    if s.reference {
        reference_series(ctx, &c.params, &init, &rec.times)?;
    }
    Ok(())
}

fn ensemble(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let s = c.trajectory_settings()?;
    let tc = trajectory_config(&c.params, &s);
    let init = initial_ensemble(&c.params, s.init);
    let records = run_ensemble(s.method, &tc, &init, s.count, ctx.seed, ctx.workers).map_err(num)?;
    let stats = ensemble_average(&records).map_err(num)?;
    let tail = records.iter().map(|r| r.max_tail).fold(0.0, f64::max);
    ctx.check_tail("ensemble", tail, c.params.spec.n_trunc());
    let reference = if s.reference { Some(reference_series(ctx, &c.params, &init, &stats.times)?) } else { None };
    let mut header = vec!["tau", "n_mean", "n_stderr", "sigma_mean", "sigma_stderr", "r_mean"];
    if reference.is_some() {
        header.extend(["n_me", "sigma_me"]);
    }
    let mut worst: f64 = 0.0;
    let rows: Vec<Vec<f64>> = (0..stats.times.len())
        .map(|k| {
            let mut row = vec![
                stats.times[k],
                stats.n_mean[k],
                stats.n_stderr[k],
                stats.sigma_mean[k],
                stats.sigma_stderr[k],
                stats.r_mean[k].unwrap_or(f64::NAN),
            ];
            if let Some(r) = &reference {
                row.extend([r[k].n, r[k].sigma]);
                for (m, e, x) in [(stats.n_mean[k], stats.n_stderr[k], r[k].n), (stats.sigma_mean[k], stats.sigma_stderr[k], r[k].sigma)] {
                    if e > 0.0 {
                        worst = worst.max((m - x).abs() / e);
                    }
                }
            }
            row
        })
        .collect();
    ctx.table("ensemble.csv", &header, rows)?;
    ctx.result("count", stats.count);
    let jumps: usize = records.iter().map(|r| r.jumps.len()).sum();
    ctx.result("total_jumps", jumps);
    if reference.is_some() {
        ctx.result("max_standard_score", worst);
    }
    Ok(())
}

fn figure(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let preset = PresetName::parse(c.preset.as_deref().unwrap_or_default())?;
    match preset {
        PresetName::Fig2 => fig2(ctx, c),
        PresetName::Fig3a | PresetName::Fig3b | PresetName::Fig3c => fig3(ctx, c),
        PresetName::Fig4a | PresetName::Fig4b => fig4(ctx, c, preset),
    }
}

fn fig2(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let eff = ctx.effective(&c.params)?;
    let times = c.time_grid()?;
    ctx.result("p3", eff.p3);
    ctx.result("beat_period", eff.beat_period());
    origin_curves(ctx, &eff, &ALL_CHANNELS, &times)?;
    g2_curve(ctx, &eff, &times)?;
    let grid = grid_of(c);
    for (name, ch, tau) in FIG2_SNAPSHOTS {
        let w = effective_snapshot(&eff, Some(ch), tau, &grid)?;
        ctx.wigner(name, &w, c.binary)?;
    }
    Ok(())
}

fn trajectory_pair(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let s = c.trajectory_settings()?;
    let tc = trajectory_config(&c.params, &s);
    for (stem, init) in [("traj_ground", TrajectoryInit::Ground), ("traj_one_photon", TrajectoryInit::OnePhoton)] {
        let rec = run_record(s.method, &tc, &initial_ensemble(&c.params, init), ctx.seed, s.stream).map_err(num)?;
        ctx.record(stem, &rec)?;
    }
    Ok(())
}

fn fig3(ctx: &mut Ctx, c: &ExperimentConfig) -> Result<(), CliError> {
    let eff = ctx.effective(&c.params)?;
    ctx.result("p3", eff.p3);
    let times = c.time_grid()?;
    let side = steady_emission(&eff, EmissionChannel::Side).map_err(num)?.state;
    write_effective_series(ctx, "effective_side.csv", &eff, &side, &times)?;
    let obs = full_series(&c.params, &DensityMatrix::vacuum(c.params.spec), &times)?;
    write_full_series(ctx, "me_ground.csv", &c.params, &times, &obs)?;
    let (ss, o) = full_steady(ctx, &c.params)?;
    ctx.table("steady.csv", &STEADY_HEADER, [vec![o.n, o.sigma, o.ratio(&c.params), o.w0, o.tail]])?;
    let w = wigner_general(&ss.reduce_to_cavity().map_err(num)?, &grid_of(c)).map_err(num)?;
    ctx.wigner("wigner_ss.csv", &w, c.binary)?;
    trajectory_pair(ctx, c)
}

fn fig4(ctx: &mut Ctx, c: &ExperimentConfig, preset: PresetName) -> Result<(), CliError> {
    if preset == PresetName::Fig4b {
        let s = c.trajectory_settings()?;
        let tc = trajectory_config(&c.params, &s);
        let rec = run_record(s.method, &tc, &initial_ensemble(&c.params, TrajectoryInit::Ground), ctx.seed, s.stream)
            .map_err(num)?;
        return ctx.record("traj_ground", &rec);
    }
    let ratio = c.params.eps_d / c.params.g;
    let mut rows = Vec::new();
    for g in FIG4_COUPLINGS {
        let p = SystemParams { g, eps_d: ratio * g, ..c.params };
        let (ss, o) = full_steady(ctx, &p)?;
        rows.push(vec![g, o.n, o.sigma, o.ratio(&p), o.w0, o.tail]);
        let w = wigner_general(&ss.reduce_to_cavity().map_err(num)?, &grid_of(c)).map_err(num)?;
        ctx.wigner(&format!("wigner_ss_g{g}.csv"), &w, c.binary)?;
    }
    let mut header = vec!["g_over_gamma"];
    header.extend(STEADY_HEADER);
    ctx.table("steady.csv", &header, rows)?;
    trajectory_pair(ctx, c)
}
