//! Pure-state unravelings of the master equation.
//!
//! Jump records follow direct photodetection of both outputs: the
//! unnormalized state evolves under H_eff until its squared norm falls to a
//! uniform random threshold, then a second draw picks the channel.
//!
//! Diffusion records follow heterodyne detection (quantum state diffusion).
//! The equation is integrated in Stratonovich form,
//! dψ = −iH_eff ψ + Σⱼ[⟨Lⱼ⟩*Lⱼ + ½⟨Lⱼ†Lⱼ⟩ − |⟨Lⱼ⟩|²]ψ + Σⱼ(Lⱼ − ⟨Lⱼ⟩)ψ ξⱼ,
//! with complex white noise ξⱼ held constant on a fixed lattice of cells
//! (E|ΔWⱼ|² = Δτ per cell), so each cell is an ordinary differential
//! equation solved to the requested tolerance. The norm is conserved by the
//! flow; renormalization only removes integration error.

use std::io::{self, Write};

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::EmissionChannel;
use crate::error::{Error, Result};
use crate::lindblad::{Liouvillian, SystemParams};
use crate::ode::{CashKarp, StepStats, Workspace};
use crate::quantum::{build_operators, Atom, DensityMatrix, HilbertSpec, SparseOperator, C64, ZERO};

/// Floor on ⟨σ₊σ₋⟩ below which the flux ratio is reported as missing.
pub const ATOMIC_FLOOR: f64 = 1e-12;
const MIN_NORM_SQR: f64 = 1e-14;
/// Jump times are located to this absolute accuracy.
const JUMP_TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unraveling {
    Jump,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLabel {
    Ground,
    /// |1,−⟩ = (ξ₁ + ξ₂)/√2.
    OnePhoton,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub params: SystemParams,
    /// Final time T.
    pub t_end: f64,
    /// Spacing of recorded samples.
    pub sample_dt: f64,
    /// Integrator tolerance (absolute, per component).
    pub tolerance: f64,
    /// Width of the noise cells for diffusion records. `None` picks
    /// 5·10⁻³/g, i.e. γΔτ = 10⁻⁵ at g/γ = 500.
    #[serde(default)]
    pub noise_dt: Option<f64>,
}

impl TrajectoryConfig {
    pub fn new(params: SystemParams, t_end: f64, sample_dt: f64) -> Self {
        Self { params, t_end, sample_dt, tolerance: 1e-8, noise_dt: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |name: &'static str, v: f64| Error::InvalidParameter { name, reason: format!("must be > 0, got {v}") };
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(bad("t_end", self.t_end));
        }
        if !(self.sample_dt > 0.0) || !self.sample_dt.is_finite() {
            return Err(bad("sample_dt", self.sample_dt));
        }
        if !(self.tolerance > 0.0) {
            return Err(bad("tolerance", self.tolerance));
        }
        if let Some(d) = self.noise_dt {
            if !(d > 0.0) || !d.is_finite() {
                return Err(bad("noise_dt", d));
            }
        }
        Ok(())
    }

    /// Sample times 0, Δ, 2Δ, … up to and including T.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.sample_dt + 1e-9).floor() as usize;
        let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * self.sample_dt).collect();
        if self.t_end - t[n] > 1e-9 * self.sample_dt {
            t.push(self.t_end);
        } else {
            t[n] = self.t_end;
        }
        t
    }

    pub fn noise_cell(&self) -> f64 {
        self.noise_dt.unwrap_or(5e-3 / self.params.g.max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub tau: f64,
    pub channel: EmissionChannel,
}

/// One stochastic record: conditional averages at the sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub method: Unraveling,
    pub times: Vec<f64>,
    /// ⟨a†a⟩ conditioned on the record.
    pub n_cond: Vec<f64>,
    /// ⟨σ₊σ₋⟩ conditioned on the record.
    pub sigma_cond: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub seed: u64,
    pub stream: u64,
    pub init_label: InitLabel,
    pub config: TrajectoryConfig,
    /// Largest |‖ψ‖² − 1| seen before renormalization (diffusion only).
    pub max_norm_defect: f64,
    /// Largest population of the top three Fock levels over the samples.
    pub max_tail: f64,
    pub steps: StepStats,
}

/// JSON companion of a record's CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RecordSidecar<'a> {
    pub method: Unraveling,
    pub seed: u64,
    pub stream: u64,
    pub init_label: InitLabel,
    pub config_fingerprint: &'a str,
    pub jumps: Vec<(f64, EmissionChannel)>,
}

impl TrajectoryRecord {
    /// CSV with header `tau,n_cond,sigma_cond,r_cond`; a missing flux ratio
    /// is written as `NaN`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "tau,n_cond,sigma_cond,r_cond")?;
        for (k, r) in conditional_observables(self).iter().enumerate() {
            let r = r.map_or_else(|| "NaN".to_string(), |v| format!("{v:.16e}"));
            writeln!(out, "{:.16e},{:.16e},{:.16e},{}", self.times[k], self.n_cond[k], self.sigma_cond[k], r)?;
        }
        Ok(())
    }

    pub fn sidecar<'a>(&self, config_fingerprint: &'a str) -> RecordSidecar<'a> {
        RecordSidecar {
            method: self.method,
            seed: self.seed,
            stream: self.stream,
            init_label: self.init_label,
            config_fingerprint,
            jumps: self.jumps.iter().map(|j| (j.tau, j.channel)).collect(),
        }
    }

    pub fn write_sidecar<W: Write>(&self, out: W, config_fingerprint: &str) -> io::Result<()> {
        serde_json::to_writer_pretty(out, &self.sidecar(config_fingerprint)).map_err(io::Error::other)
    }
}

/// Flux ratio r = 2κ⟨a†a⟩/(γ⟨σ₊σ₋⟩) at each sample; `None` where the atom
/// is below [`ATOMIC_FLOOR`].
pub fn conditional_observables(record: &TrajectoryRecord) -> Vec<Option<f64>> {
    let (kappa, gamma) = (record.config.params.kappa, record.config.params.gamma);
    record
        .n_cond
        .iter()
        .zip(&record.sigma_cond)
        .map(|(n, s)| if *s > ATOMIC_FLOOR && gamma > 0.0 { Some(2.0 * kappa * n / (gamma * s)) } else { None })
        .collect()
}

/// Operators shared by both unravelings.
struct Model {
    heff: SparseOperator,
    /// √(2κ)a and √γσ₋.
    ops: [SparseOperator; 2],
    number: SparseOperator,
    excitation: SparseOperator,
    /// Basis indices with n ≥ N − 2.
    tail: Vec<usize>,
    dim: usize,
}

impl Model {
    fn new(params: &SystemParams) -> Result<Self> {
        let l = Liouvillian::new(params)?;
        let set = build_operators(params.spec)?;
        let c = l.collapse_operators();
        let ops = [c[0].clone(), c[1].clone()];
        Ok(Self {
            heff: l.effective_hamiltonian().clone(),
            ops,
            number: set.number.to_sparse(),
            excitation: set.excitation.to_sparse(),
            tail: tail_indices(params.spec),
            dim: l.dim(),
        })
    }

    fn observe(&self, psi: &[C64]) -> (f64, f64) {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        (self.number.sandwich(psi).re / n2, self.excitation.sandwich(psi).re / n2)
    }

    fn sample(&self, rec: &mut TrajectoryRecord, tau: f64, psi: &[C64]) {
        let (n, s) = self.observe(psi);
        let tail = self.tail.iter().map(|k| psi[*k].norm_sqr()).sum::<f64>() / norm_sqr(psi);
        rec.times.push(tau);
        rec.n_cond.push(n);
        rec.sigma_cond.push(s);
        rec.max_tail = rec.max_tail.max(tail);
    }
}

fn tail_indices(spec: HilbertSpec) -> Vec<usize> {
    let top = spec.n_trunc();
    (top.saturating_sub(2)..=top).flat_map(|n| [spec.index(Atom::Lower, n), spec.index(Atom::Upper, n)]).collect()
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn check_init(init: &Array1<C64>, dim: usize) -> Result<Vec<C64>> {
    if init.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: init.len() });
    }
    let n = norm_sqr(init.as_slice().expect("contiguous"));
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::TraceNotUnit(n));
    }
    Ok(init.to_vec())
}

/// Seeded generator for stream `stream` of `seed`; streams are independent.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn empty_record(method: Unraveling, config: &TrajectoryConfig, seed: u64, stream: u64, label: InitLabel) -> TrajectoryRecord {
    TrajectoryRecord {
        method,
        times: Vec::new(),
        n_cond: Vec::new(),
        sigma_cond: Vec::new(),
        jumps: Vec::new(),
        seed,
        stream,
        init_label: label,
        config: *config,
        max_norm_defect: 0.0,
        max_tail: 0.0,
        steps: StepStats::default(),
    }
}

/// Jump unraveling from a normalized initial vector.
pub fn run_mc_trajectory(
    config: &TrajectoryConfig,
    init: &Array1<C64>,
    label: InitLabel,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(seed, stream);
    mc_with_rng(config, init, label, seed, stream, &mut rng)
}

fn mc_with_rng(
    config: &TrajectoryConfig,
    init: &Array1<C64>,
    label: InitLabel,
    seed: u64,
    stream: u64,
    rng: &mut ChaCha20Rng,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let model = Model::new(&config.params)?;
    let d = model.dim;
    let mut psi = check_init(init, d)?;
    let mut rec = empty_record(Unraveling::Jump, config, seed, stream, label);
    let ck = CashKarp::new(config.tolerance * 1e-2, config.tolerance);
    let mut ws = Workspace::new(d);
    let mi = C64::new(0.0, -1.0);
    let heff = &model.heff;
    let mut rhs = |_: f64, x: &[C64], dx: &mut [C64]| {
        heff.apply(x, dx);
        dx.iter_mut().for_each(|z| *z *= mi);
    };
    let mut threshold: f64 = rng.random();
    let mut h = f64::NAN;
    let mut t = 0.0;
    let mut scratch = vec![ZERO; d];
    for &sample in &config.sample_times() {
        while t < sample {
            let t_new = ck.attempt(&mut rhs, t, sample, &psi, &mut h, &mut ws, &mut rec.steps)?;
            let n_new = norm_sqr(ws.proposal());
            if n_new > threshold {
                psi.copy_from_slice(ws.proposal());
                t = t_new;
                continue;
            }
            // Bisect the crossing inside [t, t_new] with trial steps from t.
            let (mut lo, mut hi) = (0.0, t_new - t);
            while hi - lo > JUMP_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                ck.try_step(&mut rhs, t, &psi, mid, &mut ws);
                if norm_sqr(ws.proposal()) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            ck.try_step(&mut rhs, t, &psi, hi, &mut ws);
            psi.copy_from_slice(ws.proposal());
            t += hi;
            if norm_sqr(&psi) < MIN_NORM_SQR {
                return Err(Error::NormCollapse(norm_sqr(&psi)));
            }
            let (n, s) = model.observe(&psi);
            let forward = 2.0 * config.params.kappa * n;
            let side = config.params.gamma * s;
            let pick: f64 = rng.random();
            let (channel, op) = if pick * (forward + side) < forward {
                (EmissionChannel::Forward, &model.ops[0])
            } else {
                (EmissionChannel::Side, &model.ops[1])
            };
            op.apply(&psi, &mut scratch);
            let norm = norm_sqr(&scratch).sqrt();
            if !(norm > 0.0) {
                return Err(Error::ZeroWeight(norm));
            }
            psi.iter_mut().zip(&scratch).for_each(|(p, s)| *p = s / norm);
            rec.jumps.push(JumpEvent { tau: t, channel });
            threshold = rng.random();
        }
        model.sample(&mut rec, sample, &psi);
    }
    Ok(rec)
}

/// Diffusion unraveling from a normalized initial vector.
pub fn run_qsd_trajectory(
    config: &TrajectoryConfig,
    init: &Array1<C64>,
    label: InitLabel,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(seed, stream);
    qsd_with_rng(config, init, label, seed, stream, &mut rng)
}

fn qsd_with_rng(
    config: &TrajectoryConfig,
    init: &Array1<C64>,
    label: InitLabel,
    seed: u64,
    stream: u64,
    rng: &mut ChaCha20Rng,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let model = Model::new(&config.params)?;
    let d = model.dim;
    let mut psi = check_init(init, d)?;
    let mut rec = empty_record(Unraveling::Diffusion, config, seed, stream, label);
    let ck = CashKarp::new(config.tolerance, 0.0);
    let mut ws = Workspace::new(d);
    let cell = config.noise_cell();
    let mut lpsi = [vec![ZERO; d], vec![ZERO; d]];
    let mi = C64::new(0.0, -1.0);
    let times = config.sample_times();
    let record = |rec: &mut TrajectoryRecord, tau: f64, psi: &[C64]| model.sample(rec, tau, psi);
    record(&mut rec, 0.0, &psi);
    let mut next = 1;
    let mut h = f64::NAN;
    let n_cells = (config.t_end / cell - 1e-9).ceil().max(1.0) as u64;
    for k in 0..n_cells {
        let start = k as f64 * cell;
        let end = if k + 1 == n_cells { config.t_end } else { (k + 1) as f64 * cell };
        // ξ = ΔW/Δτ with E|ΔW|² = Δτ, split evenly between quadratures.
        let normal = Normal::new(0.0, (0.5 / (end - start)).sqrt()).expect("finite width");
        let xi: [C64; 2] = std::array::from_fn(|_| C64::new(normal.sample(rng), normal.sample(rng)));
        let mut rhs = |_: f64, x: &[C64], dx: &mut [C64]| {
            let n2 = norm_sqr(x);
            model.heff.apply(x, dx);
            dx.iter_mut().for_each(|z| *z *= mi);
            for j in 0..2 {
                model.ops[j].apply(x, &mut lpsi[j]);
                let mean_l = x.iter().zip(&lpsi[j]).map(|(a, b)| a.conj() * b).sum::<C64>() / n2;
                let shift = 0.5 * norm_sqr(&lpsi[j]) / n2 - mean_l.norm_sqr() - mean_l * xi[j];
                let c = mean_l.conj() + xi[j];
                for (dk, (lk, xk)) in dx.iter_mut().zip(lpsi[j].iter().zip(x)) {
                    *dk += c * lk + shift * xk;
                }
            }
        };
        let mut t = start;
        loop {
            let sample_due = next < times.len() && times[next] <= end;
            let stop = if sample_due { times[next] } else { end };
            let stats = ck.integrate(&mut rhs, t, stop, &mut psi, &mut h, &mut ws)?;
            rec.steps.accepted += stats.accepted;
            rec.steps.rejected += stats.rejected;
            t = stop;
            let n2 = norm_sqr(&psi);
            rec.max_norm_defect = rec.max_norm_defect.max((n2 - 1.0).abs());
            let inv = 1.0 / n2.sqrt();
            psi.iter_mut().for_each(|z| *z *= inv);
            if sample_due {
                record(&mut rec, t, &psi);
                next += 1;
            } else {
                break;
            }
        }
    }
    Ok(rec)
}

/// A mixed initial state as weighted pure components, sampled once per
/// trajectory.
#[derive(Debug, Clone)]
pub struct InitialEnsemble {
    pub components: Vec<(f64, Array1<C64>, InitLabel)>,
}

impl InitialEnsemble {
    pub fn pure(psi: Array1<C64>, label: InitLabel) -> Self {
        Self { components: vec![(1.0, psi, label)] }
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        let d = self.components[0].1.len();
        let mut m = ndarray::Array2::<C64>::zeros((d, d));
        for (w, psi, _) in &self.components {
            for i in 0..d {
                for j in 0..d {
                    m[[i, j]] += psi[i] * psi[j].conj() * *w;
                }
            }
        }
        DensityMatrix::new(m)
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> (&Array1<C64>, InitLabel) {
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut u: f64 = rng.random::<f64>() * total;
        for (w, psi, label) in &self.components {
            if u < *w {
                return (psi, *label);
            }
            u -= w;
        }
        let last = self.components.last().expect("non-empty ensemble");
        (&last.1, last.2)
    }
}

/// Record `stream` of `seed`: the initial component is drawn first, from the
/// same generator that then drives the record.
pub fn run_record(
    method: Unraveling,
    config: &TrajectoryConfig,
    init: &InitialEnsemble,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    if init.components.is_empty() {
        return Err(Error::InvalidParameter { name: "init", reason: "empty ensemble".into() });
    }
    let mut rng = trajectory_rng(seed, stream);
    let (psi, label) = init.sample(&mut rng);
    match method {
        Unraveling::Jump => mc_with_rng(config, psi, label, seed, stream, &mut rng),
        Unraveling::Diffusion => qsd_with_rng(config, psi, label, seed, stream, &mut rng),
    }
}

/// Runs `count` independent records on a pool of `workers` threads. Record
/// k uses stream k of `seed`; output order is by stream.
pub fn run_ensemble(
    method: Unraveling,
    config: &TrajectoryConfig,
    init: &InitialEnsemble,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<TrajectoryRecord>> {
    if init.components.is_empty() {
        return Err(Error::InvalidParameter { name: "init", reason: "empty ensemble".into() });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter { name: "workers", reason: e.to_string() })?;
    pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|k| run_record(method, config, init, seed, k))
            .collect()
    })
}

/// Pointwise mean and standard error over records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub n_stderr: Vec<f64>,
    pub sigma_mean: Vec<f64>,
    pub sigma_stderr: Vec<f64>,
    /// Mean flux ratio over the records where it is defined.
    pub r_mean: Vec<Option<f64>>,
    pub count: usize,
}

fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn ensemble_average(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let first = &records[0];
    if records.iter().any(|r| r.times != first.times || r.config != first.config) {
        return Err(Error::GridMismatch);
    }
    let ratios: Vec<Vec<Option<f64>>> = records.iter().map(conditional_observables).collect();
    let mut stats = EnsembleStats {
        times: first.times.clone(),
        n_mean: Vec::new(),
        n_stderr: Vec::new(),
        sigma_mean: Vec::new(),
        sigma_stderr: Vec::new(),
        r_mean: Vec::new(),
        count: records.len(),
    };
    for k in 0..first.times.len() {
        let (m, e) = mean_stderr(records.iter().map(|r| r.n_cond[k]));
        stats.n_mean.push(m);
        stats.n_stderr.push(e);
        let (m, e) = mean_stderr(records.iter().map(|r| r.sigma_cond[k]));
        stats.sigma_mean.push(m);
        stats.sigma_stderr.push(e);
        let defined: Vec<f64> = ratios.iter().filter_map(|r| r[k]).collect();
        stats.r_mean.push((!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64));
    }
    Ok(stats)
}
