//! Full master equation of the driven, damped Jaynes–Cummings system in the
//! frame rotating at the drive frequency.
//!
//! dρ/dτ = −i[H, ρ] + κ(2aρa† − a†aρ − ρa†a) + (γ/2)(2σ₋ρσ₊ − σ₊σ₋ρ − ρσ₊σ₋)
//! with H = −Δω_d(σ₊σ₋ + a†a) + g(aσ₊ + a†σ₋) + ε_d(a + a†).

use std::f64::consts::SQRT_2;

use lax::layout::MatrixLayout;
use lax::{Lapack, Transpose};
use log::{debug, warn};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{CashKarp, Workspace};
use crate::quantum::{
    adjoint, build_operators, trace_product, DensityMatrix, HilbertSpec, Operator, OperatorSet, SparseOperator, C64,
    ONE, ZERO,
};

/// Absolute per-entry error bound for master-equation integration.
pub const EVOLVE_ATOL: f64 = 1e-9;
/// Re-Hermitization or renormalization larger than this gets logged.
const CORRECTION_LOG_THRESHOLD: f64 = 1e-8;
const STEADY_RESIDUAL_TOL: f64 = 1e-10;
/// Smallest |U_ii| / max |U_ii| accepted from the bordered LU factorization.
const PIVOT_RATIO_FLOOR: f64 = 1e-13;
const MIN_STEADY_PHOTONS: f64 = 1e-12;

/// How the drive frequency is placed relative to the bare cavity frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum DetuningMode {
    /// Δω_d = −g/√2 − √2 ε_d²/g (drive-shifted two-photon resonance).
    TwoPhotonShifted,
    /// Δω_d = −g/√2.
    TwoPhotonBare,
    /// Δω_d = −g.
    VacuumRabi,
    /// Δω_d given directly.
    Explicit(f64),
}

/// Physical rates and truncation. Rates are normally quoted in units of γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eps_d: f64,
    pub detuning: DetuningMode,
    #[serde(rename = "n_trunc")]
    pub spec: HilbertSpec,
}

impl SystemParams {
    /// Parameters in units of γ with γ = 2κ, the convention of all presets.
    pub fn scaled(g_over_gamma: f64, eps_over_g: f64, detuning: DetuningMode, n_trunc: usize) -> Result<Self> {
        let p = Self {
            g: g_over_gamma,
            kappa: 0.5,
            gamma: 1.0,
            eps_d: eps_over_g * g_over_gamma,
            detuning,
            spec: HilbertSpec::new(n_trunc)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("kappa", self.kappa), ("gamma", self.gamma), ("eps_d", self.eps_d)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter { name, reason: format!("must be finite and >= 0, got {v}") });
            }
        }
        if let DetuningMode::Explicit(d) = self.detuning {
            if !d.is_finite() {
                return Err(Error::InvalidParameter { name: "detuning", reason: "not finite".into() });
            }
        }
        if self.g == 0.0 && matches!(self.detuning, DetuningMode::TwoPhotonShifted) && self.eps_d > 0.0 {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "shifted two-photon detuning needs g > 0".into(),
            });
        }
        HilbertSpec::new(self.spec.n_trunc())?;
        Ok(())
    }

    /// Δω_d = ω_d − ω₀.
    pub fn drive_detuning(&self) -> f64 {
        match self.detuning {
            DetuningMode::TwoPhotonShifted => {
                let shift = if self.g > 0.0 { SQRT_2 * self.eps_d * self.eps_d / self.g } else { 0.0 };
                -self.g / SQRT_2 - shift
            }
            DetuningMode::TwoPhotonBare => -self.g / SQRT_2,
            DetuningMode::VacuumRabi => -self.g,
            DetuningMode::Explicit(d) => d,
        }
    }

    /// Single-atom cooperativity g²/(κγ).
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (self.kappa * self.gamma)
    }
}

pub fn rotating_frame_hamiltonian(params: &SystemParams) -> Result<Operator> {
    let ops = build_operators(params.spec)?;
    Ok(hamiltonian_from(params, &ops))
}

fn hamiltonian_from(params: &SystemParams, ops: &OperatorSet) -> Operator {
    let det = params.drive_detuning();
    let r = |x: f64| C64::new(x, 0.0);
    ops.excitation
        .add(&ops.number)
        .scaled(r(-det))
        .add(&ops.a.dot(&ops.sigma_plus).add(&ops.a_dag.dot(&ops.sigma_minus)).scaled(r(params.g)))
        .add(&ops.a.add(&ops.a_dag).scaled(r(params.eps_d)))
}

/// Sparse form of the generator used by the integrator and the
/// superoperator assembly.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    /// H − iκa†a − i(γ/2)σ₊σ₋
    heff: SparseOperator,
    heff_adj: SparseOperator,
    /// (collapse operator, rate): (a, 2κ) and (σ₋, γ).
    jumps: Vec<(SparseOperator, f64)>,
}

impl Liouvillian {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let ops = build_operators(params.spec)?;
        let h = hamiltonian_from(params, &ops);
        let damping = ops
            .number
            .scaled(C64::new(0.0, -params.kappa))
            .add(&ops.excitation.scaled(C64::new(0.0, -0.5 * params.gamma)));
        let heff = h.add(&damping).to_sparse();
        let heff_adj = heff.adjoint();
        Ok(Self {
            dim: params.spec.dim(),
            heff,
            heff_adj,
            jumps: vec![(ops.a.to_sparse(), 2.0 * params.kappa), (ops.sigma_minus.to_sparse(), params.gamma)],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effective_hamiltonian(&self) -> &SparseOperator {
        &self.heff
    }

    /// Collapse operators √(2κ)a and √γσ₋, in that order.
    pub fn collapse_operators(&self) -> Vec<SparseOperator> {
        self.jumps.iter().map(|(l, rate)| l.scaled(C64::new(rate.sqrt(), 0.0))).collect()
    }

    /// Writes dρ/dτ into `out` for a row-major flattened ρ.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        self.heff.left_mul_acc(rho, C64::new(0.0, -1.0), out);
        self.heff_adj.right_mul_acc(rho, C64::new(0.0, 1.0), out);
        for (l, rate) in &self.jumps {
            if *rate != 0.0 {
                l.sandwich_acc(rho, C64::new(*rate, 0.0), out);
            }
        }
    }

    /// Dense superoperator acting on the row-major vectorization
    /// `vec(ρ)[i·d + j] = ρ_ij`, stored column-major for LAPACK.
    pub fn superoperator(&self) -> Vec<C64> {
        let d = self.dim;
        let n = d * d;
        let mut s = vec![ZERO; n * n];
        let mut put = |row: usize, col: usize, v: C64| s[row + n * col] += v;
        let mi = C64::new(0.0, -1.0);
        for (i, k, h) in self.heff.entries() {
            for j in 0..d {
                put(i * d + j, k * d + j, mi * h);
            }
        }
        // ρ H_eff†: out_ij += i ρ_ik conj(H_eff)_jk
        for (j, k, h) in self.heff.entries() {
            for i in 0..d {
                put(i * d + j, i * d + k, C64::new(0.0, 1.0) * h.conj());
            }
        }
        for (l, rate) in &self.jumps {
            let entries: Vec<_> = l.entries().collect();
            for &(i, p, lip) in &entries {
                for &(j, q, ljq) in &entries {
                    put(i * d + j, p * d + q, lip * ljq.conj() * *rate);
                }
            }
        }
        s
    }
}

pub fn liouvillian_rhs(params: &SystemParams, rho: &DensityMatrix) -> Result<Array2<C64>> {
    let d = params.spec.dim();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
    }
    let l = Liouvillian::new(params)?;
    let flat: Vec<C64> = rho.as_array().iter().cloned().collect();
    let mut out = vec![ZERO; d * d];
    l.apply(&flat, &mut out);
    Ok(Array2::from_shape_vec((d, d), out).expect("square"))
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::NonIncreasingTimes);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonIncreasingTimes);
    }
    Ok(())
}

/// Makes a flattened matrix Hermitian with unit trace in place and returns
/// the size of the largest correction applied.
fn hermitize_normalize(rho: &mut [C64], d: usize) -> f64 {
    let mut herm = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let a = rho[i * d + j];
            let b = rho[j * d + i];
            let avg = (a + b.conj()) * 0.5;
            herm = herm.max((a - avg).norm());
            rho[i * d + j] = avg;
            rho[j * d + i] = avg.conj();
        }
    }
    let tr: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
    rho.iter_mut().for_each(|z| *z /= tr);
    herm.max((tr - 1.0).abs())
}

/// Integrates the master equation from τ = 0 and calls `visit` at every
/// requested time with the corrected state. An empty grid visits τ = 0 only.
pub fn propagate<F>(params: &SystemParams, rho0: &DensityMatrix, times: &[f64], mut visit: F) -> Result<()>
where
    F: FnMut(f64, &Array2<C64>) -> Result<()>,
{
    check_times(times)?;
    let l = Liouvillian::new(params)?;
    let d = l.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    let mut y: Vec<C64> = rho0.as_array().iter().cloned().collect();
    if times.first().is_none_or(|t| *t == 0.0) {
        visit(0.0, rho0.as_array())?;
    }
    let ck = CashKarp::new(EVOLVE_ATOL, 0.0);
    let mut ws = Workspace::new(d * d);
    let mut h = f64::NAN;
    let mut t = 0.0;
    let mut rhs = |_: f64, x: &[C64], dx: &mut [C64]| l.apply(x, dx);
    for &target in times.iter().skip_while(|t| **t == 0.0) {
        ck.integrate(&mut rhs, t, target, &mut y, &mut h, &mut ws)?;
        t = target;
        let fix = hermitize_normalize(&mut y, d);
        if fix > CORRECTION_LOG_THRESHOLD {
            warn!("tau = {t}: state correction {fix:e} applied after integration");
        }
        let m = Array2::from_shape_vec((d, d), y.clone()).expect("square");
        visit(t, &m)?;
    }
    Ok(())
}

pub fn evolve(params: &SystemParams, rho0: &DensityMatrix, times: &[f64]) -> Result<EvolutionResult> {
    let mut out = EvolutionResult { times: Vec::new(), states: Vec::new() };
    propagate(params, rho0, times, |t, m| {
        out.times.push(t);
        out.states.push(if t == 0.0 { rho0.clone() } else { DensityMatrix::new(m.clone())? });
        Ok(())
    })?;
    Ok(out)
}

/// Expectation values of `ops` along the evolution, without storing states.
pub fn evolve_expectations(
    params: &SystemParams,
    rho0: &DensityMatrix,
    times: &[f64],
    ops: &[&Operator],
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); ops.len()];
    propagate(params, rho0, times, |_, m| {
        for (o, op) in out.iter_mut().zip(ops) {
            o.push(trace_product(&m.view(), &op.as_array().view()).re);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Stationary state from the null vector of the dense Liouvillian.
///
/// One equation of the singular system is replaced by the trace condition,
/// then the bordered matrix is LU-factorized. A tiny pivot means the null
/// space is not one-dimensional.
pub fn steady_state(params: &SystemParams) -> Result<DensityMatrix> {
    if params.kappa <= 0.0 && params.gamma <= 0.0 {
        return Err(Error::InvalidParameter { name: "kappa", reason: "need kappa > 0 or gamma > 0".into() });
    }
    let l = Liouvillian::new(params)?;
    let d = l.dim();
    let n = d * d;
    let mut s = l.superoperator();
    // Row (0,0) is minus the sum of the other diagonal rows; swap it for tr ρ = 1.
    for col in 0..n {
        s[n * col] = ZERO;
    }
    for k in 0..d {
        s[n * (k * d + k)] = ONE;
    }
    let layout = MatrixLayout::F { col: n as i32, lda: n as i32 };
    let pivots = C64::lu(layout, &mut s).map_err(|_| Error::DegenerateNullSpace(0.0))?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let u = s[i + n * i].norm();
        lo = lo.min(u);
        hi = hi.max(u);
    }
    let ratio = lo / hi;
    debug!("steady state: pivot ratio {ratio:e} at dimension {n}");
    if ratio < PIVOT_RATIO_FLOOR {
        return Err(Error::DegenerateNullSpace(ratio));
    }
    let mut b = vec![ZERO; n];
    b[0] = ONE;
    C64::solve(layout, Transpose::No, &s, &pivots, &mut b)?;
    drop(s);
    hermitize_normalize(&mut b, d);
    let mut res = vec![ZERO; n];
    l.apply(&b, &mut res);
    let residual = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > STEADY_RESIDUAL_TOL {
        return Err(Error::SteadyStateResidual(residual));
    }
    DensityMatrix::new(Array2::from_shape_vec((d, d), b).expect("square"))
}

/// Intensity correlation of the transmitted light,
/// g²(τ) = tr[a†a e^{Lτ}(aρ_ss a†)] / ⟨a†a⟩_ss².
pub fn g2_forward(params: &SystemParams, tau_grid: &[f64]) -> Result<Vec<f64>> {
    let ss = steady_state(params)?;
    g2_forward_from(params, &ss, tau_grid)
}

/// Same as [`g2_forward`] with a precomputed stationary state.
pub fn g2_forward_from(params: &SystemParams, ss: &DensityMatrix, tau_grid: &[f64]) -> Result<Vec<f64>> {
    let ops = build_operators(params.spec)?;
    let n_ss = ss.expectation(&ops.number)?.re;
    if n_ss < MIN_STEADY_PHOTONS {
        return Err(Error::EmptyCavity(n_ss));
    }
    let jumped = ops.a.as_array().dot(ss.as_array()).dot(ops.a_dag.as_array());
    let weight = jumped.diag().sum().re;
    let mut cond = jumped / C64::new(weight, 0.0);
    let herm = (&cond + &adjoint(&cond.view())) * C64::new(0.5, 0.0);
    cond = herm;
    let cond = DensityMatrix::from_array_unchecked(cond);
    let values = evolve_expectations(params, &cond, tau_grid, &[&ops.number])?;
    let scale = weight / (n_ss * n_ss);
    let series = values.into_iter().next().expect("one observable");
    Ok(series.into_iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Atom;
    use ndarray_linalg::EigValsh;

    fn p(g: f64, kappa: f64, gamma: f64, eps: f64, det: DetuningMode, n: usize) -> SystemParams {
        SystemParams { g, kappa, gamma, eps_d: eps, detuning: det, spec: HilbertSpec::new(n).unwrap() }
    }

    #[test]
    fn jc_doublet_without_drive() {
        let params = p(3.0, 0.5, 1.0, 0.0, DetuningMode::Explicit(0.0), 4);
        let h = rotating_frame_hamiltonian(&params).unwrap();
        let ev = h.as_array().eigvalsh(ndarray_linalg::UPLO::Lower).unwrap();
        for n in 1..=4usize {
            let e = (n as f64).sqrt() * 3.0;
            for target in [e, -e] {
                assert!(ev.iter().any(|x| (x - target).abs() < 1e-12), "missing {target}");
            }
        }
    }

    #[test]
    fn shifted_detuning_value() {
        let params = SystemParams::scaled(500.0, 0.075, DetuningMode::TwoPhotonShifted, 4).unwrap();
        assert!((params.drive_detuning() - (-357.53)).abs() < 5e-3);
    }

    #[test]
    fn vacuum_is_dark() {
        let params = p(10.0, 0.5, 1.0, 0.0, DetuningMode::TwoPhotonBare, 4);
        let out = liouvillian_rhs(&params, &DensityMatrix::vacuum(params.spec)).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn bare_cavity_decay_rate() {
        let params = p(0.0, 0.7, 1.0, 0.0, DetuningMode::Explicit(0.0), 3);
        let rho = DensityMatrix::from_pure(&params.spec.basis(Atom::Lower, 1)).unwrap();
        let out = liouvillian_rhs(&params, &rho).unwrap();
        let ops = build_operators(params.spec).unwrap();
        let rate = trace_product(&out.view(), &ops.number.as_array().view());
        assert!((rate.re + 2.0 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn superoperator_matches_apply() {
        let params = p(2.0, 0.3, 1.0, 0.7, DetuningMode::TwoPhotonShifted, 3);
        let l = Liouvillian::new(&params).unwrap();
        let d = l.dim();
        let n = d * d;
        let x: Vec<C64> = (0..n).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let s = l.superoperator();
        let mut want = vec![ZERO; n];
        l.apply(&x, &mut want);
        for r in 0..n {
            let got: C64 = (0..n).map(|c| s[r + n * c] * x[c]).sum();
            assert!((got - want[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_grid_returns_initial_state() {
        let params = p(1.0, 0.5, 1.0, 0.2, DetuningMode::TwoPhotonBare, 3);
        let rho0 = DensityMatrix::vacuum(params.spec);
        let r = evolve(&params, &rho0, &[]).unwrap();
        assert_eq!(r.times, vec![0.0]);
        assert_eq!(r.states, vec![rho0]);
    }

    #[test]
    fn grid_without_zero_reports_only_requested_times() {
        let params = p(1.0, 0.5, 1.0, 0.2, DetuningMode::TwoPhotonBare, 3);
        let rho0 = DensityMatrix::vacuum(params.spec);
        let r = evolve(&params, &rho0, &[0.5, 1.0]).unwrap();
        assert_eq!(r.times, vec![0.5, 1.0]);
    }

    #[test]
    fn rejects_unordered_times() {
        let params = p(1.0, 0.5, 1.0, 0.2, DetuningMode::TwoPhotonBare, 3);
        let rho0 = DensityMatrix::vacuum(params.spec);
        assert!(matches!(evolve(&params, &rho0, &[0.2, 0.1]), Err(Error::NonIncreasingTimes)));
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let params = p(5.0, 0.5, 1.0, 0.0, DetuningMode::TwoPhotonBare, 4);
        let ss = steady_state(&params).unwrap();
        let vac = DensityMatrix::vacuum(params.spec);
        let diff = (ss.as_array() - vac.as_array()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // No cavity loss and no coupling: every Fock state with a ground-state
        // atom is stationary.
        let params = p(0.0, 0.0, 1.0, 0.0, DetuningMode::Explicit(0.0), 3);
        assert!(matches!(steady_state(&params), Err(Error::DegenerateNullSpace(_))));
    }

    #[test]
    fn g2_needs_photons() {
        let params = p(5.0, 0.5, 1.0, 0.0, DetuningMode::TwoPhotonBare, 4);
        assert!(matches!(g2_forward(&params, &[0.0, 1.0]), Err(Error::EmptyCavity(_))));
    }
}
