//! Effective four-level model on the dressed states
//! ξ₀ = |0,−⟩, ξ₁,₂ = (|1,−⟩ ∓ |0,+⟩)/√2, ξ₃ = (|2,−⟩ − |1,+⟩)/√2,
//! valid for weak driving near the two-photon resonance.

use std::f64::consts::SQRT_2;

use log::warn;
use ndarray::{array, Array1, Array2};
use ndarray_linalg::{Eig, Inverse, OperationNorm};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::SystemParams;
use crate::ode::{CashKarp, Workspace};
use crate::phase_space::FockCoefficients;
use crate::quantum::{Atom, DensityMatrix, HilbertSpec, C64, ZERO};
use crate::series::ExponentialSum;

/// Entry-wise slack for the state invariants.
const STATE_TOL: f64 = 1e-12;
/// Above this condition number the eigenvector basis is treated as defective.
const MODAL_COND_LIMIT: f64 = 1e8;
const UPPER_P3_WARNING: f64 = 0.24;
const UPPER_EPS_OVER_G_WARNING: f64 = 0.1;

/// λ± = (√2 ± 1)/2, the amplitudes of a|ξ₃⟩ on ξ₁ and ξ₂.
pub const LAMBDA_PLUS: f64 = (SQRT_2 + 1.0) / 2.0;
pub const LAMBDA_MINUS: f64 = (SQRT_2 - 1.0) / 2.0;

/// Rates, shifts and steady occupation derived from the bare parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eps_d: f64,
    /// Δω_d of the underlying drive.
    pub detuning: f64,
    /// Two-photon Rabi frequency Ω = 2√2 ε²/g.
    pub omega: f64,
    /// Drive-induced shifts δ₀…δ₃.
    pub shifts: [f64; 4],
    /// ξ₃ → ξ₁ and ξ₃ → ξ₂ transition rates.
    pub rate_31: f64,
    pub rate_32: f64,
    /// Decay rate of ξ₁ and ξ₂ to the ground state.
    pub rate_lower: f64,
    /// Decay rate of the ξ₀–ξ₃ coherence, (Γ₃₁ + Γ₃₂)/2; equals γ when γ = 2κ.
    pub coherence_rate: f64,
    /// Beat frequency ν = 2g + δ₂ − δ₁.
    pub nu: f64,
    /// Energy of ξ₃ above ξ₀ in the drive frame; zero on the shifted resonance.
    pub two_photon_detuning: f64,
    pub p3: f64,
}

impl EffectiveParams {
    pub fn new(g: f64, kappa: f64, gamma: f64, eps_d: f64, detuning: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter { name: "g", reason: format!("must be > 0, got {g}") });
        }
        for (name, v) in [("kappa", kappa), ("gamma", gamma), ("eps_d", eps_d)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter { name, reason: format!("must be finite and >= 0, got {v}") });
            }
        }
        if kappa + gamma <= 0.0 {
            return Err(Error::InvalidParameter { name: "kappa", reason: "need kappa > 0 or gamma > 0".into() });
        }
        let e2g = eps_d * eps_d / g;
        let shifts = [SQRT_2 * e2g, -(20.0 + 19.0 * SQRT_2) / 7.0 * e2g, (20.0 - 19.0 * SQRT_2) / 7.0 * e2g, -SQRT_2 * e2g];
        let omega = 2.0 * SQRT_2 * e2g;
        let rate_31 = gamma / 4.0 + (SQRT_2 + 1.0).powi(2) * kappa / 2.0;
        let rate_32 = gamma / 4.0 + (SQRT_2 - 1.0).powi(2) * kappa / 2.0;
        let rate_lower = gamma / 2.0 + kappa;
        let coherence_rate = 0.5 * (rate_31 + rate_32);
        let two_photon_detuning = -2.0 * detuning - SQRT_2 * g + shifts[3] - shifts[0];
        let p3 = if omega == 0.0 {
            0.0
        } else {
            let lorentz = (coherence_rate.powi(2) + two_photon_detuning.powi(2)) / (omega * omega);
            1.0 / (2.0 + lorentz + 2.0 * coherence_rate / rate_lower)
        };
        let eff = Self {
            g,
            kappa,
            gamma,
            eps_d,
            detuning,
            omega,
            shifts,
            rate_31,
            rate_32,
            rate_lower,
            coherence_rate,
            nu: 2.0 * g + shifts[2] - shifts[1],
            two_photon_detuning,
            p3,
        };
        for w in eff.warnings() {
            warn!("{w}");
        }
        Ok(eff)
    }

    pub fn from_system(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        Self::new(params.g, params.kappa, params.gamma, params.eps_d, params.drive_detuning())
    }

    /// Conditions under which the perturbative reduction is doubtful.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let floor = 0.5 * (self.kappa + self.gamma / 2.0);
        if self.eps_d > 0.0 && self.eps_d <= floor {
            out.push(format!("drive {} is below the linewidth scale {floor}", self.eps_d));
        }
        if self.eps_d / self.g > UPPER_EPS_OVER_G_WARNING {
            out.push(format!("eps_d/g = {} is outside the weak-drive regime", self.eps_d / self.g));
        }
        if self.p3 > UPPER_P3_WARNING {
            out.push(format!("p3 = {} is near saturation where the reduction loses accuracy", self.p3));
        }
        out
    }

    /// Beat period 2π/ν.
    pub fn beat_period(&self) -> f64 {
        std::f64::consts::TAU / self.nu
    }

    /// Steady photon number ½(ρ₁₁+ρ₂₂) + (3/2)ρ₃₃; (5/2)p₃ when γ = 2κ.
    pub fn steady_photon_number(&self) -> f64 {
        steady_state_4l(self).photon_number()
    }
}

/// Drive amplitude giving steady occupation `p3` on the shifted resonance.
pub fn eps_for_p3(g: f64, kappa: f64, gamma: f64, p3: f64) -> Result<f64> {
    let probe = EffectiveParams::new(g, kappa, gamma, 0.0, 0.0)?;
    let rest = 1.0 / p3 - 2.0 - 2.0 * probe.coherence_rate / probe.rate_lower;
    if !(p3 > 0.0) || !(rest > 0.0) {
        return Err(Error::InvalidParameter { name: "p3", reason: format!("{p3} is not reachable") });
    }
    let omega = probe.coherence_rate / rest.sqrt();
    Ok((omega * g / (2.0 * SQRT_2)).sqrt())
}

/// The matrix elements of the effective model that its dynamics couples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourLevelState {
    pub rho00: f64,
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub rho12: C64,
    pub rho03: C64,
}

// Layout of the real vector the linear dynamics act on.
const P0: usize = 0;
const P1: usize = 1;
const P2: usize = 2;
const P3: usize = 3;
const RE03: usize = 4;
const IM03: usize = 5;

impl FourLevelState {
    pub fn new(rho00: f64, rho11: f64, rho22: f64, rho33: f64, rho12: C64, rho03: C64) -> Result<Self> {
        let s = Self { rho00, rho11, rho22, rho33, rho12, rho03 };
        s.validate()?;
        Ok(s)
    }

    pub fn ground() -> Self {
        Self { rho00: 1.0, rho11: 0.0, rho22: 0.0, rho33: 0.0, rho12: ZERO, rho03: ZERO }
    }

    pub fn validate(&self) -> Result<()> {
        let pops = [self.rho00, self.rho11, self.rho22, self.rho33];
        if let Some(p) = pops.iter().find(|p| !p.is_finite() || **p < -STATE_TOL || **p > 1.0 + STATE_TOL) {
            return Err(Error::NotPositive(*p));
        }
        let sum: f64 = pops.iter().sum();
        if (sum - 1.0).abs() > STATE_TOL {
            return Err(Error::TraceNotUnit(sum));
        }
        let excess12 = self.rho12.norm_sqr() - self.rho11 * self.rho22;
        let excess03 = self.rho03.norm_sqr() - self.rho00 * self.rho33;
        let excess = excess12.max(excess03);
        if excess > STATE_TOL {
            return Err(Error::NotPositive(-excess));
        }
        Ok(())
    }

    pub(crate) fn to_vector(self) -> [f64; 6] {
        [self.rho00, self.rho11, self.rho22, self.rho33, self.rho03.re, self.rho03.im]
    }

    fn from_parts(x: &[f64], rho12: C64) -> Self {
        Self {
            rho00: x[P0],
            rho11: x[P1],
            rho22: x[P2],
            rho33: x[P3],
            rho12,
            rho03: C64::new(x[RE03], x[IM03]),
        }
    }

    /// 4×4 density matrix in the dressed basis; uncoupled coherences are zero.
    pub fn to_matrix(&self) -> Array2<C64> {
        let r = |x: f64| C64::new(x, 0.0);
        let mut m = Array2::from_diag(&array![r(self.rho00), r(self.rho11), r(self.rho22), r(self.rho33)]);
        m[[1, 2]] = self.rho12;
        m[[2, 1]] = self.rho12.conj();
        m[[0, 3]] = self.rho03;
        m[[3, 0]] = self.rho03.conj();
        m
    }

    /// Reads the tracked elements of a 4×4 dressed-basis matrix.
    pub fn from_matrix(m: &Array2<C64>) -> Result<Self> {
        if m.dim() != (4, 4) {
            return Err(Error::DimensionMismatch { expected: 4, found: m.nrows() });
        }
        Self::new(m[[0, 0]].re, m[[1, 1]].re, m[[2, 2]].re, m[[3, 3]].re, m[[1, 2]], m[[0, 3]])
    }

    pub fn embed(&self, spec: HilbertSpec) -> Result<DensityMatrix> {
        let basis: Vec<Array1<C64>> = (0..4).map(|k| dressed_state(spec, k)).collect();
        let m = self.to_matrix();
        let d = spec.dim();
        let mut rho = Array2::<C64>::zeros((d, d));
        for j in 0..4 {
            for k in 0..4 {
                if m[[j, k]] == ZERO {
                    continue;
                }
                for (p, bp) in basis[j].iter().enumerate().filter(|(_, b)| **b != ZERO) {
                    for (q, bq) in basis[k].iter().enumerate().filter(|(_, b)| **b != ZERO) {
                        rho[[p, q]] += m[[j, k]] * bp * bq.conj();
                    }
                }
            }
        }
        DensityMatrix::new(rho)
    }

    /// Projects a full-space state onto the dressed span. Fails if more than
    /// `tol` of the population lies outside it.
    pub fn project(rho: &DensityMatrix, tol: f64) -> Result<Self> {
        let d = rho.dim();
        let n = d / 2 - 1;
        let spec = HilbertSpec::new(n)?;
        let basis: Vec<Array1<C64>> = (0..4).map(|k| dressed_state(spec, k)).collect();
        let el = |j: usize, k: usize| -> C64 {
            let v = rho.as_array().dot(&basis[k]);
            basis[j].iter().zip(v.iter()).map(|(b, x)| b.conj() * x).sum()
        };
        let s = Self {
            rho00: el(0, 0).re,
            rho11: el(1, 1).re,
            rho22: el(2, 2).re,
            rho33: el(3, 3).re,
            rho12: el(1, 2),
            rho03: el(0, 3),
        };
        let inside = s.rho00 + s.rho11 + s.rho22 + s.rho33;
        if 1.0 - inside > tol {
            return Err(Error::TraceNotUnit(inside));
        }
        let norm = inside;
        let s = Self {
            rho00: s.rho00 / norm,
            rho11: s.rho11 / norm,
            rho22: s.rho22 / norm,
            rho33: s.rho33 / norm,
            rho12: s.rho12 / norm,
            rho03: s.rho03 / norm,
        };
        s.validate()?;
        Ok(s)
    }

    /// ⟨a†a⟩ = ½(ρ₁₁+ρ₂₂) + Re ρ₁₂ + (3/2)ρ₃₃.
    pub fn photon_number(&self) -> f64 {
        LinearObservable::PHOTON_NUMBER.eval(self)
    }

    /// ⟨σ₊σ₋⟩ = ½(ρ₁₁+ρ₂₂+ρ₃₃) − Re ρ₁₂.
    pub fn atomic_excitation(&self) -> f64 {
        LinearObservable::ATOMIC_EXCITATION.eval(self)
    }
}

/// Dressed state ξₖ (k = 0…3) as a Fock⊗qubit vector.
pub fn dressed_state(spec: HilbertSpec, k: usize) -> Array1<C64> {
    let h = C64::new(1.0 / SQRT_2, 0.0);
    match k {
        0 => spec.basis(Atom::Lower, 0),
        1 => (spec.basis(Atom::Lower, 1) - spec.basis(Atom::Upper, 0)) * h,
        2 => (spec.basis(Atom::Lower, 1) + spec.basis(Atom::Upper, 0)) * h,
        3 => (spec.basis(Atom::Lower, 2) - spec.basis(Atom::Upper, 1)) * h,
        _ => panic!("dressed state index {k} out of range"),
    }
}

/// An observable linear in the tracked elements: weights on
/// (ρ₀₀, ρ₁₁, ρ₂₂, ρ₃₃, Re ρ₀₃, Im ρ₀₃) plus a weight on Re ρ₁₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearObservable {
    pub weights: [f64; 6],
    pub beat: f64,
}

impl LinearObservable {
    pub const PHOTON_NUMBER: Self = Self { weights: [0.0, 0.5, 0.5, 1.5, 0.0, 0.0], beat: 1.0 };
    pub const ATOMIC_EXCITATION: Self = Self { weights: [0.0, 0.5, 0.5, 0.5, 0.0, 0.0], beat: -1.0 };
    /// Photon parity d₀ − d₁ + d₂ = ρ₀₀ − 2 Re ρ₁₂.
    pub const PARITY: Self = Self { weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], beat: -2.0 };

    pub fn eval(&self, s: &FourLevelState) -> f64 {
        let x = s.to_vector();
        self.weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + self.beat * s.rho12.re
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { weights: self.weights.map(|w| w * k), beat: self.beat * k }
    }
}

/// Lowering operators a and σ₋ restricted to the dressed span, as 4×4
/// matrices in the basis ξ₀…ξ₃.
pub fn jump_operators_4l() -> (Array2<C64>, Array2<C64>) {
    let r = |x: f64| C64::new(x, 0.0);
    let h = 1.0 / SQRT_2;
    let mut a = Array2::zeros((4, 4));
    a[[0, 1]] = r(h);
    a[[0, 2]] = r(h);
    a[[1, 3]] = r(LAMBDA_PLUS);
    a[[2, 3]] = r(LAMBDA_MINUS);
    let mut sm = Array2::zeros((4, 4));
    sm[[0, 1]] = r(-h);
    sm[[0, 2]] = r(h);
    sm[[1, 3]] = r(-0.5);
    sm[[2, 3]] = r(-0.5);
    (a, sm)
}

/// Closed-form stationary state of the effective model.
pub fn steady_state_4l(eff: &EffectiveParams) -> FourLevelState {
    let p3 = eff.p3;
    if p3 == 0.0 {
        return FourLevelState::ground();
    }
    let rho11 = eff.rate_31 / eff.rate_lower * p3;
    let rho22 = eff.rate_32 / eff.rate_lower * p3;
    FourLevelState {
        rho00: 1.0 - p3 - rho11 - rho22,
        rho11,
        rho22,
        rho33: p3,
        rho12: ZERO,
        rho03: C64::new(-eff.two_photon_detuning, eff.coherence_rate) * (p3 / eff.omega),
    }
}

/// Generator of the six coupled real variables.
pub fn generator(eff: &EffectiveParams) -> Array2<f64> {
    let (om, g3, gl, det) = (eff.omega, eff.coherence_rate, eff.rate_lower, eff.two_photon_detuning);
    let mut m = Array2::zeros((6, 6));
    m[[P3, P3]] = -2.0 * g3;
    m[[P3, IM03]] = 2.0 * om;
    m[[IM03, IM03]] = -g3;
    m[[IM03, P3]] = -om;
    m[[IM03, P0]] = om;
    m[[IM03, RE03]] = det;
    m[[RE03, RE03]] = -g3;
    m[[RE03, IM03]] = -det;
    m[[P1, P3]] = eff.rate_31;
    m[[P1, P1]] = -gl;
    m[[P2, P3]] = eff.rate_32;
    m[[P2, P2]] = -gl;
    m[[P0, P1]] = gl;
    m[[P0, P2]] = gl;
    m[[P0, IM03]] = -2.0 * om;
    m
}

fn beat_exponent(eff: &EffectiveParams) -> C64 {
    C64::new(-eff.rate_lower, eff.nu)
}

/// Integrates the effective master equation numerically. The beat
/// coherence is carried in a frame co-rotating at ν and rotated back on
/// output. States are returned at exactly the requested times.
pub fn evolve_effective(init: &FourLevelState, eff: &EffectiveParams, times: &[f64]) -> Result<Vec<FourLevelState>> {
    init.validate()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonIncreasingTimes);
    }
    let m = generator(eff);
    let gl = eff.rate_lower;
    // y = [x (6), Re ρ̃₁₂, Im ρ̃₁₂]
    let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        for i in 0..6 {
            dy[i] = (0..6).map(|j| m[[i, j]] * y[j]).sum();
        }
        dy[6] = -gl * y[6];
        dy[7] = -gl * y[7];
    };
    let ck = CashKarp::new(1e-14, 1e-13);
    let mut ws = Workspace::new(8);
    let x0 = init.to_vector();
    let mut y = [x0[0], x0[1], x0[2], x0[3], x0[4], x0[5], init.rho12.re, init.rho12.im];
    let mut h = f64::NAN;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        ck.integrate(&mut rhs, t, target, &mut y, &mut h, &mut ws)?;
        t = target;
        let rho12 = C64::new(y[6], y[7]) * C64::from_polar(1.0, eff.nu * t);
        out.push(FourLevelState::from_parts(&y[..6], rho12));
    }
    Ok(out)
}

/// Transient initial data with the scalars used to characterise the
/// conditioned inversion: c₂ = ρ₃₃(0) − ρ₀₀(0) and c₁ = −p₃(1 + 2c₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientInit {
    pub state: FourLevelState,
    pub c1: f64,
    pub c2: f64,
}

impl TransientInit {
    pub fn new(state: FourLevelState, eff: &EffectiveParams) -> Result<Self> {
        state.validate()?;
        let c2 = state.rho33 - state.rho00;
        Ok(Self { state, c1: -eff.p3 * (1.0 + 2.0 * c2), c2 })
    }
}

/// How [`TransientSolver`] propagates the coupled block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Diagonalized generator, exact up to rounding.
    Modal,
    /// Scaling-and-squaring Taylor exponential, used when the eigenvector
    /// basis is ill-conditioned.
    Series,
}

/// Exact propagator of the effective model.
#[derive(Debug, Clone)]
pub struct TransientSolver {
    eff: EffectiveParams,
    generator: Array2<f64>,
    eigen: Option<(Array1<C64>, Array2<C64>, Array2<C64>)>,
}

impl TransientSolver {
    pub fn new(eff: &EffectiveParams) -> Result<Self> {
        let generator = generator(eff);
        let (values, vectors) = generator.eig()?;
        let inverse = vectors.inv()?;
        let cond = vectors.opnorm_one()? * inverse.opnorm_one()?;
        let eigen = if cond.is_finite() && cond < MODAL_COND_LIMIT {
            Some((values, vectors, inverse))
        } else {
            warn!("effective generator is nearly defective (condition {cond:e}); using series exponential");
            None
        };
        Ok(Self { eff: *eff, generator, eigen })
    }

    pub fn propagation(&self) -> Propagation {
        if self.eigen.is_some() {
            Propagation::Modal
        } else {
            Propagation::Series
        }
    }

    /// Exponents of all modes: the six generator eigenvalues and −Γ ± iν.
    pub fn exponents(&self) -> Vec<C64> {
        let mut out: Vec<C64> = match &self.eigen {
            Some((values, _, _)) => values.to_vec(),
            None => self.generator.eig().map(|(v, _)| v.to_vec()).unwrap_or_default(),
        };
        let b = beat_exponent(&self.eff);
        out.push(b);
        out.push(b.conj());
        out
    }

    pub fn state_at(&self, init: &FourLevelState, tau: f64) -> FourLevelState {
        let x0 = init.to_vector();
        let x: Vec<f64> = match &self.eigen {
            Some((values, vectors, inverse)) => {
                let c: Vec<C64> = (0..6).map(|k| (0..6).map(|j| inverse[[k, j]] * x0[j]).sum()).collect();
                (0..6)
                    .map(|i| (0..6).map(|k| vectors[[i, k]] * c[k] * (values[k] * tau).exp()).sum::<C64>().re)
                    .collect()
            }
            None => {
                let e = expm(&(&self.generator * tau));
                (0..6).map(|i| (0..6).map(|j| e[[i, j]] * x0[j]).sum()).collect()
            }
        };
        let rho12 = init.rho12 * (beat_exponent(&self.eff) * tau).exp();
        FourLevelState::from_parts(&x, rho12)
    }

    /// Expansion of a linear observable along the trajectory from `init` as
    /// a sum of exponentials. Needs the modal form.
    pub fn modes(&self, init: &FourLevelState, obs: &LinearObservable) -> Result<ExponentialSum> {
        let (values, vectors, inverse) = self
            .eigen
            .as_ref()
            .ok_or_else(|| Error::Linalg("effective generator is defective; no modal expansion".into()))?;
        let x0 = init.to_vector();
        let mut terms = Vec::with_capacity(8);
        for k in 0..6 {
            let c: C64 = (0..6).map(|j| inverse[[k, j]] * x0[j]).sum();
            let w: C64 = (0..6).map(|i| vectors[[i, k]] * obs.weights[i]).sum();
            terms.push((w * c, values[k]));
        }
        let b = beat_exponent(&self.eff);
        terms.push((init.rho12 * (0.5 * obs.beat), b));
        terms.push((init.rho12.conj() * (0.5 * obs.beat), b.conj()));
        Ok(ExponentialSum::new(terms))
    }
}

/// State at `tau` by exact exponentiation of the effective generator.
pub fn analytic_transient(init: &TransientInit, eff: &EffectiveParams, tau: f64) -> Result<FourLevelState> {
    Ok(TransientSolver::new(eff)?.state_at(&init.state, tau))
}

/// Real matrix exponential by scaling and squaring with a Taylor series.
fn expm(m: &Array2<f64>) -> Array2<f64> {
    let norm = m.iter().map(|x| x.abs()).fold(0.0, f64::max) * m.nrows() as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(squarings);
    let n = m.nrows();
    let mut term = Array2::<f64>::eye(n);
    let mut sum = Array2::<f64>::eye(n);
    for k in 1..=20 {
        term = term.dot(&a) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

/// Forward over side photon flux, 2κ⟨a†a⟩ / (γ⟨σ₊σ₋⟩).
pub fn flux_ratio(state: &FourLevelState, gamma: f64, kappa: f64) -> Result<f64> {
    let atomic = state.atomic_excitation();
    if atomic <= STATE_TOL || gamma <= 0.0 {
        return Err(Error::UndefinedFluxRatio(atomic));
    }
    Ok(2.0 * kappa * state.photon_number() / (gamma * atomic))
}

/// Fock populations d₀…d₂ of the cavity and the two-photon coherence d₃.
pub fn cavity_coefficients(state: &FourLevelState) -> FockCoefficients {
    let s = state.rho11 + state.rho22;
    let c = state.rho12.re;
    FockCoefficients {
        d0: state.rho00 + 0.5 * s - c,
        d1: 0.5 * s + c + 0.5 * state.rho33,
        d2: 0.5 * state.rho33,
        d3: state.rho03.im / SQRT_2,
    }
}
