//! States prepared by detecting an emission: ρ → JρJ†/tr(JρJ†).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::four_level::{
    jump_operators_4l, steady_state_4l, EffectiveParams, FourLevelState, LinearObservable, TransientInit,
    TransientSolver,
};
use crate::quantum::{adjoint, build_operators, DensityMatrix, HilbertSpec, C64};
use crate::series::ExponentialSum;

/// Weights below this are treated as an annihilated state.
const MIN_WEIGHT: f64 = 1e-14;

/// Where a photon was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionChannel {
    /// Transmission through the cavity mirror, jump operator a at rate 2κ.
    Forward,
    /// Spontaneous emission out the side, σ₋ at rate γ.
    Side,
    /// An ideal two-photon absorber on the cavity output, a². Its rate has no
    /// assigned value and only scales the weight.
    TwoPhoton,
}

impl EmissionChannel {
    /// Rate multiplying tr(JρJ†); the two-photon detector uses `two_photon_rate`.
    pub fn prefactor(&self, kappa: f64, gamma: f64, two_photon_rate: f64) -> f64 {
        match self {
            Self::Forward => 2.0 * kappa,
            Self::Side => gamma,
            Self::TwoPhoton => two_photon_rate,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Side => "side",
            Self::TwoPhoton => "two_photon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedState<S> {
    pub state: S,
    /// prefactor · tr(JρJ†), the relative emission probability.
    pub weight: f64,
}

/// A state representation the jump maps can act on.
pub trait Conditionable: Sized {
    fn apply_jump(&self, channel: EmissionChannel, prefactor: f64) -> Result<ConditionedState<Self>>;
}

fn sandwich(j: &Array2<C64>, rho: &Array2<C64>) -> Array2<C64> {
    j.dot(rho).dot(&adjoint(&j.view()))
}

fn normalized(m: Array2<C64>, prefactor: f64) -> Result<(Array2<C64>, f64)> {
    let tr = m.diag().iter().map(|z| z.re).sum::<f64>();
    if !(tr > MIN_WEIGHT) {
        return Err(Error::ZeroWeight(tr));
    }
    Ok((m / C64::new(tr, 0.0), prefactor * tr))
}

impl Conditionable for FourLevelState {
    fn apply_jump(&self, channel: EmissionChannel, prefactor: f64) -> Result<ConditionedState<Self>> {
        let (a, sm) = jump_operators_4l();
        let j = match channel {
            EmissionChannel::Forward => a,
            EmissionChannel::Side => sm,
            EmissionChannel::TwoPhoton => a.dot(&a),
        };
        let (m, weight) = normalized(sandwich(&j, &self.to_matrix()), prefactor)?;
        Ok(ConditionedState { state: FourLevelState::from_matrix(&m)?, weight })
    }
}

impl Conditionable for DensityMatrix {
    fn apply_jump(&self, channel: EmissionChannel, prefactor: f64) -> Result<ConditionedState<Self>> {
        let spec = HilbertSpec::new(self.dim() / 2 - 1)?;
        let ops = build_operators(spec)?;
        let a = ops.a.as_array();
        let j = match channel {
            EmissionChannel::Forward => a.clone(),
            EmissionChannel::Side => ops.sigma_minus.as_array().clone(),
            EmissionChannel::TwoPhoton => a.dot(a),
        };
        let (m, weight) = normalized(sandwich(&j, self.as_array()), prefactor)?;
        let herm = (&m + &adjoint(&m.view())) * C64::new(0.5, 0.0);
        Ok(ConditionedState { state: DensityMatrix::new(herm)?, weight })
    }
}

pub fn apply_jump<S: Conditionable>(channel: EmissionChannel, state: &S, prefactor: f64) -> Result<ConditionedState<S>> {
    state.apply_jump(channel, prefactor)
}

/// Initial data for the transient that follows a detection.
pub fn beat_initial_conditions(cond: &ConditionedState<FourLevelState>, eff: &EffectiveParams) -> Result<TransientInit> {
    TransientInit::new(cond.state, eff)
}

/// The state prepared by a detection on `channel` from the effective steady
/// state, with weight per unit two-photon rate for that channel.
pub fn steady_emission(eff: &EffectiveParams, channel: EmissionChannel) -> Result<ConditionedState<FourLevelState>> {
    let prefactor = channel.prefactor(eff.kappa, eff.gamma, 1.0);
    apply_jump(channel, &steady_state_4l(eff), prefactor)
}

/// ⟨a†a⟩ after a forward detection from steady state, over ⟨a†a⟩_ss: the
/// intensity correlation predicted by the effective model.
pub fn effective_g2(eff: &EffectiveParams) -> Result<ExponentialSum> {
    let init = steady_emission(eff, EmissionChannel::Forward)?.state;
    let n_ss = eff.steady_photon_number();
    if n_ss < 1e-12 {
        return Err(Error::EmptyCavity(n_ss));
    }
    Ok(TransientSolver::new(eff)?.modes(&init, &LinearObservable::PHOTON_NUMBER)?.scaled(1.0 / n_ss))
}

/// W(0, τ) after a detection on `channel` from steady state.
pub fn origin_transient(eff: &EffectiveParams, channel: EmissionChannel) -> Result<ExponentialSum> {
    let init = steady_emission(eff, channel)?.state;
    Ok(TransientSolver::new(eff)?.modes(&init, &LinearObservable::PARITY)?.scaled(std::f64::consts::FRAC_2_PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::four_level::{eps_for_p3, LAMBDA_MINUS, LAMBDA_PLUS};
    use crate::quantum::ZERO;
    use std::f64::consts::SQRT_2;

    fn eff(p3: f64) -> EffectiveParams {
        let eps = eps_for_p3(500.0, 0.5, 1.0, p3).unwrap();
        EffectiveParams::new(500.0, 0.5, 1.0, eps, -500.0 / SQRT_2 - SQRT_2 * eps * eps / 500.0).unwrap()
    }

    #[test]
    fn forward_emission_state() {
        for p3 in [0.05, 0.13, 0.2475] {
            let c = steady_emission(&eff(p3), EmissionChannel::Forward).unwrap();
            let s = c.state;
            assert!((s.rho00 - 0.4).abs() < 1e-12);
            assert!((s.rho11 - 0.4 * LAMBDA_PLUS.powi(2)).abs() < 1e-12);
            assert!((s.rho22 - 0.4 * LAMBDA_MINUS.powi(2)).abs() < 1e-12);
            assert!((s.rho12 - C64::new(0.1, 0.0)).norm() < 1e-12);
            assert_eq!(s.rho33, 0.0);
            assert!((c.weight - 2.5 * p3).abs() < 1e-12);
        }
    }

    #[test]
    fn side_and_two_photon_states() {
        let e = eff(0.2);
        let s = steady_emission(&e, EmissionChannel::Side).unwrap();
        assert!((s.state.rho00 - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.state.rho12.re - 1.0 / 6.0).abs() < 1e-12);
        assert!((s.weight - 1.5 * 0.2).abs() < 1e-12);
        let t = steady_emission(&e, EmissionChannel::TwoPhoton).unwrap();
        assert_eq!(t.state, FourLevelState::ground());
    }

    #[test]
    fn prefactor_only_scales_weight() {
        let ss = steady_state_4l(&eff(0.2));
        let a = apply_jump(EmissionChannel::TwoPhoton, &ss, 1.0).unwrap();
        let b = apply_jump(EmissionChannel::TwoPhoton, &ss, 37.5).unwrap();
        assert_eq!(a.state, b.state);
        assert!((b.weight / a.weight - 37.5).abs() < 1e-12);
    }

    #[test]
    fn ground_state_cannot_emit() {
        let g = FourLevelState::ground();
        assert!(matches!(apply_jump(EmissionChannel::Forward, &g, 1.0), Err(Error::ZeroWeight(_))));
    }

    #[test]
    fn full_space_jump_matches_dressed_jump() {
        let e = eff(0.2);
        let ss = steady_state_4l(&e);
        let spec = HilbertSpec::new(4).unwrap();
        let full = ss.embed(spec).unwrap();
        for ch in [EmissionChannel::Forward, EmissionChannel::Side, EmissionChannel::TwoPhoton] {
            let reduced = apply_jump(ch, &ss, 1.0).unwrap();
            let big = apply_jump(ch, &full, 1.0).unwrap();
            let projected = FourLevelState::project(&big.state, 1e-12).unwrap();
            assert!((projected.rho00 - reduced.state.rho00).abs() < 1e-12);
            assert!((projected.rho11 - reduced.state.rho11).abs() < 1e-12);
            assert!((projected.rho12 - reduced.state.rho12).norm() < 1e-12);
            assert!((big.weight - reduced.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_conditions_of_the_beat() {
        let e = eff(0.2475);
        let f = beat_initial_conditions(&steady_emission(&e, EmissionChannel::Forward).unwrap(), &e).unwrap();
        assert!((f.c2 + 0.4).abs() < 1e-12);
        assert!((f.c1 + 0.2475 * (1.0 - 0.8)).abs() < 1e-12);
        let s = beat_initial_conditions(&steady_emission(&e, EmissionChannel::Side).unwrap(), &e).unwrap();
        assert!((s.c2 + 2.0 / 3.0).abs() < 1e-12);
        let t = beat_initial_conditions(&steady_emission(&e, EmissionChannel::TwoPhoton).unwrap(), &e).unwrap();
        assert!((t.c2 + 1.0).abs() < 1e-12);
        assert_eq!(t.state.rho12, ZERO);
    }

    #[test]
    fn g2_decays_to_one() {
        let g2 = effective_g2(&eff(0.2475)).unwrap();
        assert!((g2.eval(30.0) - 1.0).abs() < 1e-10);
        // ⟨a†a⟩ = ½(ρ₁₁+ρ₂₂) + Re ρ₁₂ = 0.3 + 0.1 right after the jump.
        assert!((g2.eval(0.0) - 0.4 / 0.61875).abs() < 1e-12);
    }
}
