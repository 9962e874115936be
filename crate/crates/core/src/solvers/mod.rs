//! Hologram solvers: constrained SGD, multiplane Gerchberg-Saxton and
//! double-phase encoding.

mod adam;
mod constraint;
mod dp;
mod gs;
mod sgd;

use std::f64::consts::PI;
use std::time::Duration;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, Adam, AdamState};
pub use constraint::{
    apply_grating, checker_sign, interleave, phase_constrain, phase_constrain_adjoint, remove_grating, wrap_phase,
};
pub use dp::{double_phase_decompose, dp_encode, DoublePhase};
pub use gs::{amplitude_projection, solve_gs};
pub use sgd::{solve_sgd_dp, solve_sgd_dp_from, Objective};

use crate::error::{config_err, Result};
use crate::field::OpticalConfig;
use crate::loss::{LossDomain, LossWeights};
use crate::propagation::{PropagationOptions, Propagator, Regime};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Adam on the phase with the checkerboard constraint.
    #[default]
    SgdDp,
    /// Multiplane Gerchberg-Saxton.
    Gs,
    /// Double-phase encoding of the summed back-propagated targets.
    Dp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::SgdDp, Algorithm::Gs, Algorithm::Dp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SgdDp => "sgd_dp",
            Algorithm::Gs => "gs",
            Algorithm::Dp => "dp",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseInit {
    /// Uniform in [-π, π), drawn from the configured seed.
    #[default]
    Random,
    Zeros,
    /// Caller supplies the starting hologram.
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Hop distance of the round trip (near) or base distance (far), meters.
    pub hop_distance: f64,
    pub regime: Regime,
    pub loss: LossWeights,
    pub loss_domain: LossDomain,
    pub init: PhaseInit,
    /// Starting value of the checkerboard offset, radians.
    pub initial_offset: f64,
    pub seed: u64,
    /// `None` picks the regime default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_limit: Option<bool>,
    pub padding: bool,
    /// One Adam step per plane instead of one per iteration.
    pub step_per_plane: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SgdDp,
            iterations: 200,
            learning_rate: 0.001,
            hop_distance: 0.30,
            regime: Regime::Near,
            loss: LossWeights::default(),
            loss_domain: LossDomain::Intensity,
            init: PhaseInit::Random,
            initial_offset: PI / 2.0,
            seed: 0,
            band_limit: None,
            padding: false,
            step_per_plane: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(config_err("iterations must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(config_err("learning_rate must be > 0"));
        }
        if !(self.hop_distance.is_finite() && self.hop_distance > 0.0) {
            return Err(config_err("hop_distance must be > 0"));
        }
        if !self.initial_offset.is_finite() {
            return Err(config_err("initial_offset must be finite"));
        }
        self.loss.validate()
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            band_limit: self.band_limit.unwrap_or(self.regime.default_band_limit()),
            padding: self.padding,
        }
    }

    pub fn propagator<T: Real>(&self, optics: &OpticalConfig) -> Propagator<T> {
        Propagator::new(*optics, self.propagation_options())
    }
}

/// Optimization variable: unwrapped phase plus the checkerboard offset.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramPhase<T: Real> {
    pub phase: Array2<T>,
    pub offset: T,
}

impl<T: Real> HologramPhase<T> {
    pub fn new(phase: Array2<T>, offset: T) -> Self {
        Self { phase, offset }
    }

    pub fn initial(dims: (usize, usize), config: &SolverConfig) -> Result<Self> {
        let offset = T::lit(config.initial_offset);
        match config.init {
            PhaseInit::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let phase = Array2::from_shape_simple_fn(dims, || T::lit(rng.gen_range(-PI..PI)));
                Ok(Self { phase, offset })
            }
            PhaseInit::Zeros => Ok(Self {
                phase: Array2::zeros(dims),
                offset,
            }),
            PhaseInit::Provided => Err(config_err("phase init 'provided' needs an initial hologram")),
        }
    }

    /// Phase actually displayed: constrained in the near regime, raw in the far one.
    pub fn effective_phase(&self, regime: Regime) -> Array2<T> {
        match regime {
            Regime::Near => phase_constrain(&self.phase, self.offset),
            Regime::Far => self.phase.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.phase.iter().all(|v| v.is_finite())
    }
}

/// Per-iteration losses and the final hologram of one solver run.
#[derive(Debug, Clone)]
pub struct SolverTrace<T: Real> {
    pub algorithm: Algorithm,
    pub losses: Vec<f64>,
    pub hologram: HologramPhase<T>,
    pub wall_time: Duration,
}

impl<T: Real> SolverTrace<T> {
    pub fn initial_loss(&self) -> f64 {
        self.losses.first().copied().unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Dispatches on `config.algorithm`.
pub fn solve<T: Real>(
    targets: &crate::targeting::PlaneTargetSet<T>,
    optics: &OpticalConfig,
    config: &SolverConfig,
) -> Result<SolverTrace<T>> {
    match config.algorithm {
        Algorithm::SgdDp => solve_sgd_dp(targets, optics, config),
        Algorithm::Gs => solve_gs(targets, optics, config, None),
        Algorithm::Dp => {
            let start = std::time::Instant::now();
            let encoded = dp_encode(targets, optics, config)?;
            let prop = config.propagator::<T>(optics);
            let obj = Objective::new(targets, &prop, config)?;
            let loss = obj.loss(&encoded.hologram).to_f64();
            Ok(SolverTrace {
                algorithm: Algorithm::Dp,
                losses: vec![loss],
                hologram: encoded.hologram,
                wall_time: start.elapsed(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            hop_distance: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn regime_band_limit_defaults() {
        let near = SolverConfig::default();
        assert!(!near.propagation_options().band_limit);
        let far = SolverConfig {
            regime: Regime::Far,
            ..Default::default()
        };
        assert!(far.propagation_options().band_limit);
        let forced = SolverConfig {
            band_limit: Some(true),
            ..Default::default()
        };
        assert!(forced.propagation_options().band_limit);
    }

    #[test]
    fn seeded_random_init_is_reproducible() {
        let cfg = SolverConfig {
            seed: 42,
            ..Default::default()
        };
        let a = HologramPhase::<f64>::initial((8, 8), &cfg).unwrap();
        let b = HologramPhase::<f64>::initial((8, 8), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.phase.iter().all(|&p| (-PI..PI).contains(&p)));
        assert!((a.offset - PI / 2.0).abs() < 1e-15);
        let c = HologramPhase::<f64>::initial(
            (8, 8),
            &SolverConfig {
                seed: 43,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn provided_init_requires_hologram() {
        let cfg = SolverConfig {
            init: PhaseInit::Provided,
            ..Default::default()
        };
        assert!(HologramPhase::<f64>::initial((4, 4), &cfg).is_err());
    }
}
