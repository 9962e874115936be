//! Gradient descent on the hologram phase through the forward model.
//!
//! Chain per iteration: phase constraint, unit-amplitude field, forward
//! model to every plane, masked loss. The backward pass runs the same chain
//! in reverse with exact adjoints.

use std::time::Instant;

use ndarray::{Array2, Zip};
use num_complex::Complex;
use rayon::prelude::*;

use super::{phase_constrain_adjoint, Adam, AdamState, Algorithm, HologramPhase, PhaseInit, SolverConfig, SolverTrace};
use crate::error::{check_dims, config_err, Error, Result};
use crate::field::{ComplexField, OpticalConfig};
use crate::loss::{plane_loss_and_cotangent, LossDomain, LossWeights};
use crate::propagation::{ForwardModel, Propagator, Regime};
use crate::scalar::Real;
use crate::targeting::PlaneTargetSet;

/// The summed multiplane loss as a function of a [`HologramPhase`].
pub struct Objective<'a, T: Real> {
    targets: &'a PlaneTargetSet<T>,
    model: ForwardModel<'a, T>,
    weights: LossWeights,
    domain: LossDomain,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(targets: &'a PlaneTargetSet<T>, propagator: &'a Propagator<T>, config: &SolverConfig) -> Result<Self> {
        if targets.is_empty() {
            return Err(config_err("no target planes"));
        }
        check_dims(propagator.config().dims(), targets.dims())?;
        Ok(Self {
            targets,
            model: ForwardModel::new(propagator, config.regime, config.hop_distance),
            weights: config.loss,
            domain: config.loss_domain,
        })
    }

    pub fn regime(&self) -> Regime {
        self.model.regime
    }

    pub fn model(&self) -> &ForwardModel<'a, T> {
        &self.model
    }

    fn optics(&self) -> OpticalConfig {
        *self.model.propagator.config()
    }

    pub fn hologram_field(&self, hologram: &HologramPhase<T>) -> ComplexField<T> {
        let phase = hologram.effective_phase(self.regime());
        ComplexField::from_parts(phase.mapv(|p| Complex::from_polar(T::one(), p)), self.optics())
    }

    /// Reconstructed field at every plane.
    pub fn plane_fields(&self, hologram: &HologramPhase<T>) -> Vec<ComplexField<T>> {
        let field = self.hologram_field(hologram);
        self.targets
            .planes
            .par_iter()
            .map(|p| self.model.forward(&field, p.offset))
            .collect()
    }

    pub fn plane_losses(&self, hologram: &HologramPhase<T>) -> Vec<T> {
        self.plane_fields(hologram)
            .iter()
            .zip(&self.targets.planes)
            .map(|(u, p)| plane_loss_and_cotangent(u.values(), &p.target, &p.mask, &self.weights, self.domain).0)
            .collect()
    }

    pub fn loss(&self, hologram: &HologramPhase<T>) -> T {
        self.plane_losses(hologram).into_iter().fold(T::zero(), |a, b| a + b)
    }

    /// Loss over all planes and its gradient w.r.t. `(phase, offset)`.
    pub fn loss_and_gradient(&self, hologram: &HologramPhase<T>) -> (T, Array2<T>, T) {
        let planes: Vec<usize> = (0..self.targets.len()).collect();
        self.loss_and_gradient_over(hologram, &planes)
    }

    /// Same as [`Self::loss_and_gradient`] restricted to the listed planes.
    pub fn loss_and_gradient_over(&self, hologram: &HologramPhase<T>, planes: &[usize]) -> (T, Array2<T>, T) {
        let field = self.hologram_field(hologram);
        let per_plane: Vec<(T, ComplexField<T>)> = planes
            .par_iter()
            .map(|&k| {
                let p = &self.targets.planes[k];
                let u = self.model.forward(&field, p.offset);
                let (loss, g) = plane_loss_and_cotangent(u.values(), &p.target, &p.mask, &self.weights, self.domain);
                let back = self
                    .model
                    .adjoint(&ComplexField::from_parts(g, self.optics()), p.offset);
                (loss, back)
            })
            .collect();

        // fixed summation order keeps runs bit-identical
        let zero = Complex::new(T::zero(), T::zero());
        let mut loss = T::zero();
        let mut g_field = Array2::from_elem(field.dims(), zero);
        for (l, back) in &per_plane {
            loss = loss + *l;
            g_field.zip_mut_with(back.values(), |a, &b| *a = *a + b);
        }

        // O = exp(iφ) => dL/dφ = 2 Im(conj(O) g)
        let two = T::lit(2.0);
        let g_phase = Zip::from(field.values())
            .and(&g_field)
            .map_collect(|o, g| two * (o.conj() * g).im);

        match self.regime() {
            Regime::Near => {
                let (gp, go) = phase_constrain_adjoint(&g_phase);
                (loss, gp, go)
            }
            Regime::Far => (loss, g_phase, T::zero()),
        }
    }
}

/// Runs the constrained gradient descent from the configured initial phase.
pub fn solve_sgd_dp<T: Real>(
    targets: &PlaneTargetSet<T>,
    optics: &OpticalConfig,
    config: &SolverConfig,
) -> Result<SolverTrace<T>> {
    solve_sgd_dp_from(targets, optics, config, None)
}

/// Like [`solve_sgd_dp`], starting from `initial` when given.
pub fn solve_sgd_dp_from<T: Real>(
    targets: &PlaneTargetSet<T>,
    optics: &OpticalConfig,
    config: &SolverConfig,
    initial: Option<HologramPhase<T>>,
) -> Result<SolverTrace<T>> {
    config.validate()?;
    let start = Instant::now();
    let propagator = config.propagator::<T>(optics);
    let objective = Objective::new(targets, &propagator, config)?;

    let mut hologram = match (initial, config.init) {
        (Some(h), _) => {
            check_dims(targets.dims(), h.phase.dim())?;
            h
        }
        (None, PhaseInit::Provided) => return Err(config_err("phase init 'provided' needs an initial hologram")),
        (None, _) => HologramPhase::initial(targets.dims(), config)?,
    };

    let adam = Adam::new(config.learning_rate);
    let mut phase_state = AdamState::new(hologram.phase.len());
    let mut offset_state = AdamState::new(1);
    let mut losses = Vec::with_capacity(config.iterations);
    let plane_groups: Vec<Vec<usize>> = if config.step_per_plane {
        (0..targets.len()).map(|k| vec![k]).collect()
    } else {
        vec![(0..targets.len()).collect()]
    };

    for iteration in 0..config.iterations {
        let mut total = 0.0;
        for group in &plane_groups {
            let (loss, g_phase, g_offset) = objective.loss_and_gradient_over(&hologram, group);
            let loss = loss.to_f64();
            if !loss.is_finite() {
                return Err(Error::Divergence { iteration, loss });
            }
            total += loss;

            let params = hologram.phase.as_slice_mut().expect("standard layout");
            adam.step(params, g_phase.as_slice().expect("standard layout"), &mut phase_state);
            if objective.regime() == Regime::Near {
                let mut off = [hologram.offset];
                adam.step(&mut off, &[g_offset], &mut offset_state);
                hologram.offset = off[0];
            }
        }
        losses.push(total);
    }

    if !hologram.is_finite() {
        return Err(Error::Divergence {
            iteration: config.iterations,
            loss: f64::NAN,
        });
    }

    Ok(SolverTrace {
        algorithm: Algorithm::SgdDp,
        losses,
        hologram,
        wall_time: start.elapsed(),
    })
}
