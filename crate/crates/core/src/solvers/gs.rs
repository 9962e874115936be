//! Multiplane Gerchberg-Saxton by alternating amplitude projections.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;

use super::{Algorithm, HologramPhase, Objective, PhaseInit, SolverConfig, SolverTrace};
use crate::error::{check_dims, config_err, Result};
use crate::field::{phase_of, ComplexField, OpticalConfig};
use crate::loss::LossDomain;
use crate::scalar::Real;
use crate::targeting::PlaneTargetSet;

/// Replaces the magnitude of every pixel with `amplitude`, keeping its phase.
/// Zero pixels take phase 0.
pub fn amplitude_projection<T: Real>(field: &Array2<Complex<T>>, amplitude: &Array2<T>) -> Array2<Complex<T>> {
    ndarray::Zip::from(field)
        .and(amplitude)
        .map_collect(|&u, &a| Complex::from_polar(a, phase_of(u)))
}

/// Each iteration sends the hologram to every plane, imposes the target
/// amplitude there, brings each field back, averages, and keeps only the
/// phase. Works with either forward model.
pub fn solve_gs<T: Real>(
    targets: &PlaneTargetSet<T>,
    optics: &OpticalConfig,
    config: &SolverConfig,
    initial: Option<HologramPhase<T>>,
) -> Result<SolverTrace<T>> {
    config.validate()?;
    let start = Instant::now();
    let propagator = config.propagator::<T>(optics);
    let objective = Objective::new(targets, &propagator, config)?;
    let model = *objective.model();

    let init = match (initial, config.init) {
        (Some(h), _) => {
            check_dims(targets.dims(), h.phase.dim())?;
            h
        }
        (None, PhaseInit::Provided) => return Err(config_err("phase init 'provided' needs an initial hologram")),
        (None, _) => HologramPhase::initial(targets.dims(), config)?,
    };
    // GS has no offset variable; start from whatever is displayed.
    let mut phase = init.effective_phase(config.regime);

    let amplitudes: Vec<Array2<T>> = targets
        .planes
        .iter()
        .map(|p| match config.loss_domain {
            LossDomain::Intensity => p.target.mapv(|v| v.max(T::zero()).sqrt()),
            LossDomain::Amplitude => p.target.clone(),
        })
        .collect();
    let n = T::lit(targets.len() as f64);

    let mut losses = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let field = ComplexField::from_parts(phase.mapv(|p| Complex::from_polar(T::one(), p)), *optics);

        let returned: Vec<(T, Array2<Complex<T>>)> = targets
            .planes
            .par_iter()
            .zip(amplitudes.par_iter())
            .map(|(p, amp)| {
                let u = model.forward(&field, p.offset);
                let loss = crate::loss::plane_loss_and_cotangent(
                    u.values(),
                    &p.target,
                    &p.mask,
                    &config.loss,
                    config.loss_domain,
                )
                .0;
                let projected = ComplexField::from_parts(amplitude_projection(u.values(), amp), *optics);
                (loss, model.adjoint(&projected, p.offset).into_values())
            })
            .collect();

        let mut loss = T::zero();
        let mut acc = Array2::from_elem(phase.dim(), Complex::new(T::zero(), T::zero()));
        for (l, back) in &returned {
            loss = loss + *l;
            acc.zip_mut_with(back, |a, &b| *a = *a + b);
        }
        losses.push(loss.to_f64());
        phase = acc.mapv(|v| phase_of(v / n));
    }

    // Phase is already the displayed one; zero offset keeps it unchanged
    // (up to a global constant in the near regime).
    let hologram = HologramPhase::new(phase, T::zero());
    Ok(SolverTrace {
        algorithm: Algorithm::Gs,
        losses,
        hologram,
        wall_time: start.elapsed(),
    })
}
