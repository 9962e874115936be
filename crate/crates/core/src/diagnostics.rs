//! Fast invariant checks behind `holofocus selftest`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fft::{fft2, ifft2};
use crate::field::{ComplexField, OpticalConfig};
use crate::io::{dequantize_phase, quantize_phase};
use crate::loss::{finite_difference_gradient, sample_coordinates};
use crate::propagation::{PropagationOptions, Propagator};
use crate::solvers::{
    apply_grating, checker_sign, double_phase_decompose, phase_constrain, HologramPhase, Objective, SolverConfig,
};
use crate::targeting::{PlaneTarget, PlaneTargetSet, TargetingParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity next to its tolerance.
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= tol,
        detail: format!("{value:.3e} <= {tol:.3e}"),
    }
}

fn random_grid(dims: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    Array2::from_shape_fn(dims, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Relative error between the analytic gradient of the full objective with
/// respect to `(phase, offset)` and central differences on `n_coords`
/// sampled phase pixels plus the offset.
pub fn relative_gradient_error(
    targets: &PlaneTargetSet<f64>,
    optics: &OpticalConfig,
    config: &SolverConfig,
    n_coords: usize,
    seed: u64,
) -> crate::Result<f64> {
    let prop = config.propagator::<f64>(optics);
    let obj = Objective::new(targets, &prop, config)?;
    let mut h = HologramPhase::initial(optics.dims(), config)?;
    h.offset = 0.37;
    let (_, gp, go) = obj.loss_and_gradient(&h);
    let coords = sample_coordinates(optics.dims(), n_coords, seed);
    let step = 1e-5;
    let fd = finite_difference_gradient(
        |phi: &Array2<f64>| obj.loss(&HologramPhase::new(phi.clone(), h.offset)),
        &h.phase,
        step,
        &coords,
    );
    let fo = (obj.loss(&HologramPhase::new(h.phase.clone(), h.offset + step))
        - obj.loss(&HologramPhase::new(h.phase.clone(), h.offset - step)))
        / (2.0 * step);
    let mut num = (go - fo).powi(2);
    let mut den = fo * fo;
    for (&c, f) in coords.iter().zip(&fd) {
        num += (gp[c] - f).powi(2);
        den += f * f;
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

/// Random targets with a random partition of pixels between planes.
pub fn random_targets(dims: (usize, usize), offsets: &[f64], seed: u64) -> crate::Result<PlaneTargetSet<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owner = Array2::from_shape_fn(dims, |_| rng.gen_range(0..offsets.len()));
    let planes = offsets
        .iter()
        .enumerate()
        .map(|(k, &offset)| PlaneTarget {
            target: Array2::from_shape_fn(dims, |_| rng.gen_range(0.0..1.0)),
            mask: owner.mapv(|o| o == k),
            defocus: Array2::zeros(dims),
            offset,
        })
        .collect();
    PlaneTargetSet::from_planes(planes, TargetingParams::default())
}

/// Runs every check at a small size. Each check is independent; a failure
/// does not stop the rest.
pub fn selftest(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = (64, 64);
    let optics = OpticalConfig::with_dims(dims.0, dims.1).expect("valid optics");
    let mut out = Vec::new();

    let f = random_grid(dims, &mut rng);
    let spectrum = fft2(&f);
    let e0: f64 = f.iter().map(|v| v.norm_sqr()).sum();
    let e1: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    out.push(check("fft parseval", (e0 - e1).abs() / e0, 1e-12));
    out.push(check("fft round trip", max_abs_diff(&f, &ifft2(&spectrum)), 1e-12));

    let exact = Propagator::<f64>::new(optics, PropagationOptions::EXACT);
    let fmax = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let worst = [1e-3, 0.3]
        .iter()
        .map(|&r| max_abs_diff(&exact.apply(&exact.apply(&f, r, false), -r, false), &f) / fmax)
        .fold(0.0, f64::max);
    out.push(check("propagation round trip", worst, 1e-10));

    let b = random_grid(dims, &mut rng);
    let worst = [1e-3, 0.05, 0.3]
        .iter()
        .map(|&r| {
            let lhs = inner(&exact.apply(&f, r, false), &b);
            let rhs = inner(&f, &exact.apply(&b, r, true));
            (lhs - rhs).norm() / lhs.norm()
        })
        .fold(0.0, f64::max);
    out.push(check("propagation adjoint", worst, 1e-10));

    let small = OpticalConfig::with_dims(16, 16).expect("valid optics");
    let grad = random_targets((16, 16), &[1e-3, -1e-3], seed).and_then(|t| {
        relative_gradient_error(
            &t,
            &small,
            &SolverConfig {
                seed,
                ..Default::default()
            },
            64,
            seed,
        )
    });
    out.push(match grad {
        Ok(e) => check("objective gradient", e, 1e-4),
        Err(e) => CheckResult {
            name: "objective gradient",
            passed: false,
            detail: e.to_string(),
        },
    });

    let phase = Array2::from_shape_fn(dims, |_| rng.gen_range(-PI..PI));
    let offset = rng.gen_range(-1.0..1.0);
    let c = phase_constrain(&phase, offset);
    let mean = c.sum() / c.len() as f64;
    let mu = phase.sum() / phase.len() as f64;
    let structure = c
        .indexed_iter()
        .map(|((r, col), &v)| (v - (phase[[r, col]] - mu + f64::from(checker_sign(r, col)) * offset)).abs())
        .fold(0.0, f64::max);
    out.push(check("constraint mean", mean.abs(), 1e-12));
    out.push(check("constraint checkerboard", structure, 1e-12));

    let field = random_grid(dims, &mut rng);
    let (normalized, low, high) = double_phase_decompose(&field);
    let err = normalized
        .iter()
        .zip(low.iter().zip(&high))
        .map(|(v, (&l, &h))| (v - (Complex64::from_polar(1.0, l) + Complex64::from_polar(1.0, h)) * 0.5).norm())
        .fold(0.0, f64::max);
    out.push(check("double phase identity", err, 1e-12));

    let grated = ComplexField::from_phase(&apply_grating(&Array2::zeros(dims)), optics).expect("finite phase");
    let dc = grated.fft2().values()[[0, 0]].norm();
    out.push(check("grating dc bin", dc, 1e-12));

    let q = dequantize_phase::<f64>(&quantize_phase(&phase));
    let err = phase
        .iter()
        .zip(&q)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        })
        .fold(0.0, f64::max);
    out.push(check("quantization round trip", err, PI / 255.0 + 1e-12));

    out
}
