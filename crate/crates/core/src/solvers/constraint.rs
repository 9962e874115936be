//! Double-phase style checkerboard constraint and the output grating.

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};

use crate::scalar::Real;

/// `-1` where `row + col` is even (low phase), `+1` where odd (high phase).
#[inline]
pub fn checker_sign(row: usize, col: usize) -> i8 {
    if (row + col).is_multiple_of(2) {
        -1
    } else {
        1
    }
}

fn mean<T: Real>(a: &Array2<T>) -> T {
    a.iter().fold(T::zero(), |s, &v| s + v) / T::lit(a.len() as f64)
}

/// Removes the mean of `phase`, then subtracts `offset` on even-parity
/// pixels and adds it on odd-parity pixels.
pub fn phase_constrain<T: Real>(phase: &Array2<T>, offset: T) -> Array2<T> {
    let mu = mean(phase);
    let mut out = phase.mapv(|p| p - mu);
    for ((r, c), v) in out.indexed_iter_mut() {
        if checker_sign(r, c) < 0 {
            *v = *v - offset;
        } else {
            *v = *v + offset;
        }
    }
    out
}

/// Pulls a gradient w.r.t. the constrained phase back to `(phase, offset)`.
pub fn phase_constrain_adjoint<T: Real>(grad: &Array2<T>) -> (Array2<T>, T) {
    let mu = mean(grad);
    let mut offset_grad = T::zero();
    for ((r, c), &g) in grad.indexed_iter() {
        if checker_sign(r, c) < 0 {
            offset_grad = offset_grad - g;
        } else {
            offset_grad = offset_grad + g;
        }
    }
    (grad.mapv(|g| g - mu), offset_grad)
}

/// Adds π on odd rows to push undiffracted light off axis.
pub fn apply_grating<T: Real>(phase: &Array2<T>) -> Array2<T> {
    let mut out = phase.clone();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        if r % 2 == 1 {
            row.mapv_inplace(|p| p + T::PI());
        }
    }
    out
}

/// Inverse of [`apply_grating`].
pub fn remove_grating<T: Real>(phase: &Array2<T>) -> Array2<T> {
    let mut out = phase.clone();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        if r % 2 == 1 {
            row.mapv_inplace(|p| p - T::PI());
        }
    }
    out
}

/// Wraps into [0, 2π).
pub fn wrap_phase<T: Real>(phase: &Array2<T>) -> Array2<T> {
    phase.mapv(|p| {
        let w = p.to_f64().rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU
        T::lit(if w >= TAU { 0.0 } else { w })
    })
}

/// Interleaves two grids on the constraint's checkerboard: `low` on even
/// parity, `high` on odd.
pub fn interleave<T: Real>(low: &Array2<T>, high: &Array2<T>) -> Array2<T> {
    let mut out = low.clone();
    Zip::indexed(&mut out).and(high).for_each(|(r, c), o, &h| {
        if checker_sign(r, c) > 0 {
            *o = h;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_phase_becomes_checkerboard() {
        let out = phase_constrain(&Array2::from_elem((4, 4), 1.7f64), 0.5);
        for ((r, c), &v) in out.indexed_iter() {
            let expect = if (r + c) % 2 == 0 { -0.5 } else { 0.5 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_offset_only_removes_mean() {
        let phi = Array2::from_shape_fn((4, 6), |(r, c)| (r * 6 + c) as f64);
        let out = phase_constrain(&phi, 0.0);
        let mu = phi.mean().unwrap();
        for (a, b) in out.iter().zip(phi.iter()) {
            assert!((a - (b - mu)).abs() < 1e-13);
        }
    }

    #[test]
    fn index_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let phi = Array2::from_shape_fn((6, 8), |_| rng.gen_range(-5.0..5.0));
            let s: f64 = rng.gen_range(-2.0..2.0);
            let out = phase_constrain(&phi, s);
            assert!(out.mean().unwrap().abs() < 1e-12);
            let lhs = out[[0, 0]] - out[[0, 1]];
            let rhs = phi[[0, 0]] - phi[[0, 1]];
            assert!((lhs - rhs + 2.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_exact() {
        // <C(φ, s), g> = <φ, Cᵀ_φ g> + s Cᵀ_s g
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
        let g = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
        let s = 0.37;
        let lhs: f64 = (&phase_constrain(&phi, s) * &g).sum();
        let (gp, gs) = phase_constrain_adjoint(&g);
        let rhs = (&phi * &gp).sum() + s * gs;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn grating_rows_and_involution() {
        let g = apply_grating(&Array2::<f64>::zeros((4, 3)));
        for ((r, _), &v) in g.indexed_iter() {
            assert_eq!(v, if r % 2 == 1 { PI } else { 0.0 });
        }
        let phi = Array2::from_shape_fn((4, 4), |(r, c)| 0.3 * r as f64 + 0.1 * c as f64);
        let twice = wrap_phase(&apply_grating(&apply_grating(&phi)));
        for (a, b) in twice.iter().zip(wrap_phase(&phi).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in remove_grating(&apply_grating(&phi)).iter().zip(phi.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grating_kills_dc() {
        // Oracle: the DFT of alternating ±1 rows, summed by hand.
        let (h, w) = (8, 8);
        let phase = apply_grating(&Array2::<f64>::zeros((h, w)));
        let field = phase.mapv(|p| Complex::from_polar(1.0, p));
        let spectrum = crate::fft::fft2(&field);
        assert!(spectrum[[0, 0]].norm() < 1e-12);
        let peak = spectrum[[h / 2, 0]].norm();
        assert!((peak - (h * w) as f64 / ((h * w) as f64).sqrt()).abs() < 1e-12);
        let others: f64 = spectrum
            .indexed_iter()
            .filter(|(i, _)| *i != (h / 2, 0))
            .map(|(_, v)| v.norm())
            .sum();
        assert!(others < 1e-10);
    }

    #[test]
    fn wrapping_range() {
        let w = wrap_phase(&ndarray::array![[-PI, 0.0, 2.0 * PI, 7.0, -1e-20]]);
        assert!(w.iter().all(|&v| (0.0..TAU).contains(&v)));
        assert!((w[[0, 0]] - PI).abs() < 1e-15);
        assert_eq!(w[[0, 2]], 0.0);
    }
}
