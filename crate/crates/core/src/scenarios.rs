//! Initial data and reference fields shared by the runner, the tests and
//! the acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{Density, Region};
use crate::error::Result;
use crate::field::{Mat2, MatrixField, VectorField};
use crate::flow_map::FlowMap;
use crate::grid::Grid;
use crate::scalar::Real;
use crate::spectral::{jacobian, leray_project};

/// `amp·(sin κx₁ cos κx₂, −cos κx₁ sin κx₂)` with `κ = 2π/L`.
pub fn taylor_green<T: Real>(grid: &Grid<T>, amp: T) -> VectorField<T> {
    let k = grid.kappa();
    VectorField::from_fn(grid, |x, y| {
        let (sx, cx) = (k * x).sin_cos();
        let (sy, cy) = (k * y).sin_cos();
        [amp * sx * cy, -amp * cx * sy]
    })
}

/// Exact Taylor-Green velocity at time `t` for constant density `m`.
pub fn taylor_green_exact<T: Real>(grid: &Grid<T>, amp: T, nu: T, m: T, t: T) -> VectorField<T> {
    let k = grid.kappa();
    taylor_green(grid, amp * (-T::lit(2.0) * nu * k * k * t / m).exp())
}

/// The single shear mode `(sin κx₂, 0)`.
pub fn shear_mode<T: Real>(grid: &Grid<T>, amp: T) -> VectorField<T> {
    let k = grid.kappa();
    VectorField::from_fn(grid, |_, y| [amp * (k * y).sin(), T::zero()])
}

/// Disk used by the density scenarios, off-centre in a Taylor-Green cell.
pub fn default_disk<T: Real>(grid: &Grid<T>) -> Region<T> {
    let l = grid.length();
    Region::Disk {
        center: [l * T::lit(0.25), l * T::lit(0.25) + l * T::lit(0.4 / std::f64::consts::TAU)],
        radius: l * T::lit(0.8 / std::f64::consts::TAU),
    }
}

/// `m + σχ_disk` with `σ = jump·m`.
pub fn disk_density<T: Real>(grid: &Grid<T>, m: T, jump: T) -> Result<Density<T>> {
    Density::piecewise_constant(m, jump * m, default_disk(grid))
}

/// Seeded generator used for every randomized field.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field with modes `1 ≤ |k|∞ ≤ k_max`, amplitudes decaying like
/// `|k|^{−slope}`, normalised to unit RMS.
pub fn random_band_limited<T: Real>(grid: &Grid<T>, k_max: usize, slope: f64, rng: &mut impl Rng) -> VectorField<T> {
    let kappa = grid.kappa();
    let mut terms = Vec::new();
    let km = k_max as i64;
    for k1 in -km..=km {
        for k2 in 0..=km {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let mag = ((k1 * k1 + k2 * k2) as f64).sqrt().powf(-slope);
            let amp = [rng.gen_range(-1.0..1.0) * mag, rng.gen_range(-1.0..1.0) * mag];
            let phase = [rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU)];
            terms.push((k1 as f64, k2 as f64, amp, phase));
        }
    }
    let v = VectorField::from_fn(grid, |x, y| {
        let (x, y) = ((kappa * x).to_f64_lossy(), (kappa * y).to_f64_lossy());
        let mut out = [0.0; 2];
        for (k1, k2, amp, phase) in &terms {
            let arg = k1 * x + k2 * y;
            out[0] += amp[0] * (arg + phase[0]).cos();
            out[1] += amp[1] * (arg + phase[1]).cos();
        }
        [T::lit(out[0]), T::lit(out[1])]
    });
    let rms = v.l2_norm() / grid.length();
    if rms == T::zero() {
        v
    } else {
        v.scale(T::one() / rms)
    }
}

/// Divergence-free random field, unit RMS.
pub fn random_solenoidal<T: Real>(grid: &Grid<T>, k_max: usize, slope: f64, rng: &mut impl Rng) -> VectorField<T> {
    let v = leray_project(&random_band_limited(grid, k_max, slope, rng));
    let rms = v.l2_norm() / grid.length();
    v.scale(T::one() / rms)
}

/// Flow map of the frozen shear `X(y) = y + ε(sin κy₂, 0)` (or its
/// transpose-direction twin when `axis = 1`).
pub fn shear_map<T: Real>(grid: &Grid<T>, eps: T, axis: usize) -> FlowMap<T> {
    let k = grid.kappa();
    let disp = if axis == 0 {
        VectorField::from_fn(grid, |_, y| [eps * (k * y).sin(), T::zero()])
    } else {
        VectorField::from_fn(grid, |x, _| [T::zero(), eps * (k * x).sin()])
    };
    let jac = jacobian(&disp);
    let integral = jac.linf_op_norm();
    FlowMap::from_parts(T::zero(), disp, jac, integral).expect("consistent shear map")
}

/// Shear maps with amplitudes `ε` in both directions, the battery the
/// operator identities are checked on.
pub fn shear_battery<T: Real>(grid: &Grid<T>) -> Vec<FlowMap<T>> {
    [0.05, 0.1, 0.2, 0.3]
        .iter()
        .flat_map(|&e| (0..2).map(move |axis| (e, axis)))
        .map(|(e, axis)| shear_map(grid, T::lit(e), axis))
        .collect()
}

/// `Id + ε N/‖N‖_{L∞}` for a fixed smooth `N`, so that `‖A − Id‖_{L∞} = ε`.
pub fn perturbed_identity<T: Real>(grid: &Grid<T>, eps: T) -> MatrixField<T> {
    let k = grid.kappa();
    let half = T::lit(0.5);
    let n = MatrixField::from_fn(grid, |x, y| {
        let (x, y) = (k * x, k * y);
        Mat2::new(x.sin(), y.cos() * half, (x + y).sin() * half, -(x - y).cos())
    });
    let norm = n.linf_op_norm();
    let mut a = MatrixField::identity(grid);
    a.axpy(eps / norm, &n);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::divergence;

    #[test]
    fn random_fields_are_seeded_and_normalised() {
        let g = Grid::<f64>::periodic(16).unwrap();
        let a = random_solenoidal(&g, 4, 1.0, &mut rng(7));
        let b = random_solenoidal(&g, 4, 1.0, &mut rng(7));
        assert_eq!(a, b);
        assert!((a.l2_norm() / g.length() - 1.0).abs() < 1e-12);
        assert!(divergence(&a).linf_norm() < 1e-10);
    }

    #[test]
    fn shear_map_jacobian() {
        let g = Grid::<f64>::periodic(16).unwrap();
        let fm = shear_map(&g, 0.2, 0);
        assert!((fm.du_linf_integral() - 0.2).abs() < 1e-12);
        assert!((perturbed_identity(&g, 0.3).linf_op_norm() - 1.3).abs() < 0.3);
    }
}
