//! Fourier-multiplier differential operators on the periodic square.
//!
//! All first derivatives drop the Nyquist bin, so `divergence ∘ gradient`
//! and `laplacian` share the same symbol and the Leray projector is an exact
//! orthogonal projection on the discrete level.

use num_complex::Complex;

use crate::field::{MatrixField, ScalarField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;

pub(crate) fn forward<T: Real>(f: &ScalarField<T>) -> Vec<Complex<T>> {
    f.grid().forward_real(f.values())
}

pub(crate) fn backward<T: Real>(grid: &Grid<T>, spec: Vec<Complex<T>>) -> ScalarField<T> {
    ScalarField::from_values(grid, grid.inverse_real(spec)).expect("spectrum has grid size")
}

#[inline]
fn times_i<T: Real>(z: Complex<T>, k: T) -> Complex<T> {
    // i k z
    Complex::new(-z.im * k, z.re * k)
}

/// Applies a real multiplier `symbol(k1, k2)` to the spectrum of `f`.
pub(crate) fn apply_multiplier<T: Real>(
    f: &ScalarField<T>,
    symbol: impl Fn(T, T) -> T,
) -> ScalarField<T> {
    let grid = f.grid();
    let n = grid.n();
    let mut spec = forward(f);
    for j in 0..n {
        let k2 = grid.derivative_wavenumber(j);
        for i in 0..n {
            let k1 = grid.derivative_wavenumber(i);
            spec[j * n + i] *= symbol(k1, k2);
        }
    }
    backward(grid, spec)
}

/// `∂f/∂x_axis` (axis 0 or 1).
pub fn partial<T: Real>(f: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    let grid = f.grid();
    let n = grid.n();
    let mut spec = forward(f);
    for j in 0..n {
        for i in 0..n {
            let k = if axis == 0 {
                grid.derivative_wavenumber(i)
            } else {
                grid.derivative_wavenumber(j)
            };
            spec[j * n + i] = times_i(spec[j * n + i], k);
        }
    }
    backward(grid, spec)
}

pub fn gradient<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    VectorField::from_parts(partial(f, 0), partial(f, 1))
}

pub fn divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let grid = v.grid();
    let n = grid.n();
    let s1 = forward(v.component(0));
    let s2 = forward(v.component(1));
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for j in 0..n {
        let k2 = grid.derivative_wavenumber(j);
        for i in 0..n {
            let k1 = grid.derivative_wavenumber(i);
            let idx = j * n + i;
            out[idx] = times_i(s1[idx], k1) + times_i(s2[idx], k2);
        }
    }
    backward(grid, out)
}

/// Scalar curl `∂₁v₂ − ∂₂v₁`.
pub fn curl<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    &partial(v.component(1), 0) - &partial(v.component(0), 1)
}

/// Divergence-free field `(∂₂ψ, −∂₁ψ)` generated by a stream function.
pub fn curl_of_stream<T: Real>(psi: &ScalarField<T>) -> VectorField<T> {
    VectorField::from_parts(partial(psi, 1), -partial(psi, 0))
}

pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    apply_multiplier(f, |k1, k2| -(k1 * k1 + k2 * k2))
}

pub fn vector_laplacian<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    VectorField::from_parts(laplacian(v.component(0)), laplacian(v.component(1)))
}

/// Result of [`inverse_laplacian`]: the mean-zero solution and the mean that
/// had to be removed from the input for the problem to be solvable.
#[derive(Clone, Debug)]
pub struct InverseLaplacian<T: Real> {
    pub field: ScalarField<T>,
    pub removed_mean: T,
}

/// Mean-zero `u` with `Δu = f − mean(f)`.
pub fn inverse_laplacian<T: Real>(f: &ScalarField<T>) -> InverseLaplacian<T> {
    let removed_mean = f.mean();
    let field = apply_multiplier(f, |k1, k2| {
        let k2sum = k1 * k1 + k2 * k2;
        if k2sum == T::zero() {
            T::zero()
        } else {
            -T::one() / k2sum
        }
    });
    InverseLaplacian {
        field,
        removed_mean,
    }
}

/// Splits `v` spectrally into its solenoidal and potential (gradient) parts.
/// The mean of `v` is kept in the solenoidal part.
pub fn helmholtz_split<T: Real>(v: &VectorField<T>) -> (VectorField<T>, VectorField<T>) {
    let grid = v.grid();
    let n = grid.n();
    let mut s1 = forward(v.component(0));
    let mut s2 = forward(v.component(1));
    let mut g1 = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut g2 = g1.clone();
    for j in 0..n {
        let k2 = grid.derivative_wavenumber(j);
        for i in 0..n {
            let k1 = grid.derivative_wavenumber(i);
            let kk = k1 * k1 + k2 * k2;
            if kk == T::zero() {
                continue;
            }
            let idx = j * n + i;
            let proj = (s1[idx] * k1 + s2[idx] * k2) / kk;
            g1[idx] = proj * k1;
            g2[idx] = proj * k2;
            s1[idx] -= g1[idx];
            s2[idx] -= g2[idx];
        }
    }
    let sol = VectorField::from_parts(backward(grid, s1), backward(grid, s2));
    let pot = VectorField::from_parts(backward(grid, g1), backward(grid, g2));
    (sol, pot)
}

/// Orthogonal projection onto divergence-free fields.
pub fn leray_project<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    helmholtz_split(v).0
}

/// Complement of [`leray_project`]: the curl-free, mean-zero part.
pub fn gradient_part<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    helmholtz_split(v).1
}

/// `(Dv)_{ij} = ∂_j v_i`.
pub fn jacobian<T: Real>(v: &VectorField<T>) -> MatrixField<T> {
    MatrixField::from_rows(gradient(v.component(0)), gradient(v.component(1)))
}

/// Row-wise divergence `(div M)_i = Σ_j ∂_j M_ij`.
pub fn matrix_divergence<T: Real>(m: &MatrixField<T>) -> VectorField<T> {
    VectorField::from_parts(divergence(&m.row(0)), divergence(&m.row(1)))
}

/// `(∂₁₁f, ∂₁₂f, ∂₂₂f)`.
pub fn second_derivatives<T: Real>(f: &ScalarField<T>) -> [ScalarField<T>; 3] {
    [
        apply_multiplier(f, |k1, _| -k1 * k1),
        apply_multiplier(f, |k1, k2| -k1 * k2),
        apply_multiplier(f, |_, k2| -k2 * k2),
    ]
}

/// `‖∇²v‖_{L2}` summed over all components and all second derivatives.
pub fn hessian_l2_norm<T: Real>(v: &VectorField<T>) -> T {
    let two = T::lit(2.0);
    v.components()
        .iter()
        .map(|c| {
            let [a, b, d] = second_derivatives(c);
            a.inner(&a) + two * b.inner(&b) + d.inner(&d)
        })
        .sum::<T>()
        .sqrt()
}

/// Zeroes every mode removed by the 2/3 rule.
pub fn dealias<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let n = grid.n();
    let mut spec = forward(f);
    for j in 0..n {
        for i in 0..n {
            if !grid.keeps_mode(i, j) {
                spec[j * n + i] = Complex::new(T::zero(), T::zero());
            }
        }
    }
    backward(grid, spec)
}

pub fn dealias_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    VectorField::from_parts(dealias(v.component(0)), dealias(v.component(1)))
}

/// Product `a b` with both factors and the result truncated by the 2/3 rule.
pub fn dealiased_product<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> ScalarField<T> {
    dealias(&dealias(a).pointwise_mul(&dealias(b)))
}

/// `(v·∇)w`, dealiased.
pub fn advection<T: Real>(v: &VectorField<T>, w: &VectorField<T>) -> VectorField<T> {
    let v = dealias_vector(v);
    let w = dealias_vector(w);
    let dw = jacobian(&w);
    let raw = dw.apply(&v);
    dealias_vector(&raw)
}

/// `div(u ⊗ u)` in conservative form, dealiased; equals `(u·∇)u` for
/// divergence-free `u`.
pub fn tensor_divergence<T: Real>(u: &VectorField<T>) -> VectorField<T> {
    let u = dealias_vector(u);
    let mut rows = [VectorField::zeros(u.grid()), VectorField::zeros(u.grid())];
    for (i, row) in rows.iter_mut().enumerate() {
        for j in 0..2 {
            *row.component_mut(j) = dealias(&u.component(i).pointwise_mul(u.component(j)));
        }
    }
    let [r0, r1] = rows;
    dealias_vector(&matrix_divergence(&MatrixField::from_rows(r0, r1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid<f64> {
        Grid::periodic(32).unwrap()
    }

    fn max_diff(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
        (a - b).linf_norm()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid();
        let f = ScalarField::constant(&g, 1.0);
        assert!(gradient(&f).linf_norm() < 1e-14);
    }

    #[test]
    fn gradient_of_sin() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let df = gradient(&f);
        let expect = ScalarField::from_fn(&g, |x, _| x.cos());
        assert!(max_diff(df.component(0), &expect) < 1e-13);
        assert!(df.component(1).linf_norm() < 1e-13);
    }

    #[test]
    fn gradient_of_product_mode() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, y| x.sin() * y.sin());
        let df = gradient(&f);
        let e1 = ScalarField::from_fn(&g, |x, y| x.cos() * y.sin());
        let e2 = ScalarField::from_fn(&g, |x, y| x.sin() * y.cos());
        assert!(max_diff(df.component(0), &e1) < 1e-13);
        assert!(max_diff(df.component(1), &e2) < 1e-13);
    }

    #[test]
    fn divergence_cases() {
        let g = grid();
        let c = VectorField::constant(&g, [0.3, -1.2]);
        assert!(divergence(&c).linf_norm() < 1e-14);
        let v = VectorField::from_fn(&g, |x, _| [x.sin(), 0.0]);
        let expect = ScalarField::from_fn(&g, |x, _| x.cos());
        assert!(max_diff(&divergence(&v), &expect) < 1e-13);
        let psi = ScalarField::from_fn(&g, |x, y| (2.0 * x).sin() * y.cos() + (x + 3.0 * y).cos());
        let w = curl_of_stream(&psi);
        assert!(divergence(&w).l2_norm() <= 1e-10 * w.l2_norm());
    }

    #[test]
    fn laplacian_and_inverse() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let expect = ScalarField::from_fn(&g, |x, _| -x.sin());
        assert!(max_diff(&laplacian(&f), &expect) < 1e-12);
        assert!(laplacian(&ScalarField::zeros(&g)).linf_norm() == 0.0);

        let rhs = ScalarField::from_fn(&g, |x, y| -2.0 * x.sin() * y.sin());
        let sol = inverse_laplacian(&rhs);
        let expect = ScalarField::from_fn(&g, |x, y| x.sin() * y.sin());
        assert!(max_diff(&sol.field, &expect) < 1e-13);
        assert!(sol.removed_mean.abs() < 1e-14);
    }

    #[test]
    fn inverse_laplacian_reports_mean() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| 3.0 + x.cos());
        let sol = inverse_laplacian(&f);
        assert!((sol.removed_mean - 3.0).abs() < 1e-13);
        let back = laplacian(&sol.field);
        let expect = ScalarField::from_fn(&g, |x, _| x.cos());
        assert!(max_diff(&back, &expect) < 1e-12);
    }

    #[test]
    fn leray_cases() {
        let g = grid();
        let psi = ScalarField::from_fn(&g, |x, y| (x + y).sin() + 0.5 * (2.0 * y).cos());
        let w = curl_of_stream(&psi);
        assert!((&leray_project(&w) - &w).linf_norm() < 1e-13);

        let f = ScalarField::from_fn(&g, |x, y| x.sin() * (2.0 * y).cos());
        let gf = gradient(&f);
        assert!(leray_project(&gf).linf_norm() < 1e-13);

        let mixed = &gf + &w;
        assert!((&leray_project(&mixed) - &w).linf_norm() < 1e-13);
    }

    #[test]
    fn tensor_divergence_matches_advection_for_solenoidal() {
        let g = grid();
        let psi = ScalarField::from_fn(&g, |x, y| x.sin() * y.sin() + 0.3 * (2.0 * x - y).cos());
        let u = curl_of_stream(&psi);
        let a = advection(&u, &u);
        let b = tensor_divergence(&u);
        assert!((&a - &b).linf_norm() < 1e-12);
    }

    #[test]
    fn hessian_norm_single_mode() {
        let g = grid();
        let v = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        // ∂₂₂ v₁ = −sin y, ‖·‖ = π√2
        let expect = std::f64::consts::PI * 2f64.sqrt();
        assert!((hessian_l2_norm(&v) - expect).abs() < 1e-12);
    }
}
