//! Off-grid evaluation of periodic fields.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;
use crate::spectral::forward;

/// How a field is evaluated between grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Periodic bilinear: monotone, preserves bounds, second order.
    #[default]
    Bilinear,
    /// Trigonometric interpolant: exact for band-limited fields.
    Spectral,
}

/// Evaluates one or more fields sampled on the same grid at arbitrary points.
pub struct Interpolator<T: Real> {
    grid: Grid<T>,
    kind: Kind<T>,
}

enum Kind<T: Real> {
    Bilinear(Vec<Vec<T>>),
    Spectral(SpectralTable<T>),
}

struct SpectralTable<T: Real> {
    kappa: T,
    // retained bins along x1: (signed mode ≥ 0, weight, is Nyquist)
    modes1: Vec<(i64, T, bool)>,
    // retained bins along x2: (signed mode, is Nyquist)
    modes2: Vec<(i64, bool)>,
    max1: usize,
    max2: usize,
    // per component, row-major over (modes2, modes1)
    coeffs: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Interpolator<T> {
    pub fn new(method: Interpolation, fields: &[&ScalarField<T>]) -> Self {
        assert!(!fields.is_empty(), "interpolator needs at least one field");
        let grid = fields[0].grid().clone();
        let kind = match method {
            Interpolation::Bilinear => {
                Kind::Bilinear(fields.iter().map(|f| f.values().to_vec()).collect())
            }
            Interpolation::Spectral => Kind::Spectral(SpectralTable::build(&grid, fields)),
        };
        Self { grid, kind }
    }

    pub fn scalar(method: Interpolation, f: &ScalarField<T>) -> Self {
        Self::new(method, &[f])
    }

    pub fn vector(method: Interpolation, v: &VectorField<T>) -> Self {
        Self::new(method, &[v.component(0), v.component(1)])
    }

    pub fn components(&self) -> usize {
        match &self.kind {
            Kind::Bilinear(v) => v.len(),
            Kind::Spectral(t) => t.coeffs.len(),
        }
    }

    /// Values of every component at `x`, written into `out`.
    pub fn eval_into(&self, x: [T; 2], out: &mut [T]) {
        match &self.kind {
            Kind::Bilinear(values) => bilinear(&self.grid, values, x, out),
            Kind::Spectral(table) => table.eval(&self.grid, x, out),
        }
    }

    pub fn eval(&self, x: [T; 2]) -> Vec<T> {
        let mut out = vec![T::zero(); self.components()];
        self.eval_into(x, &mut out);
        out
    }

    /// Evaluates at many points in parallel; result is indexed `[component][point]`.
    pub fn eval_many(&self, points: &[[T; 2]]) -> Vec<Vec<T>> {
        let nc = self.components();
        let flat: Vec<T> = points
            .par_iter()
            .flat_map_iter(|&p| {
                let mut buf = vec![T::zero(); nc];
                self.eval_into(p, &mut buf);
                buf.into_iter()
            })
            .collect();
        (0..nc)
            .map(|c| flat.iter().skip(c).step_by(nc).copied().collect())
            .collect()
    }

    /// Samples every component at `points` (one point per grid node of
    /// `target`), returning fields on `target`.
    pub fn sample_on(&self, target: &Grid<T>, points: &[[T; 2]]) -> Vec<ScalarField<T>> {
        assert_eq!(points.len(), target.len());
        self.eval_many(points)
            .into_iter()
            .map(|vals| ScalarField::from_values(target, vals).expect("one point per node"))
            .collect()
    }
}

fn bilinear<T: Real>(grid: &Grid<T>, values: &[Vec<T>], x: [T; 2], out: &mut [T]) {
    let n = grid.n();
    let h = grid.spacing();
    let s1 = grid.wrap(x[0]) / h;
    let s2 = grid.wrap(x[1]) / h;
    let f1 = s1.floor();
    let f2 = s2.floor();
    let t1 = s1 - f1;
    let t2 = s2 - f2;
    let i0 = f1.to_usize().unwrap_or(0) % n;
    let j0 = f2.to_usize().unwrap_or(0) % n;
    let i1 = (i0 + 1) % n;
    let j1 = (j0 + 1) % n;
    let one = T::one();
    let w00 = (one - t1) * (one - t2);
    let w10 = t1 * (one - t2);
    let w01 = (one - t1) * t2;
    let w11 = t1 * t2;
    for (o, v) in out.iter_mut().zip(values) {
        *o = w00 * v[j0 * n + i0] + w10 * v[j0 * n + i1] + w01 * v[j1 * n + i0] + w11 * v[j1 * n + i1];
    }
}

/// Coefficients below this fraction of the largest are dropped.
const SPECTRAL_FLOOR: f64 = 1e-13;

impl<T: Real> SpectralTable<T> {
    fn build(grid: &Grid<T>, fields: &[&ScalarField<T>]) -> Self {
        let n = grid.n();
        let norm = T::one() / T::from_usize_lossy(grid.len());
        let spectra: Vec<Vec<Complex<T>>> = fields
            .iter()
            .map(|f| forward(f).into_iter().map(|z| z * norm).collect())
            .collect();
        let peak = spectra
            .iter()
            .flatten()
            .fold(T::zero(), |acc, z| acc.max(z.norm()));
        let floor = peak * T::lit(SPECTRAL_FLOOR);
        let significant = |idx: usize| spectra.iter().any(|s| s[idx].norm() > floor);

        // Real fields: the k1 < 0 half is the conjugate of the k1 > 0 half.
        let active1: Vec<usize> = (0..n)
            .filter(|&i| grid.signed_mode(i) >= 0 || grid.is_nyquist(i))
            .filter(|&i| (0..n).any(|j| significant(j * n + i)))
            .collect();
        let active2: Vec<usize> = (0..n)
            .filter(|&j| active1.iter().any(|&i| significant(j * n + i)))
            .collect();
        let two = T::lit(2.0);
        let modes1: Vec<(i64, T, bool)> = active1
            .iter()
            .map(|&i| {
                if grid.is_nyquist(i) {
                    ((n / 2) as i64, T::one(), true)
                } else {
                    let k = grid.signed_mode(i);
                    (k, if k == 0 { T::one() } else { two }, false)
                }
            })
            .collect();
        let modes2: Vec<(i64, bool)> = active2
            .iter()
            .map(|&j| {
                if grid.is_nyquist(j) {
                    ((n / 2) as i64, true)
                } else {
                    (grid.signed_mode(j), false)
                }
            })
            .collect();
        let coeffs = spectra
            .iter()
            .map(|s| {
                let mut c = Vec::with_capacity(active1.len() * active2.len());
                for &j in &active2 {
                    for (&i, &(_, w, _)) in active1.iter().zip(&modes1) {
                        c.push(s[j * n + i] * w);
                    }
                }
                c
            })
            .collect();
        Self {
            kappa: grid.kappa(),
            max1: modes1.iter().map(|m| m.0.unsigned_abs() as usize).max().unwrap_or(0),
            max2: modes2.iter().map(|m| m.0.unsigned_abs() as usize).max().unwrap_or(0),
            modes1,
            modes2,
            coeffs,
        }
    }

    fn eval(&self, _grid: &Grid<T>, x: [T; 2], out: &mut [T]) {
        // e^{ikκx} for k = 0..=max by repeated multiplication
        let powers = |x: T, max: usize| -> Vec<Complex<T>> {
            let (s, c) = (self.kappa * x).sin_cos();
            let step = Complex::new(c, s);
            let mut p = Vec::with_capacity(max + 1);
            let mut z = Complex::new(T::one(), T::zero());
            for _ in 0..=max {
                p.push(z);
                z *= step;
            }
            p
        };
        let p1 = powers(x[0], self.max1);
        let p2 = powers(x[1], self.max2);
        let e1: Vec<Complex<T>> = self
            .modes1
            .iter()
            .map(|&(k, _, nyq)| {
                let z = p1[k as usize];
                if nyq {
                    Complex::new(z.re, T::zero())
                } else {
                    z
                }
            })
            .collect();
        let e2: Vec<Complex<T>> = self
            .modes2
            .iter()
            .map(|&(k, nyq)| {
                let z = p2[k.unsigned_abs() as usize];
                if nyq {
                    Complex::new(z.re, T::zero())
                } else if k < 0 {
                    z.conj()
                } else {
                    z
                }
            })
            .collect();
        let m1 = e1.len();
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            let mut total = T::zero();
            for (jj, b2) in e2.iter().enumerate() {
                let row = &c[jj * m1..(jj + 1) * m1];
                let mut re = T::zero();
                let mut im = T::zero();
                for (ci, b1) in row.iter().zip(&e1) {
                    re += ci.re * b1.re - ci.im * b1.im;
                    im += ci.re * b1.im + ci.im * b1.re;
                }
                total += re * b2.re - im * b2.im;
            }
            *o = total;
        }
    }
}

/// `f ∘ P`, where `P` lists one evaluation point per node of `f`'s grid.
pub fn compose_scalar<T: Real>(
    method: Interpolation,
    f: &ScalarField<T>,
    points: &[[T; 2]],
) -> ScalarField<T> {
    let grid = f.grid().clone();
    Interpolator::scalar(method, f)
        .sample_on(&grid, points)
        .pop()
        .expect("one component")
}

/// `v ∘ P` for a vector field.
pub fn compose_vector<T: Real>(
    method: Interpolation,
    v: &VectorField<T>,
    points: &[[T; 2]],
) -> VectorField<T> {
    let grid = v.grid().clone();
    let mut comps = Interpolator::vector(method, v).sample_on(&grid, points);
    let c2 = comps.pop().expect("two components");
    let c1 = comps.pop().expect("two components");
    VectorField::from_parts(c1, c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_exact_for_trig_polynomial() {
        let g = Grid::<f64>::periodic(16).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * x).sin() * y.cos() + 0.3 * (x - 3.0 * y).cos());
        let it = Interpolator::scalar(Interpolation::Spectral, &f);
        for &(x, y) in &[(0.123f64, 4.5f64), (6.0, 0.01), (-1.3, 9.7)] {
            let exact = (2.0 * x).sin() * y.cos() + 0.3 * (x - 3.0 * y).cos();
            assert!((it.eval([x, y])[0] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_reproduces_nodes_with_nyquist_content() {
        let g = Grid::<f64>::periodic(8).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (4.0 * x).cos() + (4.0 * y).cos() * x.sin());
        let it = Interpolator::scalar(Interpolation::Spectral, &f);
        for idx in 0..g.len() {
            let v = it.eval(g.point(idx))[0];
            assert!((v - f[idx]).abs() < 1e-13);
        }
    }

    #[test]
    fn bilinear_nodes_and_bounds() {
        let g = Grid::<f64>::periodic(8).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x.sin() + y.cos());
        let it = Interpolator::scalar(Interpolation::Bilinear, &f);
        for idx in 0..g.len() {
            assert!((it.eval(g.point(idx))[0] - f[idx]).abs() < 1e-14);
        }
        let v = it.eval([100.37, -42.1])[0];
        assert!(v <= f.max() + 1e-15 && v >= f.min() - 1e-15);
    }

    #[test]
    fn bilinear_is_linear_within_cell() {
        let g = Grid::<f64>::new(8, 8.0).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| if x < 7.5 && y < 7.5 { 2.0 * x + 3.0 * y } else { 0.0 });
        let it = Interpolator::scalar(Interpolation::Bilinear, &f);
        assert!((it.eval([2.5, 3.25])[0] - (5.0 + 9.75)).abs() < 1e-13);
    }
}
