//! Sampled fields on a [`Grid`]: scalars, 2-vectors and 2×2 matrices.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Dense 2×2 matrix, `m[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2<T: Real>(pub [[T; 2]; 2]);

impl<T: Real> Mat2<T> {
    pub fn identity() -> Self {
        Self([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    pub fn zero() -> Self {
        Self([[T::zero(); 2]; 2])
    }

    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self([[a11, a12], [a21, a22]])
    }

    #[inline]
    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1]
    }

    /// Adjugate, so that `m * m.adjugate() == det(m) * Id`.
    #[inline]
    pub fn adjugate(&self) -> Self {
        let m = &self.0;
        Self::new(m[1][1], -m[0][1], -m[1][0], m[0][0])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            None
        } else {
            Some(self.adjugate().scale(T::one() / d))
        }
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        let m = &self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    #[inline]
    pub fn mul_vec(&self, v: [T; 2]) -> [T; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    #[inline]
    pub fn contract(&self, other: &Self) -> T {
        let (a, b) = (&self.0, &other.0);
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    #[inline]
    pub fn frobenius(&self) -> T {
        self.contract(self).sqrt()
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> T {
        let f2 = self.contract(self);
        let d = self.det();
        let four = T::lit(4.0);
        let disc = (f2 * f2 - four * d * d).max(T::zero()).sqrt();
        ((f2 + disc) / T::lit(2.0)).max(T::zero()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[T::zero(); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Self(out)
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs.scale(-T::one())
    }
}

/// Real samples of a function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let [x1, x2] = grid.point(idx);
                f(x1, x2)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Integral over the torus by the (spectrally exact) rectangle rule.
    pub fn integral(&self) -> T {
        self.sum() * self.grid.cell_area()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize_lossy(self.values.len())
    }

    pub fn inner(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn lp_norm(&self, p: T) -> T {
        let s: T = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_area()).powf(T::one() / p)
    }

    /// Grid-point maximum of `|f|`.
    pub fn linf_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Pointwise product (no dealiasing).
    pub fn pointwise_mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }
}

impl<T: Real> Index<usize> for ScalarField<T> {
    type Output = T;
    fn index(&self, idx: usize) -> &T {
        &self.values[idx]
    }
}

impl<T: Real> IndexMut<usize> for ScalarField<T> {
    fn index_mut(&mut self, idx: usize) -> &mut T {
        &mut self.values[idx]
    }
}

macro_rules! field_binops {
    ($ty:ident) => {
        impl<'a, T: Real> Add<&'a $ty<T>> for &'a $ty<T> {
            type Output = $ty<T>;
            fn add(self, rhs: &'a $ty<T>) -> $ty<T> {
                let mut out = self.clone();
                out += rhs;
                out
            }
        }

        impl<'a, T: Real> Sub<&'a $ty<T>> for &'a $ty<T> {
            type Output = $ty<T>;
            fn sub(self, rhs: &'a $ty<T>) -> $ty<T> {
                let mut out = self.clone();
                out -= rhs;
                out
            }
        }

        impl<T: Real> Add for $ty<T> {
            type Output = $ty<T>;
            fn add(mut self, rhs: $ty<T>) -> $ty<T> {
                self += &rhs;
                self
            }
        }

        impl<T: Real> Sub for $ty<T> {
            type Output = $ty<T>;
            fn sub(mut self, rhs: $ty<T>) -> $ty<T> {
                self -= &rhs;
                self
            }
        }

        impl<'a, T: Real> Mul<T> for &'a $ty<T> {
            type Output = $ty<T>;
            fn mul(self, s: T) -> $ty<T> {
                self.scale(s)
            }
        }

        impl<T: Real> Mul<T> for $ty<T> {
            type Output = $ty<T>;
            fn mul(self, s: T) -> $ty<T> {
                self.scale(s)
            }
        }

        impl<'a, T: Real> Neg for &'a $ty<T> {
            type Output = $ty<T>;
            fn neg(self) -> $ty<T> {
                self.scale(-T::one())
            }
        }

        impl<T: Real> Neg for $ty<T> {
            type Output = $ty<T>;
            fn neg(self) -> $ty<T> {
                self.scale(-T::one())
            }
        }
    };
}

impl<'a, T: Real> AddAssign<&'a ScalarField<T>> for ScalarField<T> {
    fn add_assign(&mut self, rhs: &'a ScalarField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<'a, T: Real> SubAssign<&'a ScalarField<T>> for ScalarField<T> {
    fn sub_assign(&mut self, rhs: &'a ScalarField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

field_binops!(ScalarField);

/// A 2-vector at every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T: Real> {
    components: [ScalarField<T>; 2],
}

impl<T: Real> VectorField<T> {
    pub fn new(c1: ScalarField<T>, c2: ScalarField<T>) -> Result<Self> {
        c1.grid().check_same(c2.grid())?;
        Ok(Self {
            components: [c1, c2],
        })
    }

    pub(crate) fn from_parts(c1: ScalarField<T>, c2: ScalarField<T>) -> Self {
        debug_assert_eq!(c1.grid(), c2.grid());
        Self {
            components: [c1, c2],
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_parts(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn constant(grid: &Grid<T>, c: [T; 2]) -> Self {
        Self::from_parts(
            ScalarField::constant(grid, c[0]),
            ScalarField::constant(grid, c[1]),
        )
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> [T; 2]) -> Self {
        Self::from_parts(
            ScalarField::from_fn(grid, |x1, x2| f(x1, x2)[0]),
            ScalarField::from_fn(grid, |x1, x2| f(x1, x2)[1]),
        )
    }

    /// Builds a field from per-node values.
    pub fn from_pointwise(grid: &Grid<T>, f: impl Fn(usize) -> [T; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(idx);
            out.components[0][idx] = v[0];
            out.components[1][idx] = v[1];
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        self.components[0].grid()
    }

    #[inline]
    pub fn component(&self, i: usize) -> &ScalarField<T> {
        &self.components[i]
    }

    #[inline]
    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField<T> {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[ScalarField<T>; 2] {
        &self.components
    }

    pub fn into_components(self) -> [ScalarField<T>; 2] {
        self.components
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [T; 2] {
        [self.components[0][idx], self.components[1][idx]]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    pub fn inner(&self, other: &Self) -> T {
        self.components[0].inner(&other.components[0])
            + self.components[1].inner(&other.components[1])
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// `(∫ |v|^p)^(1/p)` with the Euclidean pointwise norm.
    pub fn lp_norm(&self, p: T) -> T {
        self.magnitude().lp_norm(p)
    }

    /// Grid-point maximum of the Euclidean norm.
    pub fn linf_norm(&self) -> T {
        self.magnitude().linf_norm()
    }

    pub fn magnitude(&self) -> ScalarField<T> {
        self.components[0].zip_map(&self.components[1], |a, b| a.hypot(b))
    }

    pub fn mean(&self) -> [T; 2] {
        [self.components[0].mean(), self.components[1].mean()]
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_parts(self.components[0].scale(s), self.components[1].scale(s))
    }

    /// Multiplies both components by a scalar field pointwise.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Self {
        Self::from_parts(
            self.components[0].pointwise_mul(s),
            self.components[1].pointwise_mul(s),
        )
    }

    /// Pointwise dot product (no dealiasing).
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let mut out = self.components[0].pointwise_mul(&other.components[0]);
        out += &self.components[1].pointwise_mul(&other.components[1]);
        out
    }

    pub fn axpy(&mut self, a: T, x: &Self) {
        self.components[0].axpy(a, &x.components[0]);
        self.components[1].axpy(a, &x.components[1]);
    }
}

impl<'a, T: Real> AddAssign<&'a VectorField<T>> for VectorField<T> {
    fn add_assign(&mut self, rhs: &'a VectorField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<'a, T: Real> SubAssign<&'a VectorField<T>> for VectorField<T> {
    fn sub_assign(&mut self, rhs: &'a VectorField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

field_binops!(VectorField);

/// A 2×2 matrix at every grid node; entry `(r, c)` is its own scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField<T: Real> {
    entries: [[ScalarField<T>; 2]; 2],
}

impl<T: Real> MatrixField<T> {
    pub fn new(entries: [[ScalarField<T>; 2]; 2]) -> Result<Self> {
        let g = entries[0][0].grid();
        for e in entries.iter().flatten() {
            g.check_same(e.grid())?;
        }
        Ok(Self { entries })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        let z = ScalarField::zeros(grid);
        Self {
            entries: [[z.clone(), z.clone()], [z.clone(), z]],
        }
    }

    pub fn identity(grid: &Grid<T>) -> Self {
        Self::from_pointwise(grid, |_| Mat2::identity())
    }

    pub fn from_pointwise(grid: &Grid<T>, f: impl Fn(usize) -> Mat2<T>) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            out.set(idx, f(idx));
        }
        out
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> Mat2<T>) -> Self {
        Self::from_pointwise(grid, |idx| {
            let [x1, x2] = grid.point(idx);
            f(x1, x2)
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        self.entries[0][0].grid()
    }

    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> &ScalarField<T> {
        &self.entries[r][c]
    }

    #[inline]
    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut ScalarField<T> {
        &mut self.entries[r][c]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Mat2<T> {
        let e = &self.entries;
        Mat2::new(e[0][0][idx], e[0][1][idx], e[1][0][idx], e[1][1][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, m: Mat2<T>) {
        for r in 0..2 {
            for c in 0..2 {
                self.entries[r][c][idx] = m.0[r][c];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(ScalarField::is_finite)
    }

    pub fn map_pointwise(&self, f: impl Fn(Mat2<T>) -> Mat2<T>) -> Self {
        Self::from_pointwise(self.grid(), |idx| f(self.at(idx)))
    }

    pub fn zip_pointwise(&self, other: &Self, f: impl Fn(Mat2<T>, Mat2<T>) -> Mat2<T>) -> Self {
        Self::from_pointwise(self.grid(), |idx| f(self.at(idx), other.at(idx)))
    }

    pub fn transpose(&self) -> Self {
        self.map_pointwise(|m| m.transpose())
    }

    /// Pointwise matrix-vector product.
    pub fn apply(&self, v: &VectorField<T>) -> VectorField<T> {
        VectorField::from_pointwise(self.grid(), |idx| self.at(idx).mul_vec(v.at(idx)))
    }

    /// Pointwise matrix-matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        self.zip_pointwise(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_pointwise(|m| m.scale(s))
    }

    /// Grid maximum of the pointwise spectral norm.
    pub fn linf_op_norm(&self) -> T {
        (0..self.grid().len()).fold(T::zero(), |acc, idx| acc.max(self.at(idx).op_norm()))
    }

    /// Grid maximum of the largest entry magnitude.
    pub fn linf_max_abs(&self) -> T {
        self.entries
            .iter()
            .flatten()
            .fold(T::zero(), |acc, e| acc.max(e.linf_norm()))
    }

    /// `(Σ_ij ‖a_ij‖²)^(1/2)`, the L2 norm with the Frobenius pointwise norm.
    pub fn l2_norm(&self) -> T {
        self.entries
            .iter()
            .flatten()
            .map(|e| e.inner(e))
            .sum::<T>()
            .sqrt()
    }

    /// `(∫ |M|_F^p)^(1/p)`.
    pub fn lp_norm(&self, p: T) -> T {
        ScalarField::from_values(
            self.grid(),
            (0..self.grid().len())
                .map(|idx| self.at(idx).frobenius())
                .collect(),
        )
        .expect("sizes agree")
        .lp_norm(p)
    }

    pub fn det(&self) -> ScalarField<T> {
        ScalarField::from_values(
            self.grid(),
            (0..self.grid().len()).map(|idx| self.at(idx).det()).collect(),
        )
        .expect("sizes agree")
    }

    pub fn axpy(&mut self, a: T, x: &Self) {
        for r in 0..2 {
            for c in 0..2 {
                self.entries[r][c].axpy(a, &x.entries[r][c]);
            }
        }
    }

    /// Row `r` as a vector field.
    pub fn row(&self, r: usize) -> VectorField<T> {
        VectorField::from_parts(self.entries[r][0].clone(), self.entries[r][1].clone())
    }

    pub fn from_rows(r0: VectorField<T>, r1: VectorField<T>) -> Self {
        let [a, b] = r0.into_components();
        let [c, d] = r1.into_components();
        Self {
            entries: [[a, b], [c, d]],
        }
    }
}

impl<'a, T: Real> AddAssign<&'a MatrixField<T>> for MatrixField<T> {
    fn add_assign(&mut self, rhs: &'a MatrixField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<'a, T: Real> SubAssign<&'a MatrixField<T>> for MatrixField<T> {
    fn sub_assign(&mut self, rhs: &'a MatrixField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

field_binops!(MatrixField);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat2_basics() {
        let m = Mat2::<f64>::new(2.0, 1.0, 0.5, 3.0);
        let inv = m.inverse().unwrap();
        let id = m * inv;
        assert!((id - Mat2::identity()).max_abs() < 1e-15);
        assert!((m.det() - 5.5).abs() < 1e-15);
        let shear = Mat2::<f64>::new(1.0, 0.0, 0.0, 1.0);
        assert!((shear.op_norm() - 1.0).abs() < 1e-15);
        // op norm of [[0,1],[0,0]] is 1, of diag(3,-2) is 3
        assert!((Mat2::<f64>::new(0.0, 1.0, 0.0, 0.0).op_norm() - 1.0).abs() < 1e-15);
        assert!((Mat2::<f64>::new(3.0, 0.0, 0.0, -2.0).op_norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn norms_of_constant_field() {
        let g = Grid::<f64>::periodic(16).unwrap();
        let f = ScalarField::constant(&g, 2.0);
        let area = g.length() * g.length();
        assert!((f.l2_norm() - 2.0 * area.sqrt()).abs() < 1e-12);
        assert!((f.integral() - 2.0 * area).abs() < 1e-12);
        assert_eq!(f.linf_norm(), 2.0);
    }

    #[test]
    fn matrix_field_apply_and_rows() {
        let g = Grid::<f64>::periodic(8).unwrap();
        let m = MatrixField::from_pointwise(&g, |_| Mat2::new(1.0, 2.0, 3.0, 4.0));
        let v = VectorField::constant(&g, [1.0, -1.0]);
        let mv = m.apply(&v);
        assert_eq!(mv.at(5), [-1.0, -1.0]);
        let rebuilt = MatrixField::from_rows(m.row(0), m.row(1));
        assert_eq!(rebuilt, m);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = ScalarField::zeros(&Grid::<f64>::periodic(8).unwrap());
        let b = ScalarField::zeros(&Grid::<f64>::periodic(16).unwrap());
        assert!(VectorField::new(a, b).is_err());
    }
}
