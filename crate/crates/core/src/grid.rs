//! The periodic square `[0, L)²` and its discrete Fourier machinery.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid with `n × n` points on a square of side `length`.
///
/// Storage everywhere in the crate is row-major with the first coordinate
/// running fastest: the value at `(x1, x2) = (i h, j h)` lives at `j * n + i`.
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid<T: Real> {
    n: usize,
    length: T,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl<T: Real> Grid<T> {
    /// `n` must be a power of two and at least 8; `length` must be positive.
    pub fn new(n: usize, length: T) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be a power of two >= 8, got {n}"
            )));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            n,
            length,
            forward,
            inverse,
        })
    }

    /// Grid on the standard `2π` torus.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, T::TAU())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.length / T::from_usize_lossy(self.n)
    }

    /// Area element `h²` used by every quadrature.
    #[inline]
    pub fn cell_area(&self) -> T {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Physical coordinates of grid node `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 2] {
        let h = self.spacing();
        [
            T::from_usize_lossy(idx % self.n) * h,
            T::from_usize_lossy(idx / self.n) * h,
        ]
    }

    /// Fundamental wavenumber `2π / L`.
    #[inline]
    pub fn kappa(&self) -> T {
        T::TAU() / self.length
    }

    /// Signed integer frequency of FFT bin `i` (Nyquist reported as `-n/2`).
    #[inline]
    pub fn signed_mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Wavenumber used for first derivatives; zero on the Nyquist bin so that
    /// derivatives of real fields stay real.
    #[inline]
    pub fn derivative_wavenumber(&self, i: usize) -> T {
        if self.is_nyquist(i) {
            T::zero()
        } else {
            T::lit(self.signed_mode(i) as f64) * self.kappa()
        }
    }

    /// Whether bin `(i, j)` survives the 2/3 dealiasing rule.
    #[inline]
    pub fn keeps_mode(&self, i: usize, j: usize) -> bool {
        let cut = (self.n / 3) as i64;
        self.signed_mode(i).abs() <= cut
            && self.signed_mode(j).abs() <= cut
            && !self.is_nyquist(i)
            && !self.is_nyquist(j)
    }

    /// Wraps a coordinate into `[0, L)`.
    #[inline]
    pub fn wrap(&self, x: T) -> T {
        let l = self.length;
        let r = x - (x / l).floor() * l;
        if r >= l {
            r - l
        } else {
            r
        }
    }

    /// Shortest signed periodic separation `a - b`.
    #[inline]
    pub fn periodic_delta(&self, a: T, b: T) -> T {
        let l = self.length;
        let d = a - b;
        d - (d / l).round() * l
    }

    /// In-place forward 2D DFT (unnormalised).
    pub fn fft2(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.forward);
    }

    /// In-place inverse 2D DFT, normalised so that `ifft2(fft2(x)) == x`.
    pub fn ifft2(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inverse);
        let scale = T::one() / T::from_usize_lossy(self.len());
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n);
        // rows are contiguous
        plan.process(data);
        let mut column = vec![Complex::new(T::zero(), T::zero()); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[j * n + i];
            }
            plan.process(&mut column);
            for j in 0..n {
                data[j * n + i] = column[j];
            }
        }
    }

    /// Forward transform of real samples.
    pub fn forward_real(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        self.fft2(&mut data);
        data
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex<T>>) -> Vec<T> {
        self.ifft2(&mut spectrum);
        spectrum.into_iter().map(|z| z.re).collect()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::<f64>::periodic(4).is_err());
        assert!(Grid::<f64>::periodic(24).is_err());
        assert!(Grid::<f64>::new(16, -1.0).is_err());
        assert!(Grid::<f64>::periodic(16).is_ok());
    }

    #[test]
    fn fft_roundtrip() {
        let g = Grid::<f64>::periodic(16).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let back = g.inverse_real(g.forward_real(&vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn wrap_and_delta() {
        let g = Grid::<f64>::new(8, 2.0).unwrap();
        assert!((g.wrap(2.5) - 0.5).abs() < 1e-15);
        assert!((g.wrap(-0.25) - 1.75).abs() < 1e-15);
        assert!((g.periodic_delta(1.9, 0.1) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn dealias_cutoff() {
        let g = Grid::<f64>::periodic(64).unwrap();
        assert!(g.keeps_mode(21, 0));
        assert!(!g.keeps_mode(22, 0));
        assert!(g.keeps_mode(64 - 21, 3));
        assert!(!g.keeps_mode(32, 0));
    }
}
