//! Densities transported by characteristics, `ρ(t, x) = ρ₀(Y(t, x))`, and
//! marker particles on the interface of a piecewise-constant density.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::flow_map::{FlowMap, InverseMapOptions};
use crate::grid::Grid;
use crate::interp::{Interpolation, Interpolator};
use crate::scalar::Real;

/// Reference set `A₀` of a piecewise-constant density, on the periodic square.
#[derive(Clone, Debug, PartialEq)]
pub enum Region<T: Real> {
    Disk { center: [T; 2], radius: T },
    /// Axis-aligned, `[lo, hi)` in each direction (periodically wrapped).
    Rectangle { lo: [T; 2], hi: [T; 2] },
    /// Membership per grid node; off-grid points use the nearest node.
    Mask { grid: Grid<T>, inside: Vec<bool> },
}

impl<T: Real> Region<T> {
    pub fn contains(&self, grid: &Grid<T>, y: [T; 2]) -> bool {
        match self {
            Region::Disk { center, radius } => {
                let d1 = grid.periodic_delta(y[0], center[0]);
                let d2 = grid.periodic_delta(y[1], center[1]);
                d1 * d1 + d2 * d2 < *radius * *radius
            }
            Region::Rectangle { lo, hi } => (0..2).all(|a| grid.wrap(y[a] - lo[a]) < hi[a] - lo[a]),
            Region::Mask { grid: mg, inside } => {
                let h = mg.spacing();
                let n = mg.n();
                let snap = |x: T| (mg.wrap(x) / h).round().to_usize().unwrap_or(0) % n;
                inside[snap(y[1]) * n + snap(y[0])]
            }
        }
    }
}

/// Initial density `ρ₀`.
#[derive(Clone, Debug, PartialEq)]
pub enum Density<T: Real> {
    /// `ρ₀ = m + σ χ_{A₀}`.
    PiecewiseConstant { m: T, sigma: T, region: Region<T> },
    /// Arbitrary sampled field with `m ≤ ρ₀ ≤ big_m`.
    General { field: ScalarField<T>, m: T, big_m: T },
}

impl<T: Real> Density<T> {
    pub fn constant(m: T) -> Result<Self> {
        Self::piecewise_constant(
            m,
            T::zero(),
            Region::Disk {
                center: [T::zero(); 2],
                radius: T::zero(),
            },
        )
    }

    pub fn piecewise_constant(m: T, sigma: T, region: Region<T>) -> Result<Self> {
        if !(m > T::zero() && m.is_finite()) {
            return Err(Error::InvalidDensity(format!("m must be positive, got {m}")));
        }
        if !(sigma >= T::zero() && sigma.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "sigma must be nonnegative (m is the infimum), got {sigma}"
            )));
        }
        if let Region::Mask { grid, inside } = &region {
            if inside.len() != grid.len() {
                return Err(Error::InvalidDensity("mask size does not match its grid".into()));
            }
        }
        Ok(Density::PiecewiseConstant { m, sigma, region })
    }

    /// Wraps a sampled density; its extrema become `m` and `M`.
    pub fn general(field: ScalarField<T>) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::NonFinite("density"));
        }
        let (m, big_m) = (field.min(), field.max());
        if !(m > T::zero()) {
            return Err(Error::InvalidDensity(format!("density must be positive, min is {m}")));
        }
        Ok(Density::General { field, m, big_m })
    }

    /// `inf ρ₀`.
    pub fn inf(&self) -> T {
        match self {
            Density::PiecewiseConstant { m, .. } | Density::General { m, .. } => *m,
        }
    }

    /// `sup ρ₀` (for a piecewise-constant density with an empty region this is
    /// still `m + σ`).
    pub fn sup(&self) -> T {
        match self {
            Density::PiecewiseConstant { m, sigma, .. } => *m + *sigma,
            Density::General { big_m, .. } => *big_m,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.sup() == self.inf()
    }

    /// `ρ₀(y)`.
    pub fn value_at(&self, grid: &Grid<T>, y: [T; 2]) -> T {
        match self {
            Density::PiecewiseConstant { m, sigma, region } => {
                if *sigma != T::zero() && region.contains(grid, y) {
                    *m + *sigma
                } else {
                    *m
                }
            }
            Density::General { field, .. } => Interpolator::scalar(Interpolation::Bilinear, field).eval(y)[0],
        }
    }

    /// `ρ₀` sampled at the nodes of `grid`.
    pub fn sample(&self, grid: &Grid<T>) -> ScalarField<T> {
        let nodes: Vec<[T; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
        self.evaluate(grid, &nodes)
    }

    fn evaluate(&self, grid: &Grid<T>, points: &[[T; 2]]) -> ScalarField<T> {
        let values = match self {
            Density::PiecewiseConstant { .. } => points.par_iter().map(|&y| self.value_at(grid, y)).collect(),
            Density::General { field, .. } => {
                let it = Interpolator::scalar(Interpolation::Bilinear, field);
                it.eval_many(points).pop().expect("one component")
            }
        };
        ScalarField::from_values(grid, values).expect("one value per node")
    }
}

/// `ρ(t, x) = ρ₀(Y(t, x))` at every node `x`.
///
/// A piecewise-constant density stays exactly two-valued: membership of
/// `Y(t, x)` in `A₀` is decided by the region itself.
pub fn density_at_time<T: Real>(
    rho0: &Density<T>,
    fm: &FlowMap<T>,
    opts: &InverseMapOptions<T>,
) -> Result<ScalarField<T>> {
    if rho0.is_constant() {
        return Ok(ScalarField::constant(fm.grid(), rho0.inf()));
    }
    let y = fm.inverse_map_grid(opts)?;
    Ok(rho0.evaluate(fm.grid(), &y))
}

/// `(sup ρ₀ − inf ρ₀) / inf ρ₀`.
pub fn jump_ratio<T: Real>(rho0: &Density<T>) -> T {
    match rho0 {
        Density::PiecewiseConstant { m, sigma, .. } => *sigma / *m,
        Density::General { field, .. } => {
            let (lo, hi) = (field.min(), field.max());
            (hi - lo) / lo
        }
    }
}

/// Marker particles on `∂A₀`, in order, carried with the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceMarkers<T: Real> {
    time: T,
    points: Vec<[T; 2]>,
}

pub const MIN_MARKERS: usize = 16;

impl<T: Real> InterfaceMarkers<T> {
    pub fn new(points: Vec<[T; 2]>) -> Result<Self> {
        if points.len() < MIN_MARKERS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_MARKERS} markers, got {}",
                points.len()
            )));
        }
        Ok(Self {
            time: T::zero(),
            points,
        })
    }

    pub fn circle(center: [T; 2], radius: T, count: usize) -> Result<Self> {
        let step = T::TAU() / T::from_usize_lossy(count);
        Self::new(
            (0..count)
                .map(|k| {
                    let (s, c) = (step * T::from_usize_lossy(k)).sin_cos();
                    [center[0] + radius * c, center[1] + radius * s]
                })
                .collect(),
        )
    }

    /// `per_side` markers on each edge, counter-clockwise from `lo`.
    pub fn rectangle(lo: [T; 2], hi: [T; 2], per_side: usize) -> Result<Self> {
        let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        let mut pts = Vec::with_capacity(4 * per_side);
        for c in 0..4 {
            let (a, b) = (corners[c], corners[(c + 1) % 4]);
            for k in 0..per_side {
                let s = T::from_usize_lossy(k) / T::from_usize_lossy(per_side);
                pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        Self::new(pts)
    }

    /// Markers for the boundary of a disk or rectangle region.
    pub fn for_region(region: &Region<T>, count: usize) -> Option<Result<Self>> {
        match region {
            Region::Disk { center, radius } => Some(Self::circle(*center, *radius, count)),
            Region::Rectangle { lo, hi } => Some(Self::rectangle(*lo, *hi, count.div_ceil(4))),
            Region::Mask { .. } => None,
        }
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Marker positions, not wrapped into the periodic cell.
    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One Heun (RK2) step through `v_start` at the current positions and
    /// `v_end` at the predicted ones.
    pub fn advect_between(
        &self,
        v_start: &VectorField<T>,
        v_end: &VectorField<T>,
        dt: T,
        method: Interpolation,
    ) -> Self {
        let half = dt / T::lit(2.0);
        let k1 = sample(&Interpolator::vector(method, v_start), &self.points);
        let pred: Vec<[T; 2]> = self
            .points
            .iter()
            .zip(&k1)
            .map(|(p, k)| [p[0] + dt * k[0], p[1] + dt * k[1]])
            .collect();
        let k2 = sample(&Interpolator::vector(method, v_end), &pred);
        let points = self
            .points
            .iter()
            .zip(k1.iter().zip(&k2))
            .map(|(p, (a, b))| [p[0] + half * (a[0] + b[0]), p[1] + half * (a[1] + b[1])])
            .collect();
        Self {
            time: self.time + dt,
            points,
        }
    }

    /// Area enclosed by the marker polygon (shoelace formula).
    pub fn enclosed_area(&self) -> Result<T> {
        if let Some((first, second)) = first_intersection(&self.points) {
            return Err(Error::SelfIntersection { first, second });
        }
        Ok(shoelace(&self.points).abs())
    }
}

/// RK2 step of every marker through a velocity field held fixed over `dt`.
pub fn advect_markers<T: Real>(
    markers: &InterfaceMarkers<T>,
    v: &VectorField<T>,
    dt: T,
    method: Interpolation,
) -> InterfaceMarkers<T> {
    markers.advect_between(v, v, dt, method)
}

/// Shoelace area of the marker polygon; fails if the polygon is not simple.
pub fn enclosed_area<T: Real>(markers: &InterfaceMarkers<T>) -> Result<T> {
    markers.enclosed_area()
}

fn sample<T: Real>(interp: &Interpolator<T>, points: &[[T; 2]]) -> Vec<[T; 2]> {
    let vals = interp.eval_many(points);
    vals[0].iter().zip(&vals[1]).map(|(&a, &b)| [a, b]).collect()
}

fn shoelace<T: Real>(p: &[[T; 2]]) -> T {
    let n = p.len();
    let mut twice = T::zero();
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        twice += a[0] * b[1] - b[0] * a[1];
    }
    twice / T::lit(2.0)
}

fn orient<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross<T: Real>(p1: [T; 2], p2: [T; 2], q1: [T; 2], q2: [T; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let z = T::zero();
    ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z))
}

/// First pair of non-adjacent edges that cross, if any.
fn first_intersection<T: Real>(p: &[[T; 2]]) -> Option<(usize, usize)> {
    let n = p.len();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return Some((i, j));
            }
        }
    }
    None
}
