//! Pushforward of weighted particle measures under the flow.
//!
//! At time `t` the image measure splits into the part carried by particles
//! that have not touched the boundary yet (absolutely continuous) and the part
//! carried by particles with `τ ≤ t`, which lives on the image of the
//! boundary (singular).

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::FlowResult;
use crate::points::{distance, norm, PointSet};
use crate::sum::exact_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMeasure {
    points: PointSet,
    weights: Vec<f64>,
}

impl ParticleMeasure {
    pub fn new(points: PointSet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter { name: "weights", reason: "must be finite and nonnegative" });
        }
        Ok(ParticleMeasure { points, weights })
    }

    /// Equal weights `total / n`.
    pub fn uniform(points: PointSet, total: f64) -> Result<Self> {
        let n = points.len();
        let w = if n == 0 { 0.0 } else { total / n as f64 };
        Self::new(points, vec![w; n])
    }

    pub fn empty(dim: usize) -> Self {
        ParticleMeasure { points: PointSet::new(dim), weights: Vec::new() }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Correctly rounded `Σ w_j`, independent of particle order.
    pub fn total_mass(&self) -> f64 {
        exact_sum(self.weights.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportDecomposition {
    pub step: usize,
    /// Images of particles with `τ > t`.
    pub ac_part: ParticleMeasure,
    pub ac_indices: Vec<usize>,
    /// Images of particles with `τ ≤ t`.
    pub singular_part: ParticleMeasure,
    pub singular_indices: Vec<usize>,
}

impl TransportDecomposition {
    /// Exact mass of the union of both parts; equals the input's total mass
    /// because the parts partition the input weights.
    pub fn combined_mass(&self) -> f64 {
        exact_sum(self.ac_part.weights.iter().chain(&self.singular_part.weights).copied())
    }
}

/// Split `mu` (whose points must be the flow's initial points, in order) at step `t_index`.
pub fn pushforward_decompose(mu: &ParticleMeasure, flow: &FlowResult, t_index: usize) -> Result<TransportDecomposition> {
    if mu.points != *flow.initial_points() {
        return Err(Error::IndexMismatch);
    }
    let image = flow.image(t_index)?;
    let d = image.dim();
    let mut ac = (PointSet::new(d), Vec::new(), Vec::new());
    let mut singular = (PointSet::new(d), Vec::new(), Vec::new());
    for (j, x) in image.iter().enumerate() {
        let part = if flow.tau(j)?.hit_by(t_index) { &mut singular } else { &mut ac };
        part.0.push(x)?;
        part.1.push(mu.weights[j]);
        part.2.push(j);
    }
    Ok(TransportDecomposition {
        step: t_index,
        ac_part: ParticleMeasure { points: ac.0, weights: ac.1 },
        ac_indices: ac.2,
        singular_part: ParticleMeasure { points: singular.0, weights: singular.1 },
        singular_indices: singular.2,
    })
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter { name: "bounding box", reason: "needs lower < upper on every axis" });
        }
        Ok(BoundingBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Histogram density: `values[cell] = mass in cell / cell volume`, cells in
/// row-major order (first axis slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub bounds: BoundingBox,
    pub bins: usize,
    pub values: Vec<f64>,
    pub cell_volume: f64,
    /// Mass of points outside the box.
    pub out_of_box_mass: f64,
}

impl DensityGrid {
    /// Multi-index of a flat cell index.
    pub fn cell_index(&self, flat: usize) -> Vec<usize> {
        let d = self.bounds.dim();
        let mut idx = vec![0; d];
        let mut rest = flat;
        for axis in (0..d).rev() {
            idx[axis] = rest % self.bins;
            rest /= self.bins;
        }
        idx
    }

    /// `Σ value · volume`; the in-box mass.
    pub fn integral(&self) -> f64 {
        exact_sum(self.values.iter().map(|v| v * self.cell_volume))
    }
}

/// Histogram density estimate of `part` on `bounds` with `bins` cells per axis.
/// Points on the upper face belong to the last cell.
pub fn density_histogram(part: &ParticleMeasure, bounds: &BoundingBox, bins: usize) -> Result<DensityGrid> {
    if bins == 0 {
        return Err(Error::InvalidParameter { name: "bins", reason: "must be at least 1" });
    }
    let d = bounds.dim();
    if !part.is_empty() && part.points.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: part.points.dim() });
    }
    let cells = bins.checked_pow(d as u32).ok_or(Error::InvalidParameter { name: "bins", reason: "too many cells" })?;
    let widths: Vec<f64> = bounds.lower.iter().zip(&bounds.upper).map(|(l, u)| (u - l) / bins as f64).collect();
    let cell_volume: f64 = widths.iter().product();
    let mut mass: Vec<Vec<f64>> = vec![Vec::new(); cells];
    let mut outside = Vec::new();
    'points: for (x, &w) in part.points.iter().zip(&part.weights) {
        let mut flat = 0;
        for axis in 0..d {
            let (l, u) = (bounds.lower[axis], bounds.upper[axis]);
            if !(x[axis] >= l && x[axis] <= u) {
                outside.push(w);
                continue 'points;
            }
            let k = (libm::floor((x[axis] - l) / widths[axis]) as usize).min(bins - 1);
            flat = flat * bins + k;
        }
        mass[flat].push(w);
    }
    let values = mass.into_iter().map(|m| exact_sum(m) / cell_volume).collect();
    Ok(DensityGrid { bounds: bounds.clone(), bins, values, cell_volume, out_of_box_mass: exact_sum(outside) })
}

/// Largest distance from a singular-part point to its nearest point of
/// `boundary_cloud` (the images of a dense sample of boundary starts).
pub fn singular_support_distance(singular: &ParticleMeasure, boundary_cloud: &PointSet) -> Result<f64> {
    if singular.is_empty() {
        return Ok(0.0);
    }
    if boundary_cloud.is_empty() {
        return Err(Error::InvalidParameter { name: "boundary_cloud", reason: "empty while the singular part is not" });
    }
    if boundary_cloud.dim() != singular.points.dim() {
        return Err(Error::DimensionMismatch { expected: singular.points.dim(), found: boundary_cloud.dim() });
    }
    let mut worst = 0.0f64;
    for x in singular.points.iter() {
        let nearest = boundary_cloud.iter().map(|b| distance(x, b)).fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCount {
    pub epsilon: f64,
    /// Number of origin-anchored `ε`-boxes meeting the cloud.
    pub count: usize,
    /// `N(ε) · ε^{d−1}`.
    pub estimate: f64,
}

/// Box counts of the part of `points` inside the ball of radius `radius`.
pub fn hausdorff_boxcount(points: &PointSet, epsilons: &[f64], radius: f64) -> Result<Vec<BoxCount>> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter { name: "epsilons", reason: "need at least one scale" });
    }
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter { name: "epsilons", reason: "must be positive and finite" });
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter { name: "epsilons", reason: "must be strictly decreasing" });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter { name: "radius", reason: "must be positive" });
    }
    let d = points.dim();
    let inside: Vec<&[f64]> = points.iter().filter(|x| norm(x) <= radius).collect();
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let boxes: BTreeSet<Vec<i64>> =
            inside.iter().map(|x| x.iter().map(|v| libm::floor(v / eps) as i64).collect()).collect();
        let count = boxes.len();
        let estimate = count as f64 * libm::pow(eps, d as f64 - 1.0);
        out.push(BoxCount { epsilon: eps, count, estimate });
    }
    Ok(out)
}
