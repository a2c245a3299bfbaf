use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A cloud of points in `R^d`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet { dim, coords: Vec::new() }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "must be at least 1" });
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut set = PointSet::new(dim);
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: p.len() });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 { 0 } else { self.coords.len() / self.dim }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    match x {
        [a, b] => libm::hypot(*a, *b),
        _ => libm::sqrt(x.iter().map(|v| v * v).sum()),
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    match (a, b) {
        ([a0, a1], [b0, b1]) => libm::hypot(a0 - b0, a1 - b1),
        _ => libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()),
    }
}
