//! Reflecting domains: the half-space `R^{d-1} × [0, ∞)` and the closed unit disk.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{complement_projection, Matrix};
use crate::points::norm;

/// Slack on `‖x‖ ≤ 1` for the disk; radial projection can land an ulp outside.
pub const DISK_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSpec {
    /// `{x ∈ R^d : x^d ≥ 0}` with inward normal `e_d`.
    HalfSpace { dim: usize },
    /// `{x ∈ R^2 : ‖x‖ ≤ 1}` with inward normal `−x` on the unit circle.
    UnitDisk,
}

impl DomainSpec {
    pub fn half_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "half-space dimension must be at least 1" });
        }
        Ok(DomainSpec::HalfSpace { dim })
    }

    pub fn dim(&self) -> usize {
        match *self {
            DomainSpec::HalfSpace { dim } => dim,
            DomainSpec::UnitDisk => 2,
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Membership in the closed domain. Boundary points are members.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_point(x)?;
        Ok(match self {
            DomainSpec::HalfSpace { dim } => x[dim - 1] >= 0.0,
            DomainSpec::UnitDisk => norm(x) <= 1.0 + DISK_SLACK,
        })
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::HalfSpace { dim } => x[dim - 1] == 0.0,
            DomainSpec::UnitDisk => libm::fabs(norm(x) - 1.0) <= DISK_SLACK,
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::HalfSpace { dim } => x[dim - 1],
            DomainSpec::UnitDisk => 1.0 - norm(x),
        }
    }

    /// Unit inward normal at a boundary point.
    pub fn inward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        match self {
            DomainSpec::HalfSpace { dim } => {
                let mut n = vec![0.0; *dim];
                n[dim - 1] = 1.0;
                Ok(n)
            }
            DomainSpec::UnitDisk => {
                let r = norm(x);
                if r == 0.0 {
                    return Err(Error::InvalidParameter { name: "x", reason: "origin has no normal" });
                }
                Ok(x.iter().map(|v| -v / r).collect())
            }
        }
    }

    /// Orthoprojection onto the tangent space at boundary point `x`
    /// (the complement of the normal).
    pub fn tangent_projection(&self, x: &[f64]) -> Result<Matrix> {
        Ok(complement_projection(&self.inward_normal(x)?))
    }

    /// Project a proposal back onto the closed domain in place. Returns the
    /// local-time increment and whether the step counts as a reflection event.
    #[inline]
    pub fn reflect_in_place(&self, z: &mut [f64]) -> (f64, bool) {
        match self {
            DomainSpec::HalfSpace { dim } => {
                let last = &mut z[dim - 1];
                if *last > 0.0 {
                    (0.0, false)
                } else {
                    let push = 0.0 - *last;
                    *last = 0.0;
                    (push, true)
                }
            }
            DomainSpec::UnitDisk => {
                let r = norm(z);
                if r < 1.0 {
                    (0.0, false)
                } else {
                    z.iter_mut().for_each(|v| *v /= r);
                    (r - 1.0, true)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let h = DomainSpec::half_space(2).unwrap();
        assert!(h.contains(&[3.0, 0.0]).unwrap());
        assert!(!h.contains(&[3.0, -0.1]).unwrap());
        assert!(h.contains(&[-3.0, 0.1]).unwrap());
        let disk = DomainSpec::UnitDisk;
        assert!(disk.contains(&[0.6, 0.8]).unwrap());
        assert!(disk.on_boundary(&[0.6, 0.8]));
        assert!(!disk.contains(&[0.8, 0.8]).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let h = DomainSpec::half_space(3).unwrap();
        assert_eq!(h.contains(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 3, found: 2 }));
        assert!(DomainSpec::UnitDisk.contains(&[0.0]).is_err());
        assert!(DomainSpec::half_space(0).is_err());
        assert_eq!(h.contains(&[0.0, f64::NAN, 1.0]), Err(Error::NonFinite));
    }

    #[test]
    fn normals_are_unit() {
        let disk = DomainSpec::UnitDisk;
        for k in 0..16 {
            let a = k as f64 * 0.39;
            let x = [libm::cos(a), libm::sin(a)];
            let n = disk.inward_normal(&x).unwrap();
            assert!(libm::fabs(norm(&n) - 1.0) < 1e-15);
            assert!(n[0] * x[0] + n[1] * x[1] < 0.0);
        }
        assert_eq!(DomainSpec::half_space(3).unwrap().inward_normal(&[1.0, 2.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
    }
}
