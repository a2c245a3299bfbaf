//! Reflection primitives and the exact one-dimensional Skorokhod map.

use alloc::vec::Vec;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};

/// Outcome of projecting one Euler proposal back onto the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedStep {
    pub position: Vec<f64>,
    /// Local-time increase, `≥ 0`.
    pub xi_increment: f64,
    /// The proposal left the open domain (landing exactly on the boundary counts).
    pub reflected: bool,
}

/// Reflected path and local time of `x0 + w` on `[0, ∞)`:
/// `ξ_i = max(0, max_{j≤i} −(x0 + w_j))`, `φ_i = x0 + w_i + ξ_i`.
///
/// `w` is the driving path sampled on the grid with `w[0] = 0`.
pub fn skorokhod_map_1d(x0: f64, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(x0 >= 0.0) || !x0.is_finite() {
        return Err(Error::InvalidParameter { name: "x0", reason: "must be a finite nonnegative number" });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if w.first().is_some_and(|&w0| w0 != 0.0) {
        return Err(Error::InvalidParameter { name: "w", reason: "path must start at 0" });
    }
    let mut phi = Vec::with_capacity(w.len());
    let mut xi = Vec::with_capacity(w.len());
    let mut running = 0.0f64;
    for &wi in w {
        running = f64::max(running, -(x0 + wi));
        xi.push(running);
        // x0 + w_i + ξ_i can round to a tiny negative at the running minimum.
        phi.push(f64::max(x0 + wi + running, 0.0));
    }
    Ok((phi, xi))
}

fn checked(z: &[f64], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: z.len() });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Projection onto `{z^d ≥ 0}`: the last coordinate is clamped to 0 and the
/// deficit becomes local time.
pub fn reflect_step_halfspace(z: &[f64]) -> Result<ReflectedStep> {
    if z.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    checked(z, z.len())?;
    reflect_with(DomainSpec::HalfSpace { dim: z.len() }, z)
}

/// Radial projection onto the closed unit disk.
pub fn reflect_step_disk(z: &[f64]) -> Result<ReflectedStep> {
    checked(z, 2)?;
    reflect_with(DomainSpec::UnitDisk, z)
}

fn reflect_with(domain: DomainSpec, z: &[f64]) -> Result<ReflectedStep> {
    let mut position = z.to_vec();
    let (xi_increment, reflected) = domain.reflect_in_place(&mut position);
    Ok(ReflectedStep { position, xi_increment, reflected })
}

impl DomainSpec {
    /// Per-step reflection for this domain.
    pub fn reflect_step(&self, z: &[f64]) -> Result<ReflectedStep> {
        checked(z, self.dim())?;
        reflect_with(*self, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        let w = [0.0, 1.0, -1.0, 0.0];
        let (phi, xi) = skorokhod_map_1d(0.0, &w).unwrap();
        assert_eq!(phi, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(xi, vec![0.0, 0.0, 1.0, 1.0]);
        let (phi, xi) = skorokhod_map_1d(0.5, &w).unwrap();
        assert_eq!(phi, vec![0.5, 1.5, 0.0, 1.0]);
        assert_eq!(xi, vec![0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn no_reflection_far_from_zero() {
        let w = [0.0, -2.0, 1.0, -4.5, 3.0];
        let (phi, xi) = skorokhod_map_1d(5.0, &w).unwrap();
        assert!(xi.iter().all(|&v| v == 0.0));
        for (p, wi) in phi.iter().zip(w) {
            assert_eq!(*p, 5.0 + wi);
        }
    }

    #[test]
    fn rejects_negative_start() {
        assert!(skorokhod_map_1d(-0.1, &[0.0, 1.0]).is_err());
        assert!(skorokhod_map_1d(0.0, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn halfspace_steps() {
        let s = reflect_step_halfspace(&[0.3, 0.5]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![0.3, 0.5], xi_increment: 0.0, reflected: false });
        let s = reflect_step_halfspace(&[0.3, -0.2]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![0.3, 0.0], xi_increment: 0.2, reflected: true });
        let s = reflect_step_halfspace(&[1.0, 0.0]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![1.0, 0.0], xi_increment: 0.0, reflected: true });
        assert!(reflect_step_halfspace(&[f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn disk_steps() {
        let s = reflect_step_disk(&[0.5, 0.5]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![0.5, 0.5], xi_increment: 0.0, reflected: false });
        let s = reflect_step_disk(&[1.5, 0.0]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![1.0, 0.0], xi_increment: 0.5, reflected: true });
        let s = reflect_step_disk(&[0.0, 2.0]).unwrap();
        assert_eq!(s, ReflectedStep { position: vec![0.0, 1.0], xi_increment: 1.0, reflected: true });
        assert!(reflect_step_disk(&[0.0, f64::NAN]).is_err());
        assert!(reflect_step_disk(&[0.0, 1.0, 2.0]).is_err());
    }

    fn path(increments: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0];
        let mut acc = 0.0;
        for dw in increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    fn iterate(x0: f64, increments: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let (mut phi, mut xi, mut flags) = (vec![x0], vec![0.0], vec![x0 == 0.0]);
        for dw in increments {
            let s = reflect_step_halfspace(&[phi.last().unwrap() + dw]).unwrap();
            phi.push(s.position[0]);
            xi.push(xi.last().unwrap() + s.xi_increment);
            flags.push(s.reflected);
        }
        (phi, xi, flags)
    }

    proptest! {
        #[test]
        fn iterated_projection_is_the_skorokhod_map(
            x0 in 0.0f64..3.0,
            incs in proptest::collection::vec(-1.0f64..1.0, 1..200),
        ) {
            let (phi, xi, flags) = iterate(x0, &incs);
            let (phi_ref, xi_ref) = skorokhod_map_1d(x0, &path(&incs)).unwrap();
            for i in 0..phi.len() {
                prop_assert!((phi[i] - phi_ref[i]).abs() <= 1e-12);
                prop_assert!((xi[i] - xi_ref[i]).abs() <= 1e-12);
                prop_assert!(phi[i] >= 0.0);
                // local time only grows at boundary visits
                if i > 0 && xi[i] > xi[i - 1] {
                    prop_assert!(flags[i] && phi[i] == 0.0);
                }
            }
        }

        #[test]
        fn monotone_and_merging(
            x0 in 0.0f64..2.0,
            gap in 0.0f64..2.0,
            incs in proptest::collection::vec(-1.0f64..1.0, 1..200),
        ) {
            let (a, _, _) = iterate(x0, &incs);
            let (b, _, _) = iterate(x0 + gap, &incs);
            let mut met = false;
            for i in 0..a.len() {
                prop_assert!(a[i] <= b[i]);
                if met {
                    prop_assert_eq!(a[i], b[i]);
                }
                met |= a[i] == b[i];
            }
        }

        #[test]
        fn disk_projection_lands_in_disk(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let s = reflect_step_disk(&[x, y]).unwrap();
            prop_assert!(DomainSpec::UnitDisk.contains(&s.position).unwrap());
            prop_assert!(s.xi_increment >= 0.0);
            if s.xi_increment > 0.0 {
                prop_assert!(s.reflected && DomainSpec::UnitDisk.on_boundary(&s.position));
            }
        }
    }
}
