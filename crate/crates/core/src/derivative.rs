//! Jacobian of the flow map.
//!
//! Between boundary visits `∇φ_t(x)` follows the linearised SDE; at every
//! visit the component along the normal is killed, i.e. the matrix is
//! left-multiplied by the tangent projection `I − P`. In the half-space that
//! zeroes the last row. On the disk the projection is taken at the reflected
//! position on the unit circle.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeffs::CoefficientField;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::flow::{simulate_particle, FlowResult};
use crate::linalg::{last_axis_projection, Matrix};
use crate::noise::NoiseRealization;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTrack {
    pub particle: usize,
    /// `D_i ≈ ∇φ_{t_i}(x)` for `i = 0..=n_steps`.
    pub matrices: Vec<Matrix>,
    /// Steps at which the projection kill was applied.
    pub jump_times: Vec<usize>,
}

/// Maximal runs of steps with strictly positive distance to the boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExcursionDecomposition {
    /// Inclusive `(first, last)` step ranges, in order.
    pub intervals: Vec<(usize, usize)>,
}

fn check_gradients<C: CoefficientField>(flow: &FlowResult, coeffs: &C, particle: usize) -> Result<()> {
    if !coeffs.has_gradients() {
        return Err(Error::MissingGradients);
    }
    if coeffs.dim() != flow.domain().dim() {
        return Err(Error::DimensionMismatch { expected: flow.domain().dim(), found: coeffs.dim() });
    }
    if coeffs.noise_dim() != flow.noise().m() {
        return Err(Error::DimensionMismatch { expected: flow.noise().m(), found: coeffs.noise_dim() });
    }
    if particle >= flow.n_particles() {
        return Err(Error::ParticleOutOfRange { index: particle, len: flow.n_particles() });
    }
    if !flow.is_fully_recorded() {
        let missing = (0..=flow.grid().n_steps()).find(|i| flow.recorded_steps().binary_search(i).is_err());
        return Err(Error::NotRecorded { step: missing.unwrap_or(0) });
    }
    Ok(())
}

/// Euler factor of step `i`: `I + ∇a_0(x) dt + Σ_k ∇a_k(x) ΔW_k(i)` with `x = φ_{t_{i−1}}`.
struct EulerFactor {
    factor: Matrix,
    scratch: Matrix,
}

impl EulerFactor {
    fn new(d: usize) -> Self {
        EulerFactor { factor: Matrix::zeros(d, d), scratch: Matrix::zeros(d, d) }
    }

    fn compute<C: CoefficientField>(&mut self, coeffs: &C, x: &[f64], noise: &NoiseRealization, i: usize) -> Result<&Matrix> {
        let d = x.len();
        self.factor = Matrix::identity(d);
        coeffs.jacobian(0, x, &mut self.scratch)?;
        self.factor.add_scaled(&self.scratch, noise.grid().dt())?;
        for k in 0..noise.m() {
            coeffs.jacobian(k + 1, x, &mut self.scratch)?;
            self.factor.add_scaled(&self.scratch, noise.increment(k, i))?;
        }
        Ok(&self.factor)
    }
}

fn kill(domain: &DomainSpec, position: &[f64], d_mat: &mut Matrix) -> Result<()> {
    match domain {
        DomainSpec::HalfSpace { dim } => {
            d_mat.row_mut(dim - 1).fill(0.0);
            Ok(())
        }
        DomainSpec::UnitDisk => {
            let t = domain.tangent_projection(position)?;
            *d_mat = t.mul(d_mat)?;
            Ok(())
        }
    }
}

/// Derivative flow of one particle along a fully recorded [`FlowResult`].
///
/// Each step applies the Euler factor first and then, if the step was a
/// boundary visit, the projection kill. A particle starting on the boundary is
/// killed at step 0.
pub fn derivative_flow<C: CoefficientField>(flow: &FlowResult, coeffs: &C, particle: usize) -> Result<DerivativeTrack> {
    check_gradients(flow, coeffs, particle)?;
    let domain = flow.domain();
    let d = domain.dim();
    let n = flow.grid().n_steps();
    let flags = flow.reflection_flags(particle)?;

    let mut matrices = Vec::with_capacity(n + 1);
    let mut jump_times = Vec::new();
    let mut current = Matrix::identity(d);
    if flags[0] {
        kill(domain, flow.position(particle, 0)?, &mut current)?;
        jump_times.push(0);
    }
    matrices.push(current.clone());

    let mut euler = EulerFactor::new(d);
    let mut next = Matrix::zeros(d, d);
    for i in 1..=n {
        let f = euler.compute(coeffs, flow.position(particle, i - 1)?, flow.noise(), i)?;
        f.mul_into(&current, &mut next)?;
        core::mem::swap(&mut current, &mut next);
        if flags[i] {
            kill(domain, flow.position(particle, i)?, &mut current)?;
            jump_times.push(i);
        }
        matrices.push(current.clone());
    }
    Ok(DerivativeTrack { particle, matrices, jump_times })
}

/// The jump-free linear flow `U_{st}`: product of Euler factors over steps `(s, t]`.
pub fn linear_flow_u<C: CoefficientField>(
    flow: &FlowResult,
    coeffs: &C,
    particle: usize,
    s_index: usize,
    t_index: usize,
) -> Result<Matrix> {
    check_gradients(flow, coeffs, particle)?;
    flow.grid().check_index(t_index)?;
    if s_index > t_index {
        return Err(Error::StepOutOfRange { index: s_index, n_steps: t_index });
    }
    let d = flow.domain().dim();
    let mut u = Matrix::identity(d);
    let mut next = Matrix::zeros(d, d);
    let mut euler = EulerFactor::new(d);
    for i in s_index + 1..=t_index {
        let f = euler.compute(coeffs, flow.position(particle, i - 1)?, flow.noise(), i)?;
        f.mul_into(&u, &mut next)?;
        core::mem::swap(&mut u, &mut next);
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceJacobian {
    /// Column `j` is `(φ_T(x + h e_j) − φ_T(x − h e_j)) / 2h`.
    pub jacobian: Matrix,
    /// Some bumped run visited the boundary, so the central difference straddles a kill.
    pub reflected: bool,
}

/// Central-difference Jacobian of `x ↦ φ_T(x)` under a fixed noise realization.
pub fn finite_difference_jacobian<C: CoefficientField>(
    domain: &DomainSpec,
    coeffs: &C,
    x: &[f64],
    noise: &NoiseRealization,
    h: f64,
) -> Result<FiniteDifferenceJacobian> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter { name: "h", reason: "must be positive and finite" });
    }
    if !domain.contains(x)? || domain.on_boundary(x) {
        return Err(Error::InvalidParameter { name: "x", reason: "must be an interior point" });
    }
    let d = domain.dim();
    let n = noise.grid().n_steps();
    let recorded = [0, n];
    let mut jacobian = Matrix::zeros(d, d);
    let mut reflected = false;
    let mut bumped = x.to_vec();
    for j in 0..d {
        let mut ends = [vec![0.0; d], vec![0.0; d]];
        for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
            bumped.copy_from_slice(x);
            bumped[j] += sign * h;
            if !domain.contains(&bumped)? {
                return Err(Error::OutsideDomain { particle: j });
            }
            let path = simulate_particle(domain, coeffs, &bumped, noise, &recorded)?;
            reflected |= path_reflected(&path);
            ends[side].copy_from_slice(path_final(&path, d));
        }
        for i in 0..d {
            jacobian[(i, j)] = (ends[0][i] - ends[1][i]) / (2.0 * h);
        }
    }
    Ok(FiniteDifferenceJacobian { jacobian, reflected })
}

fn path_reflected(path: &crate::flow::ParticlePath) -> bool {
    path.flags().iter().any(|&f| f)
}

fn path_final(path: &crate::flow::ParticlePath, d: usize) -> &[f64] {
    let p = path.recorded_positions();
    &p[p.len() - d..]
}

/// Maximal step ranges on which the particle is strictly inside the domain.
pub fn excursions(flow: &FlowResult, particle: usize) -> Result<ExcursionDecomposition> {
    if particle >= flow.n_particles() {
        return Err(Error::ParticleOutOfRange { index: particle, len: flow.n_particles() });
    }
    let n = flow.grid().n_steps();
    let mut distances = Vec::with_capacity(n + 1);
    for i in 0..=n {
        distances.push(flow.domain().boundary_distance(flow.position(particle, i)?));
    }
    Ok(excursions_of(&distances))
}

/// Maximal runs of strictly positive entries.
pub fn excursions_of(boundary_distance: &[f64]) -> ExcursionDecomposition {
    let mut intervals = Vec::new();
    let mut start = None;
    for (i, &v) in boundary_distance.iter().enumerate() {
        match (v > 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                intervals.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, boundary_distance.len() - 1));
    }
    ExcursionDecomposition { intervals }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    /// `rank == d − 1`
    pub satisfied: bool,
}

/// Numerical rank of `left · u · right` against `d − 1`, with singular values
/// counted when `≥ tol · σ_max`.
pub fn rank_condition_check(u: &Matrix, left: &Matrix, right: &Matrix, tol: f64) -> Result<RankCheck> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", reason: "must be positive" });
    }
    let d = u.rows();
    for m in [u, left, right] {
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.cols() });
        }
    }
    let rank = left.mul(u)?.mul(right)?.rank(tol);
    Ok(RankCheck { rank, satisfied: d >= 1 && rank == d - 1 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorCheck {
    pub det_minor: f64,
    pub nondegenerate: bool,
}

/// Determinant of `u` with its last row and column deleted.
pub fn corollary_minor_check(u: &Matrix, tol: f64) -> Result<MinorCheck> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch { expected: u.rows(), found: u.cols() });
    }
    if u.rows() < 2 {
        return Err(Error::InvalidParameter { name: "d", reason: "needs d >= 2" });
    }
    let det_minor = u.leading_minor(u.rows() - 1).det()?;
    Ok(MinorCheck { det_minor, nondegenerate: libm::fabs(det_minor) > tol })
}

/// For `d = 2`: are `(a_{k,1}(x))_k` and `(⟨∇a_{k,2}(x), y⟩)_k` linearly independent?
///
/// Independence means the `2 × m` matrix of the two vectors has
/// `σ_2 > tol · σ_1`.
pub fn example2_independence_check<C: CoefficientField>(coeffs: &C, x: &[f64], y: &[f64], tol: f64) -> Result<bool> {
    if coeffs.dim() != 2 {
        return Err(Error::UnsupportedDomain("independence check needs d = 2"));
    }
    if x.len() != 2 || y.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: if x.len() != 2 { x.len() } else { y.len() } });
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter { name: "y", reason: "direction must be nonzero" });
    }
    if !coeffs.has_gradients() {
        return Err(Error::MissingGradients);
    }
    let m = coeffs.noise_dim();
    let mut pair = Matrix::zeros(2, m);
    let mut column = [0.0; 2];
    let mut jac = Matrix::zeros(2, 2);
    for k in 0..m {
        coeffs.eval(k + 1, x, &mut column);
        coeffs.jacobian(k + 1, x, &mut jac)?;
        pair[(0, k)] = column[0];
        pair[(1, k)] = jac[(1, 0)] * y[0] + jac[(1, 1)] * y[1];
    }
    let sv = pair.singular_values();
    Ok(match sv.as_slice() {
        [s1, s2, ..] => *s1 > 0.0 && *s2 > tol * s1,
        _ => false,
    })
}

/// Rank condition evaluated on each discrete excursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcursionRank {
    /// Step where the excursion leaves the boundary (0 for the leading one).
    pub alpha: usize,
    /// Step where it returns (or the horizon).
    pub beta: usize,
    pub check: RankCheck,
}

/// `rank(P(φ_β) U_{αβ} P(φ_α))` on every excursion of the particle, where
/// `P` is the tangent projection (`I − e_d e_dᵀ` in the half-space).
pub fn excursion_rank_profile<C: CoefficientField>(
    flow: &FlowResult,
    coeffs: &C,
    particle: usize,
    tol: f64,
) -> Result<Vec<ExcursionRank>> {
    let n = flow.grid().n_steps();
    let domain = flow.domain();
    let d = domain.dim();
    let projection_at = |i: usize| -> Result<Matrix> {
        match domain {
            DomainSpec::HalfSpace { .. } => Matrix::identity(d).sub(&last_axis_projection(d)),
            DomainSpec::UnitDisk => Ok(crate::linalg::complement_projection(flow.position(particle, i)?)),
        }
    };
    let mut out = Vec::new();
    for (first, last) in excursions(flow, particle)?.intervals {
        let alpha = first.saturating_sub(1);
        let beta = (last + 1).min(n);
        let u = linear_flow_u(flow, coeffs, particle, alpha, beta)?;
        let check = rank_condition_check(&u, &projection_at(beta)?, &projection_at(alpha)?, tol)?;
        out.push(ExcursionRank { alpha, beta, check });
    }
    Ok(out)
}
