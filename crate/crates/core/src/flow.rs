//! The coupled flow `x ↦ φ_t(x)`: every particle sees the same increments.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::coeffs::CoefficientField;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::NoiseRealization;
use crate::points::{distance, PointSet};

/// First grid index at which a particle visits the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HittingTime {
    At(usize),
    Never,
}

impl HittingTime {
    pub fn index(self) -> Option<usize> {
        match self {
            HittingTime::At(i) => Some(i),
            HittingTime::Never => None,
        }
    }

    /// `τ ≤ i`
    pub fn hit_by(self, i: usize) -> bool {
        matches!(self, HittingTime::At(t) if t <= i)
    }
}

/// Which steps keep positions and local times. Reflection flags and hitting
/// times are tracked at every step regardless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    #[default]
    Full,
    /// Every `n`-th step, plus the final one.
    Stride(usize),
    /// Only the initial and final steps.
    Final,
}

impl Recording {
    pub fn steps(self, n_steps: usize) -> Result<Vec<usize>> {
        let mut steps: Vec<usize> = match self {
            Recording::Full => (0..=n_steps).collect(),
            Recording::Stride(0) => {
                return Err(Error::InvalidParameter { name: "stride", reason: "must be at least 1" })
            }
            Recording::Stride(s) => (0..=n_steps).step_by(s).collect(),
            Recording::Final => vec![0],
        };
        if steps.last() != Some(&n_steps) {
            steps.push(n_steps);
        }
        Ok(steps)
    }
}

/// One simulated particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePath {
    positions: Vec<f64>,
    local_times: Vec<f64>,
    flags: Vec<bool>,
    tau: HittingTime,
}

impl ParticlePath {
    /// Positions at the recorded steps, concatenated.
    pub fn recorded_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn recorded_local_times(&self) -> &[f64] {
        &self.local_times
    }

    /// Reflection flag at every step `0..=n_steps`.
    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn tau(&self) -> HittingTime {
        self.tau
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    domain: DomainSpec,
    noise: NoiseRealization,
    initial_points: PointSet,
    recorded: Vec<usize>,
    paths: Vec<ParticlePath>,
}

fn check_inputs<C: CoefficientField>(
    domain: &DomainSpec,
    coeffs: &C,
    noise: &NoiseRealization,
) -> Result<()> {
    if coeffs.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), found: coeffs.dim() });
    }
    if noise.m() != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch { expected: coeffs.noise_dim(), found: noise.m() });
    }
    Ok(())
}

/// Validate every input of [`simulate_flow`] without simulating.
pub fn validate_flow_inputs<C: CoefficientField>(
    domain: &DomainSpec,
    coeffs: &C,
    initial_points: &PointSet,
    noise: &NoiseRealization,
) -> Result<()> {
    check_inputs(domain, coeffs, noise)?;
    if initial_points.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), found: initial_points.dim() });
    }
    for (j, x) in initial_points.iter().enumerate() {
        if !domain.contains(x)? {
            return Err(Error::OutsideDomain { particle: j });
        }
    }
    Ok(())
}

/// Reflected Euler scheme for one starting point.
///
/// Each step proposes `z = φ + a_0(φ) dt + Σ_k a_k(φ) ΔW_k` and projects `z`
/// back onto the domain. `recorded` must be sorted and contain 0 and `n_steps`.
pub fn simulate_particle<C: CoefficientField>(
    domain: &DomainSpec,
    coeffs: &C,
    x0: &[f64],
    noise: &NoiseRealization,
    recorded: &[usize],
) -> Result<ParticlePath> {
    check_inputs(domain, coeffs, noise)?;
    if !domain.contains(x0)? {
        return Err(Error::OutsideDomain { particle: 0 });
    }
    let d = domain.dim();
    let m = noise.m();
    let n = noise.grid().n_steps();
    let dt = noise.grid().dt();

    let mut positions = Vec::with_capacity(recorded.len() * d);
    let mut local_times = Vec::with_capacity(recorded.len());
    let mut flags = Vec::with_capacity(n + 1);

    let mut phi = x0.to_vec();
    let mut z = vec![0.0; d];
    let mut column = vec![0.0; d];
    let mut xi = 0.0;
    let start_on_boundary = domain.on_boundary(&phi);
    flags.push(start_on_boundary);
    let mut tau = if start_on_boundary { HittingTime::At(0) } else { HittingTime::Never };
    let mut next_record = recorded.iter().copied().peekable();
    if next_record.peek() == Some(&0) {
        positions.extend_from_slice(&phi);
        local_times.push(xi);
        next_record.next();
    }

    for i in 1..=n {
        coeffs.eval(0, &phi, &mut column);
        for c in 0..d {
            z[c] = phi[c] + column[c] * dt;
        }
        for k in 0..m {
            let dw = noise.increment(k, i);
            coeffs.eval(k + 1, &phi, &mut column);
            for c in 0..d {
                z[c] += column[c] * dw;
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (push, reflected) = domain.reflect_in_place(&mut z);
        xi += push;
        core::mem::swap(&mut phi, &mut z);
        flags.push(reflected);
        if reflected && tau == HittingTime::Never {
            tau = HittingTime::At(i);
        }
        if next_record.peek() == Some(&i) {
            positions.extend_from_slice(&phi);
            local_times.push(xi);
            next_record.next();
        }
    }
    Ok(ParticlePath { positions, local_times, flags, tau })
}

/// Simulate every initial point under one shared noise realization.
pub fn simulate_flow<C: CoefficientField>(
    domain: &DomainSpec,
    coeffs: &C,
    initial_points: &PointSet,
    noise: &NoiseRealization,
    recording: Recording,
) -> Result<FlowResult> {
    validate_flow_inputs(domain, coeffs, initial_points, noise)?;
    let recorded = recording.steps(noise.grid().n_steps())?;
    let paths = initial_points
        .iter()
        .enumerate()
        .map(|(j, x)| {
            simulate_particle(domain, coeffs, x, noise, &recorded).map_err(|e| match e {
                Error::OutsideDomain { .. } => Error::OutsideDomain { particle: j },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FlowResult::from_paths(*domain, noise.clone(), initial_points.clone(), recorded, paths)
}

impl FlowResult {
    /// Assemble from per-particle paths produced by [`simulate_particle`]
    /// with the same `recorded` steps (e.g. by a parallel driver).
    pub fn from_paths(
        domain: DomainSpec,
        noise: NoiseRealization,
        initial_points: PointSet,
        recorded: Vec<usize>,
        paths: Vec<ParticlePath>,
    ) -> Result<Self> {
        if paths.len() != initial_points.len() {
            return Err(Error::IndexMismatch);
        }
        let n = noise.grid().n_steps();
        let d = domain.dim();
        if recorded.first() != Some(&0) || recorded.last() != Some(&n) || recorded.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter { name: "recorded", reason: "must be increasing from 0 to n_steps" });
        }
        for p in &paths {
            if p.flags.len() != n + 1 || p.local_times.len() != recorded.len() || p.positions.len() != recorded.len() * d {
                return Err(Error::IndexMismatch);
            }
        }
        Ok(FlowResult { domain, noise, initial_points, recorded, paths })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn grid(&self) -> &TimeGrid {
        self.noise.grid()
    }

    pub fn noise(&self) -> &NoiseRealization {
        &self.noise
    }

    pub fn initial_points(&self) -> &PointSet {
        &self.initial_points
    }

    pub fn n_particles(&self) -> usize {
        self.paths.len()
    }

    pub fn recorded_steps(&self) -> &[usize] {
        &self.recorded
    }

    pub fn is_fully_recorded(&self) -> bool {
        self.recorded.len() == self.grid().n_steps() + 1
    }

    fn slot(&self, i: usize) -> Result<usize> {
        if self.is_fully_recorded() {
            self.grid().check_index(i)?;
            return Ok(i);
        }
        self.grid().check_index(i)?;
        self.recorded.binary_search(&i).map_err(|_| Error::NotRecorded { step: i })
    }

    fn path(&self, j: usize) -> Result<&ParticlePath> {
        self.paths.get(j).ok_or(Error::ParticleOutOfRange { index: j, len: self.paths.len() })
    }

    /// `φ_{t_i}(x_j)`.
    pub fn position(&self, j: usize, i: usize) -> Result<&[f64]> {
        let d = self.domain.dim();
        let s = self.slot(i)?;
        Ok(&self.path(j)?.positions[s * d..(s + 1) * d])
    }

    /// `ξ(t_i, x_j)`.
    pub fn local_time(&self, j: usize, i: usize) -> Result<f64> {
        let s = self.slot(i)?;
        Ok(self.path(j)?.local_times[s])
    }

    /// Whether step `i` of particle `j` was a boundary visit (step 0: started on the boundary).
    pub fn reflected(&self, j: usize, i: usize) -> Result<bool> {
        self.grid().check_index(i)?;
        Ok(self.path(j)?.flags[i])
    }

    pub fn reflection_flags(&self, j: usize) -> Result<&[bool]> {
        Ok(&self.path(j)?.flags)
    }

    pub fn tau(&self, j: usize) -> Result<HittingTime> {
        Ok(self.path(j)?.tau)
    }

    /// The image `{φ_{t_i}(x_j)}_j` as a point set.
    pub fn image(&self, i: usize) -> Result<PointSet> {
        let d = self.domain.dim();
        let s = self.slot(i)?;
        let mut coords = Vec::with_capacity(self.paths.len() * d);
        for p in &self.paths {
            coords.extend_from_slice(&p.positions[s * d..(s + 1) * d]);
        }
        PointSet::from_flat(d, coords)
    }
}

/// `(particle, τ)` for every particle.
pub fn first_hitting_times(flow: &FlowResult) -> Vec<(usize, HittingTime)> {
    flow.paths.iter().enumerate().map(|(j, p)| (j, p.tau)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoalescencePair {
    pub first: usize,
    pub second: usize,
    /// First recorded step with `‖φ(x_first) − φ(x_second)‖ ≤ merge_tol`.
    pub merge_step: usize,
    /// Distance stays within `merge_tol` at every later recorded step.
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceReport {
    pub merge_tol: f64,
    /// Sorted by `(first, second)`, `first < second`.
    pub pairs: Vec<CoalescencePair>,
}

/// Default merge tolerance `10 √dt`.
pub fn default_merge_tol(grid: &TimeGrid) -> f64 {
    10.0 * libm::sqrt(grid.dt())
}

/// All pairs that come within `merge_tol` of each other at some recorded step.
///
/// Candidate pairs are found with a uniform hash grid of cell size
/// `merge_tol`; the output equals the exhaustive pairwise scan.
pub fn coalescence_report(flow: &FlowResult, merge_tol: f64) -> Result<CoalescenceReport> {
    if !(merge_tol > 0.0) || !merge_tol.is_finite() {
        return Err(Error::InvalidParameter { name: "merge_tol", reason: "must be positive and finite" });
    }
    let d = flow.domain.dim();
    let n_particles = flow.n_particles();
    let mut merged: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    let mut key = vec![0i64; d];

    for (slot, &step) in flow.recorded.iter().enumerate() {
        cells.clear();
        for j in 0..n_particles {
            let x = &flow.paths[j].positions[slot * d..(slot + 1) * d];
            for c in 0..d {
                key[c] = libm::floor(x[c] / merge_tol) as i64;
            }
            cells.entry(key.clone()).or_default().push(j);
        }
        for (cell, members) in &cells {
            for_each_neighbor(cell, |neighbor| {
                let Some(others) = cells.get(neighbor) else { return };
                for &a in members {
                    for &b in others {
                        if a >= b || merged.contains_key(&(a, b)) {
                            continue;
                        }
                        let xa = &flow.paths[a].positions[slot * d..(slot + 1) * d];
                        let xb = &flow.paths[b].positions[slot * d..(slot + 1) * d];
                        if distance(xa, xb) <= merge_tol {
                            merged.insert((a, b), step);
                        }
                    }
                }
            });
        }
    }

    let pairs = merged
        .into_iter()
        .map(|((a, b), merge_step)| {
            let start = flow.recorded.binary_search(&merge_step).unwrap_or(0);
            let persistent = (start..flow.recorded.len()).all(|s| {
                let xa = &flow.paths[a].positions[s * d..(s + 1) * d];
                let xb = &flow.paths[b].positions[s * d..(s + 1) * d];
                distance(xa, xb) <= merge_tol
            });
            CoalescencePair { first: a, second: b, merge_step, persistent }
        })
        .collect();
    Ok(CoalescenceReport { merge_tol, pairs })
}

fn for_each_neighbor(cell: &[i64], mut f: impl FnMut(&[i64])) {
    let d = cell.len();
    let mut offset = vec![-1i64; d];
    let mut neighbor = vec![0i64; d];
    loop {
        for c in 0..d {
            neighbor[c] = cell[c].saturating_add(offset[c]);
        }
        f(&neighbor);
        let mut c = 0;
        loop {
            if c == d {
                return;
            }
            offset[c] += 1;
            if offset[c] <= 1 {
                break;
            }
            offset[c] = -1;
            c += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageLabel {
    /// Not yet hit: the image point is interior to `φ_t(domain)`.
    Interior,
    /// `τ ≤ t`: the image point lies on the image of the boundary.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageClassification {
    pub step: usize,
    pub labels: Vec<ImageLabel>,
    pub points: PointSet,
}

impl ImageClassification {
    /// Image points carrying `label`.
    pub fn select(&self, label: ImageLabel) -> PointSet {
        let mut out = PointSet::new(self.points.dim());
        for (x, l) in self.points.iter().zip(&self.labels) {
            if *l == label {
                out.push(x).expect("same dimension");
            }
        }
        out
    }
}

/// Label each image point at step `t_index` by whether its particle has hit the boundary.
pub fn classify_image(flow: &FlowResult, t_index: usize) -> Result<ImageClassification> {
    let points = flow.image(t_index)?;
    let labels = flow
        .paths
        .iter()
        .map(|p| if p.tau.hit_by(t_index) { ImageLabel::Boundary } else { ImageLabel::Interior })
        .collect();
    Ok(ImageClassification { step: t_index, labels, points })
}
