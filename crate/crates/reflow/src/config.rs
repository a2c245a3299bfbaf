//! JSON experiment configuration.
//!
//! Parsing is strict: unknown fields are rejected so a misspelled parameter
//! fails loudly instead of silently falling back to a default.

use std::path::PathBuf;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use reflow_core::coeffs::{presets, Monomial, Polynomial, PolynomialField};
use reflow_core::{DomainSpec, Matrix, PointSet, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Flow,
    Derivative,
    Transport,
    Coalesce,
    Hausdorff,
    Oracle1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    HalfSpace { dim: usize },
    UnitDisk,
}

/// `[exponents, coefficient]`
pub type Term = (Vec<u32>, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", deny_unknown_fields)]
pub enum CoefficientConfig {
    /// All coefficients zero; `m` defaults to the dimension.
    #[serde(rename = "frozen")]
    Frozen {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    /// `a_0 = 0`, `a_k = e_k`, `m = d`.
    #[serde(rename = "bm")]
    Bm,
    /// `a_0(x) = A x`, `a_k = noise_scale · e_k`.
    #[serde(rename = "linear-drift", alias = "linear_drift")]
    LinearDrift { matrix: Vec<Vec<f64>>, noise_scale: f64 },
    #[serde(rename = "example2")]
    Example2,
    /// Polynomial components: `drift[i]` is the term list of `a_{0,i}`,
    /// `diffusion[k][i]` the term list of `a_{k+1,i}`.
    #[serde(rename = "inline")]
    Inline { drift: Vec<Vec<Term>>, diffusion: Vec<Vec<Vec<Term>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPointsConfig {
    Explicit { points: Vec<Vec<f64>> },
    /// Every `lower + k · spacing` inside `[lower, upper]` and the domain.
    Lattice { lower: Vec<f64>, upper: Vec<f64>, spacing: f64 },
    /// `count` i.i.d. uniform points of `[lower, upper] ∩ domain`.
    Uniform { lower: Vec<f64>, upper: Vec<f64>, count: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bumps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: DomainConfig,
    pub coefficients: CoefficientConfig,
    pub grid: GridConfig,
    pub initial_points: InitialPointsConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

pub const DEFAULT_EPSILONS: [f64; 3] = [0.04, 0.02, 0.01];
pub const DEFAULT_BUMPS: [f64; 2] = [1e-3, 1e-4];
pub const DEFAULT_RADIUS: f64 = 2.0;
pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_BOUNDARY_SPACING: f64 = 0.01;

/// Everything a run needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub domain: DomainSpec,
    pub coeffs: PolynomialField,
    pub grid: TimeGrid,
    pub points: PointSet,
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), RunError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    /// Checks every parameter and builds the domain, coefficients, grid and
    /// initial points.
    pub fn resolve(&self) -> Result<Resolved, RunError> {
        let domain = match self.domain {
            DomainConfig::HalfSpace { dim } => DomainSpec::half_space(dim).map_err(|e| invalid(e.to_string()))?,
            DomainConfig::UnitDisk => DomainSpec::UnitDisk,
        };
        let d = domain.dim();
        positive("grid.t_end", self.grid.t_end)?;
        let grid = TimeGrid::new(self.grid.t_end, self.grid.n_steps).map_err(|e| invalid(format!("grid: {e}")))?;
        let coeffs = self.build_coefficients(d)?;
        self.check_params(&grid)?;
        let points = self.build_points(&domain)?;
        if points.is_empty() {
            return Err(invalid("initial_points: no point lies in the domain"));
        }
        if self.experiment == ExperimentKind::Oracle1d
            && (self.domain != (DomainConfig::HalfSpace { dim: 1 }) || self.coefficients != CoefficientConfig::Bm)
        {
            return Err(invalid("oracle1d needs domain half_space with dim 1 and the bm preset"));
        }
        Ok(Resolved { domain, coeffs, grid, points })
    }

    fn build_coefficients(&self, d: usize) -> Result<PolynomialField, RunError> {
        let built = match &self.coefficients {
            CoefficientConfig::Frozen { m } => {
                let m = m.unwrap_or(d);
                if m == 0 {
                    return Err(invalid("coefficients.m must be at least 1"));
                }
                presets::frozen(d, m)
            }
            CoefficientConfig::Bm => presets::brownian(d),
            CoefficientConfig::LinearDrift { matrix, noise_scale } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(invalid(format!("coefficients.matrix must be {d}x{d}")));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) || !noise_scale.is_finite() {
                    return Err(invalid("coefficients: non-finite entry"));
                }
                let a = Matrix::from_rows(matrix).map_err(|e| invalid(e.to_string()))?;
                presets::linear_drift(&a, *noise_scale)
            }
            CoefficientConfig::Example2 => {
                if d != 2 {
                    return Err(invalid("example2 preset needs a two-dimensional domain"));
                }
                Ok(presets::example2())
            }
            CoefficientConfig::Inline { drift, diffusion } => {
                if diffusion.is_empty() {
                    return Err(invalid("coefficients.diffusion needs at least one column"));
                }
                let mut columns = vec![polynomials(drift, d, "drift")?];
                for (k, col) in diffusion.iter().enumerate() {
                    columns.push(polynomials(col, d, &format!("diffusion[{k}]"))?);
                }
                PolynomialField::new(d, columns)
            }
        };
        built.map_err(|e| invalid(format!("coefficients: {e}")))
    }

    fn check_params(&self, grid: &TimeGrid) -> Result<(), RunError> {
        let p = &self.params;
        if let Some(v) = p.merge_tol {
            positive("params.merge_tol", v)?;
        }
        if let Some(eps) = &p.epsilons {
            if eps.is_empty() {
                return Err(invalid("params.epsilons must not be empty"));
            }
            for &e in eps {
                positive("params.epsilons", e)?;
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("params.epsilons must be strictly decreasing"));
            }
        }
        if p.bins == Some(0) {
            return Err(invalid("params.bins must be at least 1"));
        }
        if let Some(bumps) = &p.bumps {
            if bumps.is_empty() {
                return Err(invalid("params.bumps must not be empty"));
            }
            for &h in bumps {
                positive("params.bumps", h)?;
            }
        }
        if let Some(r) = p.radius {
            positive("params.radius", r)?;
        }
        if let Some(t) = p.t_index {
            if t > grid.n_steps() {
                return Err(invalid(format!("params.t_index {t} exceeds n_steps {}", grid.n_steps())));
            }
        }
        if p.record_stride == Some(0) {
            return Err(invalid("params.record_stride must be at least 1"));
        }
        if let Some(v) = p.rank_tol {
            positive("params.rank_tol", v)?;
        }
        if let Some(v) = p.boundary_spacing {
            positive("params.boundary_spacing", v)?;
        }
        Ok(())
    }

    fn build_points(&self, domain: &DomainSpec) -> Result<PointSet, RunError> {
        let d = domain.dim();
        let check_box = |lower: &[f64], upper: &[f64]| -> Result<(), RunError> {
            if lower.len() != d || upper.len() != d {
                return Err(invalid(format!("initial_points: box corners must have {d} coordinates")));
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                return Err(invalid("initial_points: need lower <= upper"));
            }
            Ok(())
        };
        let mut set = PointSet::new(d);
        match &self.initial_points {
            InitialPointsConfig::Explicit { points } => {
                for (j, p) in points.iter().enumerate() {
                    if p.len() != d {
                        return Err(invalid(format!("initial_points[{j}] has {} coordinates, expected {d}", p.len())));
                    }
                    // Points outside the domain are a runtime domain violation, reported by the flow.
                    set.push(p).map_err(|e| invalid(e.to_string()))?;
                }
            }
            InitialPointsConfig::Lattice { lower, upper, spacing } => {
                check_box(lower, upper)?;
                positive("initial_points.spacing", *spacing)?;
                let counts: Vec<usize> =
                    lower.iter().zip(upper).map(|(l, u)| ((u - l) / spacing + 1e-9).floor() as usize + 1).collect();
                let total: usize = counts.iter().product();
                if total > 50_000_000 {
                    return Err(invalid("initial_points: lattice too large"));
                }
                let mut idx = vec![0usize; d];
                let mut p = vec![0.0; d];
                for _ in 0..total {
                    for c in 0..d {
                        p[c] = lower[c] + idx[c] as f64 * spacing;
                    }
                    if domain.contains(&p).unwrap_or(false) {
                        set.push(&p).map_err(|e| invalid(e.to_string()))?;
                    }
                    // last axis fastest
                    for c in (0..d).rev() {
                        idx[c] += 1;
                        if idx[c] < counts[c] {
                            break;
                        }
                        idx[c] = 0;
                    }
                }
            }
            InitialPointsConfig::Uniform { lower, upper, count } => {
                check_box(lower, upper)?;
                if *count == 0 {
                    return Err(invalid("initial_points.count must be at least 1"));
                }
                // Separate stream from the noise streams of the same seed.
                let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX);
                let mut p = vec![0.0; d];
                let max_draws = count.saturating_mul(1000);
                let mut draws = 0usize;
                while set.len() < *count {
                    if draws == max_draws {
                        return Err(invalid("initial_points: box barely intersects the domain"));
                    }
                    draws += 1;
                    for c in 0..d {
                        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                        p[c] = lower[c] + u * (upper[c] - lower[c]);
                    }
                    if domain.contains(&p).unwrap_or(false) {
                        set.push(&p).map_err(|e| invalid(e.to_string()))?;
                    }
                }
            }
        }
        Ok(set)
    }
}

fn polynomials(terms: &[Vec<Term>], d: usize, what: &str) -> Result<Vec<Polynomial>, RunError> {
    if terms.len() != d {
        return Err(invalid(format!("coefficients.{what} needs {d} components, got {}", terms.len())));
    }
    terms
        .iter()
        .map(|comp| {
            let monomials = comp
                .iter()
                .map(|(exponents, coefficient)| Monomial { exponents: exponents.clone(), coefficient: *coefficient })
                .collect();
            Polynomial::new(d, monomials).map_err(|e| invalid(format!("coefficients.{what}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use reflow_core::CoefficientField;

    fn base(extra: &str) -> String {
        format!(
            r#"{{
                "experiment": "flow",
                "domain": {{"kind": "half_space", "dim": 2}},
                "coefficients": {{"preset": "bm"}},
                "grid": {{"t_end": 1.0, "n_steps": 10}},
                "initial_points": {{"kind": "explicit", "points": [[0.0, 1.0]]}},
                "seed": 7{extra}
            }}"#
        )
    }

    #[test]
    fn parses_minimal() {
        let cfg = ExperimentConfig::from_json(&base("")).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Flow);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.coeffs.noise_dim(), 2);
        assert_eq!(r.points.len(), 1);
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(&base(r#", "sead": 3"#)).is_err());
        assert!(ExperimentConfig::from_json(&base(r#", "params": {"merge_tolerance": 0.1}"#)).is_err());
        let bad_domain = base("").replace(r#""dim": 2"#, r#""dim": 2, "radius": 1"#);
        assert!(ExperimentConfig::from_json(&bad_domain).is_err());
        let bad_preset = base("").replace(r#""bm""#, r#""brownian""#);
        assert!(ExperimentConfig::from_json(&bad_preset).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = ExperimentConfig::from_json(&base(r#", "params": {"merge_tol": -1.0}"#)).unwrap();
        assert!(matches!(cfg.resolve(), Err(RunError::Config(_))));
        let cfg = ExperimentConfig::from_json(&base(r#", "params": {"epsilons": [0.01, 0.02]}"#)).unwrap();
        assert!(cfg.resolve().is_err());
        let zero_steps = base("").replace(r#""n_steps": 10"#, r#""n_steps": 0"#);
        assert!(ExperimentConfig::from_json(&zero_steps).unwrap().resolve().is_err());
        let oracle = base("").replace(r#""flow""#, r#""oracle1d""#);
        assert!(ExperimentConfig::from_json(&oracle).unwrap().resolve().is_err());
    }

    #[test]
    fn lattice_filters_to_domain() {
        let cfg = base("").replace(
            r#"{"kind": "explicit", "points": [[0.0, 1.0]]}"#,
            r#"{"kind": "lattice", "lower": [-1.0, -1.0], "upper": [1.0, 1.0], "spacing": 0.5}"#,
        );
        let r = ExperimentConfig::from_json(&cfg).unwrap().resolve().unwrap();
        // x2 in {0, 0.5, 1} survive
        assert_eq!(r.points.len(), 5 * 3);
        assert!(r.points.iter().all(|p| p[1] >= 0.0));
    }

    #[test]
    fn uniform_points_are_seeded() {
        let cfg = base("").replace(
            r#"{"kind": "explicit", "points": [[0.0, 1.0]]}"#,
            r#"{"kind": "uniform", "lower": [-1.0, -1.0], "upper": [1.0, 1.0], "count": 50}"#,
        );
        let a = ExperimentConfig::from_json(&cfg).unwrap().resolve().unwrap();
        let b = ExperimentConfig::from_json(&cfg).unwrap().resolve().unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 50);
        assert!(a.points.iter().all(|p| p[1] >= 0.0));
    }

    #[test]
    fn inline_polynomials() {
        let cfg = base("").replace(
            r#"{"preset": "bm"}"#,
            r#"{"preset": "inline",
                "drift": [[[[1, 0], -1.0]], []],
                "diffusion": [[[[[0, 0], 1.0]], [[[0, 1], 0.5], [[0, 0], 1.0]]]]}"#,
        );
        let r = ExperimentConfig::from_json(&cfg).unwrap().resolve().unwrap();
        let mut out = [0.0; 2];
        r.coeffs.eval(0, &[2.0, 3.0], &mut out);
        assert_eq!(out, [-2.0, 0.0]);
        r.coeffs.eval(1, &[2.0, 3.0], &mut out);
        assert_eq!(out, [1.0, 2.5]);
        let mut j = Matrix::zeros(2, 2);
        r.coeffs.jacobian(1, &[2.0, 3.0], &mut j).unwrap();
        assert_eq!(j, Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.5]]).unwrap());
    }

    #[test]
    fn linear_drift_shape_checked() {
        let cfg = base("").replace(
            r#"{"preset": "bm"}"#,
            r#"{"preset": "linear-drift", "matrix": [[1.0, 0.0]], "noise_scale": 0.1}"#,
        );
        assert!(ExperimentConfig::from_json(&cfg).unwrap().resolve().is_err());
    }
}
