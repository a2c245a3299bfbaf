//! Experiment pipelines.

use std::path::PathBuf;

use reflow_core::derivative::{excursion_rank_profile, finite_difference_jacobian};
use reflow_core::flow::{classify_image, coalescence_report, default_merge_tol, FlowResult, HittingTime, ImageLabel, Recording};
use reflow_core::linalg::Matrix;
use reflow_core::noise::make_noise;
use reflow_core::skorokhod::skorokhod_map_1d;
use reflow_core::sum::ExactAccumulator;
use reflow_core::transport::{
    density_histogram, hausdorff_boxcount, pushforward_decompose, singular_support_distance, BoundingBox,
};
use reflow_core::{CoefficientField, DomainSpec, NoiseRealization, ParticleMeasure, PointSet, PolynomialField};
use serde_json::{json, Map, Value};

use crate::config::{
    ExperimentConfig, ExperimentKind, Resolved, DEFAULT_BINS, DEFAULT_BOUNDARY_SPACING, DEFAULT_BUMPS,
    DEFAULT_EPSILONS, DEFAULT_RADIUS, DEFAULT_RANK_TOL,
};
use crate::error::RunError;
use crate::output::{coord_headers, fmt_f64, header, ArtifactWriter, Manifest};
use crate::parallel::{derivative_tracks_par, simulate_flow_par};

pub const DEFAULT_OUTPUT_DIR: &str = "reflow-out";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Apply CLI overrides; the returned config is what the manifest echoes.
pub fn effective_config(config: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.output_dir = None;
    cfg
}

/// Validate, run, write artifacts plus `manifest.json`, and return the manifest.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, RunError> {
    let cfg = effective_config(config, opts);
    let resolved = cfg.resolve()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Config(format!("threads: {e}")))?;

    let mut writer = ArtifactWriter::new(&out_dir)?;
    let summary = pool.install(|| execute(&cfg, &resolved, &mut writer))?;
    let manifest = Manifest { seed: cfg.seed, config: cfg, files: writer.into_files(), summary };
    std::fs::write(out_dir.join("manifest.json"), manifest.to_json()?)?;
    Ok(manifest)
}

fn execute(cfg: &ExperimentConfig, r: &Resolved, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
    let noise = make_noise(cfg.seed, r.coeffs.noise_dim(), r.grid)?;
    let ctx = Ctx { cfg, r, noise };
    match cfg.experiment {
        ExperimentKind::Flow => ctx.flow(w),
        ExperimentKind::Derivative => ctx.derivative(w),
        ExperimentKind::Transport => ctx.transport(w),
        ExperimentKind::Coalesce => ctx.coalesce(w),
        ExperimentKind::Hausdorff => ctx.hausdorff(w),
        ExperimentKind::Oracle1d => ctx.oracle1d(w),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    r: &'a Resolved,
    noise: NoiseRealization,
}

fn bool01(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn tau_fields(tau: HittingTime, flow: &FlowResult) -> [String; 2] {
    match tau {
        HittingTime::At(i) => [i.to_string(), fmt_f64(flow.grid().time(i))],
        HittingTime::Never => ["NEVER".to_string(), "NEVER".to_string()],
    }
}

/// Recording that keeps step `t` with as little storage as possible.
fn recording_for_step(t: usize, n: usize) -> Recording {
    if t == 0 || t == n { Recording::Final } else { Recording::Stride(t) }
}

impl Ctx<'_> {
    fn d(&self) -> usize {
        self.r.domain.dim()
    }

    fn n(&self) -> usize {
        self.r.grid.n_steps()
    }

    fn t_index(&self) -> usize {
        self.cfg.params.t_index.unwrap_or(self.n())
    }

    fn simulate(&self, points: &PointSet, recording: Recording) -> Result<FlowResult, RunError> {
        Ok(simulate_flow_par(&self.r.domain, &self.r.coeffs, points, &self.noise, recording)?)
    }

    fn full_or_stride(&self) -> Recording {
        self.cfg.params.record_stride.map_or(Recording::Full, Recording::Stride)
    }

    fn write_hitting_times(&self, flow: &FlowResult, w: &mut ArtifactWriter) -> Result<usize, RunError> {
        let mut hits = 0;
        w.write_csv("hitting_times.csv", &header(&["particle", "tau_index", "tau_time"]), |out| {
            for j in 0..flow.n_particles() {
                let tau = flow.tau(j)?;
                hits += usize::from(tau != HittingTime::Never);
                let [idx, time] = tau_fields(tau, flow);
                out.write_record([j.to_string(), idx, time])?;
            }
            Ok(())
        })?;
        Ok(hits)
    }

    fn flow(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let flow = self.simulate(&self.r.points, self.full_or_stride())?;
        let d = self.d();
        let mut cols = header(&["particle", "step", "t"]);
        cols.extend(coord_headers("x", d));
        cols.extend(header(&["xi", "reflected"]));
        let mut max_xi = 0.0f64;
        w.write_csv("trajectories.csv", &cols, |out| {
            for j in 0..flow.n_particles() {
                for &i in flow.recorded_steps() {
                    let xi = flow.local_time(j, i)?;
                    max_xi = max_xi.max(xi);
                    let mut rec = vec![j.to_string(), i.to_string(), fmt_f64(flow.grid().time(i))];
                    rec.extend(flow.position(j, i)?.iter().map(|v| fmt_f64(*v)));
                    rec.push(fmt_f64(xi));
                    rec.push(bool01(flow.reflected(j, i)?));
                    out.write_record(&rec)?;
                }
            }
            Ok(())
        })?;
        let hits = self.write_hitting_times(&flow, w)?;
        let mut s = Map::new();
        s.insert("particles".into(), json!(flow.n_particles()));
        s.insert("hit_count".into(), json!(hits));
        s.insert("max_local_time".into(), json!(max_xi));
        Ok(s)
    }

    fn derivative(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let flow = self.simulate(&self.r.points, Recording::Full)?;
        let tracks = derivative_tracks_par(&flow, &self.r.coeffs)?;
        let d = self.d();
        let stride = self.cfg.params.record_stride.unwrap_or(1);
        let rank_tol = self.cfg.params.rank_tol.unwrap_or(DEFAULT_RANK_TOL);

        w.write_csv("matrices.csv", &header(&["particle", "step", "row", "col", "value"]), |out| {
            for t in &tracks {
                for (i, m) in t.matrices.iter().enumerate() {
                    if i % stride != 0 && i != self.n() {
                        continue;
                    }
                    for row in 0..d {
                        for col in 0..d {
                            out.write_record([
                                t.particle.to_string(),
                                i.to_string(),
                                row.to_string(),
                                col.to_string(),
                                fmt_f64(m[(row, col)]),
                            ])?;
                        }
                    }
                }
            }
            Ok(())
        })?;
        w.write_csv("jump_times.csv", &header(&["particle", "step"]), |out| {
            for t in &tracks {
                for &i in &t.jump_times {
                    out.write_record([t.particle.to_string(), i.to_string()])?;
                }
            }
            Ok(())
        })?;

        // Kill semantics: killed rows at jumps (half-space) and the rank ceiling at jumps.
        let mut kill_violations = 0usize;
        let mut max_rank_at_jumps = 0usize;
        for t in &tracks {
            for &i in &t.jump_times {
                let m = &t.matrices[i];
                if matches!(self.r.domain, DomainSpec::HalfSpace { .. }) && m.row(d - 1).iter().any(|&v| v != 0.0) {
                    kill_violations += 1;
                }
                max_rank_at_jumps = max_rank_at_jumps.max(m.rank(rank_tol));
            }
        }

        let mut rank_rows = Vec::new();
        for j in 0..flow.n_particles() {
            for e in excursion_rank_profile(&flow, &self.r.coeffs, j, rank_tol)? {
                rank_rows.push((j, e));
            }
        }
        let satisfied = rank_rows.iter().filter(|(_, e)| e.check.satisfied).count();
        w.write_csv("excursions.csv", &header(&["particle", "alpha", "beta", "rank", "satisfied"]), |out| {
            for (j, e) in &rank_rows {
                out.write_record([
                    j.to_string(),
                    e.alpha.to_string(),
                    e.beta.to_string(),
                    e.check.rank.to_string(),
                    bool01(e.check.satisfied),
                ])?;
            }
            Ok(())
        })?;

        let bumps = self.cfg.params.bumps.clone().unwrap_or_else(|| DEFAULT_BUMPS.to_vec());
        let mut fd_rows = Vec::new();
        let mut max_err = vec![0.0f64; bumps.len()];
        for (j, x) in self.r.points.iter().enumerate() {
            if self.r.domain.on_boundary(x) {
                continue;
            }
            let analytic = tracks[j].matrices.last().expect("n_steps >= 1");
            for (b, &h) in bumps.iter().enumerate() {
                match finite_difference_jacobian(&self.r.domain, &self.r.coeffs, x, &self.noise, h) {
                    Ok(fd) => {
                        let err = fd.jacobian.sub(analytic)?.max_abs();
                        if !fd.reflected {
                            max_err[b] = max_err[b].max(err);
                        }
                        fd_rows.push((j, h, Some((err, fd.reflected))));
                    }
                    Err(reflow_core::Error::OutsideDomain { .. }) => fd_rows.push((j, h, None)),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        w.write_csv("fd_check.csv", &header(&["particle", "h", "max_abs_error", "reflected"]), |out| {
            for (j, h, res) in &fd_rows {
                let (err, refl) = match res {
                    Some((e, r)) => (fmt_f64(*e), bool01(*r)),
                    None => ("SKIPPED".to_string(), "NA".to_string()),
                };
                out.write_record([j.to_string(), fmt_f64(*h), err, refl])?;
            }
            Ok(())
        })?;

        let mut s = Map::new();
        s.insert("particles".into(), json!(flow.n_particles()));
        s.insert("jump_count".into(), json!(tracks.iter().map(|t| t.jump_times.len()).sum::<usize>()));
        s.insert("kill_violations".into(), json!(kill_violations));
        s.insert("max_rank_at_jumps".into(), json!(max_rank_at_jumps));
        s.insert("excursions".into(), json!(rank_rows.len()));
        s.insert("excursion_rank_satisfied".into(), json!(satisfied));
        s.insert("fd_bumps".into(), json!(bumps));
        s.insert("fd_max_abs_error".into(), json!(max_err));
        Ok(s)
    }

    fn boundary_sample(&self, spacing: f64) -> Result<PointSet, RunError> {
        let d = self.d();
        let mut set = PointSet::new(d);
        match self.r.domain {
            DomainSpec::UnitDisk => {
                let count = ((2.0 * std::f64::consts::PI / spacing).ceil() as usize).max(1);
                for k in 0..count {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    set.push(&[a.cos(), a.sin()])?;
                }
            }
            DomainSpec::HalfSpace { .. } => {
                // Tangential coordinates cover the starts' range padded by 1.
                let mut lo = vec![f64::INFINITY; d - 1];
                let mut hi = vec![f64::NEG_INFINITY; d - 1];
                for x in self.r.points.iter() {
                    for c in 0..d - 1 {
                        lo[c] = lo[c].min(x[c] - 1.0);
                        hi[c] = hi[c].max(x[c] + 1.0);
                    }
                }
                let counts: Vec<usize> =
                    lo.iter().zip(&hi).map(|(l, h)| ((h - l) / spacing).floor() as usize + 1).collect();
                let total: usize = counts.iter().product();
                if total > 10_000_000 {
                    return Err(RunError::Config("params.boundary_spacing too fine for this ensemble".into()));
                }
                let mut idx = vec![0usize; d - 1];
                let mut p = vec![0.0; d];
                for _ in 0..total {
                    for c in 0..d - 1 {
                        p[c] = lo[c] + idx[c] as f64 * spacing;
                    }
                    set.push(&p)?;
                    for c in (0..d - 1).rev() {
                        idx[c] += 1;
                        if idx[c] < counts[c] {
                            break;
                        }
                        idx[c] = 0;
                    }
                }
            }
        }
        Ok(set)
    }

    fn transport(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let t = self.t_index();
        let d = self.d();
        let flow = self.simulate(&self.r.points, recording_for_step(t, self.n()))?;
        let mu = ParticleMeasure::uniform(self.r.points.clone(), 1.0)?;
        let split = pushforward_decompose(&mu, &flow, t)?;

        let mut cols = header(&["particle", "weight", "part"]);
        cols.extend(coord_headers("x", d));
        w.write_csv("decomposition.csv", &cols, |out| {
            let parts = [("ac", &split.ac_part, &split.ac_indices), ("singular", &split.singular_part, &split.singular_indices)];
            let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
            for (label, part, idx) in parts {
                for (k, &j) in idx.iter().enumerate() {
                    let mut rec = vec![j.to_string(), fmt_f64(part.weights()[k]), label.to_string()];
                    rec.extend(part.points().get(k).iter().map(|v| fmt_f64(*v)));
                    rows.push((j, rec));
                }
            }
            rows.sort_by_key(|(j, _)| *j);
            for (_, rec) in rows {
                out.write_record(&rec)?;
            }
            Ok(())
        })?;

        // Singular mass over time from the hitting times alone.
        let mut by_tau: Vec<(usize, f64)> = (0..flow.n_particles())
            .filter_map(|j| flow.tau(j).ok().and_then(|tau| tau.index()).map(|i| (i, mu.weights()[j])))
            .collect();
        by_tau.sort_by_key(|(i, _)| *i);
        let total = mu.total_mass();
        let mut singular = ExactAccumulator::default();
        let mut monotone = true;
        let mut last = 0.0;
        let mut next = by_tau.iter().peekable();
        w.write_csv("mass_series.csv", &header(&["step", "t", "ac_mass", "singular_mass"]), |out| {
            for i in 0..=self.n() {
                while let Some((_, wt)) = next.next_if(|(ti, _)| *ti <= i) {
                    singular.add(*wt);
                }
                let s = singular.value();
                monotone &= s >= last;
                last = s;
                let mut ac = ExactAccumulator::default();
                ac.add(total);
                ac.add(-s);
                out.write_record([i.to_string(), fmt_f64(flow.grid().time(i)), fmt_f64(ac.value()), fmt_f64(s)])?;
            }
            Ok(())
        })?;

        let image = flow.image(t)?;
        let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
        for x in image.iter() {
            for c in 0..d {
                lo[c] = lo[c].min(x[c]);
                hi[c] = hi[c].max(x[c]);
            }
        }
        for c in 0..d {
            if hi[c] - lo[c] < 1e-9 {
                lo[c] -= 0.5;
                hi[c] += 0.5;
            }
        }
        let bins = self.cfg.params.bins.unwrap_or(DEFAULT_BINS);
        let bounds = BoundingBox::new(lo, hi)?;
        let grid = density_histogram(&split.ac_part, &bounds, bins)?;
        let widths: Vec<f64> = (0..d).map(|c| (bounds.upper[c] - bounds.lower[c]) / bins as f64).collect();
        let mut cols = coord_headers("cell", d);
        cols.extend(coord_headers("center", d));
        cols.push("density".into());
        w.write_csv("density.csv", &cols, |out| {
            for (flat, v) in grid.values.iter().enumerate() {
                let idx = grid.cell_index(flat);
                let mut rec: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
                rec.extend((0..d).map(|c| fmt_f64(bounds.lower[c] + (idx[c] as f64 + 0.5) * widths[c])));
                rec.push(fmt_f64(*v));
                out.write_record(&rec)?;
            }
            Ok(())
        })?;

        let spacing = self.cfg.params.boundary_spacing.unwrap_or(DEFAULT_BOUNDARY_SPACING);
        let boundary_starts = self.boundary_sample(spacing)?;
        let boundary_flow = self.simulate(&boundary_starts, recording_for_step(t, self.n()))?;
        let support = singular_support_distance(&split.singular_part, &boundary_flow.image(t)?)?;

        let mut s = Map::new();
        s.insert("t_index".into(), json!(t));
        s.insert("particles".into(), json!(flow.n_particles()));
        s.insert("total_mass".into(), json!(total));
        s.insert("ac_mass".into(), json!(split.ac_part.total_mass()));
        s.insert("singular_mass".into(), json!(split.singular_part.total_mass()));
        s.insert("mass_identity_exact".into(), json!(split.combined_mass() == total));
        s.insert("singular_mass_monotone".into(), json!(monotone));
        s.insert("out_of_box_mass".into(), json!(grid.out_of_box_mass));
        s.insert("boundary_spacing".into(), json!(spacing));
        s.insert("boundary_samples".into(), json!(boundary_starts.len()));
        s.insert("singular_support_distance".into(), json!(support));
        Ok(s)
    }

    fn coalesce(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let flow = self.simulate(&self.r.points, self.full_or_stride())?;
        let tol = self.cfg.params.merge_tol.unwrap_or_else(|| default_merge_tol(&self.r.grid));
        let report = coalescence_report(&flow, tol)?;
        w.write_csv(
            "coalescence.csv",
            &header(&["first", "second", "merge_step", "merge_time", "persistent"]),
            |out| {
                for p in &report.pairs {
                    out.write_record([
                        p.first.to_string(),
                        p.second.to_string(),
                        p.merge_step.to_string(),
                        fmt_f64(flow.grid().time(p.merge_step)),
                        bool01(p.persistent),
                    ])?;
                }
                Ok(())
            },
        )?;
        let hits = self.write_hitting_times(&flow, w)?;
        // Merges that happen before both particles have touched the boundary.
        let early = report
            .pairs
            .iter()
            .filter(|p| {
                let (a, b) = (flow.tau(p.first).unwrap_or(HittingTime::Never), flow.tau(p.second).unwrap_or(HittingTime::Never));
                !(a.hit_by(p.merge_step) && b.hit_by(p.merge_step))
            })
            .count();
        let mut s = Map::new();
        s.insert("merge_tol".into(), json!(tol));
        s.insert("pairs".into(), json!(report.pairs.len()));
        s.insert("persistent_pairs".into(), json!(report.pairs.iter().filter(|p| p.persistent).count()));
        s.insert("merges_before_hitting".into(), json!(early));
        s.insert("hit_count".into(), json!(hits));
        Ok(s)
    }

    fn hausdorff(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let t = self.t_index();
        let flow = self.simulate(&self.r.points, recording_for_step(t, self.n()))?;
        let labelled = classify_image(&flow, t)?;
        let cloud = labelled.select(ImageLabel::Boundary);
        let eps = self.cfg.params.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
        let radius = self.cfg.params.radius.unwrap_or(DEFAULT_RADIUS);
        let counts = hausdorff_boxcount(&cloud, &eps, radius)?;
        w.write_csv("boxcount.csv", &header(&["epsilon", "count", "estimate"]), |out| {
            for c in &counts {
                out.write_record([fmt_f64(c.epsilon), c.count.to_string(), fmt_f64(c.estimate)])?;
            }
            Ok(())
        })?;
        let estimates: Vec<f64> = counts.iter().map(|c| c.estimate).collect();
        let (lo, hi) = estimates.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
        let mut s = Map::new();
        s.insert("t_index".into(), json!(t));
        s.insert("boundary_points".into(), json!(cloud.len()));
        s.insert("estimates".into(), json!(estimates));
        s.insert("estimate_ratio".into(), if lo > 0.0 { json!(hi / lo) } else { Value::Null });
        Ok(s)
    }

    fn oracle1d(&self, w: &mut ArtifactWriter) -> Result<Map<String, Value>, RunError> {
        let flow = self.simulate(&self.r.points, Recording::Full)?;
        let path = self.noise.path(0);
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (j, x) in self.r.points.iter().enumerate() {
            let (phi, xi) = skorokhod_map_1d(x[0], &path)?;
            let (mut e_phi, mut e_xi) = (0.0f64, 0.0f64);
            for i in 0..=self.n() {
                e_phi = e_phi.max((flow.position(j, i)?[0] - phi[i]).abs());
                e_xi = e_xi.max((flow.local_time(j, i)? - xi[i]).abs());
            }
            worst = worst.max(e_phi).max(e_xi);
            rows.push((j, x[0], e_phi, e_xi));
        }
        w.write_csv("oracle.csv", &header(&["particle", "x0", "max_abs_phi_error", "max_abs_xi_error"]), |out| {
            for (j, x0, a, b) in &rows {
                out.write_record([j.to_string(), fmt_f64(*x0), fmt_f64(*a), fmt_f64(*b)])?;
            }
            Ok(())
        })?;
        self.write_hitting_times(&flow, w)?;
        let mut s = Map::new();
        s.insert("particles".into(), json!(rows.len()));
        s.insert("max_abs_error".into(), json!(worst));
        Ok(s)
    }
}

/// `∇φ` of every particle in one call, for callers that want matrices without files.
pub fn jacobians_at_horizon(flow: &FlowResult, coeffs: &PolynomialField) -> Result<Vec<Matrix>, RunError> {
    Ok(derivative_tracks_par(flow, coeffs)?
        .into_iter()
        .map(|t| t.matrices.last().cloned().expect("at least one step"))
        .collect())
}
