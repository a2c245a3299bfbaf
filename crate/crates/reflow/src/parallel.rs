//! Rayon drivers. Particles are independent given the shared noise, so the
//! parallel results are identical to the sequential ones.

use rayon::prelude::*;
use reflow_core::derivative::{derivative_flow, DerivativeTrack};
use reflow_core::flow::{simulate_particle, validate_flow_inputs, FlowResult, Recording};
use reflow_core::{CoefficientField, DomainSpec, Error, NoiseRealization, PointSet, Result};

pub fn simulate_flow_par<C: CoefficientField + Sync>(
    domain: &DomainSpec,
    coeffs: &C,
    initial_points: &PointSet,
    noise: &NoiseRealization,
    recording: Recording,
) -> Result<FlowResult> {
    validate_flow_inputs(domain, coeffs, initial_points, noise)?;
    let recorded = recording.steps(noise.grid().n_steps())?;
    let points: Vec<&[f64]> = initial_points.iter().collect();
    let paths = points
        .par_iter()
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

pub fn derivative_tracks_par<C: CoefficientField + Sync>(flow: &FlowResult, coeffs: &C) -> Result<Vec<DerivativeTrack>> {
    (0..flow.n_particles()).into_par_iter().map(|j| derivative_flow(flow, coeffs, j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use reflow_core::coeffs::presets;
    use reflow_core::flow::simulate_flow;
    use reflow_core::noise::make_noise;
    use reflow_core::TimeGrid;

    #[test]
    fn parallel_equals_sequential() {
        let domain = DomainSpec::UnitDisk;
        let grid = TimeGrid::new(1.0, 300).unwrap();
        let noise = make_noise(17, 2, grid).unwrap();
        let mut pts = PointSet::new(2);
        for k in 0..64 {
            let a = k as f64 * 0.1;
            pts.push(&[0.9 * (k as f64 / 64.0) * a.cos(), 0.9 * (k as f64 / 64.0) * a.sin()]).unwrap();
        }
        let field = presets::example2();
        let seq = simulate_flow(&domain, &field, &pts, &noise, Recording::Full).unwrap();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let par = pool.install(|| simulate_flow_par(&domain, &field, &pts, &noise, Recording::Full)).unwrap();
            assert_eq!(par, seq);
        }
    }
}
