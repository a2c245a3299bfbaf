use reflow::config::ExperimentConfig;
use reflow::{run_experiment, RunOptions};
use serde_json::Value;

fn run(text: &str) -> (tempfile::TempDir, reflow::Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(text).unwrap();
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let m = run_experiment(&cfg, &opts).unwrap();
    (dir, m)
}

fn summary<'a>(m: &'a reflow::Manifest, key: &str) -> &'a Value {
    m.summary.get(key).unwrap_or_else(|| panic!("summary lacks {key}"))
}

#[test]
fn transport_partitions_mass_exactly() {
    let (dir, m) = run(
        r#"{"experiment":"transport","domain":{"kind":"unit_disk"},"coefficients":{"preset":"bm"},
            "grid":{"t_end":2.0,"n_steps":400},"initial_points":{"kind":"lattice","lower":[-1,-1],"upper":[1,1],"spacing":0.1},
            "seed":4,"params":{"bins":8,"boundary_spacing":0.01}}"#,
    );
    assert_eq!(summary(&m, "mass_identity_exact"), true);
    assert_eq!(summary(&m, "singular_mass_monotone"), true);
    // Singular images sit on the image of the boundary sample.
    assert!(summary(&m, "singular_support_distance").as_f64().unwrap() < 0.05);

    let mut rdr = csv::Reader::from_path(dir.path().join("mass_series.csv")).unwrap();
    let mut last = 0.0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (ac, s): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(s >= last);
        assert!((ac + s - 1.0).abs() < 1e-15);
        last = s;
    }
}

#[test]
fn derivative_experiment_reports_kills() {
    let (dir, m) = run(
        r#"{"experiment":"derivative","domain":{"kind":"half_space","dim":2},"coefficients":{"preset":"bm"},
            "grid":{"t_end":1.0,"n_steps":500},"initial_points":{"kind":"explicit","points":[[0,0.1],[1,0.3],[0,3]]},
            "seed":2}"#,
    );
    assert_eq!(summary(&m, "kill_violations"), 0);
    assert!(summary(&m, "jump_count").as_u64().unwrap() > 0);
    assert!(summary(&m, "max_rank_at_jumps").as_u64().unwrap() <= 1);
    let fd = std::fs::read_to_string(dir.path().join("fd_check.csv")).unwrap();
    assert!(fd.lines().count() > 1);
    let matrices = std::fs::read_to_string(dir.path().join("matrices.csv")).unwrap();
    assert_eq!(matrices.lines().count(), 1 + 3 * 501 * 4);
}

#[test]
fn coalescence_in_one_dimension_needs_hitting() {
    let (_dir, m) = run(
        r#"{"experiment":"coalesce","domain":{"kind":"half_space","dim":1},"coefficients":{"preset":"bm"},
            "grid":{"t_end":4.0,"n_steps":4000},"initial_points":{"kind":"lattice","lower":[0],"upper":[1],"spacing":0.25},
            "seed":13,"params":{"merge_tol":1e-12}}"#,
    );
    assert_eq!(summary(&m, "merges_before_hitting"), 0);
    assert!(summary(&m, "pairs").as_u64().unwrap() > 0);
}

#[test]
fn hausdorff_boundary_cloud_is_a_segment() {
    let (_dir, m) = run(
        r#"{"experiment":"hausdorff","domain":{"kind":"half_space","dim":2},"coefficients":{"preset":"bm"},
            "grid":{"t_end":1.0,"n_steps":500},"initial_points":{"kind":"lattice","lower":[-6,0],"upper":[6,0],"spacing":0.005},
            "seed":1,"params":{"radius":2.0}}"#,
    );
    let ratio = summary(&m, "estimate_ratio").as_f64().unwrap();
    assert!((1.0..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn inline_coefficients_match_preset() {
    let preset = r#"{"experiment":"flow","domain":{"kind":"half_space","dim":1},"coefficients":{"preset":"bm"},
        "grid":{"t_end":1.0,"n_steps":100},"initial_points":{"kind":"explicit","points":[[0.3]]},"seed":8}"#;
    let inline = preset.replace(r#"{"preset":"bm"}"#, r#"{"preset":"inline","drift":[[]],"diffusion":[[[[[0],1.0]]]]}"#);
    let (_a, ma) = run(preset);
    let (_b, mb) = run(&inline);
    assert_eq!(ma.files, mb.files);
}
