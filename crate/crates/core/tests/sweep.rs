//! End-to-end checks of the Monte Carlo sweep engine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsac_core::channel::gen_geometric_channel;
use tsac_core::combiner::{arv_tsac, build_codebook, svd_combiner};
use tsac_core::metrics::mutual_information;
use tsac_core::montecarlo::seed::trial_seed;
use tsac_core::montecarlo::{
    run_sweep, run_sweep_with_threads, ExperimentConfig, Method, CSV_HEADER,
};
use tsac_core::Error;

const BASE: &str = r#"
channel_model = "geometric"
methods = ["ARV_TSAC", "SVD"]
metric = "MI"
sweep_variable = "snr_db"
sweep_values = [-10.0, 0.0, 10.0]
n_trials = 6
master_seed = 4242
theory_overlays = ["EQ13", "EQ14"]

[fixed_params]
n_antennas = 24
n_rf = 8
n_users = 3
mean_paths = 3.0
bits = 2
"#;

fn base() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(BASE).unwrap()
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let mut out = Vec::new();
    run_sweep(cfg).unwrap().write_csv(&mut out).unwrap();
    out
}

#[test]
fn single_trial_matches_direct_evaluation() {
    let mut cfg = base();
    cfg.n_trials = 1;
    let result = run_sweep(&cfg).unwrap();
    let points = cfg.validate().unwrap();
    for (pi, p) in points.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.master_seed, pi, 0));
        let chan = gen_geometric_channel(24, 3, 3.0, 0.5, &mut rng).unwrap();
        let q = p.quantizer();
        let tsac = arv_tsac(&chan.h, 8, &build_codebook(24).unwrap()).unwrap();
        let svd = svd_combiner(&chan.h, 8, false).unwrap();
        let want_tsac = mutual_information(&tsac.product, &chan.h, p.snr(), &q).unwrap();
        let want_svd = mutual_information(&svd.product, &chan.h, p.snr(), &q).unwrap();
        assert_eq!(result.cell(pi, "ARV_TSAC").unwrap().mean, want_tsac);
        assert_eq!(result.cell(pi, "SVD").unwrap().mean, want_svd);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = base();
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
}

#[test]
fn adding_a_method_leaves_other_methods_unchanged() {
    let cfg = base();
    let mut wider = base();
    wider.methods.insert(0, Method::GreedyMi);
    wider.methods.push(Method::AoaDft);
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&wider).unwrap();
    for pi in 0..3 {
        for label in ["ARV_TSAC", "SVD"] {
            assert_eq!(
                a.cell(pi, label).unwrap().samples,
                b.cell(pi, label).unwrap().samples
            );
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = base();
    let one = run_sweep_with_threads(&cfg, 1).unwrap();
    let three = run_sweep_with_threads(&cfg, 3).unwrap();
    assert_eq!(one.cells, three.cells);
}

#[test]
fn different_seeds_give_different_samples() {
    let mut other = base();
    other.master_seed += 1;
    let a = run_sweep(&base()).unwrap();
    let b = run_sweep(&other).unwrap();
    assert_ne!(
        a.cell(0, "SVD").unwrap().samples,
        b.cell(0, "SVD").unwrap().samples
    );
}

#[test]
fn infeasible_configuration_is_rejected_before_running() {
    let text = BASE.replace("n_users = 3", "n_users = 9");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    match run_sweep(&cfg) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "fixed_params.n_users"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_reported_by_name() {
    let text = BASE.replace("mean_paths", "mean_pathz");
    match ExperimentConfig::from_toml_str(&text) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "mean_pathz"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn csv_rows_parse_back() {
    let bytes = csv_bytes(&base());
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // Two methods and two overlays at three points.
    assert_eq!(rows.len(), 12);
    let col = |name: &str| CSV_HEADER.iter().position(|h| *h == name).unwrap();
    for row in &rows {
        let mean: f64 = row[col("mean")].parse().unwrap();
        assert!(mean.is_finite() && mean >= 0.0);
        assert_eq!(&row[col("n_r")], "24");
        assert_eq!(&row[col("n_rf")], "8");
        assert_eq!(&row[col("n_u")], "3");
        assert_eq!(&row[col("bits")], "2");
        assert_eq!(&row[col("seed")], "4242");
    }
}

#[test]
fn sample_means_match_reported_means() {
    let r = run_sweep(&base()).unwrap();
    for c in r.cells.iter().filter(|c| !c.is_theory()) {
        assert_eq!(c.samples.len(), 6);
        let mean = c.samples.iter().sum::<f64>() / 6.0;
        assert!((mean - c.mean).abs() < 1e-12);
    }
}
