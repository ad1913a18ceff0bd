//! Runs every example at reduced size and checks what it prints about.

mod speb_roundtrip {
    include!("../examples/speb_roundtrip.rs");
}
mod classic_probe {
    include!("../examples/classic_probe.rs");
}
mod mdl_codelength {
    include!("../examples/mdl_codelength.rs");
}
mod layer_sweep {
    include!("../examples/layer_sweep.rs");
}
mod encoder_comparison {
    include!("../examples/encoder_comparison.rs");
}
mod cost_benefit {
    include!("../examples/cost_benefit.rs");
}
mod age_binning {
    include!("../examples/age_binning.rs");
}

#[test]
fn speb_roundtrip_example() {
    let dir = tempfile::tempdir().unwrap();
    let ds = speb_roundtrip::run_example(dir.path()).unwrap();
    assert_eq!((ds.len(), ds.num_layers(), ds.dim()), (2, 2, 3));
}

#[test]
fn classic_probe_example() {
    let strong = classic_probe::run_example(1000, 6.0, 32).unwrap();
    assert!(strong.accuracy >= 0.95 && strong.bayes > 0.99);
    let none = classic_probe::run_example(600, 0.0, 32).unwrap();
    assert!(none.accuracy < 0.7);
}

#[test]
fn mdl_codelength_example() {
    let none = mdl_codelength::run_example(512, 0.0, 32).unwrap();
    let strong = mdl_codelength::run_example(512, 3.0, 32).unwrap();
    assert!(strong.total_bits < none.total_bits);
    assert!(strong.compression > 1.5);
}

#[test]
fn layer_sweep_example() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(layer_sweep::run_example(dir.path(), 800, vec![0, 1]).unwrap(), 3);
    assert!(dir.path().join("layer-sweep/layers_synthetic_f1_macro.svg").exists());
}

#[test]
fn encoder_comparison_example() {
    let dir = tempfile::tempdir().unwrap();
    let gains = encoder_comparison::run_example(dir.path(), 600).unwrap();
    assert_eq!(gains.len(), 3);
    assert!(gains[1..].iter().all(|g| g.gain.unwrap() > 0.0));
}

#[test]
fn cost_benefit_example() {
    let table = cost_benefit::run_example().unwrap();
    assert!(table.contains("609,480"));
    assert!(table.contains("+8.55"));
}

#[test]
fn age_binning_example() {
    let ages: Vec<i64> = (0..100).map(|i| 20 + i % 40).collect();
    let sampled = age_binning::run_example(&ages, 30).unwrap();
    assert_eq!(sampled.len(), 30);
}
