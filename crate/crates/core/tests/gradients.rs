//! Analytic gradients against central finite differences on random instances.

mod common;

use common::GradReport;

const INSTANCES: usize = 50;
const REL_TOL: f64 = 1e-3;

#[track_caller]
fn assert_within(name: &str, r: GradReport) {
    assert!(r.checks >= r.instances, "{name}: only {} checks", r.checks);
    assert!(r.worst <= REL_TOL, "{name}: worst relative error {:e} over {} checks", r.worst, r.checks);
}

#[test]
fn hash_encoding_table_gradients() {
    assert_within("hash table", common::hash_table(INSTANCES));
}

#[test]
fn hash_encoding_input_gradients() {
    assert_within("hash input", common::hash_input(INSTANCES));
}

#[test]
fn mlp_parameter_and_input_gradients() {
    assert_within("mlp", common::mlp(INSTANCES));
}

#[test]
fn se3_ray_generation_gradients() {
    assert_within("se3 rays", common::se3_rays(INSTANCES));
}

#[test]
fn compositing_gradients() {
    assert_within("compositing", common::compositing(INSTANCES));
}

#[test]
fn random_tape_graphs() {
    assert_within("tape", common::tape_graphs(120));
}
