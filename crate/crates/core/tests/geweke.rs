mod common;

#[test]
fn successive_conditional_matches_prior() {
    let result = common::geweke(20_000, 17);
    eprintln!("geweke z-scores: {:?}", result.z_scores);
    assert!(result.max_abs_z < 4.0, "max |z| = {}", result.max_abs_z);
}
