mod common;

use common::gradcheck::{end_to_end_error, end_to_end_setup, primitive_errors};

#[test]
fn every_primitive_matches_central_differences() {
    for (name, err) in primitive_errors() {
        eprintln!("{name}: {err:e}");
        assert!(err < 1e-4, "{name}: relative error {err:e}");
    }
}

#[test]
fn encoder_and_hierarchical_loss_match_central_differences() {
    let setup = end_to_end_setup();
    let err = end_to_end_error(&setup);
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn three_block_graph_matches_central_differences() {
    let setup = common::gradcheck::end_to_end_with_blocks(3);
    let err = end_to_end_error(&setup);
    assert!(err < 1e-4, "relative error {err:e}");
}
