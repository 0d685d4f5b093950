#[path = "suites/persistence.rs"]
mod suite;

#[test]
fn same_seed_gives_identical_checkpoints_and_scores() {
    suite::same_seed_gives_identical_checkpoints_and_scores();
}

#[test]
fn saved_config_reproduces_the_run() {
    suite::saved_config_reproduces_the_run();
}

#[test]
fn loaded_checkpoint_reproduces_scores_bit_exactly() {
    suite::loaded_checkpoint_reproduces_scores_bit_exactly();
}
