use crate::common::{random_input, random_spec, rng};
use prescient::models::{estimate_cost, Direction, Model, ModelSpec};
use prescient::tensor::Tape;
use rand::Rng;

fn counted(spec: &ModelSpec, batch: usize, seed: u64) -> u64 {
    let model = Model::new(spec.clone()).unwrap();
    let params = model.init_params(seed);
    let mut r = rng(seed);
    let mut tape = Tape::new();
    let p = params.bind(&mut tape, false).unwrap();
    for _ in 0..batch {
        let x = tape.constant(random_input(&mut r, spec, spec.input_rows())).unwrap();
        model.forward(&mut tape, &p, x, None).unwrap();
    }
    tape.multiplications()
}

pub fn estimate_tracks_the_instrumented_counter() {
    for seed in 0..10 {
        let mut r = rng(seed + 70);
        let direction = if seed % 2 == 0 { Direction::Forward } else { Direction::Backward };
        let spec = random_spec(&mut r, direction);
        let batch = r.random_range(1..4);
        let est = estimate_cost(&spec, batch).total() as f64;
        let got = counted(&spec, batch, seed) as f64;
        assert!((est - got).abs() <= 0.2 * got, "seed {seed}: estimate {est} vs counted {got}");
    }
}

pub fn reference_configuration_matches_the_counter() {
    let spec = ModelSpec::with_sizes(Direction::Forward, 5, 1, (0..25).collect(), vec![], 8, 2, 16);
    let est = estimate_cost(&spec, 1).total() as f64;
    let got = counted(&spec, 1, 0) as f64;
    assert!((est - got).abs() <= 0.2 * got, "estimate {est} vs counted {got}");
}

pub fn attention_term_scales_with_the_square_of_the_window() {
    for seed in 0..10 {
        let mut r = rng(seed + 80);
        let mut spec = random_spec(&mut r, Direction::Forward);
        let att = |s: &ModelSpec| estimate_cost(s, 1).term("attention").unwrap().multiplications;
        let base = att(&spec);
        let w = spec.window;
        spec.window = 2 * w;
        assert_eq!(att(&spec), 4 * base);
        spec.window = 4 * w;
        assert_eq!(att(&spec), 16 * base);
    }
}
