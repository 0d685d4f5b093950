use crate::common::{random_input, random_spec, random_tensor, rng};
use prescient::data::{make_windows, TimeSeries};
use prescient::detectors::DetectorConfig;
use prescient::layers::{Tcn, TcnConfig};
use prescient::models::{Direction, Model};
use prescient::params::ParamLayout;
use prescient::scoring::{calibrate, StreamDetector, StreamEvent};
use prescient::tensor::{Tape, Tensor};
use rand::Rng;

pub fn shape_chains_hold_for_random_configs() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let direction = if seed % 2 == 0 { Direction::Forward } else { Direction::Backward };
        let spec = random_spec(&mut r, direction);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(seed);
        let (rows_in, rows_out) = match direction {
            Direction::Forward => (spec.window, spec.horizon),
            Direction::Backward => (spec.horizon, spec.window),
        };
        assert_eq!((spec.input_rows(), spec.output_rows()), (rows_in, rows_out));
        let (c, h) = (spec.tcn.channels, spec.gru.hidden_size);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape, false).unwrap();
        let x = tape.constant(random_input(&mut r, &spec, rows_in)).unwrap();
        let tr = model.forward(&mut tape, &p, x, None).unwrap();
        assert_eq!(tape.shape(tr.tcn), [rows_in, c]);
        assert_eq!(tape.shape(tr.gru), [rows_in, h]);
        assert_eq!(tape.shape(tr.encoded), [rows_in, h]);
        assert_eq!(tr.attention.len(), spec.transformer.layers);
        for layer in &tr.attention {
            assert_eq!(layer.len(), spec.transformer.heads);
            for &a in layer {
                assert_eq!(tape.shape(a), [rows_in, rows_in]);
                for row in 0..rows_in {
                    let s: f64 = tape.value(a).row(row).iter().sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
        assert_eq!(tape.shape(tr.pooled), [h]);
        match tr.heads.cont {
            Some(v) => assert_eq!(tape.shape(v), [rows_out, spec.continuous.len()]),
            None => assert!(spec.continuous.is_empty()),
        }
        match tr.heads.disc {
            Some(v) => assert_eq!(tape.shape(v), [rows_out, spec.discrete.len()]),
            None => assert!(spec.discrete.is_empty()),
        }
        let wrong = Tensor::zeros(&[rows_in + 1, spec.n_features()]);
        assert!(model.predictor(&params).unwrap().predict(&wrong).is_err());
    }
}

pub fn tcn_is_causal() {
    for seed in 0..20 {
        let mut r = rng(seed + 50);
        let cfg =
            TcnConfig::new(r.random_range(1..=3), r.random_range(1..=4), r.random_range(1..=3), r.random_range(1..=3));
        let mut layout = ParamLayout::new();
        let tcn = Tcn::new(cfg.clone(), &mut layout, "tcn").unwrap();
        let params = layout.init(seed);
        let rows = r.random_range(2..=10);
        let x = random_tensor(&mut r, &[rows, cfg.in_features], 1.0);
        let run = |x: &Tensor| {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape, false).unwrap();
            let v = tape.constant(x.clone()).unwrap();
            let y = tcn.forward(&mut tape, &p, v).unwrap();
            tape.value(y).clone()
        };
        let base = run(&x);
        for t in 0..rows {
            let mut bumped = x.clone();
            let c = cfg.in_features;
            for j in 0..c {
                bumped.data_mut()[t * c + j] += 3.0;
            }
            let out = run(&bumped);
            for row in 0..t {
                assert_eq!(out.row(row), base.row(row), "row {row} saw input row {t}");
            }
            assert_ne!(out.row(t), base.row(t), "row {t} ignores its own input");
        }
    }
}

fn stream_series(seed: u64, len: usize, d: usize) -> TimeSeries {
    let mut r = rng(seed + 900);
    let phase: Vec<f64> = (0..d).map(|_| r.random_range(0.0..6.0)).collect();
    let mut data = Vec::with_capacity(len * d);
    for t in 0..len {
        for p in &phase {
            data.push((t as f64 * 0.3 + p).sin() + r.random_range(-0.1..0.1));
        }
    }
    TimeSeries::new(Tensor::new(vec![len, d], data).unwrap(), None).unwrap()
}

fn replay(det: &mut StreamDetector<'_>, series: &TimeSeries) -> Vec<StreamEvent> {
    (0..series.len()).filter_map(|t| det.push(series.row(t)).unwrap().proactive).collect()
}

pub fn proactive_events_ignore_the_row_they_judge() {
    for seed in 0..10 {
        let d = 1 + seed as usize % 3;
        let spec =
            prescient::models::ModelSpec::with_sizes(Direction::Forward, 5, 1, (0..d).collect(), vec![], 4, 2, 8);
        let model = Model::new(spec).unwrap();
        let params = model.init_params(seed);
        let train = stream_series(seed, 120, d);
        let schema = prescient::data::infer_schema(&train, 2);
        let windows = make_windows(&train, 5, 1, Direction::Forward).unwrap();
        let cal = calibrate(&model, &params, &windows, &DetectorConfig::default(), 0.99).unwrap();
        let stream = stream_series(seed + 1, 60, d);
        let new = || StreamDetector::new(&model, &params, schema.clone(), cal.clone()).unwrap();
        let base = replay(&mut new(), &stream);
        assert_eq!(base.len(), stream.len() - 4);
        assert_eq!(base[0].timestamp, 5);
        assert_eq!(replay(&mut new(), &stream), base);
        let mut r = rng(seed);
        for _ in 0..5 {
            let target = r.random_range(5..stream.len());
            let mut values = stream.values().clone();
            for j in 0..d {
                values.data_mut()[target * d + j] += 25.0;
            }
            let perturbed = stream.with_values(values).unwrap();
            let events = replay(&mut new(), &perturbed);
            let at = |ev: &[StreamEvent]| *ev.iter().find(|e| e.timestamp == target).unwrap();
            assert_eq!(at(&events), at(&base), "event for {target} changed");
            for (a, b) in events.iter().zip(&base) {
                if a.timestamp <= target {
                    assert_eq!(a, b);
                }
            }
        }
    }
}

pub fn stream_buffer_is_bounded() {
    let spec = prescient::models::ModelSpec::with_sizes(Direction::Forward, 4, 1, vec![0, 1], vec![], 4, 1, 8);
    let model = Model::new(spec).unwrap();
    let params = model.init_params(1);
    let train = stream_series(3, 80, 2);
    let windows = make_windows(&train, 4, 1, Direction::Forward).unwrap();
    let cal = calibrate(&model, &params, &windows, &DetectorConfig::default(), 0.99).unwrap();
    let mut det = StreamDetector::new(&model, &params, prescient::data::infer_schema(&train, 2), cal).unwrap();
    let stream = stream_series(4, 500, 2);
    for t in 0..stream.len() {
        let step = det.push(stream.row(t)).unwrap();
        assert!(det.buffered() <= 4);
        assert_eq!(step.proactive.is_some(), t >= 3);
        assert_eq!(step.reactive.is_some(), t >= 4);
    }
    assert_eq!(det.position(), 500);
}
