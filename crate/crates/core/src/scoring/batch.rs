use crate::data::{make_windows, TimeSeries, WindowSet};
use crate::detectors::{DetectorConfig, FittedDetector};
use crate::error::{Error, Result};
use crate::models::{Direction, Model};
use crate::params::ModelParams;
use crate::tensor::Tensor;

use super::{Alignment, ScoreSeries};

fn check_windows(model: &Model, windows: &WindowSet<'_>, want: Direction) -> Result<()> {
    let spec = model.spec();
    if spec.direction != want {
        return Err(Error::config(format!("this score needs a {want} model, got {}", spec.direction)));
    }
    if windows.direction() != spec.direction || windows.window() != spec.window || windows.horizon() != spec.horizon {
        return Err(Error::config("window set does not match the model's direction, window and horizon"));
    }
    Ok(())
}

/// Model output for every window, `[R_out, D]` in column order with
/// discrete columns as probabilities.
pub fn predict_windows(model: &Model, params: &ModelParams, windows: &WindowSet<'_>) -> Result<Vec<Tensor>> {
    check_windows(model, windows, model.spec().direction)?;
    let mut predictor = model.predictor(params)?;
    (0..windows.len()).map(|i| Ok(predictor.predict(&windows.input(i))?.assemble(model.spec(), true))).collect()
}

/// Mean squared error between each prediction and its window target.
pub fn error_scores(predictions: &[Tensor], windows: &WindowSet<'_>) -> Result<Vec<f64>> {
    if predictions.len() != windows.len() {
        return Err(Error::data(format!("{} predictions for {} windows", predictions.len(), windows.len())));
    }
    predictions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = windows.target(i);
            if p.shape() != t.shape() {
                return Err(Error::Shape { op: "error_scores", lhs: p.shape().to_vec(), rhs: t.shape().to_vec() });
            }
            let sq: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(sq / p.len() as f64)
        })
        .collect()
}

/// Forecast error of every forward window, attributed to the window anchor
/// (the first forecast row).
pub fn forward_score(model: &Model, params: &ModelParams, windows: &WindowSet<'_>) -> Result<ScoreSeries> {
    check_windows(model, windows, Direction::Forward)?;
    let preds = predict_windows(model, params, windows)?;
    Ok(ScoreSeries {
        scores: error_scores(&preds, windows)?,
        alignment: Alignment::ForecastTarget,
        first: windows.anchor(0),
    })
}

/// Reconstruction error of every backward window, attributed to the last
/// reconstructed row.
pub fn backward_score(model: &Model, params: &ModelParams, windows: &WindowSet<'_>) -> Result<ScoreSeries> {
    check_windows(model, windows, Direction::Backward)?;
    let preds = predict_windows(model, params, windows)?;
    Ok(ScoreSeries {
        scores: error_scores(&preds, windows)?,
        alignment: Alignment::WindowEnd,
        first: windows.anchor(0) - 1,
    })
}

/// Error of each observed row `x_t` against the one-step forecast made
/// from rows `t-W..t`, for every `t` in `W..T`. Only the first forecast row
/// is compared, so with `H = 1` the values equal those of [`forward_score`].
pub fn reactive_score(model: &Model, params: &ModelParams, series: &TimeSeries) -> Result<ScoreSeries> {
    let spec = model.spec();
    if spec.direction != Direction::Forward {
        return Err(Error::config("reactive scoring needs a forward model"));
    }
    let w = spec.window;
    if series.len() <= w {
        return Err(Error::data(format!("series of length {} is not longer than the window {w}", series.len())));
    }
    let windows = make_windows(series, w, 1, Direction::Forward)?;
    let mut predictor = model.predictor(params)?;
    let mut scores = Vec::with_capacity(windows.len());
    for i in 0..windows.len() {
        let pred = predictor.predict(&windows.input(i))?.assemble(spec, true);
        let x = series.row(windows.anchor(i));
        let sq: f64 = pred.row(0).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        scores.push(sq / x.len() as f64);
    }
    Ok(ScoreSeries { scores, alignment: Alignment::ForecastTarget, first: w })
}

/// Stacks predictions into one flattened `[n, R_out * D]` row each.
pub fn flatten_predictions(predictions: &[Tensor]) -> Result<Tensor> {
    let width = predictions.first().map_or(0, Tensor::len);
    let mut data = Vec::with_capacity(predictions.len() * width);
    for p in predictions {
        if p.len() != width {
            return Err(Error::Shape { op: "flatten_predictions", lhs: vec![p.len()], rhs: vec![width] });
        }
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![predictions.len(), width], data)
}

/// Fits a detector on flattened train predictions and scores the test ones.
pub fn posthoc_detector_scores(
    train_preds: &Tensor,
    test_preds: &Tensor,
    cfg: &DetectorConfig,
) -> Result<(FittedDetector, Vec<f64>)> {
    if train_preds.rows() == 0 {
        return Err(Error::data("detector fit on an empty prediction set"));
    }
    if test_preds.rows() > 0 && test_preds.cols() != train_preds.cols() {
        return Err(Error::Shape {
            op: "posthoc_detector_scores",
            lhs: test_preds.shape().to_vec(),
            rhs: train_preds.shape().to_vec(),
        });
    }
    let det = FittedDetector::fit(cfg, train_preds)?;
    let scores = det.score_rows(test_preds)?;
    Ok((det, scores))
}
