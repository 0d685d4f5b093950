use std::ops::Range;

use crate::error::{Error, Result};
use crate::models::Direction;
use crate::tensor::Tensor;

use super::series::TimeSeries;

/// Stride-1 sliding windows over a series, without copying it.
///
/// With 0-based rows, the window at anchor `t` has past rows `t-W..t` and
/// future rows `t..t+H`, for every `t` in `W..=T-H`. The forward direction
/// maps past to future; the backward direction maps future to past.
#[derive(Clone, Copy, Debug)]
pub struct WindowSet<'a> {
    values: &'a Tensor,
    window: usize,
    horizon: usize,
    direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub anchor: usize,
    pub input: Tensor,
    pub target: Tensor,
}

pub fn make_windows(series: &TimeSeries, window: usize, horizon: usize, direction: Direction) -> Result<WindowSet<'_>> {
    if window == 0 || horizon == 0 {
        return Err(Error::config("window and horizon must be at least 1"));
    }
    if series.len() < window + horizon {
        return Err(Error::data(format!(
            "series of length {} is shorter than window + horizon = {}",
            series.len(),
            window + horizon
        )));
    }
    Ok(WindowSet { values: series.values(), window, horizon, direction })
}

impl<'a> WindowSet<'a> {
    pub fn len(&self) -> usize {
        self.values.rows() - self.window - self.horizon + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn series_len(&self) -> usize {
        self.values.rows()
    }

    pub fn anchor(&self, i: usize) -> usize {
        self.window + i
    }

    pub fn anchors(&self) -> Range<usize> {
        self.window..self.window + self.len()
    }

    pub fn past_rows(&self, anchor: usize) -> Range<usize> {
        anchor - self.window..anchor
    }

    pub fn future_rows(&self, anchor: usize) -> Range<usize> {
        anchor..anchor + self.horizon
    }

    pub fn input_rows(&self, i: usize) -> Range<usize> {
        let a = self.anchor(i);
        match self.direction {
            Direction::Forward => self.past_rows(a),
            Direction::Backward => self.future_rows(a),
        }
    }

    pub fn target_rows(&self, i: usize) -> Range<usize> {
        let a = self.anchor(i);
        match self.direction {
            Direction::Forward => self.future_rows(a),
            Direction::Backward => self.past_rows(a),
        }
    }

    fn rows(&self, r: Range<usize>) -> Tensor {
        self.values.slice_rows(r.start, r.len())
    }

    pub fn input(&self, i: usize) -> Tensor {
        self.rows(self.input_rows(i))
    }

    pub fn target(&self, i: usize) -> Tensor {
        self.rows(self.target_rows(i))
    }

    pub fn get(&self, i: usize) -> Window {
        Window { anchor: self.anchor(i), input: self.input(i), target: self.target(i) }
    }

    pub fn iter(&self) -> impl Iterator<Item = Window> + 'a {
        let set = *self;
        (0..set.len()).map(move |i| set.get(i))
    }
}
