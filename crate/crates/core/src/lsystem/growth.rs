use crate::error::{Error, Result};

/// Piecewise-linear organ growth curve over normalized age.
///
/// Control-point ages are strictly increasing from 0 to 1. `stretch`
/// lengthens the time axis, so an organ with stretch 2 takes twice as long
/// to reach its final size.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFunction {
    points: Vec<(f64, f64)>,
    pub stretch: f64,
}

impl GrowthFunction {
    pub fn new(points: Vec<(f64, f64)>, stretch: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a growth function needs at least two control points"));
        }
        if points.iter().any(|(a, v)| !a.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("growth control points must be finite"));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(Error::invalid("growth control points must start at age 0 and end at age 1"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("growth control point ages must be strictly increasing"));
        }
        if !(stretch.is_finite() && stretch > 0.0) {
            return Err(Error::invalid("growth stretch must be positive"));
        }
        Ok(Self { points, stretch })
    }

    /// Linear ramp from 0 at age 0 to 1 at age 1.
    pub fn linear() -> Self {
        Self {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
            stretch: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value), (1.0, value)],
            stretch: 1.0,
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Value at normalized position `u`, clamped to [0, 1].
    pub fn at(&self, u: f64) -> f64 {
        let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
        let i = self.points.partition_point(|&(a, _)| a <= u);
        if i == 0 {
            return self.points[0].1;
        }
        if i >= self.points.len() {
            return self.points[self.points.len() - 1].1;
        }
        let (a0, v0) = self.points[i - 1];
        let (a1, v1) = self.points[i];
        v0 + (v1 - v0) * (u - a0) / (a1 - a0)
    }

    /// Value for an organ of the given age whose nominal growth period is
    /// `duration` days. Non-positive durations evaluate as fully grown.
    pub fn evaluate(&self, age: f64, duration: f64) -> f64 {
        if duration <= 0.0 {
            return self.at(1.0);
        }
        self.at(age / (duration * self.stretch))
    }
}

/// Free-function form of [`GrowthFunction::evaluate`].
pub fn evaluate_growth(f: &GrowthFunction, age: f64, duration: f64) -> f64 {
    f.evaluate(age, duration)
}
