//! Piecewise-linear waveforms on (possibly non-matching) constant-stepsize grids.

use crate::error::{Error, Result};
use crate::timeint::{GridTime, TimeGrid};

/// Vector values on an increasing list of grid times covering `[0, tf]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    tf: f64,
    points: Vec<GridTime>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn from_grid(grid: &TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_points(grid.tf(), grid.points(), values)
    }

    /// Constant extrapolation of `value` over the grid.
    pub fn constant(grid: &TimeGrid, value: &[f64]) -> Self {
        Self::from_grid(grid, vec![value.to_vec(); grid.steps() + 1]).expect("sizes match")
    }

    pub fn from_points(tf: f64, points: Vec<GridTime>, values: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.len() < 2
            || points[0] != GridTime::zero()
            || *points.last().unwrap() != GridTime::end()
        {
            return Err(Error::InvalidParameter(
                "waveform points must span [0, tf]".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "waveform points must increase".into(),
            ));
        }
        let width = values[0].len();
        if values.iter().any(|v| v.len() != width) {
            return Err(Error::Dimension("ragged waveform values".into()));
        }
        let times = points.iter().map(|p| p.value(tf)).collect();
        Ok(Self {
            tf,
            points,
            times,
            values,
        })
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn points(&self) -> &[GridTime] {
        &self.points
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Replaces one point; all other points are untouched.
    pub fn update_point(&mut self, i: usize, value: &[f64]) -> Result<()> {
        let len = self.values.len();
        let slot = self
            .values
            .get_mut(i)
            .ok_or(Error::IndexOutOfRange { index: i, len })?;
        if value.len() != slot.len() {
            return Err(Error::Dimension("point width mismatch".into()));
        }
        slot.copy_from_slice(value);
        Ok(())
    }

    /// Linear interpolation at a floating-point time; exact at stored points.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.tf).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                t_final: self.tf,
            });
        }
        let i = self.times.partition_point(|&s| s <= t);
        // times[i-1] <= t < times[i]
        let lo = i - 1;
        if self.times[lo] == t || lo + 1 == self.times.len() {
            return Ok(self.values[lo].clone());
        }
        let w = (t - self.times[lo]) / (self.times[lo + 1] - self.times[lo]);
        Ok(lerp(&self.values[lo], &self.values[lo + 1], w))
    }

    /// Linear interpolation at a grid time, with the weight formed exactly.
    pub fn eval_at(&self, t: GridTime) -> Result<Vec<f64>> {
        if t > GridTime::end() {
            return Err(Error::TimeOutOfRange {
                t: t.value(self.tf),
                t_final: self.tf,
            });
        }
        match self.bracket(t) {
            Bracket::At(i) => Ok(self.values[i].clone()),
            Bracket::Between(i, w) => Ok(lerp(&self.values[i], &self.values[i + 1], w)),
        }
    }

    pub(crate) fn bracket(&self, t: GridTime) -> Bracket {
        bracket(&self.points, t)
    }

    /// Values at the given grid's points.
    pub fn resample(&self, grid: &TimeGrid) -> Result<Waveform> {
        let values = grid
            .points()
            .into_iter()
            .map(|p| self.eval_at(p))
            .collect::<Result<_>>()?;
        Waveform::from_grid(grid, values)
    }

    /// Waveform of selected components.
    pub fn select(&self, components: &[usize]) -> Waveform {
        let values = self
            .values
            .iter()
            .map(|v| components.iter().map(|&c| v[c]).collect())
            .collect();
        Waveform {
            tf: self.tf,
            points: self.points.clone(),
            times: self.times.clone(),
            values,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Bracket {
    At(usize),
    Between(usize, f64),
}

/// Locates `t` in a sorted point list covering `[0, 1]`.
pub(crate) fn bracket(points: &[GridTime], t: GridTime) -> Bracket {
    let i = points.partition_point(|p| *p <= t);
    let lo = i - 1;
    if points[lo] == t {
        return Bracket::At(lo);
    }
    let (a, b) = (points[lo], points[lo + 1]);
    // w = (t - a) / (b - a) with all three as fractions of the horizon.
    let (tn, td) = (t.num() as i128, t.den() as i128);
    let (an, ad) = (a.num() as i128, a.den() as i128);
    let (bn, bd) = (b.num() as i128, b.den() as i128);
    let num = (tn * ad - an * td) * bd;
    let den = (bn * ad - an * bd) * td;
    Bracket::Between(lo, num as f64 / den as f64)
}

pub(crate) fn lerp(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - w) * x + w * y)
        .collect()
}

/// Per-point flags of the peer grid, cleared at the start of every sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateFlags {
    flags: Vec<bool>,
}

impl UpdateFlags {
    pub fn new(len: usize) -> Self {
        Self {
            flags: vec![false; len],
        }
    }

    pub fn clear(&mut self) {
        self.flags.iter_mut().for_each(|f| *f = false);
    }

    pub fn set(&mut self, i: usize) {
        self.flags[i] = true;
    }

    pub fn get(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Smallest peer-grid interval enclosing a step `[t_n, t_{n+1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnclosingInterval {
    pub t_minus: GridTime,
    pub t_plus: GridTime,
    pub index_minus: usize,
    pub index_plus: usize,
}

pub fn enclosing_interval(
    other: &TimeGrid,
    t_n: GridTime,
    t_np1: GridTime,
) -> Result<EnclosingInterval> {
    if t_n >= t_np1 {
        return Err(Error::InvalidParameter(
            "step interval must be increasing".into(),
        ));
    }
    if t_np1 > GridTime::end() {
        return Err(Error::TimeOutOfRange {
            t: t_np1.value(other.tf()),
            t_final: other.tf(),
        });
    }
    let index_minus = t_n.floor_index(other.steps());
    let index_plus = t_np1.ceil_index(other.steps());
    Ok(EnclosingInterval {
        t_minus: other.point(index_minus),
        t_plus: other.point(index_plus),
        index_minus,
        index_plus,
    })
}

/// Union `T_v ∪ T_w` of two grids on the same horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionGrid {
    points: Vec<GridTime>,
}

impl UnionGrid {
    pub fn new(a: &TimeGrid, b: &TimeGrid) -> Result<Self> {
        if a.tf() != b.tf() {
            return Err(Error::InvalidParameter(
                "grids must share the horizon".into(),
            ));
        }
        let mut points = a.points();
        points.extend(b.points());
        points.sort();
        points.dedup();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GridTime] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, t: GridTime) -> Option<usize> {
        self.points.binary_search(&t).ok()
    }

    /// Indices of union points inside `[lo, hi]`.
    pub fn range(&self, lo: GridTime, hi: GridTime) -> std::ops::Range<usize> {
        let s = self.points.partition_point(|p| *p < lo);
        let e = self.points.partition_point(|p| *p <= hi);
        s..e
    }
}
