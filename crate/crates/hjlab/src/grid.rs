//! Axis-aligned boxes, uniform grids, and sampled solution fields.
//!
//! All solvers in this crate exchange data through [`SolutionGrid`]: a
//! uniform tensor grid in one or two space dimensions carrying one value per
//! node, stamped with the evaluation time and the solver that produced it.

use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};

/// Closed axis-aligned rectangle `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    bounds: Vec<(f64, f64)>,
}

impl Rect {
    /// Builds a box from per-axis `(lo, hi)` pairs.  Every axis must have
    /// `lo < hi` and finite endpoints.
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(HjError::EmptyBox("zero-dimensional box".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(HjError::EmptyBox(format!(
                    "axis {i}: [{lo}, {hi}] is empty or not finite"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// One-dimensional interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.bounds[axis].0
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.bounds[axis].1
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q.iter()
                .zip(&self.bounds)
                .all(|(x, &(lo, hi))| *x >= lo && *x <= hi)
    }

    /// The same box grown by `pad >= 0` on every side.
    pub fn padded(&self, pad: f64) -> Rect {
        Rect {
            bounds: self
                .bounds
                .iter()
                .map(|&(lo, hi)| (lo - pad, hi + pad))
                .collect(),
        }
    }

    /// Uniform lattice with `n` points per axis (n >= 2), including corners.
    /// Points are produced in row-major order.
    pub fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = n.pow(d as u32);
        let mut pts = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let p: Vec<f64> = idx
                .iter()
                .zip(&self.bounds)
                .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect();
            pts.push(p);
            for ax in (0..d).rev() {
                idx[ax] += 1;
                if idx[ax] < n {
                    break;
                }
                idx[ax] = 0;
            }
        }
        pts
    }
}

/// Uniform 1D axis: nodes `lo + i*step` for `i = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    /// Axis spanning `[lo, hi]` with `n >= 2` nodes.
    pub fn span(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(HjError::InvalidInput(format!(
                "axis needs lo < hi and n >= 2, got [{lo}, {hi}] with n = {n}"
            )));
        }
        Ok(Self {
            lo,
            step: (hi - lo) / (n - 1) as f64,
            n,
        })
    }

    /// Axis from a fixed node spacing; the last node is the first one at or
    /// beyond `hi`.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(lo < hi) {
            return Err(HjError::InvalidInput(format!(
                "axis needs lo < hi and step > 0, got [{lo}, {hi}] step {step}"
            )));
        }
        let n = ((hi - lo) / step).ceil() as usize + 1;
        Ok(Self { lo, step, n })
    }

    pub fn hi(&self) -> f64 {
        self.coord(self.n - 1)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.coord(i))
    }

    /// Index of the node nearest to `x`, clamped to the axis.
    pub fn nearest(&self, x: f64) -> usize {
        let raw = ((x - self.lo) / self.step).round();
        raw.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Which solver produced a [`SolutionGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Variational,
    Viscosity,
    LaxOleinik,
    Envelope,
    ClosedForm,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Variational => "variational",
            Provenance::Viscosity => "viscosity",
            Provenance::LaxOleinik => "lax_oleinik",
            Provenance::Envelope => "envelope",
            Provenance::ClosedForm => "closed_form",
        }
    }
}

/// Sampled solution u(t, ·) on a uniform tensor grid, row-major in the last
/// axis (for d = 2 the second axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub t: f64,
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl SolutionGrid {
    pub fn new(t: f64, axes: Vec<Axis>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let expect: usize = axes.iter().map(|a| a.n).product();
        if axes.is_empty() || axes.len() > 2 {
            return Err(HjError::InvalidInput(format!(
                "solution grids are 1D or 2D, got {} axes",
                axes.len()
            )));
        }
        if values.len() != expect {
            return Err(HjError::InvalidInput(format!(
                "value count {} does not match grid size {}",
                values.len(),
                expect
            )));
        }
        Ok(Self {
            t,
            axes,
            values,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of the node with flat index `k`.
    pub fn node(&self, k: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].coord(k)],
            _ => {
                let n2 = self.axes[1].n;
                vec![self.axes[0].coord(k / n2), self.axes[1].coord(k % n2)]
            }
        }
    }

    /// True when `other` samples the same times and nodes.
    pub fn same_axes(&self, other: &SolutionGrid) -> bool {
        self.axes == other.axes && self.t == other.t
    }

    /// Elementwise difference `self - other`.
    pub fn diff(&self, other: &SolutionGrid) -> Result<Vec<f64>> {
        if !self.same_axes(other) {
            return Err(HjError::AxisMismatch(
                "grids sample different nodes or times".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect())
    }
}
