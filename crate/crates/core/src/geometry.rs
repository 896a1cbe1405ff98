//! Space-time sets, neighbourhood volumes and covering-dimension estimators.
//!
//! Volumes are measured by rasterizing distance fields: exact squared
//! Euclidean distance transforms for masks, direct stamping for point clouds.
//! Lagrangian neighbourhoods are tested by pulling raster nodes back along
//! the flow and querying exact distances to the set.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, is_dyadic, line_fit};
use crate::flows::{FlowMap, GridVelocity, VelocityField};
use crate::grid::{Field, Grid, TimeGrid};
use crate::mollify::{make_kernel, mollify, KernelProfile};

/// Strict `<` comparisons against a radius use this relative slack so that
/// lattice points exactly on a sphere are consistently excluded.
const STRICT: f64 = 1.0 - 1e-12;

/// Weight of a raster node in half cells: 2 strictly inside the radius, 1 on
/// the sphere (its cell is half covered), 0 outside.
fn half_cells(d2: f64, r2: f64, tol: f64) -> u64 {
    if d2 < r2 * (1.0 - tol) {
        2
    } else if d2 <= r2 * (1.0 + tol) {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
enum SliceData {
    /// Node mask on the grid.
    Mask(Arc<Vec<bool>>),
    /// Flattened coordinates, `d` per point.
    Points(Arc<Vec<f64>>),
}

/// Discrete subset of `Ω × (t0, T)`: one mask or point cloud per time slice.
#[derive(Debug, Clone)]
pub struct SpaceTimeSet {
    grid: Grid,
    time: Option<TimeGrid>,
    slices: Vec<SliceData>,
}

impl SpaceTimeSet {
    /// Static spatial set from a node mask.
    pub fn from_mask(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::ShapeMismatch("mask length".into()));
        }
        Ok(Self { grid, time: None, slices: vec![SliceData::Mask(Arc::new(mask))] })
    }

    /// Space-time set from one node mask per slice (`nt·N` entries).
    pub fn from_masks(grid: Grid, time: TimeGrid, masks: Vec<bool>) -> Result<Self> {
        let n = grid.len();
        if masks.len() != n * time.nt {
            return Err(Error::ShapeMismatch("mask length must be nt·N".into()));
        }
        let slices = masks.chunks(n).map(|c| SliceData::Mask(Arc::new(c.to_vec()))).collect();
        Ok(Self { grid, time: Some(time), slices })
    }

    /// Point cloud per slice; `points[n]` holds flattened coordinates.
    pub fn from_points(grid: Grid, time: Option<TimeGrid>, points: Vec<Vec<f64>>) -> Result<Self> {
        let nt = time.map_or(1, |t| t.nt);
        if points.len() != nt {
            return Err(Error::ShapeMismatch(format!("{} point slices for nt = {nt}", points.len())));
        }
        let d = grid.dim();
        let mut slices = Vec::with_capacity(nt);
        for mut p in points {
            if p.len() % d != 0 {
                return Err(Error::ShapeMismatch("point coordinates not a multiple of d".into()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(0));
            }
            for chunk in p.chunks_mut(d) {
                grid.wrap_position(chunk);
            }
            slices.push(SliceData::Points(Arc::new(p)));
        }
        Ok(Self { grid, time, slices })
    }

    /// Every node of every slice.
    pub fn full(grid: Grid, time: Option<TimeGrid>) -> Self {
        let mask = Arc::new(vec![true; grid.len()]);
        let nt = time.map_or(1, |t| t.nt);
        Self { grid, time, slices: vec![SliceData::Mask(mask); nt] }
    }

    pub fn empty(grid: Grid, time: Option<TimeGrid>) -> Self {
        let mask = Arc::new(vec![false; grid.len()]);
        let nt = time.map_or(1, |t| t.nt);
        Self { grid, time, slices: vec![SliceData::Mask(mask); nt] }
    }

    /// The same spatial set on every slice of `time` (shared storage).
    pub fn replicate(&self, time: TimeGrid) -> Result<Self> {
        if self.slices.len() != 1 {
            return Err(invalid("only a static set can be replicated in time"));
        }
        Ok(Self { grid: self.grid.clone(), time: Some(time), slices: vec![self.slices[0].clone(); time.nt] })
    }

    /// `{ |field| > q-quantile of |field| }` over all samples of a scalar field.
    pub fn superlevel(field: &Field, quantile: f64) -> Result<Self> {
        if field.components() != 1 {
            return Err(Error::ShapeMismatch("superlevel sets need a scalar field".into()));
        }
        if !(0.0..1.0).contains(&quantile) {
            return Err(invalid(format!("quantile {quantile} not in [0, 1)")));
        }
        let mut mags: Vec<f64> = field.data().iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| a.total_cmp(b));
        let idx = ((quantile * mags.len() as f64).floor() as usize).min(mags.len() - 1);
        let thr = mags[idx];
        let mask: Vec<bool> = field.data().iter().map(|v| v.abs() > thr).collect();
        match field.time() {
            Some(t) => Self::from_masks(field.grid().clone(), *t, mask),
            None => Self::from_mask(field.grid().clone(), mask),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> Option<&TimeGrid> {
        self.time.as_ref()
    }

    pub fn nt(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        (0..self.nt()).all(|n| self.slice_is_empty(n))
    }

    pub fn slice_is_empty(&self, n: usize) -> bool {
        match &self.slices[n] {
            SliceData::Mask(m) => !m.iter().any(|&b| b),
            SliceData::Points(p) => p.is_empty(),
        }
    }

    pub fn is_point_cloud(&self) -> bool {
        matches!(self.slices.first(), Some(SliceData::Points(_)))
    }

    /// Coordinates of the members of slice `n`, flattened.
    pub fn slice_points(&self, n: usize) -> Vec<f64> {
        match &self.slices[n] {
            SliceData::Points(p) => p.as_ref().clone(),
            SliceData::Mask(m) => m
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .flat_map(|(i, _)| self.grid.position(i))
                .collect(),
        }
    }

    /// Node mask of slice `n`; point clouds are rounded to the nearest node.
    pub fn slice_mask(&self, n: usize) -> Vec<bool> {
        match &self.slices[n] {
            SliceData::Mask(m) => m.as_ref().clone(),
            SliceData::Points(p) => {
                let d = self.grid.dim();
                let mut mask = vec![false; self.grid.len()];
                for x in p.chunks(d) {
                    let idx: Vec<isize> = x
                        .iter()
                        .enumerate()
                        .map(|(a, &c)| (c / self.grid.spacing(a)).round() as isize)
                        .collect();
                    mask[self.grid.flat_wrapped(&idx)] = true;
                }
                mask
            }
        }
    }

    fn same_storage(&self, a: usize, b: usize) -> bool {
        match (&self.slices[a], &self.slices[b]) {
            (SliceData::Mask(x), SliceData::Mask(y)) => Arc::ptr_eq(x, y),
            (SliceData::Points(x), SliceData::Points(y)) => Arc::ptr_eq(x, y),
            _ => false,
        }
    }

    fn time_step(&self) -> Result<f64> {
        self.time.map(|t| t.dt).ok_or_else(|| invalid("operation needs a time axis"))
    }

    /// Exact nearest-member distance queries for slice `n`.
    pub fn locator(&self, n: usize) -> SliceLocator {
        SliceLocator::new(&self.grid, &self.slice_points(n))
    }

    fn locators(&self) -> Vec<Arc<SliceLocator>> {
        let mut out: Vec<Arc<SliceLocator>> = Vec::with_capacity(self.nt());
        for n in 0..self.nt() {
            if n > 0 && self.same_storage(n, n - 1) {
                let prev = out[n - 1].clone();
                out.push(prev);
            } else {
                out.push(Arc::new(self.locator(n)));
            }
        }
        out
    }
}

/// Bucketed point set on the torus answering exact nearest-distance queries.
#[derive(Debug, Clone)]
pub struct SliceLocator {
    lengths: Vec<f64>,
    nb: Vec<usize>,
    width: Vec<f64>,
    start: Vec<usize>,
    coords: Vec<f64>,
}

impl SliceLocator {
    pub fn new(grid: &Grid, points: &[f64]) -> Self {
        let d = grid.dim();
        let lengths = grid.lengths().to_vec();
        let count = points.len() / d;
        // about two points per bucket, bounded both ways
        let target = ((count as f64 / 2.0).max(1.0)).powf(1.0 / d as f64);
        let cap = match d {
            1 => 1 << 20,
            2 => 1 << 10,
            _ => 1 << 6,
        };
        let nb: Vec<usize> = (0..d)
            .map(|a| {
                let by_grid = grid.sizes()[a];
                (target.ceil() as usize).clamp(1, cap.min(by_grid))
            })
            .collect();
        let width: Vec<f64> = (0..d).map(|a| lengths[a] / nb[a] as f64).collect();
        let total: usize = nb.iter().product();
        let bucket_of = |x: &[f64]| -> usize {
            (0..d).fold(0, |acc, a| {
                let b = ((x[a].rem_euclid(lengths[a]) / width[a]) as usize).min(nb[a] - 1);
                acc * nb[a] + b
            })
        };
        let mut counts = vec![0usize; total + 1];
        for p in points.chunks(d) {
            counts[bucket_of(p) + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let start = counts.clone();
        let mut fill = counts;
        let mut coords = vec![0.0; points.len()];
        for p in points.chunks(d) {
            let b = bucket_of(p);
            let at = fill[b];
            coords[at * d..(at + 1) * d].copy_from_slice(p);
            fill[b] += 1;
        }
        Self { lengths, nb, width, start, coords }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn min_image_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengths)
            .map(|((&x, &y), &l)| {
                let mut t = (x - y).rem_euclid(l);
                if t > 0.5 * l {
                    t = l - t;
                }
                t * t
            })
            .sum()
    }

    /// Distance from `y` to the nearest member (`∞` for an empty slice).
    pub fn distance(&self, y: &[f64]) -> f64 {
        self.distance_within(y, f64::INFINITY)
    }

    /// Exact distance if it is below `cutoff`, otherwise some value `≥ cutoff`.
    pub fn distance_within(&self, y: &[f64], cutoff: f64) -> f64 {
        if self.coords.is_empty() {
            return f64::INFINITY;
        }
        let d = self.nb.len();
        let home: Vec<isize> = (0..d)
            .map(|a| ((y[a].rem_euclid(self.lengths[a]) / self.width[a]) as isize).min(self.nb[a] as isize - 1))
            .collect();
        let wmin = self.width.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ring = self.nb.iter().map(|&n| n / 2 + 1).max().unwrap_or(1);
        let mut best = f64::INFINITY;
        let mut off = vec![0isize; d];
        for ring in 0..=max_ring as isize {
            let reach = (ring - 1).max(0) as f64 * wmin;
            if best.sqrt() <= reach || reach >= cutoff {
                break;
            }
            // visit buckets at Chebyshev distance exactly `ring`
            let side = 2 * ring as usize + 1;
            let count = side.pow(d as u32);
            for flat in 0..count {
                let mut rem = flat;
                let mut on_shell = false;
                for a in (0..d).rev() {
                    off[a] = (rem % side) as isize - ring;
                    rem /= side;
                    if off[a].abs() == ring {
                        on_shell = true;
                    }
                }
                if !on_shell && ring > 0 {
                    continue;
                }
                // skip offsets that wrap onto an already-visited bucket
                if (0..d).any(|a| 2 * off[a].unsigned_abs() > self.nb[a] && self.nb[a] > 1 || (self.nb[a] == 1 && off[a] != 0)) {
                    continue;
                }
                let b = (0..d).fold(0usize, |acc, a| {
                    acc * self.nb[a] + (home[a] + off[a]).rem_euclid(self.nb[a] as isize) as usize
                });
                for p in self.coords[self.start[b] * d..self.start[b + 1] * d].chunks(d) {
                    let s = self.min_image_sq(y, p);
                    if s < best {
                        best = s;
                    }
                }
            }
        }
        best.sqrt()
    }
}

/// Exact squared Euclidean distance transform on a periodic line.
/// `f` holds 0 on seeds and `∞` elsewhere (or any finite offsets).
fn edt_line(f: &[f64], h: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    let m = 3 * n;
    let g = |q: usize| f[q % n];
    v.clear();
    z.clear();
    for q in 0..m {
        let fq = g(q);
        if !fq.is_finite() {
            continue;
        }
        let xq = q as f64 * h;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let xp = p as f64 * h;
                    let s = ((fq + xq * xq) - (g(p) + xp * xp)) / (2.0 * (xq - xp));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let x = (n + i) as f64 * h;
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let xp = v[k] as f64 * h;
        *o = g(v[k]) + (x - xp) * (x - xp);
    }
}

/// Exact periodic squared distance transform of a node mask.
pub fn squared_distance_transform(grid: &Grid, mask: &[bool]) -> Vec<f64> {
    let mut field: Vec<f64> = mask.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let sizes = grid.sizes();
    let total = field.len();
    let mut v = Vec::new();
    let mut z = Vec::new();
    for axis in 0..grid.dim() {
        let n = sizes[axis];
        let h = grid.spacing(axis);
        let stride: usize = sizes[axis + 1..].iter().product();
        let outer = total / (n * stride);
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for k in 0..n {
                    line[k] = field[base + k * stride];
                }
                edt_line(&line, h, &mut out, &mut v, &mut z);
                for k in 0..n {
                    field[base + k * stride] = out[k];
                }
            }
        }
    }
    field
}

/// Raster with `refine` sub-samples per cell along each axis.
fn raster_grid(grid: &Grid, refine: usize) -> Result<Grid> {
    let sizes: Vec<usize> = grid.sizes().iter().map(|&n| n * refine).collect();
    Grid::new(&sizes, grid.lengths())
}

/// Squared distances from every raster node to slice `n` of the set. Point
/// clouds are stamped only within `cutoff`; beyond it values are `∞`.
fn slice_distance_sq(set: &SpaceTimeSet, n: usize, raster: &Grid, refine: usize, cutoff: f64) -> Vec<f64> {
    match &set.slices[n] {
        SliceData::Mask(m) => {
            if refine == 1 {
                return squared_distance_transform(raster, m);
            }
            let mut fine = vec![false; raster.len()];
            let d = set.grid.dim();
            for (i, &b) in m.iter().enumerate() {
                if b {
                    let idx: Vec<usize> = set.grid.multi_index(i).iter().map(|&k| k * refine).collect();
                    fine[raster.flat(&idx)] = true;
                }
            }
            debug_assert_eq!(d, raster.dim());
            squared_distance_transform(raster, &fine)
        }
        SliceData::Points(p) => stamp_points(raster, p, cutoff),
    }
}

fn stamp_points(raster: &Grid, points: &[f64], cutoff: f64) -> Vec<f64> {
    let d = raster.dim();
    let mut out = vec![f64::INFINITY; raster.len()];
    let h = raster.spacings();
    let reach: Vec<isize> = (0..d)
        .map(|a| ((cutoff / h[a]).ceil() as isize + 1).min(raster.sizes()[a] as isize / 2))
        .collect();
    let span: Vec<usize> = reach.iter().map(|&r| (2 * r + 1) as usize).collect();
    let count: usize = span.iter().product();
    let cut2 = cutoff * cutoff;
    let mut idx = vec![0isize; d];
    for p in points.chunks(d) {
        let base: Vec<isize> = (0..d).map(|a| (p[a] / h[a]).round() as isize).collect();
        for flat in 0..count {
            let mut rem = flat;
            let mut r2 = 0.0;
            for a in (0..d).rev() {
                let o = (rem % span[a]) as isize - reach[a];
                rem /= span[a];
                idx[a] = base[a] + o;
                let dx = idx[a] as f64 * h[a] - p[a];
                r2 += dx * dx;
            }
            if r2 <= cut2 {
                let k = raster.flat_wrapped(&idx);
                if r2 < out[k] {
                    out[k] = r2;
                }
            }
        }
    }
    out
}

/// Sliding minimum over windows `[i−w, i+w]` clipped to the series.
fn sliding_min(series: &[f32], w: usize) -> Vec<f32> {
    let n = series.len();
    let mut out = vec![f32::INFINITY; n];
    if n == 0 {
        return out;
    }
    let block = 2 * w + 1;
    let mut prefix = vec![0f32; n];
    let mut suffix = vec![0f32; n];
    for i in 0..n {
        prefix[i] = if i % block == 0 { series[i] } else { prefix[i - 1].min(series[i]) };
    }
    for i in (0..n).rev() {
        suffix[i] = if i % block == block - 1 || i == n - 1 { series[i] } else { suffix[i + 1].min(series[i]) };
    }
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(w);
        let hi = (i + w).min(n - 1);
        *o = suffix[lo].min(prefix[hi]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Minkowski,
    Eulerian,
    Lagrangian,
}

/// Fitted dimension with a ±2 standard-error band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub window: (usize, usize),
    /// `(start, end, r², slope)` for every 4-scale sub-window.
    pub sub_windows: Vec<(usize, usize, f64, f64)>,
    /// Sub-window slopes differ by more than 0.2: two scaling regimes.
    pub regime_break: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub mode: CoverMode,
    pub dim: usize,
    /// Decreasing.
    pub deltas: Vec<f64>,
    pub taus: Option<Vec<f64>>,
    /// `𝓗^d` (Minkowski) or `𝓗^{d+1}` (space-time) neighbourhood volumes.
    pub volumes: Vec<f64>,
    pub fit: DimensionFit,
    pub beta: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    /// Fitted exponent of `‖v − V^δ‖_{L^2}` for the mollified family.
    pub beta1_measured: Option<f64>,
    pub v_family: Option<String>,
    pub refine: usize,
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// Least-squares dimension from `(δ, volume)` pairs: `γ = d − slope`.
pub fn fit_dimension(report: &CoverReport, window: Option<(usize, usize)>) -> Result<DimensionFit> {
    dimension_from_volumes(report.dim, &report.deltas, &report.volumes, window)
}

pub fn dimension_from_volumes(
    dim: usize,
    deltas: &[f64],
    volumes: &[f64],
    window: Option<(usize, usize)>,
) -> Result<DimensionFit> {
    let base = fit_power_law(deltas, volumes)?;
    if base.degenerate {
        return Err(Error::DegenerateFit("all volumes vanish".into()));
    }
    let (lo, hi) = window.unwrap_or(base.window);
    if hi > base.scales.len() || hi < lo + 4 {
        return Err(Error::DegenerateFit(format!("window ({lo}, {hi}) has fewer than 4 scales")));
    }
    let logs = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x.ln()).collect() };
    let x = logs(&base.scales);
    let y = logs(&base.values);
    let line = line_fit(&x[lo..hi], &y[lo..hi])?;
    let mut sub_windows = Vec::new();
    for s in 0..=x.len().saturating_sub(4) {
        if let Ok(f) = line_fit(&x[s..s + 4], &y[s..s + 4]) {
            sub_windows.push((s, s + 4, f.r2, f.slope));
        }
    }
    let (mn, mx) = sub_windows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w.3), b.max(w.3)));
    let gamma = dim as f64 - line.slope;
    Ok(DimensionFit {
        gamma,
        lower: gamma - 2.0 * line.slope_se,
        upper: gamma + 2.0 * line.slope_se,
        slope: line.slope,
        slope_se: line.slope_se,
        r2: line.r2,
        window: (lo, hi),
        sub_windows: sub_windows.clone(),
        regime_break: sub_windows.len() > 1 && mx - mn > 0.2,
    })
}

fn check_deltas(grid: &Grid, deltas: &[f64]) -> Result<Vec<f64>> {
    if deltas.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 scales, got {}", deltas.len())));
    }
    if !is_dyadic(deltas) {
        return Err(invalid("δ-list must be dyadic"));
    }
    let h = grid.max_spacing();
    let mut d = deltas.to_vec();
    d.sort_by(|a, b| b.total_cmp(a));
    if d[d.len() - 1] < 2.0 * h * (1.0 - 1e-9) {
        return Err(Error::UnderResolved(format!("δ = {} below 2h = {}", d[d.len() - 1], 2.0 * h)));
    }
    if d[0] > grid.min_length() / 2.0 {
        return Err(invalid("δ exceeds half the domain"));
    }
    Ok(d)
}

fn is_monotone(volumes: &[f64]) -> bool {
    // deltas are decreasing, so volumes must not increase
    volumes.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

fn default_refine(grid: &Grid, delta_min: f64, slices: usize) -> usize {
    let h = grid.max_spacing();
    let want = ((4.0 * h / delta_min).ceil() as usize).max(1);
    let mut r = want;
    while r > 1 && (grid.len() * r.pow(grid.dim() as u32)).saturating_mul(slices) > 1 << 26 {
        r -= 1;
    }
    r
}

/// Options shared by the covering estimators.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoverOptions {
    /// Raster refinement per axis; `None` picks spacing ≤ δ_min/4 within a memory cap.
    pub refine: Option<usize>,
}

/// Box-counting dimension of a static set from δ-neighbourhood volumes.
pub fn minkowski_dimension(set: &SpaceTimeSet, deltas: &[f64], opts: CoverOptions) -> Result<CoverReport> {
    if set.nt() != 1 {
        return Err(invalid("minkowski_dimension expects a static set"));
    }
    if set.is_empty() {
        return Err(invalid("empty set"));
    }
    let deltas = check_deltas(&set.grid, deltas)?;
    let refine = opts.refine.unwrap_or_else(|| default_refine(&set.grid, *deltas.last().unwrap(), 1));
    let raster = raster_grid(&set.grid, refine)?;
    let dist = slice_distance_sq(set, 0, &raster, refine, deltas[0] * 1.0001);
    let vol = raster.cell_volume();
    let volumes: Vec<f64> = deltas
        .iter()
        .map(|&delta| {
            let r2 = delta * delta;
            dist.iter().map(|&x| half_cells(x, r2, 1e-9)).sum::<u64>() as f64 * 0.5 * vol
        })
        .collect();
    finish_report(CoverMode::Minkowski, set.grid.dim(), deltas, None, volumes, refine)
}

fn finish_report(
    mode: CoverMode,
    dim: usize,
    deltas: Vec<f64>,
    taus: Option<Vec<f64>>,
    volumes: Vec<f64>,
    refine: usize,
) -> Result<CoverReport> {
    if volumes.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateFit("a neighbourhood volume vanished".into()));
    }
    let fit = dimension_from_volumes(dim, &deltas, &volumes, None)?;
    let monotone = is_monotone(&volumes);
    Ok(CoverReport {
        mode,
        dim,
        deltas,
        taus,
        volumes,
        fit,
        beta: None,
        beta1: None,
        beta2: None,
        beta1_measured: None,
        v_family: None,
        refine,
        monotone,
        warnings: Vec::new(),
    })
}

/// Monte Carlo estimate of `𝓗^d({x : dist(x, S_n) < δ})` with exact distances.
pub fn monte_carlo_volume(set: &SpaceTimeSet, n: usize, delta: f64, samples: usize, seed: u64) -> f64 {
    let loc = set.locator(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths = set.grid.lengths().to_vec();
    let mut y = vec![0.0; lengths.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (yi, &l) in y.iter_mut().zip(&lengths) {
            *yi = rng.gen_range(0.0..l);
        }
        if loc.distance_within(&y, delta) < delta {
            hits += 1;
        }
    }
    hits as f64 / samples as f64 * set.grid.volume()
}

/// Interior slice range `[lo, hi]` leaving `w` slices on each side.
fn interior(nt: usize, w: usize) -> Result<(usize, usize)> {
    if 2 * w + 1 > nt {
        return Err(Error::UnderResolved(format!("time axis of {nt} slices too short for a window of ±{w}")));
    }
    Ok((w, nt - 1 - w))
}

/// Half-width in slices of the strict window `|t_m − t_n| < τ`.
fn window_slices(tau: f64, dt: f64) -> Result<usize> {
    if tau < 2.0 * dt * (1.0 - 1e-12) {
        return Err(Error::UnderResolved(format!("τ = {tau} below 2·dt = {}", 2.0 * dt)));
    }
    Ok(((tau / dt) * (1.0 - 1e-12)).ceil() as usize - 1)
}

/// Per-slice squared distance stacks as `f32`, sharing work between slices
/// with the same storage.
fn distance_stack(set: &SpaceTimeSet, raster: &Grid, refine: usize, cutoff: f64) -> Vec<Arc<Vec<f32>>> {
    let mut out: Vec<Arc<Vec<f32>>> = Vec::with_capacity(set.nt());
    for n in 0..set.nt() {
        if n > 0 && set.same_storage(n, n - 1) {
            let prev = out[n - 1].clone();
            out.push(prev);
        } else {
            let d = slice_distance_sq(set, n, raster, refine, cutoff);
            out.push(Arc::new(d.into_iter().map(|x| x as f32).collect()));
        }
    }
    out
}

/// Visit the windowed minimum over slices `[n−w, n+w]` of every raster node
/// for slices `n` in `[lo, hi]`, keeping what `keep` returns. Results are in
/// node-major order independent of the thread count.
fn scan_window_min<T, F>(stack: &[Arc<Vec<f32>>], w: usize, lo: usize, hi: usize, keep: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, f32) -> Option<T> + Sync,
{
    let nt = stack.len();
    let nodes = stack.first().map_or(0, |s| s.len());
    let chunk = 4096;
    let blocks: Vec<Vec<T>> = (0..nodes.div_ceil(chunk))
        .into_par_iter()
        .map(|b| {
            let start = b * chunk;
            let end = (start + chunk).min(nodes);
            let mut series = vec![0f32; nt];
            let mut kept = Vec::new();
            for node in start..end {
                for (t, s) in series.iter_mut().enumerate() {
                    *s = stack[t][node];
                }
                let m = sliding_min(&series, w);
                for (n, &v) in m.iter().enumerate().take(hi + 1).skip(lo) {
                    if let Some(x) = keep(n, node, v) {
                        kept.push(x);
                    }
                }
            }
            kept
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

/// Eulerian time-stable covering: volumes of `(S)_{δ,τ}` with `τ = δ^β`,
/// measured over `Ω ×` the slices at least `τ_max` away from both ends.
pub fn eulerian_cover(set: &SpaceTimeSet, deltas: &[f64], beta: f64, opts: CoverOptions) -> Result<CoverReport> {
    let dt = set.time_step()?;
    if set.is_empty() {
        return Err(invalid("empty set"));
    }
    let deltas = check_deltas(&set.grid, deltas)?;
    let taus: Vec<f64> = deltas.iter().map(|d| d.powf(beta)).collect();
    let windows = taus.iter().map(|&t| window_slices(t, dt)).collect::<Result<Vec<_>>>()?;
    let wmax = *windows.iter().max().unwrap();
    let (lo, hi) = interior(set.nt(), wmax)?;
    let refine = opts.refine.unwrap_or_else(|| default_refine(&set.grid, *deltas.last().unwrap(), set.nt()));
    let raster = raster_grid(&set.grid, refine)?;
    let stack = distance_stack(set, &raster, refine, deltas[0] * 1.0001);
    let cell = raster.cell_volume() * dt;
    let mut volumes = Vec::with_capacity(deltas.len());
    for (&delta, &w) in deltas.iter().zip(&windows) {
        let r2 = delta * delta;
        let halves: u64 = scan_window_min(&stack, w, lo, hi, |_, _, x| Some(half_cells(x as f64, r2, 1e-6)).filter(|&k| k > 0))
            .into_iter()
            .sum();
        volumes.push(halves as f64 * 0.5 * cell);
    }
    let mut rep = finish_report(CoverMode::Eulerian, set.grid.dim(), deltas, Some(taus), volumes, refine)?;
    rep.beta = Some(beta);
    Ok(rep)
}

/// Source of the advecting fields `V^δ` for Lagrangian covers.
#[derive(Clone)]
pub enum VelocityFamily<'a> {
    /// `V^δ = v ∗ ρ_δ`, linear in time between the slices of `v`.
    Mollified { v: &'a Field, profile: KernelProfile },
    /// One field for every δ.
    Supplied(Arc<dyn VelocityField>),
}

impl VelocityFamily<'_> {
    fn name(&self) -> String {
        match self {
            VelocityFamily::Mollified { profile, .. } => format!("mollified({})", profile.name()),
            VelocityFamily::Supplied(v) => format!("supplied({})", v.name()),
        }
    }
}

/// Nodes of the raster that belong to the Lagrangian neighbourhood at slice
/// `n`: some slice `m` with `|t_m − t_n| < τ` has `dist_m(Φ_{t_m−t_n}(y)) < δ`.
struct PullBack<'a> {
    flow: &'a FlowMap,
    locators: &'a [Arc<SliceLocator>],
    times: Vec<f64>,
    substeps: usize,
}

impl PullBack<'_> {
    fn member(&self, y: &[f64], n: usize, w: usize, delta: f64) -> bool {
        let r = delta * STRICT;
        if self.locators[n].distance_within(y, r) < r {
            return true;
        }
        let nt = self.times.len();
        let mut fwd = y.to_vec();
        let mut bwd = y.to_vec();
        for j in 1..=w {
            if n + j < nt {
                let t = self.times[n + j - 1];
                let s = self.times[n + j] - t;
                self.flow.advance_steps(&mut fwd, t, s, self.substeps);
                if self.locators[n + j].distance_within(&fwd, r) < r {
                    return true;
                }
            }
            if j <= n {
                let t = self.times[n - j + 1];
                let s = self.times[n - j] - t;
                self.flow.advance_steps(&mut bwd, t, s, self.substeps);
                if self.locators[n - j].distance_within(&bwd, r) < r {
                    return true;
                }
            }
        }
        false
    }
}

/// Points of slice counts above which forward images are not tracked.
const MAX_TRACKED: usize = 1 << 22;

/// Candidate marks for slices `[lo, hi]` from forward images of the point
/// clouds: `y` can only pull back within δ of a point `p` of slice `m` if it
/// lies within `reach` of the image of `p` at the time of `y`'s slice.
fn forward_candidates(
    set: &SpaceTimeSet,
    pull: &PullBack<'_>,
    raster: &Grid,
    w: usize,
    lo: usize,
    hi: usize,
    reach: f64,
) -> Option<Vec<Vec<bool>>> {
    if !set.is_point_cloud() || !reach.is_finite() {
        return None;
    }
    let nt = set.nt();
    let d = raster.dim();
    let first = lo.saturating_sub(w);
    let last = (hi + w).min(nt - 1);
    let tracked: usize = (first..=last).map(|m| set.slice_points(m).len() / d * (2 * w + 1)).sum();
    if tracked > MAX_TRACKED || (hi - lo + 1).saturating_mul(raster.len()) > 1 << 28 {
        return None;
    }
    let mut images: Vec<Vec<f64>> = vec![Vec::new(); hi - lo + 1];
    for m in first..=last {
        let pts = set.slice_points(m);
        let paths: Vec<Vec<(usize, Vec<f64>)>> = pts
            .par_chunks(d)
            .map(|p| {
                let mut out = Vec::new();
                if (lo..=hi).contains(&m) {
                    out.push((m, p.to_vec()));
                }
                for dir in [1isize, -1] {
                    let mut x = p.to_vec();
                    for j in 1..=w as isize {
                        let n = m as isize + dir * j;
                        if (dir > 0 && n > hi as isize) || (dir < 0 && n < lo as isize) {
                            break;
                        }
                        let prev = (n - dir) as usize;
                        let n = n as usize;
                        pull.flow.advance_steps(&mut x, pull.times[prev], pull.times[n] - pull.times[prev], pull.substeps);
                        if (lo..=hi).contains(&n) {
                            out.push((n, x.clone()));
                        }
                    }
                }
                out
            })
            .collect();
        for (n, x) in paths.into_iter().flatten() {
            images[n - lo].extend(wrap_point(raster, &x));
        }
    }
    let cutoff = reach + raster.max_spacing();
    Some(images.par_iter().map(|pts| stamp_points(raster, pts, cutoff).iter().map(|v| v.is_finite()).collect()).collect())
}

fn wrap_point(grid: &Grid, x: &[f64]) -> Vec<f64> {
    x.iter().zip(grid.lengths()).map(|(&v, &l)| v.rem_euclid(l)).collect()
}

fn substeps_for(flow: &FlowMap, dt: f64) -> usize {
    ((dt / flow.max_step()).ceil() as usize).max(1)
}

/// Lagrangian covering: volumes of the flow-advected neighbourhoods
/// `𝓛^{V^δ}(S)_{δ,τ}` with `τ = δ^{β₂}`.
pub fn lagrangian_cover(
    set: &SpaceTimeSet,
    family: VelocityFamily<'_>,
    deltas: &[f64],
    beta1: Option<f64>,
    beta2: f64,
    opts: CoverOptions,
) -> Result<CoverReport> {
    let time = *set.time().ok_or_else(|| invalid("Lagrangian covers need a time axis"))?;
    let dt = time.dt;
    if set.is_empty() {
        return Err(invalid("empty set"));
    }
    let deltas = check_deltas(&set.grid, deltas)?;
    let taus: Vec<f64> = deltas.iter().map(|d| d.powf(beta2)).collect();
    let windows = taus.iter().map(|&t| window_slices(t, dt)).collect::<Result<Vec<_>>>()?;
    let wmax = *windows.iter().max().unwrap();
    let (lo, hi) = interior(set.nt(), wmax)?;
    let refine = opts.refine.unwrap_or(1);
    let raster = raster_grid(&set.grid, refine)?;
    let locators = set.locators();
    let times = time.times();
    let cell = raster.cell_volume() * dt;
    let mut warnings = Vec::new();
    let mut volumes = Vec::with_capacity(deltas.len());
    let mut increments = Vec::new();
    for ((&delta, &tau), &w) in deltas.iter().zip(&taus).zip(&windows) {
        let velocity: Arc<dyn VelocityField> = match &family {
            VelocityFamily::Supplied(v) => v.clone(),
            VelocityFamily::Mollified { v, profile } => {
                let k = make_kernel(v.grid(), delta, *profile)?;
                let ve = mollify(v, &k)?;
                let div = crate::mollify::divergence(&ve)?.lp_norm(2.0);
                if div > 1e-6 {
                    warnings.push(format!("V^δ at δ = {delta:e} has |div|_L2 = {div:e}"));
                }
                increments.push(v.sub(&ve)?.lp_norm(2.0));
                Arc::new(GridVelocity::new(ve)?)
            }
        };
        let flow = FlowMap::new(velocity.clone(), tau, 0.5, set.grid.max_spacing())?;
        let pull = PullBack { flow: &flow, locators: &locators, times: times.clone(), substeps: substeps_for(&flow, dt) };
        let lip = velocity.lipschitz();
        let count = match lip.and_then(|l| forward_candidates(set, &pull, &raster, w, lo, hi, delta * (l * tau).exp())) {
            Some(marks) => marks
                .par_iter()
                .enumerate()
                .map(|(i, mark)| {
                    let n = lo + i;
                    mark.iter()
                        .enumerate()
                        .filter(|&(node, &on)| on && pull.member(&raster.position(node), n, w, delta))
                        .count()
                })
                .sum(),
            None => {
                // nodes within δ + ‖V‖τ of the set somewhere in the Eulerian window
                let speed = velocity.max_speed();
                let reach = delta + speed * tau + raster.max_spacing();
                let stack = distance_stack(set, &raster, refine, reach * 1.0001);
                let reach2 = (reach * reach) as f32;
                scan_window_min(&stack, w, lo, hi, |n, node, d2| {
                    (d2 < reach2 && pull.member(&raster.position(node), n, w, delta)).then_some(())
                })
                .len()
            }
        };
        volumes.push(count as f64 * cell);
    }
    let mut rep = finish_report(CoverMode::Lagrangian, set.grid.dim(), deltas.clone(), Some(taus), volumes, refine)?;
    rep.beta1 = beta1;
    rep.beta2 = Some(beta2);
    rep.v_family = Some(family.name());
    rep.warnings = warnings;
    if increments.len() == deltas.len() && increments.iter().all(|&v| v > 0.0) {
        rep.beta1_measured = fit_power_law(&deltas, &increments).ok().map(|f| f.slope);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityResult {
    pub pass: bool,
    /// Worst `max(0, dist − 2δ)` of an advected sample from `(S)_{2δ,2τ}`.
    pub max_excursion: f64,
    pub samples: usize,
}

/// Advect samples near the boundary of `(S)_{δ,τ}` by `Φ_s`, `|s| < τ`, and
/// test containment in `(S)_{2δ,2τ}`.
pub fn stability_check(
    set: &SpaceTimeSet,
    velocity: Arc<dyn VelocityField>,
    delta: f64,
    tau: f64,
    max_samples: usize,
) -> Result<StabilityResult> {
    let time = *set.time().ok_or_else(|| invalid("stability check needs a time axis"))?;
    let dt = time.dt;
    let w1 = window_slices(tau, dt)?;
    let w2 = window_slices(2.0 * tau, dt)?;
    let grid = &set.grid;
    let h = grid.max_spacing();
    let flow = FlowMap::new(velocity, tau, 0.5, h)?;
    let sub = substeps_for(&flow, dt);
    let locators = set.locators();
    let stack = distance_stack(set, grid, 1, delta * 1.0001);
    let band_lo = ((delta - 1.5 * h).max(0.0).powi(2)) as f32;
    let band_hi = (delta * delta * STRICT) as f32;
    let mut samples: Vec<(usize, usize)> =
        scan_window_min(&stack, w1, 0, set.nt() - 1, |n, node, d2| (d2 >= band_lo && d2 < band_hi).then_some((n, node)));
    samples.sort_unstable();
    if samples.len() > max_samples && max_samples > 0 {
        let stride = samples.len().div_ceil(max_samples);
        samples = samples.into_iter().step_by(stride).collect();
    }
    let times = time.times();
    let nt = set.nt();
    let excursion = |n: usize, y: &[f64]| -> f64 {
        // distance of (y, t_n) from (S)_{2δ,2τ}
        let lo = n.saturating_sub(w2);
        let hi = (n + w2).min(nt - 1);
        let best = (lo..=hi).map(|m| locators[m].distance_within(y, 2.0 * delta)).fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            best
        } else {
            (lo..=hi).map(|m| locators[m].distance(y)).fold(f64::INFINITY, f64::min)
        }
    };
    let worst: f64 = samples
        .par_iter()
        .map(|&(n, node)| {
            let y = grid.position(node);
            let mut worst: f64 = 0.0;
            for dir in [1isize, -1] {
                let mut x = y.clone();
                for j in 1..=w1 {
                    let m = n as isize + dir * j as isize;
                    if m < 0 || m >= nt as isize {
                        break;
                    }
                    let m = m as usize;
                    let prev = (m as isize - dir) as usize;
                    flow.advance_steps(&mut x, times[prev], times[m] - times[prev], sub);
                    worst = worst.max(excursion(m, &x) - 2.0 * delta);
                }
            }
            worst.max(0.0)
        })
        .reduce(|| 0.0, f64::max);
    Ok(StabilityResult { pass: worst <= 1e-9, max_excursion: worst, samples: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sq(grid: &Grid, mask: &[bool]) -> Vec<f64> {
        let pts: Vec<Vec<f64>> = (0..grid.len()).filter(|&i| mask[i]).map(|i| grid.position(i)).collect();
        (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                pts.iter()
                    .map(|p| grid.periodic_delta(&x, p).iter().map(|d| d * d).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn edt_matches_brute_force() {
        let g = Grid::new(&[16, 10], &[1.0, 2.0]).unwrap();
        let mut mask = vec![false; g.len()];
        for &i in &[0, 17, 45, 159, 88] {
            mask[i] = true;
        }
        let a = squared_distance_transform(&g, &mask);
        let b = brute_sq(&g, &mask);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
    }

    #[test]
    fn edt_of_empty_mask_is_infinite() {
        let g = Grid::periodic(&[8]).unwrap();
        assert!(squared_distance_transform(&g, &[false; 8]).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn locator_matches_brute_force() {
        let g = Grid::new(&[32, 32], &[1.0, 1.0]).unwrap();
        let pts = vec![0.1, 0.2, 0.95, 0.97, 0.5, 0.5, 0.51, 0.49, 0.02, 0.9];
        let loc = SliceLocator::new(&g, &pts);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let brute = pts
                .chunks(2)
                .map(|p| g.periodic_delta(&y, p).iter().map(|d| d * d).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!((loc.distance(&y) - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn sliding_min_matches_naive() {
        let s: Vec<f32> = (0..37).map(|i| ((i * 7919) % 23) as f32).collect();
        for w in 0..6 {
            let fast = sliding_min(&s, w);
            for i in 0..s.len() {
                let lo = i.saturating_sub(w);
                let hi = (i + w).min(s.len() - 1);
                let naive = s[lo..=hi].iter().copied().fold(f32::INFINITY, f32::min);
                assert_eq!(fast[i], naive);
            }
        }
    }

    #[test]
    fn point_dimension_is_zero() {
        let g = Grid::new(&[256, 256], &[1.0, 1.0]).unwrap();
        let mut mask = vec![false; g.len()];
        mask[g.flat(&[100, 37])] = true;
        let set = SpaceTimeSet::from_mask(g.clone(), mask).unwrap();
        let deltas: Vec<f64> = (1..=6).map(|k| 2f64.powi(k) * g.spacing(0)).collect();
        let rep = minkowski_dimension(&set, &deltas, CoverOptions::default()).unwrap();
        assert!(rep.fit.gamma.abs() < 0.05, "{:?}", rep.fit);
        assert!(rep.monotone);
    }

    #[test]
    fn segment_dimension_is_one() {
        let g = Grid::new(&[256, 256], &[1.0, 1.0]).unwrap();
        let mut mask = vec![false; g.len()];
        for i in 0..256 {
            mask[g.flat(&[i, 128])] = true;
        }
        let set = SpaceTimeSet::from_mask(g.clone(), mask).unwrap();
        let deltas: Vec<f64> = (1..=5).map(|k| 2f64.powi(k) * g.spacing(0)).collect();
        let rep = minkowski_dimension(&set, &deltas, CoverOptions::default()).unwrap();
        assert!((rep.fit.gamma - 1.0).abs() < 0.05, "{:?}", rep.fit);
    }

    #[test]
    fn monte_carlo_agrees_with_raster() {
        let g = Grid::new(&[128, 128], &[1.0, 1.0]).unwrap();
        let mut mask = vec![false; g.len()];
        for i in 20..90 {
            mask[g.flat(&[i, 64])] = true;
        }
        mask[g.flat(&[5, 5])] = true;
        let set = SpaceTimeSet::from_mask(g.clone(), mask).unwrap();
        let delta = 0.05;
        let raster = raster_grid(&g, 4).unwrap();
        let d = slice_distance_sq(&set, 0, &raster, 4, 1.0);
        let ras = d.iter().filter(|&&x| x < delta * delta).count() as f64 * raster.cell_volume();
        let mc = monte_carlo_volume(&set, 0, delta, 200_000, 11);
        assert!((ras - mc).abs() / ras < 0.02, "{ras} {mc}");
    }

    #[test]
    fn exact_power_law_fit() {
        let deltas: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let volumes: Vec<f64> = deltas.iter().map(|d| 2.5 * d.powf(2.0 - 0.7)).collect();
        let f = dimension_from_volumes(2, &deltas, &volumes, None).unwrap();
        assert!((f.gamma - 0.7).abs() < 1e-12);
        assert!(!f.regime_break);
    }

    #[test]
    fn noisy_fit_band_covers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let deltas: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        let volumes: Vec<f64> = deltas
            .iter()
            .map(|d| d.powf(1.4) * (1.0 + rng.gen_range(-0.05..0.05)))
            .collect();
        let f = dimension_from_volumes(2, &deltas, &volumes, None).unwrap();
        assert!(f.lower <= 0.6 && 0.6 <= f.upper, "{f:?}");
    }

    #[test]
    fn two_regimes_are_flagged() {
        let deltas: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        let volumes: Vec<f64> = deltas
            .iter()
            .map(|&d| if d > 0.05 { d.powf(1.0) } else { 0.05f64.powf(1.0 - 2.0) * d.powf(2.0) })
            .collect();
        let f = dimension_from_volumes(2, &deltas, &volumes, None).unwrap();
        assert!(f.regime_break);
        let straddle = f.sub_windows.iter().map(|w| w.2).fold(1.0, f64::min);
        assert!(straddle < 0.99);
    }

    #[test]
    fn cover_input_checks() {
        let g = Grid::new(&[64], &[1.0]).unwrap();
        let set = SpaceTimeSet::empty(g.clone(), None);
        let deltas = [0.25, 0.125, 0.0625, 0.03125];
        assert!(minkowski_dimension(&set, &deltas, CoverOptions::default()).is_err());
        let mut m = vec![false; 64];
        m[3] = true;
        let set = SpaceTimeSet::from_mask(g, m).unwrap();
        assert!(minkowski_dimension(&set, &deltas[..3], CoverOptions::default()).is_err());
        assert!(minkowski_dimension(&set, &[0.4, 0.2, 0.1, 0.05], CoverOptions::default()).is_ok());
        assert!(matches!(
            minkowski_dimension(&set, &[0.16, 0.08, 0.04, 0.02], CoverOptions::default()),
            Err(Error::UnderResolved(_))
        ));
    }

    #[test]
    fn static_point_eulerian() {
        let g = Grid::new(&[128, 128], &[1.0, 1.0]).unwrap();
        let h = g.spacing(0);
        let time = TimeGrid::new(80, h, 0.0).unwrap();
        let mut m = vec![false; g.len()];
        m[g.flat(&[64, 64])] = true;
        let set = SpaceTimeSet::from_mask(g, m).unwrap().replicate(time).unwrap();
        let deltas: Vec<f64> = (1..=5).map(|k| 2f64.powi(k) * h).collect();
        let rep = eulerian_cover(&set, &deltas, 1.0, CoverOptions::default()).unwrap();
        assert!(rep.fit.gamma.abs() < 0.05, "{:?}", rep.fit);
    }

    #[test]
    fn tau_below_two_steps_aborts() {
        let g = Grid::new(&[64], &[1.0]).unwrap();
        let time = TimeGrid::new(40, 0.05, 0.0).unwrap();
        let mut m = vec![false; 64];
        m[10] = true;
        let set = SpaceTimeSet::from_mask(g, m).unwrap().replicate(time).unwrap();
        let deltas = [0.25, 0.125, 0.0625, 0.03125];
        assert!(matches!(
            eulerian_cover(&set, &deltas, 1.0, CoverOptions::default()),
            Err(Error::UnderResolved(_))
        ));
    }
}
