//! Periodic sampled fields and the `ITL1` binary format.
//!
//! A [`Field`] stores `nt · components · ∏N_i` samples laid out as
//! `(time, component, row-major space)`; the last spatial axis varies fastest.
//! Every spatial index wraps modulo the axis size.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ITL1";

/// Uniform periodic grid on the torus `∏ [0, L_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
}

impl Grid {
    pub fn new(sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 3 {
            return Err(Error::InvalidGrid(format!("dimension {} not in 1..=3", sizes.len())));
        }
        if sizes.len() != lengths.len() {
            return Err(Error::InvalidGrid("sizes and lengths differ in length".into()));
        }
        for &n in sizes {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("axis size {n} must be even and >= 8")));
            }
        }
        for &l in lengths {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("axis length {l} must be positive")));
            }
        }
        Ok(Self { sizes: sizes.to_vec(), lengths: lengths.to_vec() })
    }

    /// Grid with every period equal to 2π.
    pub fn periodic(sizes: &[usize]) -> Result<Self> {
        Self::new(sizes, &vec![2.0 * PI; sizes.len()])
    }

    /// `d`-dimensional cube with `n` samples and period `length` per axis.
    pub fn cube(d: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(&vec![n; d], &vec![length; d])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.spacing(a)).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(0.0, f64::max)
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of spatial samples.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacings().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Flat index of a multi-index (no wrapping).
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.sizes).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Flat index of a signed multi-index, wrapped onto the torus.
    pub fn flat_wrapped(&self, idx: &[isize]) -> usize {
        idx.iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &n)| acc * n + wrap(i, n))
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
        idx
    }

    /// Physical coordinates of a node.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }

    /// Minimal-image displacement `a − b` on the torus.
    pub fn periodic_delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.lengths)
            .map(|((&x, &y), &l)| {
                let mut d = (x - y) % l;
                if d >= 0.5 * l {
                    d -= l;
                } else if d < -0.5 * l {
                    d += l;
                }
                d
            })
            .collect()
    }

    /// Wrap a position into the fundamental cell.
    pub fn wrap_position(&self, x: &mut [f64]) {
        for (xi, &l) in x.iter_mut().zip(&self.lengths) {
            *xi = xi.rem_euclid(l);
            if *xi >= l {
                *xi = 0.0;
            }
        }
    }
}

#[inline]
pub fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Uniform sampling of a time interval: `t_n = t0 + n·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub nt: usize,
    pub dt: f64,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(nt: usize, dt: f64, t0: f64) -> Result<Self> {
        if nt < 1 {
            return Err(Error::InvalidGrid("time grid needs nt >= 1".into()));
        }
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("time step {dt} must be positive")));
        }
        Ok(Self { nt, dt, t0 })
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nt - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.time(n)).collect()
    }
}

/// Sampled scalar, vector, or tensor data on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    time: Option<TimeGrid>,
    components: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, time: Option<TimeGrid>, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::ShapeMismatch("a field needs at least one component".into()));
        }
        let nt = time.map_or(1, |t| t.nt);
        let expected = nt * components * grid.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != nt·components·N = {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, time, components, data })
    }

    pub fn zeros(grid: Grid, time: Option<TimeGrid>, components: usize) -> Self {
        let nt = time.map_or(1, |t| t.nt);
        let data = vec![0.0; nt * components * grid.len()];
        Self { grid, time, components, data }
    }

    /// Build a field by evaluating `f(position, time, component)` at every sample.
    pub fn from_fn<F>(grid: Grid, time: Option<TimeGrid>, components: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, usize) -> f64,
    {
        let nt = time.map_or(1, |t| t.nt);
        let n = grid.len();
        let positions: Vec<Vec<f64>> = (0..n).map(|i| grid.position(i)).collect();
        let mut data = Vec::with_capacity(nt * components * n);
        for ti in 0..nt {
            let t = time.map_or(0.0, |tg| tg.time(ti));
            for c in 0..components {
                data.extend(positions.iter().map(|x| f(x, t, c)));
            }
        }
        Self::new(grid, time, components, data)
    }

    /// Same spatial data replicated on every slice of `time`.
    pub fn replicate_in_time(&self, time: TimeGrid) -> Result<Self> {
        if self.time.is_some() {
            return Err(Error::ShapeMismatch("field already has a time axis".into()));
        }
        let mut data = Vec::with_capacity(time.nt * self.data.len());
        for _ in 0..time.nt {
            data.extend_from_slice(&self.data);
        }
        Ok(Self { grid: self.grid.clone(), time: Some(time), components: self.components, data })
    }

    pub(crate) fn from_parts_unchecked(
        grid: Grid,
        time: Option<TimeGrid>,
        components: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), time.map_or(1, |t| t.nt) * components * grid.len());
        Self { grid, time, components, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> Option<&TimeGrid> {
        self.time.as_ref()
    }

    pub fn nt(&self) -> usize {
        self.time.map_or(1, |t| t.nt)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Samples of one component on one time slice.
    pub fn slice(&self, t: usize, c: usize) -> &[f64] {
        let n = self.grid.len();
        let start = (t * self.components + c) * n;
        &self.data[start..start + n]
    }

    pub fn slice_mut(&mut self, t: usize, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        let start = (t * self.components + c) * n;
        &mut self.data[start..start + n]
    }

    /// All components of one time slice, contiguous.
    pub fn time_slice(&self, t: usize) -> &[f64] {
        let block = self.components * self.grid.len();
        &self.data[t * block..(t + 1) * block]
    }

    /// Single time slice as a static field.
    pub fn at_time(&self, t: usize) -> Result<Field> {
        if t >= self.nt() {
            return Err(Error::OutOfRange(format!("time index {t} >= nt {}", self.nt())));
        }
        Ok(Self {
            grid: self.grid.clone(),
            time: None,
            components: self.components,
            data: self.time_slice(t).to_vec(),
        })
    }

    /// Extract component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        let mut data = Vec::with_capacity(self.nt() * self.grid.len());
        for t in 0..self.nt() {
            data.extend_from_slice(self.slice(t, c));
        }
        Self { grid: self.grid.clone(), time: self.time, components: 1, data }
    }

    /// Stack scalar fields sharing grid and time axis into one multi-component field.
    pub fn stack(parts: &[Field]) -> Result<Field> {
        let first = parts.first().ok_or_else(|| Error::ShapeMismatch("nothing to stack".into()))?;
        let mut components = 0;
        for p in parts {
            if p.grid != first.grid || p.time != first.time {
                return Err(Error::ShapeMismatch("stacked fields must share grid and time".into()));
            }
            components += p.components;
        }
        let mut data = Vec::with_capacity(first.nt() * components * first.grid.len());
        for t in 0..first.nt() {
            for p in parts {
                data.extend_from_slice(p.time_slice(t));
            }
        }
        Ok(Self { grid: first.grid.clone(), time: first.time, components, data })
    }

    /// Pointwise map over every sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.time, self.components, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Field {
        Self { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Periodic shift by an integer number of cells per axis: `out(x) = self(x − shift)`.
    pub fn shifted(&self, shift: &[isize]) -> Field {
        let n = self.grid.len();
        let mut out = vec![0.0; self.data.len()];
        let mut src_idx = vec![0isize; self.grid.dim()];
        for dst in 0..n {
            let idx = self.grid.multi_index(dst);
            for a in 0..idx.len() {
                src_idx[a] = idx[a] as isize - shift[a];
            }
            let src = self.grid.flat_wrapped(&src_idx);
            for block in 0..self.nt() * self.components {
                out[block * n + dst] = self.data[block * n + src];
            }
        }
        Self { data: out, ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean norm over components.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.grid.len();
        let mut m: f64 = 0.0;
        for t in 0..self.nt() {
            for i in 0..n {
                let s: f64 = (0..self.components).map(|c| self.slice(t, c)[i].powi(2)).sum();
                m = m.max(s.sqrt());
            }
        }
        m
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.time != other.time {
            return Err(Error::ShapeMismatch("fields live on different grids or time axes".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        if self.components != other.components {
            return Err(Error::ShapeMismatch("component counts differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..self.clone() })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        if self.components != other.components {
            return Err(Error::ShapeMismatch("component counts differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..self.clone() })
    }

    /// Space-time `L^p` norm of the pointwise Euclidean magnitude, with the
    /// rectangle rule in space and `dt` weights in time (if a time axis exists).
    pub fn lp_norm(&self, p: f64) -> f64 {
        let n = self.grid.len();
        let w = self.grid.cell_volume() * self.time.map_or(1.0, |t| t.dt);
        let mut acc = 0.0;
        let mut mag2 = vec![0.0; n];
        for t in 0..self.nt() {
            mag2.iter_mut().for_each(|m| *m = 0.0);
            for c in 0..self.components {
                for (m, v) in mag2.iter_mut().zip(self.slice(t, c)) {
                    *m += v * v;
                }
            }
            acc += mag2.iter().map(|&s| pow_half(s, p)).sum::<f64>();
        }
        root(acc * w, p)
    }
}

/// `s^{p/2}` for `s ≥ 0`, with exact paths for small integer `p`.
#[inline]
pub(crate) fn pow_half(s: f64, p: f64) -> f64 {
    if p == 2.0 {
        s
    } else if p == 1.0 {
        s.sqrt()
    } else if p == 3.0 {
        s * s.sqrt()
    } else if p == 4.0 {
        s * s
    } else if p == 6.0 {
        s * s * s
    } else {
        s.powf(0.5 * p)
    }
}

/// `x^{1/p}` with exact-scaling paths for `p ∈ {1, 2, 3}`.
#[inline]
pub(crate) fn root(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else if p == 3.0 {
        x.cbrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Scalar time series, e.g. the kinetic energy `e(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSeries {
    pub time: TimeGrid,
    pub values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != time.nt {
            return Err(Error::ShapeMismatch(format!("{} values for nt = {}", values.len(), time.nt)));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { time, values })
    }
}

/// Rectangle-rule integral of a scalar field over the torus at time slice `t`.
pub fn integrate(field: &Field, t: usize) -> Result<f64> {
    if field.components() != 1 {
        return Err(Error::ShapeMismatch("integrate expects a scalar field".into()));
    }
    if t >= field.nt() {
        return Err(Error::OutOfRange(format!("time index {t} >= nt {}", field.nt())));
    }
    Ok(field.slice(t, 0).iter().sum::<f64>() * field.grid().cell_volume())
}

/// Size of the header in bytes for a `d`-dimensional field.
pub fn header_len(d: usize) -> usize {
    4 + 4 * (1 + d + 1) + 8 * (d + 1) + 4
}

pub fn encode_field(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(header_len(g.dim()) + 8 * field.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &n in g.sizes() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&(field.components as u32).to_le_bytes());
    for &l in g.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&field.time.map_or(0.0, |t| t.dt).to_le_bytes());
    out.extend_from_slice(&(field.nt() as u32).to_le_bytes());
    for v in &field.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        let mut m = [0u8; 4];
        m.copy_from_slice(magic);
        return Err(Error::BadMagic(m));
    }
    let d = cur.u32()? as usize;
    if d == 0 || d > 3 {
        return Err(Error::InvalidGrid(format!("dimension {d} in header")));
    }
    let sizes = (0..d).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let components = cur.u32()? as usize;
    let lengths = (0..d).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let dt = cur.f64()?;
    let nt = cur.u32()? as usize;
    let grid = Grid::new(&sizes, &lengths)?;
    let time = if dt == 0.0 {
        if nt != 1 {
            return Err(Error::InvalidGrid(format!("dt = 0 with nt = {nt}")));
        }
        None
    } else {
        Some(TimeGrid::new(nt, dt, 0.0)?)
    };
    let count = nt * components * grid.len();
    let expected = header_len(d) + 8 * count;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    let data = bytes[cur.pos..expected]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(grid, time, components, data)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated { expected: self.pos + n, found: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Read an `ITL1` file. The format stores no start time, so `t0` is 0.
pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_field(field))?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_tiny_axes() {
        assert!(Grid::periodic(&[7]).is_err());
        assert!(Grid::periodic(&[6]).is_err());
        assert!(Grid::periodic(&[9, 8]).is_err());
        assert!(Grid::new(&[8], &[0.0]).is_err());
        assert!(Grid::periodic(&[8, 8, 8, 8]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::periodic(&[8]).unwrap();
        let mut data = vec![0.0; 8];
        data[3] = f64::NAN;
        assert!(matches!(Field::new(g, None, 1, data), Err(Error::NonFinite(3))));
    }

    #[test]
    fn header_size_for_3d() {
        assert_eq!(header_len(3), 4 + 4 * (1 + 3 + 1) + 8 * (3 + 1) + 4);
        let g = Grid::periodic(&[8, 8, 8]).unwrap();
        let f = Field::zeros(g, None, 1);
        assert_eq!(encode_field(&f).len(), 60 + 8 * 512);
    }

    #[test]
    fn hand_written_tiny_file() {
        // d=1, N=8, 2 components, L=1, dt=0.5, nt=2
        let mut bytes = b"ITL1".to_vec();
        bytes.extend(1u32.to_le_bytes());
        bytes.extend(8u32.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(1.0f64.to_le_bytes());
        bytes.extend(0.5f64.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        for i in 0..32 {
            bytes.extend((i as f64).to_le_bytes());
        }
        let f = decode_field(&bytes).unwrap();
        assert_eq!(f.data().len(), 2 * 2 * 8);
        assert_eq!(f.nt(), 2);
        assert_eq!(f.slice(1, 0)[0], 16.0);
        assert_eq!(f.slice(0, 1)[7], 15.0);
    }

    #[test]
    fn data_length_formula_2d_vector() {
        let g = Grid::periodic(&[64, 64]).unwrap();
        let f = Field::zeros(g, Some(TimeGrid::new(4, 0.1, 0.0).unwrap()), 2);
        let back = decode_field(&encode_field(&f)).unwrap();
        assert_eq!(back.data().len(), 4 * 2 * 4096);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let g = Grid::periodic(&[8]).unwrap();
        let mut bytes = encode_field(&Field::zeros(g, None, 1));
        let full = bytes.clone();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_field(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        assert!(matches!(decode_field(&full[..full.len() - 3]), Err(Error::Truncated { .. })));
        assert!(matches!(decode_field(&full[..10]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let g = Grid::periodic(&[8]).unwrap();
        let mut bytes = encode_field(&Field::zeros(g, None, 1));
        let at = header_len(1) + 8 * 2;
        bytes[at..at + 8].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(matches!(decode_field(&bytes), Err(Error::NonFinite(2))));
    }

    #[test]
    fn constant_payload_is_identical_words() {
        let g = Grid::periodic(&[16]).unwrap();
        let f = Field::from_fn(g, None, 1, |_, _, _| 2.5).unwrap();
        let bytes = encode_field(&f);
        let payload = &bytes[header_len(1)..];
        assert!(payload.chunks(8).all(|w| w == 2.5f64.to_le_bytes()));
    }

    #[test]
    fn quadrature_on_resolved_modes() {
        let g = Grid::periodic(&[32, 32]).unwrap();
        let c = Field::from_fn(g, None, 1, |_, _, _| 3.0).unwrap();
        assert!((integrate(&c, 0).unwrap() - 3.0 * (2.0 * PI).powi(2)).abs() < 1e-12);

        let g1 = Grid::periodic(&[64]).unwrap();
        let s = Field::from_fn(g1.clone(), None, 1, |x, _, _| x[0].sin()).unwrap();
        assert!(integrate(&s, 0).unwrap().abs() < 1e-14);
        let s2 = Field::from_fn(g1, None, 1, |x, _, _| x[0].sin().powi(2)).unwrap();
        assert!((integrate(&s2, 0).unwrap() - PI).abs() < 1e-12);
        assert!(integrate(&s2, 1).is_err());
    }
}
