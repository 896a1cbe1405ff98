//! Multi-dimensional FFTs on a [`Grid`] and the spectral derivative operators
//! built on them.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub(crate) struct Fftn {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Fftn {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let sizes = grid.sizes().to_vec();
        let forward = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { sizes, forward, inverse }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total = data.len();
        let d = self.sizes.len();
        for axis in 0..d {
            let n = self.sizes[axis];
            let stride: usize = self.sizes[axis + 1..].iter().product();
            if stride == 1 {
                plans[axis].process(data);
                continue;
            }
            // gather strided lines into a contiguous buffer, transform, scatter back
            let outer = total / (n * stride);
            let mut buf = vec![Complex64::new(0.0, 0.0); total];
            let mut line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        buf[line * n + k] = data[base + k * stride];
                    }
                    line += 1;
                }
            }
            plans[axis].process(&mut buf);
            line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        data[base + k * stride] = buf[line * n + k];
                    }
                    line += 1;
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward_real(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }
}

/// Targets of a small-grid axis index on a larger grid, with weights: the
/// Nyquist mode is split evenly between `±N/2` so real data stays real.
fn axis_targets(i: usize, n: usize, m: usize) -> [(usize, f64); 2] {
    if i < n / 2 {
        [(i, 1.0), (usize::MAX, 0.0)]
    } else if i > n / 2 {
        [(i + m - n, 1.0), (usize::MAX, 0.0)]
    } else {
        [(n / 2, 0.5), (m - n / 2, 0.5)]
    }
}

/// Visit every `(small flat, big flat, weight)` correspondence.
fn for_each_pair(small: &Grid, big: &Grid, mut f: impl FnMut(usize, usize, f64)) {
    let d = small.dim();
    let ns = small.sizes();
    let ms = big.sizes();
    let mut idx = vec![0usize; d];
    let mut tgt = vec![0usize; d];
    for flat in 0..small.len() {
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = rem % ns[a];
            rem /= ns[a];
        }
        for combo in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let (t, wa) = axis_targets(idx[a], ns[a], ms[a])[(combo >> a) & 1];
                w *= wa;
                tgt[a] = t;
            }
            if w > 0.0 {
                f(flat, big.flat(&tgt), w);
            }
        }
    }
}

/// Zero-pad a spectrum of `small` onto `big` so that the inverse transform on
/// `big` interpolates the original samples.
pub(crate) fn pad(small: &Grid, big: &Grid, spec: &[Complex64]) -> Vec<Complex64> {
    let scale = big.len() as f64 / small.len() as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); big.len()];
    for_each_pair(small, big, |s, b, w| out[b] += spec[s] * (w * scale));
    out
}

/// Restrict a spectrum on `big` to the modes representable on `small`; both
/// halves of a split Nyquist mode fold onto the small-grid Nyquist index.
pub(crate) fn truncate(big: &Grid, small: &Grid, spec: &[Complex64]) -> Vec<Complex64> {
    let scale = small.len() as f64 / big.len() as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); small.len()];
    for_each_pair(small, big, |s, b, _| out[s] += spec[b] * scale);
    out
}

/// Angular wavenumbers per axis, in FFT order. The Nyquist entry is kept
/// (as `−π/h`) and flagged separately by [`is_nyquist`].
pub(crate) fn wavenumbers(grid: &Grid) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|a| {
            let n = grid.sizes()[a];
            let base = 2.0 * std::f64::consts::PI / grid.lengths()[a];
            (0..n)
                .map(|i| {
                    let k = if i <= n / 2 - 1 { i as isize } else { i as isize - n as isize };
                    base * k as f64
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn is_nyquist(grid: &Grid, axis: usize, i: usize) -> bool {
    i == grid.sizes()[axis] / 2
}

/// Per-mode wavevector lookup for a flattened spectral index.
pub(crate) struct Modes {
    k: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

impl Modes {
    pub fn new(grid: &Grid) -> Self {
        Self { k: wavenumbers(grid), sizes: grid.sizes().to_vec() }
    }

    /// Axis indices of a flat mode index.
    pub fn index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.sizes.len()).rev() {
            out[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
    }

    /// Wavenumber on `axis` for first derivatives (Nyquist zeroed).
    pub fn k_odd(&self, axis: usize, i: usize) -> f64 {
        if i == self.sizes[axis] / 2 {
            0.0
        } else {
            self.k[axis][i]
        }
    }

    pub fn k(&self, axis: usize, i: usize) -> f64 {
        self.k[axis][i]
    }
}

/// Spectral partial derivative of one real slice.
#[cfg(test)]
pub(crate) fn derivative(fft: &Fftn, grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let modes = Modes::new(grid);
    let mut spec = fft.forward_real(data);
    let mut idx = vec![0; grid.dim()];
    for (flat, z) in spec.iter_mut().enumerate() {
        modes.index(flat, &mut idx);
        let k = modes.k_odd(axis, idx[axis]);
        *z = Complex64::new(-k * z.im, k * z.re);
    }
    fft.inverse_real(spec)
}

/// Spectral divergence of `d` component slices.
pub(crate) fn divergence(fft: &Fftn, grid: &Grid, comps: &[&[f64]]) -> Vec<f64> {
    let modes = Modes::new(grid);
    let n = grid.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut idx = vec![0; grid.dim()];
    for (axis, c) in comps.iter().enumerate() {
        let spec = fft.forward_real(c);
        for (flat, z) in spec.iter().enumerate() {
            modes.index(flat, &mut idx);
            let k = modes.k_odd(axis, idx[axis]);
            acc[flat] += Complex64::new(-k * z.im, k * z.re);
        }
    }
    fft.inverse_real(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_interpolates_and_truncation_inverts() {
        let small = Grid::new(&[8, 10], &[1.0, 2.0]).unwrap();
        let big = Grid::new(&[16, 20], &[1.0, 2.0]).unwrap();
        let f = |x: &[f64]| {
            let (a, b) = (2.0 * std::f64::consts::PI * x[0], std::f64::consts::PI * x[1]);
            1.0 + (3.0 * a).sin() * b.cos() + (4.0 * a).cos() + (5.0 * b).cos()
        };
        let data: Vec<f64> = (0..small.len()).map(|i| f(&small.position(i))).collect();
        let fs = Fftn::new(&small);
        let fb = Fftn::new(&big);
        let fine = fb.inverse_real(pad(&small, &big, &fs.forward_real(&data)));
        for i in 0..big.len() {
            let x = big.position(i);
            // the Nyquist modes cos(4a), cos(5b) interpolate as themselves
            assert!((fine[i] - f(&x)).abs() < 1e-12, "{} {}", fine[i], f(&x));
        }
        let back = fs.inverse_real(truncate(&big, &small, &fb.forward_real(&fine)));
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_resolved_modes() {
        let g = Grid::periodic(&[32, 16]).unwrap();
        let fft = Fftn::new(&g);
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                (3.0 * x[0]).sin() * (2.0 * x[1]).cos()
            })
            .collect();
        let dx = derivative(&fft, &g, &f, 0);
        let dy = derivative(&fft, &g, &f, 1);
        for i in 0..g.len() {
            let x = g.position(i);
            assert!((dx[i] - 3.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos()).abs() < 1e-12);
            assert!((dy[i] + 2.0 * (3.0 * x[0]).sin() * (2.0 * x[1]).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_3d() {
        let g = Grid::periodic(&[8, 10, 12]).unwrap();
        let fft = Fftn::new(&g);
        let f: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let back = fft.inverse_real(fft.forward_real(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nyquist_mode_has_zero_first_derivative() {
        let g = Grid::periodic(&[8]).unwrap();
        let fft = Fftn::new(&g);
        let f: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(derivative(&fft, &g, &f, 0).iter().all(|v| v.abs() < 1e-14));
        assert!(is_nyquist(&g, 0, 4));
    }
}
