//! Ground-truth generators: smooth and singular flows, random fields of
//! prescribed regularity, a Burgers solver, and Cantor-type sets.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::flows::FlowMap;
use crate::geometry::SpaceTimeSet;
use crate::grid::{Field, Grid, TimeGrid};
use crate::spectral::{Fftn, Modes};

fn require_2d(grid: &Grid) -> Result<()> {
    if grid.dim() != 2 {
        return Err(invalid(format!("generator needs a 2-d grid, got d = {}", grid.dim())));
    }
    Ok(())
}

/// Steady Taylor–Green vortex `(sin x cos y, −cos x sin y)` with its pressure
/// `(cos 2x + cos 2y)/4`, in coordinates scaled to `2π`-periodic cells.
pub fn taylor_green(grid: &Grid, nt: usize, dt: f64) -> Result<(Field, Field)> {
    require_2d(grid)?;
    let time = TimeGrid::new(nt, dt, 0.0)?;
    let (sx, sy) = (TAU / grid.lengths()[0], TAU / grid.lengths()[1]);
    let v = Field::from_fn(grid.clone(), Some(time), 2, |x, _, c| {
        let (a, b) = (sx * x[0], sy * x[1]);
        if c == 0 {
            a.sin() * b.cos()
        } else {
            -a.cos() * b.sin()
        }
    })?;
    let p = Field::from_fn(grid.clone(), Some(time), 1, |x, _, _| {
        ((2.0 * sx * x[0]).cos() + (2.0 * sy * x[1]).cos()) / 4.0
    })?;
    Ok((v, p))
}

/// Shear flow `(u(y), 0)` jumping from `−s/2` to `s/2` across `y = L/2`
/// (and back across `y = 0`). `width = 0` gives the sharp sheet; otherwise
/// each jump is a `tanh` profile of that width.
pub fn vortex_sheet(grid: &Grid, jump: f64, width: f64) -> Result<Field> {
    require_2d(grid)?;
    let h = grid.spacing(1);
    if width != 0.0 && width < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::UnderResolved(format!("sheet width {width} below 2h = {}", 2.0 * h)));
    }
    if width < 0.0 || !jump.is_finite() {
        return Err(invalid("sheet width must be ≥ 0 and the jump finite"));
    }
    let l = grid.lengths()[1];
    Field::from_fn(grid.clone(), None, 2, |x, _, c| {
        if c == 1 {
            return 0.0;
        }
        let y = x[1];
        if width == 0.0 {
            if y < 0.5 * l {
                -0.5 * jump
            } else {
                0.5 * jump
            }
        } else {
            0.5 * jump * (((y - 0.5 * l) / width).tanh() - (y / width).tanh() - ((y - l) / width).tanh())
        }
    })
}

/// Random field with spectral amplitudes `|k|^{−(θ + d/2)}` and uniform
/// random phases, Leray-projected for `d ≥ 2` (scalar for `d = 1`),
/// normalized to unit RMS magnitude.
pub fn besov_random(grid: &Grid, theta: f64, seed: u64) -> Result<Field> {
    if !(theta > 0.1 && theta < 0.9) {
        return Err(invalid(format!("θ = {theta} outside (0.1, 0.9)")));
    }
    let d = grid.dim();
    let comps = if d == 1 { 1 } else { d };
    let n = grid.len();
    let modes = Modes::new(grid);
    let sizes = grid.sizes().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![vec![Complex64::new(0.0, 0.0); n]; comps];
    let mut idx = vec![0usize; d];
    let mut conj = vec![0usize; d];
    let mut k = vec![0f64; d];
    for flat in 0..n {
        modes.index(flat, &mut idx);
        if idx.iter().zip(&sizes).any(|(&i, &s)| i == s / 2) {
            continue;
        }
        for a in 0..d {
            conj[a] = (sizes[a] - idx[a]) % sizes[a];
            k[a] = modes.k(a, idx[a]);
        }
        let partner = grid.flat(&conj);
        if partner <= flat {
            continue;
        }
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let amp = k2.sqrt().powf(-(theta + 0.5 * d as f64));
        let mut z: Vec<Complex64> =
            (0..comps).map(|_| Complex64::from_polar(amp, rng.gen_range(0.0..TAU))).collect();
        if d >= 2 {
            let dot: Complex64 = z.iter().zip(&k).map(|(zi, ki)| zi * ki).sum();
            for (zi, ki) in z.iter_mut().zip(&k) {
                *zi -= dot * (ki / k2);
            }
        }
        for c in 0..comps {
            spec[c][flat] = z[c];
            spec[c][partner] = z[c].conj();
        }
    }
    let fft = Fftn::new(grid);
    let mut data = Vec::with_capacity(comps * n);
    for s in spec {
        data.extend(fft.inverse_real(s));
    }
    let mean_sq: f64 = (0..n).map(|i| (0..comps).map(|c| data[c * n + i].powi(2)).sum::<f64>()).sum::<f64>() / n as f64;
    if !(mean_sq > 0.0) {
        return Err(Error::DegenerateFit("grid too coarse for any resolved mode".into()));
    }
    let s = mean_sq.sqrt().recip();
    data.iter_mut().for_each(|v| *v *= s);
    Field::new(grid.clone(), None, comps, data)
}

/// Entropy solution of `u_t + (u²/2)_x = 0` with shock locations.
#[derive(Debug, Clone)]
pub struct BurgersSolution {
    /// Slice `n` holds the solution after `n` steps.
    pub u: Field,
    /// Cells left of each strongly compressive interface, per slice.
    pub shocks: SpaceTimeSet,
}

fn godunov_flux(ul: f64, ur: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if ul <= ur {
        if ul > 0.0 {
            f(ul)
        } else if ur < 0.0 {
            f(ur)
        } else {
            0.0
        }
    } else {
        f(ul).max(f(ur))
    }
}

/// Godunov finite-volume solution of the periodic Burgers equation.
pub fn burgers(grid: &Grid, u0: &[f64], nt: usize, dt: f64) -> Result<BurgersSolution> {
    if grid.dim() != 1 {
        return Err(invalid("Burgers solver is one-dimensional"));
    }
    let n = grid.len();
    if u0.len() != n {
        return Err(Error::ShapeMismatch("initial data length".into()));
    }
    if let Some(i) = u0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let h = grid.spacing(0);
    let umax = u0.iter().fold(0f64, |m, v| m.max(v.abs()));
    if umax > 0.0 && dt > h / umax * (1.0 + 1e-12) {
        return Err(Error::Cfl(format!("dt = {dt} exceeds h/max|u0| = {}", h / umax)));
    }
    let time = TimeGrid::new(nt, dt, 0.0)?;
    let mut data = Vec::with_capacity(n * nt);
    data.extend_from_slice(u0);
    let mut u = u0.to_vec();
    let mut flux = vec![0.0; n];
    let r = dt / h;
    for _ in 1..nt {
        // flux[i] sits at the interface between cells i and i+1
        flux.par_iter_mut().enumerate().for_each(|(i, f)| *f = godunov_flux(u[i], u[(i + 1) % n]));
        u.par_iter_mut().enumerate().for_each(|(i, ui)| *ui -= r * (flux[i] - flux[(i + n - 1) % n]));
        data.extend_from_slice(&u);
    }
    let range = u0.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - u0.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut masks = vec![false; n * nt];
    for t in 0..nt {
        let s = &data[t * n..(t + 1) * n];
        let jump: Vec<f64> = (0..n).map(|i| s[i] - s[(i + 1) % n]).collect();
        let top = jump.iter().fold(0f64, |a, &b| a.max(b));
        let thr = (0.5 * top).max(0.1 * range);
        for i in 0..n {
            let j = jump[i];
            if j > 0.0 && j >= thr && j >= jump[(i + n - 1) % n] && j >= jump[(i + 1) % n] {
                masks[t * n + i] = true;
            }
        }
    }
    let shocks = SpaceTimeSet::from_masks(grid.clone(), time, masks)?;
    Ok(BurgersSolution { u: Field::new(grid.clone(), Some(time), 1, data)?, shocks })
}

/// Riemann data `1` on `[0, L/2)` and `−1` on `[L/2, L)`.
pub fn riemann_data(grid: &Grid) -> Vec<f64> {
    let l = grid.lengths()[0];
    (0..grid.len()).map(|i| if grid.position(i)[0] < 0.5 * l { 1.0 } else { -1.0 }).collect()
}

/// Exact pre-shock solution for `u0 = A sin(2πx/L)` at node positions, by
/// solving `u = A sin(2π(x − u t)/L)` (monotone in `u` before breaking).
pub fn sine_characteristics(grid: &Grid, amplitude: f64, t: f64) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(invalid("characteristics oracle is one-dimensional"));
    }
    let kappa = TAU / grid.lengths()[0];
    if amplitude.abs() * kappa * t >= 1.0 {
        return Err(invalid("time at or beyond wave breaking"));
    }
    Ok((0..grid.len())
        .map(|i| {
            let x = grid.position(i)[0];
            let g = |u: f64| u - amplitude * (kappa * (x - u * t)).sin();
            let (mut lo, mut hi) = (-amplitude.abs(), amplitude.abs());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect())
}

fn in_cantor(j: usize, level: u32, n: usize) -> bool {
    let mut q = (j as u128 * 3u128.pow(level) / n as u128) as u64;
    for _ in 0..level {
        if q % 3 == 1 {
            return false;
        }
        q /= 3;
    }
    true
}

/// Middle-thirds Cantor set at the given level as a node mask. In 2-d the
/// set lies on the line `y = L/2`.
pub fn cantor_set(level: u32, grid: &Grid) -> Result<SpaceTimeSet> {
    let n0 = grid.sizes()[0];
    if (3usize.pow(level)) > n0 {
        return Err(Error::UnderResolved(format!("level {level} needs at least 3^{level} cells")));
    }
    let mut mask = vec![false; grid.len()];
    match grid.dim() {
        1 => {
            for (j, m) in mask.iter_mut().enumerate() {
                *m = in_cantor(j, level, n0);
            }
        }
        2 => {
            let row = grid.sizes()[1] / 2;
            for j in 0..n0 {
                if in_cantor(j, level, n0) {
                    mask[grid.flat(&[j, row])] = true;
                }
            }
        }
        _ => return Err(invalid("Cantor sets are built in 1-d or 2-d")),
    }
    SpaceTimeSet::from_mask(grid.clone(), mask)
}

/// Centres of the `2^level` intervals of the Cantor construction on `[a, b]`.
pub fn cantor_points(level: u32, a: f64, b: f64) -> Vec<f64> {
    let mut intervals = vec![(a, b)];
    for _ in 0..level {
        intervals = intervals
            .into_iter()
            .flat_map(|(l, r)| {
                let w = (r - l) / 3.0;
                [(l, l + w), (r - w, r)]
            })
            .collect();
    }
    intervals.into_iter().map(|(l, r)| 0.5 * (l + r)).collect()
}

/// How a static set is carried through time.
pub enum Motion<'a> {
    Galilean(Vec<f64>),
    Flow(&'a FlowMap),
}

/// Images of a static set under a motion, one point cloud per slice of `time`.
pub fn advected_set(set: &SpaceTimeSet, motion: Motion<'_>, time: TimeGrid) -> Result<SpaceTimeSet> {
    if set.nt() != 1 {
        return Err(invalid("advected_set expects a static set"));
    }
    let d = set.grid().dim();
    let base = set.slice_points(0);
    let points: Vec<Vec<f64>> = match motion {
        Motion::Galilean(c) => {
            if c.len() != d {
                return Err(Error::ShapeMismatch("speed dimension".into()));
            }
            (0..time.nt)
                .map(|n| {
                    let s = time.time(n) - time.t0;
                    base.chunks(d).flat_map(|p| p.iter().zip(&c).map(move |(x, v)| x + v * s)).collect()
                })
                .collect()
        }
        Motion::Flow(flow) => {
            if flow.velocity().dim() != d {
                return Err(Error::ShapeMismatch("velocity dimension".into()));
            }
            let per_point: Vec<Vec<Vec<f64>>> = base
                .par_chunks(d)
                .map(|p| {
                    let mut x = p.to_vec();
                    let mut out = Vec::with_capacity(time.nt);
                    out.push(x.clone());
                    for n in 1..time.nt {
                        flow.advance(&mut x, time.time(n - 1), time.dt);
                        out.push(x.clone());
                    }
                    out
                })
                .collect();
            (0..time.nt).map(|n| per_point.iter().flat_map(|tr| tr[n].clone()).collect()).collect()
        }
    };
    SpaceTimeSet::from_points(set.grid().clone(), Some(time), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::divergence;

    #[test]
    fn taylor_green_is_divergence_free() {
        let g = Grid::cube(2, 32, TAU).unwrap();
        let (v, p) = taylor_green(&g, 3, 0.1).unwrap();
        assert!(divergence(&v).unwrap().max_abs() < 1e-12);
        assert_eq!(p.components(), 1);
        assert!(taylor_green(&Grid::cube(1, 32, TAU).unwrap(), 3, 0.1).is_err());
    }

    #[test]
    fn vortex_sheet_profiles() {
        let g = Grid::cube(2, 64, 1.0).unwrap();
        let v = vortex_sheet(&g, 2.0, 0.0).unwrap();
        assert_eq!(v.slice(0, 0)[g.flat(&[3, 10])], -1.0);
        assert_eq!(v.slice(0, 0)[g.flat(&[3, 40])], 1.0);
        let w = vortex_sheet(&g, 2.0, 4.0 / 64.0).unwrap();
        assert!((w.slice(0, 0)[g.flat(&[0, 16])] + 1.0).abs() < 5e-3);
        assert!((w.slice(0, 0)[g.flat(&[0, 48])] - 1.0).abs() < 5e-3);
        assert!(divergence(&w).unwrap().max_abs() < 1e-12);
        assert!(vortex_sheet(&g, 2.0, 1.0 / 64.0).is_err());
    }

    #[test]
    fn besov_random_is_deterministic_and_solenoidal() {
        let g = Grid::cube(2, 64, TAU).unwrap();
        let a = besov_random(&g, 0.4, 7).unwrap();
        let b = besov_random(&g, 0.4, 7).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), besov_random(&g, 0.4, 8).unwrap().data());
        assert!(divergence(&a).unwrap().max_abs() < 1e-12);
        let rms = (a.data().iter().map(|x| x * x).sum::<f64>() / g.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        assert!(besov_random(&g, 0.05, 1).is_err());
    }

    #[test]
    fn burgers_conserves_mass_and_tracks_characteristics() {
        let g = Grid::cube(1, 1024, TAU).unwrap();
        let u0: Vec<f64> = (0..1024).map(|i| g.position(i)[0].sin()).collect();
        let dt = 0.5 * g.spacing(0);
        let nt = 200;
        let sol = burgers(&g, &u0, nt, dt).unwrap();
        let m0: f64 = sol.u.slice(0, 0).iter().sum();
        let m1: f64 = sol.u.slice(nt - 1, 0).iter().sum();
        assert!((m0 - m1).abs() < 1e-12 * 1024.0);
        let t = (nt - 1) as f64 * dt;
        let exact = sine_characteristics(&g, 1.0, t).unwrap();
        let err = sol.u.slice(nt - 1, 0).iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.02, "{err}");
        assert!(burgers(&g, &u0, 4, 2.0 * g.spacing(0)).is_err());
    }

    #[test]
    fn riemann_shock_is_stationary() {
        let g = Grid::cube(1, 256, TAU).unwrap();
        let u0 = riemann_data(&g);
        let sol = burgers(&g, &u0, 50, 0.5 * g.spacing(0)).unwrap();
        for t in 0..50 {
            assert_eq!(sol.u.slice(t, 0)[127], 1.0);
            assert_eq!(sol.u.slice(t, 0)[128], -1.0);
            let pts = sol.shocks.slice_points(t);
            assert_eq!(pts.len(), 1);
            assert!((pts[0] - g.position(127)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn cantor_construction() {
        let g = Grid::new(&[2 * 81], &[1.0]).unwrap();
        let set = cantor_set(4, &g).unwrap();
        assert_eq!(set.slice_points(0).len(), 2 * 16);
        assert!(cantor_set(5, &g).is_err());
        let p = cantor_points(2, 0.0, 9.0);
        assert_eq!(p, vec![0.5, 2.5, 6.5, 8.5]);
    }

    #[test]
    fn galilean_advection_shifts_points() {
        let g = Grid::new(&[2 * 27], &[1.0]).unwrap();
        let set = cantor_set(3, &g).unwrap();
        let time = TimeGrid::new(5, 0.1, 0.0).unwrap();
        let adv = advected_set(&set, Motion::Galilean(vec![1.0]), time).unwrap();
        let a = set.slice_points(0);
        let b = adv.slice_points(3);
        for (x, y) in a.iter().zip(&b) {
            assert!(((y - x).rem_euclid(1.0) - 0.3).abs() < 1e-12);
        }
    }
}
