//! Advecting velocity fields, flow maps, and smooth cutoffs built on
//! neighbourhoods of space-time sets.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{SliceLocator, SpaceTimeSet};
use crate::grid::{Field, Grid, TimeGrid};
use crate::mollify::{make_kernel, mollify, KernelProfile};

/// A velocity field `V(x, t)` on the torus.
pub trait VelocityField: Send + Sync {
    fn dim(&self) -> usize;
    fn lengths(&self) -> &[f64];
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]);
    /// Upper bound on `|V|`.
    fn max_speed(&self) -> f64;
    /// Upper bound on the spatial Lipschitz constant, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
    /// Times outside this range are not covered by the data.
    fn time_range(&self) -> Option<(f64, f64)> {
        None
    }
    fn name(&self) -> String;
}

/// Constant velocity.
#[derive(Debug, Clone)]
pub struct Uniform {
    pub velocity: Vec<f64>,
    lengths: Vec<f64>,
}

impl Uniform {
    pub fn new(velocity: Vec<f64>, lengths: &[f64]) -> Result<Self> {
        if velocity.len() != lengths.len() {
            return Err(Error::ShapeMismatch("velocity and domain dimensions differ".into()));
        }
        Ok(Self { velocity, lengths: lengths.to_vec() })
    }
}

impl VelocityField for Uniform {
    fn dim(&self) -> usize {
        self.velocity.len()
    }
    fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    fn eval(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.velocity);
    }
    fn max_speed(&self) -> f64 {
        self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
    fn name(&self) -> String {
        format!("uniform{:?}", self.velocity)
    }
}

/// Solid-body rotation `ω·(−y, x)` about a centre, using minimal-image offsets.
#[derive(Debug, Clone)]
pub struct RigidRotation {
    pub center: [f64; 2],
    pub omega: f64,
    lengths: Vec<f64>,
}

impl RigidRotation {
    pub fn new(center: [f64; 2], omega: f64, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != 2 {
            return Err(invalid("rigid rotation is two-dimensional"));
        }
        Ok(Self { center, omega, lengths: lengths.to_vec() })
    }

    fn offset(&self, x: &[f64], a: usize) -> f64 {
        let l = self.lengths[a];
        let mut d = (x[a] - self.center[a]).rem_euclid(l);
        if d >= 0.5 * l {
            d -= l;
        }
        d
    }

    /// Exact position after time `s` starting from `x`.
    pub fn rotate(&self, x: &[f64], s: f64) -> [f64; 2] {
        let (dx, dy) = (self.offset(x, 0), self.offset(x, 1));
        let (sn, cs) = (self.omega * s).sin_cos();
        [self.center[0] + cs * dx - sn * dy, self.center[1] + sn * dx + cs * dy]
    }
}

impl VelocityField for RigidRotation {
    fn dim(&self) -> usize {
        2
    }
    fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    fn eval(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = -self.omega * self.offset(x, 1);
        out[1] = self.omega * self.offset(x, 0);
    }
    fn max_speed(&self) -> f64 {
        0.5 * self.omega.abs() * self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.omega.abs())
    }
    fn name(&self) -> String {
        format!("rotation(omega={})", self.omega)
    }
}

/// Two-dimensional divergence-free field from a finite stream function
/// `ψ = Σ a cos(k·x' + φ + ν t)` with `x' = 2πx/L`.
#[derive(Debug, Clone)]
pub struct FourierVelocity {
    modes: Vec<FourierMode>,
    lengths: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FourierMode {
    pub k: [i32; 2],
    pub amplitude: f64,
    pub phase: f64,
    pub frequency: f64,
}

impl FourierVelocity {
    pub fn new(modes: Vec<FourierMode>, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != 2 {
            return Err(invalid("Fourier velocity is two-dimensional"));
        }
        Ok(Self { modes, lengths: lengths.to_vec() })
    }

    /// `count` random modes with `1 ≤ |k|_∞ ≤ kmax`, stream amplitudes scaled
    /// so that the speed bound equals `speed`.
    pub fn random(count: usize, kmax: i32, speed: f64, seed: u64, lengths: &[f64]) -> Result<Self> {
        if kmax < 1 || count == 0 {
            return Err(invalid("need at least one mode with kmax ≥ 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::with_capacity(count);
        while modes.len() < count {
            let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax)];
            if k == [0, 0] {
                continue;
            }
            modes.push(FourierMode {
                k,
                amplitude: rng.gen_range(0.5..1.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                frequency: rng.gen_range(-1.0..1.0),
            });
        }
        let mut v = Self::new(modes, lengths)?;
        let s = v.max_speed();
        for m in &mut v.modes {
            m.amplitude *= speed / s;
        }
        Ok(v)
    }

    fn wave(&self, m: &FourierMode) -> [f64; 2] {
        let tau = std::f64::consts::TAU;
        [tau * m.k[0] as f64 / self.lengths[0], tau * m.k[1] as f64 / self.lengths[1]]
    }
}

impl VelocityField for FourierVelocity {
    fn dim(&self) -> usize {
        2
    }
    fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 0.0;
        for m in &self.modes {
            let k = self.wave(m);
            let s = -m.amplitude * (k[0] * x[0] + k[1] * x[1] + m.phase + m.frequency * t).sin();
            // V = (∂ψ/∂y, −∂ψ/∂x)
            out[0] += s * k[1];
            out[1] -= s * k[0];
        }
    }
    fn max_speed(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let k = self.wave(m);
                m.amplitude.abs() * k[0].hypot(k[1])
            })
            .sum()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(
            self.modes
                .iter()
                .map(|m| {
                    let k = self.wave(m);
                    m.amplitude.abs() * (k[0] * k[0] + k[1] * k[1])
                })
                .sum(),
        )
    }
    fn name(&self) -> String {
        format!("fourier({} modes)", self.modes.len())
    }
}

/// Gridded velocity, multilinear in space and linear in time between slices.
#[derive(Debug, Clone)]
pub struct GridVelocity {
    field: Field,
    max_speed: f64,
    lipschitz: f64,
}

impl GridVelocity {
    pub fn new(field: Field) -> Result<Self> {
        let d = field.grid().dim();
        if field.components() != d {
            return Err(Error::ShapeMismatch(format!(
                "velocity has {} components on a {d}-d grid",
                field.components()
            )));
        }
        let max_speed = field.max_magnitude();
        let grid = field.grid().clone();
        let mut lip: f64 = 0.0;
        for t in 0..field.nt() {
            for c in 0..d {
                let s = field.slice(t, c);
                for a in 0..d {
                    let h = grid.spacing(a);
                    for (i, &v) in s.iter().enumerate() {
                        let mut idx: Vec<isize> = grid.multi_index(i).iter().map(|&k| k as isize).collect();
                        idx[a] += 1;
                        let j = grid.flat_wrapped(&idx);
                        lip = lip.max((s[j] - v).abs() / h);
                    }
                }
            }
        }
        Ok(Self { field, max_speed, lipschitz: lip * (d as f64).sqrt() })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    fn eval_slice(&self, t: usize, x: &[f64], out: &mut [f64], weight: f64) {
        let grid = self.field.grid();
        let d = grid.dim();
        let mut base = [0isize; 3];
        let mut frac = [0f64; 3];
        for a in 0..d {
            let u = x[a] / grid.spacing(a);
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }
        let mut idx = [0isize; 3];
        for corner in 0..(1usize << d) {
            let mut w = weight;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit as isize;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let k = grid.flat_wrapped(&idx[..d]);
            for (c, o) in out.iter_mut().enumerate() {
                *o += w * self.field.slice(t, c)[k];
            }
        }
    }
}

impl VelocityField for GridVelocity {
    fn dim(&self) -> usize {
        self.field.grid().dim()
    }
    fn lengths(&self) -> &[f64] {
        self.field.grid().lengths()
    }
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.field.time() {
            None => self.eval_slice(0, x, out, 1.0),
            Some(tg) => {
                let nt = tg.nt;
                let u = ((t - tg.t0) / tg.dt).clamp(0.0, (nt - 1) as f64);
                let n0 = (u.floor() as usize).min(nt - 1);
                let f = u - n0 as f64;
                self.eval_slice(n0, x, out, 1.0 - f);
                if f > 0.0 && n0 + 1 < nt {
                    self.eval_slice(n0 + 1, x, out, f);
                }
            }
        }
    }
    fn max_speed(&self) -> f64 {
        self.max_speed
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
    fn time_range(&self) -> Option<(f64, f64)> {
        self.field.time().map(|t| (t.t0, t.t_end()))
    }
    fn name(&self) -> String {
        "gridded".into()
    }
}

/// RK4 flow map `Φ_s(x, t)` of a velocity field. Positions are integrated
/// unwrapped; callers wrap as needed.
#[derive(Clone)]
pub struct FlowMap {
    velocity: Arc<dyn VelocityField>,
    max_step: f64,
}

impl std::fmt::Debug for FlowMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowMap").field("velocity", &self.velocity.name()).field("max_step", &self.max_step).finish()
    }
}

impl FlowMap {
    /// Step `min(τ/16, cfl·h/‖V‖_∞)`.
    pub fn new(velocity: Arc<dyn VelocityField>, tau: f64, cfl: f64, h: f64) -> Result<Self> {
        if !(tau > 0.0 && cfl > 0.0 && h > 0.0) {
            return Err(invalid("flow map needs positive τ, CFL and spacing"));
        }
        let speed = velocity.max_speed();
        let mut step = tau / 16.0;
        if speed > 0.0 {
            step = step.min(cfl * h / speed);
        }
        Ok(Self { velocity, max_step: step })
    }

    pub fn with_step(velocity: Arc<dyn VelocityField>, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid("step must be positive"));
        }
        Ok(Self { velocity, max_step: step })
    }

    pub fn velocity(&self) -> &Arc<dyn VelocityField> {
        &self.velocity
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    fn rk4(&self, x: &mut [f64], t: f64, h: f64) {
        let d = x.len();
        let mut k = [[0f64; 3]; 4];
        let mut y = [0f64; 3];
        self.velocity.eval(x, t, &mut k[0][..d]);
        for a in 0..d {
            y[a] = x[a] + 0.5 * h * k[0][a];
        }
        self.velocity.eval(&y[..d], t + 0.5 * h, &mut k[1][..d]);
        for a in 0..d {
            y[a] = x[a] + 0.5 * h * k[1][a];
        }
        self.velocity.eval(&y[..d], t + 0.5 * h, &mut k[2][..d]);
        for a in 0..d {
            y[a] = x[a] + h * k[2][a];
        }
        self.velocity.eval(&y[..d], t + h, &mut k[3][..d]);
        for a in 0..d {
            x[a] += h / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]);
        }
    }

    /// Move `x` from time `t` to `t + s` in exactly `steps` equal RK4 steps.
    pub fn advance_steps(&self, x: &mut [f64], t: f64, s: f64, steps: usize) {
        let steps = steps.max(1);
        let h = s / steps as f64;
        for i in 0..steps {
            self.rk4(x, t + i as f64 * h, h);
        }
    }

    /// Move `x` from `t` to `t + s`. Returns `true` when the target time left
    /// the velocity's data range and the integration was clipped there.
    pub fn advance(&self, x: &mut [f64], t: f64, s: f64) -> bool {
        let mut s = s;
        let mut clipped = false;
        if let Some((a, b)) = self.velocity.time_range() {
            let target = (t + s).clamp(a, b);
            if (target - (t + s)).abs() > 1e-12 * (1.0 + b.abs()) {
                clipped = true;
                s = target - t;
            }
        }
        if s != 0.0 {
            let steps = (s.abs() / self.max_step).ceil() as usize;
            self.advance_steps(x, t, s, steps);
        }
        clipped
    }
}

/// A seed `(x, t)` for trajectory integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub x: Vec<f64>,
    pub t: f64,
}

/// `positions[i]` is `Φ_{s_i}(x, t)`, wrapped into the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Vec<f64>>,
}

/// Trajectories through each seed at the requested flow times `s`.
pub fn integrate_flow(flow: &FlowMap, seeds: &[Seed], s_values: &[f64]) -> Result<Vec<Trajectory>> {
    let d = flow.velocity.dim();
    if let Some((a, b)) = flow.velocity.time_range() {
        for seed in seeds {
            for &s in s_values {
                let t = seed.t + s;
                if t < a - 1e-12 || t > b + 1e-12 {
                    return Err(Error::OutOfRange(format!("t + s = {t} outside [{a}, {b}]")));
                }
            }
        }
    }
    let lengths = flow.velocity.lengths().to_vec();
    seeds
        .par_iter()
        .map(|seed| {
            if seed.x.len() != d {
                return Err(Error::ShapeMismatch("seed dimension".into()));
            }
            let mut order: Vec<usize> = (0..s_values.len()).collect();
            order.sort_by(|&i, &j| s_values[i].total_cmp(&s_values[j]));
            let mut positions = vec![Vec::new(); s_values.len()];
            // forward from s = 0 over non-negative targets, backward over negative
            let mut state = seed.x.clone();
            let mut cur = 0.0;
            for &i in order.iter().filter(|&&i| s_values[i] >= 0.0) {
                flow.advance(&mut state, seed.t + cur, s_values[i] - cur);
                cur = s_values[i];
                positions[i] = wrapped(&state, &lengths);
            }
            let mut state = seed.x.clone();
            let mut cur = 0.0;
            for &i in order.iter().rev().filter(|&&i| s_values[i] < 0.0) {
                flow.advance(&mut state, seed.t + cur, s_values[i] - cur);
                cur = s_values[i];
                positions[i] = wrapped(&state, &lengths);
            }
            Ok(Trajectory { positions })
        })
        .collect()
}

fn wrapped(x: &[f64], lengths: &[f64]) -> Vec<f64> {
    x.iter().zip(lengths).map(|(v, l)| v.rem_euclid(*l)).collect()
}

/// `det ∇Φ_s` by central differences of half-width `half_width`.
pub fn jacobian_determinant(flow: &FlowMap, seeds: &[Seed], s: f64, half_width: f64) -> Result<Vec<f64>> {
    let d = flow.velocity.dim();
    if !(half_width > 0.0) {
        return Err(invalid("half width must be positive"));
    }
    seeds
        .iter()
        .map(|seed| {
            let mut jac = vec![vec![0.0; d]; d];
            for b in 0..d {
                let mut plus = seed.x.clone();
                let mut minus = seed.x.clone();
                plus[b] += half_width;
                minus[b] -= half_width;
                flow.advance(&mut plus, seed.t, s);
                flow.advance(&mut minus, seed.t, s);
                for a in 0..d {
                    jac[a][b] = (plus[a] - minus[a]) / (2.0 * half_width);
                }
            }
            let det = determinant(&jac);
            if det.abs() < 1e-10 {
                return Err(Error::StencilCollapse(det));
            }
            Ok(det)
        })
        .collect()
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// 1 up to `2δ`, 0 from `4δ`, cubic smoothstep in between.
pub fn taper(r: f64, delta: f64) -> f64 {
    let u = (r - 2.0 * delta) / (2.0 * delta);
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffProvenance {
    Eulerian { delta: f64 },
    Flow { delta: f64, tau: f64, velocity: String },
}

/// A cutoff `χ ∈ [0, 1]` sampled on the set's space-time grid.
#[derive(Debug, Clone)]
pub struct CutoffField {
    pub chi: Field,
    pub provenance: CutoffProvenance,
    /// Some trajectory windows ran past the ends of the time axis.
    pub clipped: bool,
}

impl CutoffField {
    pub fn lq_norm(&self, q: f64) -> f64 {
        self.chi.lp_norm(q)
    }

    /// `‖∇_x χ‖_{L^q}` by periodic central differences.
    pub fn space_gradient_norm(&self, q: f64) -> f64 {
        let grid = self.chi.grid();
        let d = grid.dim();
        let nt = self.chi.nt();
        let mut grad = vec![0.0; grid.len() * nt * d];
        for t in 0..nt {
            let s = self.chi.slice(t, 0);
            for a in 0..d {
                let h = grid.spacing(a);
                let out = &mut grad[(t * d + a) * grid.len()..(t * d + a + 1) * grid.len()];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut idx: Vec<isize> = grid.multi_index(i).iter().map(|&k| k as isize).collect();
                    idx[a] += 1;
                    let p = s[grid.flat_wrapped(&idx)];
                    idx[a] -= 2;
                    let m = s[grid.flat_wrapped(&idx)];
                    *o = (p - m) / (2.0 * h);
                }
            }
        }
        match Field::new(grid.clone(), self.chi.time().copied(), d, grad) {
            Ok(f) => f.lp_norm(q),
            Err(_) => f64::NAN,
        }
    }

    /// `‖∂_t χ‖_{L^q}` by one-sided differences at the ends, central inside.
    pub fn time_derivative_norm(&self, q: f64) -> f64 {
        let Some(time) = self.chi.time().copied() else { return 0.0 };
        let nt = time.nt;
        if nt < 2 {
            return 0.0;
        }
        let n = self.chi.grid().len();
        let mut out = vec![0.0; n * nt];
        for t in 0..nt {
            let (a, b, w) = match t {
                0 => (1, 0, time.dt),
                _ if t == nt - 1 => (t, t - 1, time.dt),
                _ => (t + 1, t - 1, 2.0 * time.dt),
            };
            let (sa, sb) = (self.chi.slice(a, 0), self.chi.slice(b, 0));
            for i in 0..n {
                out[t * n + i] = (sa[i] - sb[i]) / w;
            }
        }
        Field::new(self.chi.grid().clone(), Some(time), 1, out).map_or(f64::NAN, |f| f.lp_norm(q))
    }
}

fn snap(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v < 1e-12 {
        0.0
    } else if 1.0 - v < 1e-12 {
        1.0
    } else {
        v
    }
}

/// Normalized time weights `η_δ(j·dt)` over `|j·dt| < δ`.
fn time_weights(delta: f64, dt: f64, profile: KernelProfile) -> Vec<f64> {
    let j_max = ((delta / dt) * (1.0 - 1e-12)).ceil() as isize - 1;
    let raw: Vec<f64> = (-j_max..=j_max).map(|j| profile.eval(j as f64 * dt / delta)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `χ = (1_{(S)_{2δ,2δ}} ∗ ρ_δ) ∗_t η_δ`: equal to 1 on `(S)_{δ,δ}` and 0
/// outside `(S)_{4δ,4δ}`.
pub fn eulerian_cutoff(set: &SpaceTimeSet, delta: f64) -> Result<CutoffField> {
    let time = *set.time().ok_or_else(|| invalid("cutoffs need a time axis"))?;
    let grid = set.grid().clone();
    let h = grid.max_spacing().max(time.dt);
    if delta < 4.0 * h * (1.0 - 1e-12) {
        return Err(Error::UnderResolved(format!("δ = {delta} below 4·max(h, dt) = {}", 4.0 * h)));
    }
    let kernel = make_kernel(&grid, delta, KernelProfile::Bump)?;
    let eta = time_weights(delta, time.dt, KernelProfile::Bump);
    let half = (eta.len() / 2) as isize;
    let nt = set.nt() as isize;
    let n = grid.len();
    let dist: Vec<Vec<f64>> = (0..set.nt())
        .into_par_iter()
        .map(|m| {
            let mask = set.slice_mask(m);
            if set.is_point_cloud() {
                let loc = set.locator(m);
                (0..n).map(|i| loc.distance_within(&grid.position(i), 2.0 * delta).powi(2)).collect()
            } else {
                crate::geometry::squared_distance_transform(&grid, &mask)
            }
        })
        .collect();
    let r2 = (2.0 * delta).powi(2) * (1.0 - 1e-12);
    let wspan = ((2.0 * delta / time.dt) * (1.0 - 1e-12)).ceil() as isize - 1;
    // spatially mollified indicators on the slices extended by the time kernel
    let ext: Vec<Vec<f64>> = (-half..nt + half)
        .into_par_iter()
        .map(|e| {
            let lo = (e - wspan).max(0);
            let hi = (e + wspan).min(nt - 1);
            let mut ind = vec![0.0; n];
            for m in lo..=hi {
                for (o, &d2) in ind.iter_mut().zip(&dist[m as usize]) {
                    if d2 < r2 {
                        *o = 1.0;
                    }
                }
            }
            kernel.apply(&ind)
        })
        .collect();
    let mut chi = vec![0.0; n * set.nt()];
    for t in 0..nt {
        let out = &mut chi[t as usize * n..(t as usize + 1) * n];
        for (j, &w) in eta.iter().enumerate() {
            let src = &ext[(t + j as isize) as usize];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += w * s;
            }
        }
        out.iter_mut().for_each(|v| *v = snap(*v));
    }
    Ok(CutoffField {
        chi: Field::new(grid, Some(time), 1, chi)?,
        provenance: CutoffProvenance::Eulerian { delta },
        clipped: false,
    })
}

/// Value and flow derivative of the Lagrangian cutoff at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSample {
    pub chi: f64,
    /// `−Σ_k χ̃_k η′(u_k) ds`, which equals `∂_t χ + V·∇χ`.
    pub advective: f64,
    pub clipped: bool,
}

/// Lagrangian cutoff along the flow of `V`:
/// `χ(x,t) = ∫ η_τ(u) χ̃(x, t, u) du`, where `χ̃` tapers the distance from
/// the trajectory through `(x, t)` to the set over times within `2τ` of `t + u`.
pub struct FlowCutoff<'a> {
    set: &'a SpaceTimeSet,
    flow: &'a FlowMap,
    delta: f64,
    tau: f64,
    locators: Vec<SliceLocator>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    weight_derivs: Vec<f64>,
    ds: f64,
}

impl<'a> FlowCutoff<'a> {
    /// `nodes` midpoint quadrature nodes on `(−τ, τ)`.
    pub fn new(set: &'a SpaceTimeSet, flow: &'a FlowMap, delta: f64, tau: f64, nodes: usize) -> Result<Self> {
        let time = set.time().ok_or_else(|| invalid("cutoffs need a time axis"))?;
        if !(delta > 0.0 && tau > 0.0) || nodes < 8 {
            return Err(invalid("flow cutoff needs δ, τ > 0 and at least 8 nodes"));
        }
        if tau < 2.0 * time.dt {
            return Err(Error::UnderResolved(format!("τ = {tau} below 2·dt")));
        }
        if flow.velocity.dim() != set.grid().dim() {
            return Err(Error::ShapeMismatch("velocity and set dimensions differ".into()));
        }
        let ds = 2.0 * tau / nodes as f64;
        let u: Vec<f64> = (0..nodes).map(|k| -tau + (k as f64 + 0.5) * ds).collect();
        let prof = KernelProfile::Bump;
        let raw: Vec<f64> = u.iter().map(|&x| prof.eval(x / tau)).collect();
        let norm: f64 = raw.iter().sum::<f64>() * ds;
        let weights = raw.iter().map(|w| w * ds / norm).collect();
        let weight_derivs = u.iter().map(|&x| prof.eval_derivative(x / tau) / tau * ds / norm).collect();
        let locators = (0..set.nt()).map(|n| set.locator(n)).collect();
        Ok(Self { set, flow, delta, tau, locators, nodes: u, weights, weight_derivs, ds })
    }

    pub fn quadrature_step(&self) -> f64 {
        self.ds
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn flow(&self) -> &FlowMap {
        self.flow
    }

    /// Evaluate `χ` and its advective derivative at `(y, t)`.
    pub fn eval(&self, y: &[f64], t: f64) -> CutoffSample {
        let time = self.set.time().copied().expect("checked at construction");
        let nt = self.set.nt();
        let reach = 3.0 * self.tau;
        // slices whose times fall within 3τ of t
        let first = (((t - reach - time.t0) / time.dt).floor() as isize).max(0) as usize;
        let last = (((t + reach - time.t0) / time.dt).ceil() as isize).min(nt as isize - 1);
        let mut clipped = t - reach < time.t0 || t + reach > time.t_end();
        if last < first as isize {
            return CutoffSample { chi: 0.0, advective: 0.0, clipped: true };
        }
        let last = last as usize;
        let slices: Vec<usize> =
            (first..=last).filter(|&m| (time.time(m) - t).abs() < reach).collect();
        // distances along the trajectory, integrated outward from t
        let mut dist = vec![f64::INFINITY; slices.len()];
        let split = slices.partition_point(|&m| time.time(m) < t);
        let cutoff = 4.0 * self.delta;
        let mut x = y.to_vec();
        let mut cur = t;
        for i in split..slices.len() {
            let tm = time.time(slices[i]);
            clipped |= self.flow.advance(&mut x, cur, tm - cur);
            cur = tm;
            dist[i] = self.locators[slices[i]].distance_within(&x, cutoff);
        }
        let mut x = y.to_vec();
        let mut cur = t;
        for i in (0..split).rev() {
            let tm = time.time(slices[i]);
            clipped |= self.flow.advance(&mut x, cur, tm - cur);
            cur = tm;
            dist[i] = self.locators[slices[i]].distance_within(&x, cutoff);
        }
        let mut chi = 0.0;
        let mut adv = 0.0;
        let mut cache: Option<(usize, usize, f64)> = None;
        for (k, &u) in self.nodes.iter().enumerate() {
            let centre = t + u;
            let lo = slices.partition_point(|&m| time.time(m) <= centre - 2.0 * self.tau);
            let hi = slices.partition_point(|&m| time.time(m) < centre + 2.0 * self.tau);
            let value = match cache {
                Some((a, b, v)) if a == lo && b == hi => v,
                _ => {
                    let dmin = dist[lo..hi].iter().copied().fold(f64::INFINITY, f64::min);
                    let v = taper(dmin, self.delta);
                    cache = Some((lo, hi, v));
                    v
                }
            };
            chi += self.weights[k] * value;
            adv -= self.weight_derivs[k] * value;
        }
        CutoffSample { chi: snap(chi), advective: adv, clipped }
    }

    /// Sample `χ` on the set's space-time grid.
    pub fn field(&self) -> Result<CutoffField> {
        let time = *self.set.time().expect("checked at construction");
        let grid = self.set.grid().clone();
        let n = grid.len();
        let results: Vec<(f64, bool)> = (0..n * time.nt)
            .into_par_iter()
            .map(|i| {
                let (t, node) = (i / n, i % n);
                let s = self.eval(&grid.position(node), time.time(t));
                (s.chi, s.clipped)
            })
            .collect();
        let clipped = results.iter().any(|r| r.1);
        let chi = results.into_iter().map(|r| r.0).collect();
        Ok(CutoffField {
            chi: Field::new(grid, Some(time), 1, chi)?,
            provenance: CutoffProvenance::Flow {
                delta: self.delta,
                tau: self.tau,
                velocity: self.flow.velocity.name(),
            },
            clipped,
        })
    }
}

/// Lagrangian cutoff on the set's grid with 256 quadrature nodes.
pub fn flow_cutoff(set: &SpaceTimeSet, flow: &FlowMap, delta: f64, tau: f64) -> Result<CutoffField> {
    FlowCutoff::new(set, flow, delta, tau, 256)?.field()
}

/// Largest `|d/ds χ(Φ_s(y,t), t+s)|_{s=0} − (−Σ χ̃ η′ ds)|` over the probes,
/// with the left side from a fourth-order difference of fresh evaluations.
pub fn advective_derivative_check(cutoff: &FlowCutoff<'_>, probes: &[(Vec<f64>, f64)]) -> Result<f64> {
    let ds = cutoff.quadrature_step();
    let worst = probes
        .par_iter()
        .map(|(y, t)| {
            let mut vals = [0.0; 4];
            for (slot, j) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                let mut x = y.clone();
                cutoff.flow.advance(&mut x, *t, j * ds);
                vals[slot] = cutoff.eval(&x, t + j * ds).chi;
            }
            let lhs = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * ds);
            (lhs - cutoff.eval(y, *t).advective).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Grid with a time axis covering `[t0, t0 + (nt−1)dt]`, for convenience.
pub fn space_time(grid: &Grid, nt: usize, dt: f64) -> Result<(Grid, TimeGrid)> {
    Ok((grid.clone(), TimeGrid::new(nt, dt, 0.0)?))
}

/// Mollified velocity `v ∗ ρ_δ` as an interpolated velocity field.
pub fn mollified_velocity(v: &Field, delta: f64, profile: KernelProfile) -> Result<GridVelocity> {
    let k = make_kernel(v.grid(), delta, profile)?;
    GridVelocity::new(mollify(v, &k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(&[n, n], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn rotation_flow_matches_exact() {
        let rot = Arc::new(RigidRotation::new([0.5, 0.5], 2.0, &[1.0, 1.0]).unwrap());
        let flow = FlowMap::with_step(rot.clone(), 1e-3).unwrap();
        let seeds = vec![Seed { x: vec![0.7, 0.5], t: 0.0 }, Seed { x: vec![0.5, 0.3], t: 0.1 }];
        let s = [-0.3, 0.2, 0.5];
        let traj = integrate_flow(&flow, &seeds, &s).unwrap();
        for (seed, tr) in seeds.iter().zip(&traj) {
            for (&si, p) in s.iter().zip(&tr.positions) {
                let e = rot.rotate(&seed.x, si);
                assert!((p[0] - e[0]).abs() < 1e-10 && (p[1] - e[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn incompressible_jacobian_is_one() {
        let v = Arc::new(FourierVelocity::random(6, 3, 1.0, 9, &[1.0, 1.0]).unwrap());
        let flow = FlowMap::with_step(v, 1e-3).unwrap();
        let seeds: Vec<Seed> = (0..5).map(|i| Seed { x: vec![0.1 + 0.17 * i as f64, 0.3], t: 0.0 }).collect();
        for det in jacobian_determinant(&flow, &seeds, 0.2, 1e-4).unwrap() {
            assert!((det - 1.0).abs() < 1e-6, "{det}");
        }
    }

    #[test]
    fn fourier_velocity_is_divergence_free() {
        let v = FourierVelocity::random(5, 4, 1.0, 1, &[1.0, 2.0]).unwrap();
        let (x, t, h) = ([0.3, 0.7], 0.4, 1e-5);
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        let mut div = 0.0;
        for axis in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            v.eval(&xp, t, &mut a);
            v.eval(&xm, t, &mut b);
            div += (a[axis] - b[axis]) / (2.0 * h);
        }
        assert!(div.abs() < 1e-6);
    }

    #[test]
    fn grid_velocity_interpolates_linear_fields_exactly() {
        let g = unit_grid(16);
        let f = Field::from_fn(g, None, 2, |x, _, c| if c == 0 { 1.0 } else { (2.0 * PI * x[0]).cos() }).unwrap();
        let v = GridVelocity::new(f).unwrap();
        let mut out = [0.0; 2];
        v.eval(&[0.3, 0.9], 0.0, &mut out);
        assert!((out[0] - 1.0).abs() < 1e-14);
        let node = [0.25, 0.5];
        v.eval(&node, 0.0, &mut out);
        assert!(out[1].abs() < 1e-14);
    }

    #[test]
    fn clipping_at_data_range() {
        let g = unit_grid(8);
        let time = TimeGrid::new(4, 0.1, 0.0).unwrap();
        let f = Field::from_fn(g, Some(time), 2, |_, _, c| if c == 0 { 1.0 } else { 0.0 }).unwrap();
        let flow = FlowMap::with_step(Arc::new(GridVelocity::new(f).unwrap()), 0.01).unwrap();
        let mut x = [0.0, 0.0];
        assert!(flow.advance(&mut x, 0.2, 0.5));
        assert!((x[0] - 0.1).abs() < 1e-12);
        let seeds = [Seed { x: vec![0.0, 0.0], t: 0.2 }];
        assert!(matches!(integrate_flow(&flow, &seeds, &[0.5]), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn taper_shape() {
        assert_eq!(taper(0.1, 0.1), 1.0);
        assert_eq!(taper(0.2, 0.1), 1.0);
        assert_eq!(taper(0.4, 0.1), 0.0);
        assert!((taper(0.3, 0.1) - 0.5).abs() < 1e-12);
    }

    fn point_set(n: usize, nt: usize, dt: f64, c: [f64; 2]) -> SpaceTimeSet {
        let g = unit_grid(n);
        let time = TimeGrid::new(nt, dt, 0.0).unwrap();
        let pts = (0..nt).map(|k| vec![0.5 + c[0] * k as f64 * dt, 0.5 + c[1] * k as f64 * dt]).collect();
        SpaceTimeSet::from_points(g, Some(time), pts).unwrap()
    }

    #[test]
    fn eulerian_cutoff_plateau_and_support() {
        let n = 64;
        let dt = 1.0 / 64.0;
        let set = point_set(n, 24, dt, [0.0, 0.0]);
        let delta = 4.0 / 64.0;
        let cut = eulerian_cutoff(&set, delta).unwrap();
        let g = set.grid();
        for t in 0..24 {
            let s = cut.chi.slice(t, 0);
            for i in 0..g.len() {
                let r = g.periodic_delta(&g.position(i), &[0.5, 0.5]).iter().map(|d| d * d).sum::<f64>().sqrt();
                if r < delta {
                    assert_eq!(s[i], 1.0);
                }
                if r >= 4.0 * delta {
                    assert_eq!(s[i], 0.0);
                }
                assert!((0.0..=1.0).contains(&s[i]));
            }
        }
        assert!(cut.lq_norm(2.0) > 0.0 && cut.space_gradient_norm(2.0) > 0.0);
    }

    #[test]
    fn flow_cutoff_with_zero_velocity_matches_tapered_oracle() {
        let n = 32;
        let dt = 1.0 / 32.0;
        let nt = 16;
        let g = unit_grid(n);
        let time = TimeGrid::new(nt, dt, 0.0).unwrap();
        // a point that jumps once halfway
        let pts = (0..nt).map(|k| if k < nt / 2 { vec![0.3, 0.5] } else { vec![0.6, 0.5] }).collect();
        let set = SpaceTimeSet::from_points(g.clone(), Some(time), pts).unwrap();
        let zero = Arc::new(Uniform::new(vec![0.0, 0.0], &[1.0, 1.0]).unwrap());
        let flow = FlowMap::with_step(zero, dt).unwrap();
        let (delta, tau) = (0.06, 2.0 * dt);
        let fc = FlowCutoff::new(&set, &flow, delta, tau, 64).unwrap();
        let field = fc.field().unwrap();
        // oracle: max of tapered distances over the window, then time-averaged
        let ds = 2.0 * tau / 64.0;
        let prof = KernelProfile::Bump;
        let us: Vec<f64> = (0..64).map(|k| -tau + (k as f64 + 0.5) * ds).collect();
        let raw: Vec<f64> = us.iter().map(|u| prof.eval(u / tau)).collect();
        let norm: f64 = raw.iter().sum();
        for t in 0..nt {
            for i in (0..g.len()).step_by(7) {
                let x = g.position(i);
                let tn = time.time(t);
                let mut chi = 0.0;
                for (u, w) in us.iter().zip(&raw) {
                    let mut best: f64 = 0.0;
                    for m in 0..nt {
                        let tm = time.time(m);
                        if (tm - tn - u).abs() < 2.0 * tau && (tm - tn).abs() < 3.0 * tau {
                            let p = set.slice_points(m);
                            let r = g.periodic_delta(&x, &p).iter().map(|d| d * d).sum::<f64>().sqrt();
                            best = best.max(taper(r, delta));
                        }
                    }
                    chi += w / norm * best;
                }
                assert!((field.chi.slice(t, 0)[i] - snap(chi)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn translating_point_under_matching_velocity() {
        let c = [0.5, 0.25];
        let dt = 1.0 / 64.0;
        let set = point_set(32, 20, dt, c);
        let flow = FlowMap::with_step(Arc::new(Uniform::new(c.to_vec(), &[1.0, 1.0]).unwrap()), dt / 4.0).unwrap();
        let delta = 0.05;
        let fc = FlowCutoff::new(&set, &flow, delta, 3.0 * dt, 64).unwrap();
        for k in 0..20 {
            let t = k as f64 * dt;
            let centre = [0.5 + c[0] * t, 0.5 + c[1] * t];
            let s = fc.eval(&[centre[0] + 1.5 * delta, centre[1]], t);
            assert_eq!(s.chi, 1.0);
            assert!(s.advective.abs() < 1e-12);
        }
    }

    #[test]
    fn advective_derivative_identity() {
        let dt = 1.0 / 64.0;
        let set = point_set(32, 40, dt, [0.3, -0.2]);
        let v = Arc::new(FourierVelocity::random(4, 2, 0.5, 3, &[1.0, 1.0]).unwrap());
        let flow = FlowMap::with_step(v, dt / 8.0).unwrap();
        let tau = 4.0 * dt;
        let fc = FlowCutoff::new(&set, &flow, 0.04, tau, 256).unwrap();
        let probes: Vec<(Vec<f64>, f64)> =
            (0..12).map(|i| (vec![0.45 + 0.01 * i as f64, 0.5 - 0.005 * i as f64], 0.3 + 0.01 * i as f64)).collect();
        let worst = advective_derivative_check(&fc, &probes).unwrap();
        assert!(worst <= 1e-3 / tau, "{worst}");
    }

    #[test]
    fn cutoff_input_checks() {
        let set = point_set(32, 8, 0.01, [0.0, 0.0]);
        assert!(matches!(eulerian_cutoff(&set, 0.05), Err(Error::UnderResolved(_))));
        let zero = Arc::new(Uniform::new(vec![0.0, 0.0], &[1.0, 1.0]).unwrap());
        let flow = FlowMap::with_step(zero, 0.01).unwrap();
        assert!(FlowCutoff::new(&set, &flow, 0.1, 0.01, 64).is_err());
    }
}
