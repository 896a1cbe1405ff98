//! Structure functions, increment seminorms, exponent fits, and the
//! intermittency bound calculators with their verdicts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, fit_power_law_window, ExponentFit};
use crate::grid::{pow_half, root, Field, Grid};

/// Shift directions sampled in each shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSet {
    /// All lattice shifts in the shell for `d ≤ 2`; 26 directions for `d = 3`.
    Isotropic,
    /// Shifts along one axis only.
    Axis(usize),
}

/// How per-slice spatial means are combined over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAggregation {
    /// `L^p` in time: the space-time mean of `|δv|^p`.
    Lp,
    /// `L^3` in time of the per-slice `S_p` (informational).
    L3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureTable {
    pub p: f64,
    /// Increasing shell radii.
    pub shells: Vec<f64>,
    pub values: Vec<f64>,
    /// Shift attaining the shell maximum.
    pub argmax: Vec<Vec<isize>>,
    pub shift_set: ShiftSet,
    pub time_aggregation: TimeAggregation,
}

#[derive(Debug, Clone, Copy)]
pub struct StructureOptions {
    pub shift_set: ShiftSet,
    pub time_aggregation: TimeAggregation,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self { shift_set: ShiftSet::Isotropic, time_aggregation: TimeAggregation::Lp }
    }
}

const MAX_ORDER: f64 = 12.0;

fn shift_length(grid: &Grid, l: &[isize]) -> f64 {
    l.iter().enumerate().map(|(a, &k)| (k as f64 * grid.spacing(a)).powi(2)).sum::<f64>().sqrt()
}

/// Lattice shifts whose length lies in `[r − h/2, r + h/2)`, one of each `±` pair.
fn shell_shifts(grid: &Grid, r: f64, set: ShiftSet) -> Vec<Vec<isize>> {
    let d = grid.dim();
    let hmin = (0..d).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    match set {
        ShiftSet::Axis(a) => {
            let mut l = vec![0isize; d];
            l[a] = (r / grid.spacing(a)).round() as isize;
            if l[a] == 0 {
                vec![]
            } else {
                vec![l]
            }
        }
        ShiftSet::Isotropic if d == 3 => {
            let mut out: Vec<Vec<isize>> = Vec::new();
            for u in 0..27 {
                let dir = [u / 9 % 3, u / 3 % 3, u % 3].map(|k| k as isize - 1);
                if dir == [0, 0, 0] || dir.iter().find(|&&k| k != 0).is_some_and(|&k| k < 0) {
                    continue;
                }
                let norm = (dir.iter().map(|k| (k * k) as f64).sum::<f64>()).sqrt();
                let l: Vec<isize> =
                    (0..3).map(|a| (r * dir[a] as f64 / norm / grid.spacing(a)).round() as isize).collect();
                if l.iter().any(|&k| k != 0) && !out.contains(&l) {
                    out.push(l);
                }
            }
            out
        }
        ShiftSet::Isotropic => {
            let lo = r - 0.5 * hmin;
            let hi = r + 0.5 * hmin;
            let reach: Vec<isize> = (0..d).map(|a| (hi / grid.spacing(a)).ceil() as isize).collect();
            let mut out = Vec::new();
            let span: Vec<usize> = reach.iter().map(|&m| (2 * m + 1) as usize).collect();
            let count: usize = span.iter().product();
            for flat in 0..count {
                let mut rem = flat;
                let mut l = vec![0isize; d];
                for a in (0..d).rev() {
                    l[a] = (rem % span[a]) as isize - reach[a];
                    rem /= span[a];
                }
                if l.iter().find(|&&k| k != 0).is_none_or(|&k| k < 0) {
                    continue;
                }
                let len = shift_length(grid, &l);
                if len >= lo && len < hi {
                    out.push(l);
                }
            }
            out
        }
    }
}

/// Per-node `|v(x+ℓ) − v(x)|` on one time slice.
fn increment_magnitudes(v: &Field, t: usize, shift: &[isize], out: &mut [f64]) {
    let grid = v.grid();
    let sizes = grid.sizes();
    let d = grid.dim();
    let n = grid.len();
    let last = sizes[d - 1];
    let rows = n / last;
    out.iter_mut().for_each(|o| *o = 0.0);
    // wrapped destination index of the first entry of each row
    let inner_shift = shift[d - 1].rem_euclid(last as isize) as usize;
    for c in 0..v.components() {
        let s = v.slice(t, c);
        out.par_chunks_mut(last).enumerate().for_each(|(row, o)| {
            let mut idx = vec![0isize; d];
            let mut rem = row;
            for a in (0..d - 1).rev() {
                idx[a] = (rem % sizes[a]) as isize + shift[a];
                rem /= sizes[a];
            }
            let target_row = grid.flat_wrapped(&idx) / last;
            let src = &s[row * last..(row + 1) * last];
            let dst = &s[target_row * last..(target_row + 1) * last];
            for j in 0..last {
                let mut k = j + inner_shift;
                if k >= last {
                    k -= last;
                }
                let diff = dst[k] - src[j];
                o[j] += diff * diff;
            }
        });
        debug_assert!(rows * last == n);
    }
    out.iter_mut().for_each(|o| *o = o.sqrt());
}

/// Structure functions for several orders sharing the increment sweeps.
pub fn structure_functions(v: &Field, ps: &[f64], shells: &[f64], opts: StructureOptions) -> Result<Vec<StructureTable>> {
    let grid = v.grid();
    for &p in ps {
        if !(p >= 1.0 && p <= MAX_ORDER) {
            return Err(invalid(format!("order p = {p} outside [1, {MAX_ORDER}]")));
        }
    }
    if let ShiftSet::Axis(a) = opts.shift_set {
        if a >= grid.dim() {
            return Err(invalid(format!("axis {a} out of range")));
        }
    }
    let mut shells = shells.to_vec();
    shells.sort_by(|a, b| a.total_cmp(b));
    let h = grid.max_spacing();
    for &r in &shells {
        if r < 2.0 * h * (1.0 - 1e-9) || r > grid.min_length() / 4.0 * (1.0 + 1e-9) {
            return Err(Error::OutOfRange(format!("shell {r} outside [2h, L/4] = [{}, {}]", 2.0 * h, grid.min_length() / 4.0)));
        }
    }
    let nt = v.nt();
    let n = grid.len();
    let mut values = vec![vec![0.0; shells.len()]; ps.len()];
    let mut argmax = vec![vec![Vec::new(); shells.len()]; ps.len()];
    let mut mags = vec![0.0; n];
    for (si, &r) in shells.iter().enumerate() {
        let shifts = shell_shifts(grid, r, opts.shift_set);
        if shifts.is_empty() {
            return Err(invalid(format!("shell {r} contains no lattice shift")));
        }
        for l in &shifts {
            // per slice, per order: spatial mean of |δv|^p
            let mut means = vec![vec![0.0; nt]; ps.len()];
            for t in 0..nt {
                increment_magnitudes(v, t, l, &mut mags);
                for (pi, &p) in ps.iter().enumerate() {
                    means[pi][t] = mags.iter().map(|&m| pow_half(m * m, p)).sum::<f64>() / n as f64;
                }
            }
            for (pi, &p) in ps.iter().enumerate() {
                let value = match opts.time_aggregation {
                    TimeAggregation::Lp => root(means[pi].iter().sum::<f64>() / nt as f64, p),
                    TimeAggregation::L3 => {
                        let s: f64 = means[pi].iter().map(|&m| root(m, p).powi(3)).sum::<f64>() / nt as f64;
                        s.cbrt()
                    }
                };
                if argmax[pi][si].is_empty() || value > values[pi][si] {
                    values[pi][si] = value;
                    argmax[pi][si] = l.clone();
                }
            }
        }
    }
    Ok(ps
        .iter()
        .enumerate()
        .map(|(pi, &p)| StructureTable {
            p,
            shells: shells.clone(),
            values: values[pi].clone(),
            argmax: argmax[pi].clone(),
            shift_set: opts.shift_set,
            time_aggregation: opts.time_aggregation,
        })
        .collect())
}

/// `S_p(r)`: shell-max over shifts of `(mean |v(x+ℓ) − v(x)|^p)^{1/p}`.
pub fn structure_function(v: &Field, p: f64, shells: &[f64]) -> Result<StructureTable> {
    Ok(structure_functions(v, &[p], shells, StructureOptions::default())?.remove(0))
}

/// Fitted `ζ_p` with its band; `θ = ζ_p/p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaFit {
    pub p: f64,
    pub zeta: f64,
    pub zeta_band: (f64, f64),
    pub theta: f64,
    pub theta_band: (f64, f64),
    pub fit: ExponentFit,
}

pub fn fit_zeta(table: &StructureTable, window: Option<(usize, usize)>) -> Result<ZetaFit> {
    if table.shells.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 shells, got {}", table.shells.len())));
    }
    let fit = match window {
        None => fit_power_law(&table.shells, &table.values)?,
        Some(w) => fit_power_law_window(&table.shells, &table.values, w)?,
    };
    if fit.degenerate {
        return Err(Error::DegenerateFit("structure function vanishes at every shell".into()));
    }
    let p = table.p;
    let (lo, hi) = fit.band();
    Ok(ZetaFit {
        p,
        zeta: fit.slope * p,
        zeta_band: (lo * p, hi * p),
        theta: fit.slope,
        theta_band: (lo, hi),
        fit,
    })
}

/// `max_h ‖v(·+h) − v(·)‖_{L^p} / |h|^θ` over the shells `h·2^k ≤ L/4`.
/// Each increment norm is computed relative to its maximum, so scaling `v`
/// by a power of two scales the result exactly.
pub fn besov_seminorm(v: &Field, theta: f64, p: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) || !(p >= 1.0) {
        return Err(invalid("need θ ∈ (0, 1) and p ≥ 1"));
    }
    let grid = v.grid();
    let hmin = (0..grid.dim()).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    let measure = grid.volume() * v.time().map_or(1.0, |t| t.dt * t.nt as f64);
    let n = grid.len();
    let nt = v.nt();
    let mut mags = vec![0.0; n * nt];
    let mut best: f64 = 0.0;
    let mut r = hmin;
    while r <= grid.min_length() / 4.0 * (1.0 + 1e-9) {
        for l in shell_shifts(grid, r, ShiftSet::Isotropic) {
            for t in 0..nt {
                increment_magnitudes(v, t, &l, &mut mags[t * n..(t + 1) * n]);
            }
            let top = mags.iter().fold(0f64, |a, &b| a.max(b));
            if top == 0.0 {
                continue;
            }
            let mean = mags.iter().map(|&m| (m / top).powf(p)).sum::<f64>() / (n * nt) as f64;
            let norm = top * (mean * measure).powf(1.0 / p);
            best = best.max(norm / shift_length(grid, &l).powf(theta));
        }
        r *= 2.0;
    }
    Ok(best)
}

/// β-model exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaModel {
    /// `None` for `p = ∞`.
    pub zeta: Option<f64>,
    pub theta: f64,
}

fn check_bound_inputs(p: f64, d: f64, gamma: f64) -> Result<()> {
    if !(p >= 3.0) {
        return Err(invalid(format!("p = {p} below 3")));
    }
    if !(d >= 1.0) || !(0.0..=d).contains(&gamma) {
        return Err(invalid(format!("need 0 ≤ γ ≤ d, got γ = {gamma}, d = {d}")));
    }
    Ok(())
}

/// `ζ_p = p/3 − (d−γ)(p−3)/3` and `θ_p = ζ_p/p`, with the `p → ∞` limit.
pub fn beta_model_bound(p: f64, d: f64, gamma: f64) -> Result<BetaModel> {
    check_bound_inputs(p, d, gamma)?;
    if p.is_infinite() {
        return Ok(BetaModel { zeta: None, theta: 1.0 / 3.0 - (d - gamma) / 3.0 });
    }
    let zeta = (p - (d - gamma) * (p - 3.0)) / 3.0;
    let theta = 1.0 / 3.0 - (d - gamma) * (p - 3.0) / (3.0 * p);
    Ok(BetaModel { zeta: Some(zeta), theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerianThreshold {
    pub theta_e: f64,
    pub t: f64,
    /// `t < 0`: the condition holds for every `θ > 0`.
    pub vacuous: bool,
}

/// `θ_E` solving `2θ/(1−θ) = t`, `t = 1 − (d−γ)(p−3)/p`, clamped to `[0, 1/3]`.
pub fn eulerian_threshold(p: f64, d: f64, gamma: f64) -> Result<EulerianThreshold> {
    check_bound_inputs(p, d, gamma)?;
    let t = if p.is_infinite() { 1.0 - (d - gamma) } else { 1.0 - (d - gamma) * (p - 3.0) / p };
    if t < 0.0 {
        return Ok(EulerianThreshold { theta_e: 0.0, t, vacuous: true });
    }
    Ok(EulerianThreshold { theta_e: (t / (2.0 + t)).clamp(0.0, 1.0 / 3.0), t, vacuous: false })
}

/// Critical time-singular-set dimension; `None` at `p = 3` where it is undefined.
pub fn time_gamma_critical(p: f64, theta: f64, beta: f64) -> Result<Option<f64>> {
    if !(p >= 3.0) {
        return Err(invalid(format!("p = {p} below 3")));
    }
    if !(theta > 0.0 && theta < 1.0 / 3.0) {
        return Err(invalid(format!("θ = {theta} outside (0, 1/3)")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("β = {beta} outside (0, 1)")));
    }
    if p == 3.0 {
        return Ok(None);
    }
    let gap = 1.0 - 3.0 * theta;
    if p.is_infinite() {
        return Ok(Some(2.0 * beta / (gap + 2.0 * beta)));
    }
    Ok(Some((2.0 * beta * (p - 3.0) - 3.0 * gap) / ((p - 3.0) * (gap + 2.0 * beta))))
}

/// A measured exponent with its confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn new(value: f64, lower: f64, upper: f64) -> Self {
        Self { value, lower, upper }
    }

    /// `value ± halfwidth`.
    pub fn symmetric(value: f64, halfwidth: f64) -> Self {
        Self { value, lower: value - halfwidth, upper: value + halfwidth }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Measurements {
    /// Regularity exponent `θ = ζ_p/p`.
    pub theta: Option<Band>,
    pub gamma_eulerian: Option<f64>,
    pub gamma_lagrangian: Option<f64>,
    /// `|⟨D_ε, φ⟩|` at the finest scale.
    pub pairing: Option<f64>,
    /// Pairings at or below this are treated as zero.
    pub pairing_floor: f64,
    /// Time-regularity exponent, for the time-singular-set bound.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Within,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub theorem: String,
    pub threshold: f64,
    pub side: Side,
    pub conclusion: String,
    /// `(value, lower, upper) − threshold`.
    pub margins: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCritical {
    pub gamma_crit: Option<f64>,
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsInputs {
    pub p: f64,
    pub d: f64,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundsInputs,
    pub beta_model: Option<BetaModel>,
    pub eulerian_threshold: Option<EulerianThreshold>,
    pub time_critical: Option<TimeCritical>,
    pub verdicts: Vec<Verdict>,
    /// Names of inputs that were needed but absent.
    pub missing: Vec<String>,
}

fn decide(theorem: &str, threshold: f64, theta: Band, m: &Measurements) -> Verdict {
    let quiet = m.pairing.map(|v| v.abs() <= m.pairing_floor);
    let (side, conclusion) = if theta.lower > threshold {
        let c = match quiet {
            Some(true) => "conservative, consistent (pairing ≈ 0 confirms)",
            Some(false) => "bound predicts D ≡ 0 but the pairing is nonzero: inconsistent",
            None => "bound predicts D ≡ 0",
        };
        (Side::Above, c)
    } else if theta.upper < threshold {
        (Side::Below, "dissipation admissible")
    } else {
        let c = match quiet {
            Some(true) => "critical, conservative",
            _ => "saturating, dissipation admissible",
        };
        (Side::Within, c)
    };
    Verdict {
        theorem: theorem.into(),
        threshold,
        side,
        conclusion: conclusion.into(),
        margins: (theta.value - threshold, theta.lower - threshold, theta.upper - threshold),
    }
}

/// Place measurements against the Eulerian and Lagrangian thresholds. Only
/// sides of inequalities and consistency are stated; missing inputs are
/// listed rather than guessed.
pub fn verdict(m: &Measurements, p: f64, d: f64) -> Result<BoundsReport> {
    let gamma = m.gamma_eulerian.or(m.gamma_lagrangian);
    let mut missing = Vec::new();
    let mut verdicts = Vec::new();
    let mut beta_model = None;
    let mut threshold = None;
    if let Some(g) = gamma {
        beta_model = Some(beta_model_bound(p, d, g)?);
        threshold = Some(eulerian_threshold(p, d, g)?);
    } else {
        missing.push("gamma".to_string());
    }
    match m.theta {
        None => missing.push("theta".to_string()),
        Some(theta) => {
            match m.gamma_eulerian {
                Some(g) => verdicts.push(decide("eulerian", eulerian_threshold(p, d, g)?.theta_e, theta, m)),
                None => missing.push("gamma_eulerian".to_string()),
            }
            match m.gamma_lagrangian.or(m.gamma_eulerian) {
                Some(g) => verdicts.push(decide("lagrangian", beta_model_bound(p, d, g)?.theta, theta, m)),
                None => missing.push("gamma_lagrangian".to_string()),
            }
        }
    }
    let time_critical = match (m.theta, m.beta) {
        (Some(t), Some(b)) if t.value > 0.0 && t.value < 1.0 / 3.0 => {
            let g = time_gamma_critical(p, t.value, b)?;
            Some(TimeCritical { gamma_crit: g, defined: g.is_some() })
        }
        (_, None) => {
            missing.push("beta".to_string());
            None
        }
        _ => Some(TimeCritical { gamma_crit: None, defined: false }),
    };
    Ok(BoundsReport {
        inputs: BoundsInputs { p, d, gamma, theta: m.theta.map(|t| t.value), beta: m.beta },
        beta_model,
        eulerian_threshold: threshold,
        time_critical,
        verdicts,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn sine_second_order_closed_form() {
        let g = Grid::cube(1, 256, TAU).unwrap();
        let v = Field::from_fn(g.clone(), None, 1, |x, _, _| x[0].sin()).unwrap();
        let h = g.spacing(0);
        let shells: Vec<f64> = (1..=5).map(|k| 2f64.powi(k) * h).collect();
        let t = structure_function(&v, 2.0, &shells).unwrap();
        for (&r, &s) in t.shells.iter().zip(&t.values) {
            assert!((s - (1.0 - r.cos()).sqrt()).abs() < 1e-12, "{r} {s}");
        }
    }

    #[test]
    fn constant_field_vanishes() {
        let g = Grid::cube(2, 32, 1.0).unwrap();
        let v = Field::from_fn(g.clone(), None, 2, |_, _, _| 3.0).unwrap();
        let shells = [0.0625, 0.125, 0.25];
        assert!(structure_function(&v, 3.0, &shells).unwrap().values.iter().all(|&s| s == 0.0));
        assert_eq!(besov_seminorm(&v, 0.5, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn shell_checks() {
        let g = Grid::cube(1, 64, 1.0).unwrap();
        let v = Field::from_fn(g.clone(), None, 1, |x, _, _| x[0]).unwrap();
        assert!(structure_function(&v, 2.0, &[1.0 / 64.0]).is_err());
        assert!(structure_function(&v, 2.0, &[0.5]).is_err());
        assert!(structure_function(&v, 13.0, &[0.125]).is_err());
    }

    #[test]
    fn isotropic_shells_in_2d() {
        let g = Grid::cube(2, 64, 1.0).unwrap();
        let s = shell_shifts(&g, 2.0 / 64.0, ShiftSet::Isotropic);
        // |ℓ| ∈ [1.5, 2.5) cells, one of each ± pair
        let mut lens: Vec<isize> = s.iter().map(|l| l[0] * l[0] + l[1] * l[1]).collect();
        lens.sort();
        assert_eq!(lens, vec![4, 4, 5, 5, 5, 5]);
        let g3 = Grid::cube(3, 16, 1.0).unwrap();
        assert_eq!(shell_shifts(&g3, 0.25, ShiftSet::Isotropic).len(), 13);
    }

    #[test]
    fn exact_power_law_zeta() {
        let shells: Vec<f64> = (0..5).map(|k| 0.01 * 2f64.powi(k)).collect();
        let values: Vec<f64> = shells.iter().map(|r| 2.0 * r.powf(0.25)).collect();
        let t = StructureTable {
            p: 4.0,
            shells,
            values,
            argmax: vec![],
            shift_set: ShiftSet::Isotropic,
            time_aggregation: TimeAggregation::Lp,
        };
        let z = fit_zeta(&t, None).unwrap();
        assert!((z.zeta - 1.0).abs() < 1e-12 && (z.theta - 0.25).abs() < 1e-12);
    }

    #[test]
    fn seminorm_is_exactly_homogeneous() {
        let g = Grid::cube(2, 32, 1.0).unwrap();
        let v = Field::from_fn(g.clone(), None, 2, |x, _, c| (7.0 * x[0] + c as f64).sin() * (3.0 * x[1]).cos().powi(3))
            .unwrap();
        for p in [1.0, 2.0, 3.0, 4.5] {
            let a = besov_seminorm(&v, 0.4, p).unwrap();
            let b = besov_seminorm(&v.scaled(2.0), 0.4, p).unwrap();
            assert_eq!(b, 2.0 * a);
        }
    }

    #[test]
    fn sine_seminorm_near_one_is_finite() {
        let g = Grid::cube(1, 512, TAU).unwrap();
        let v = Field::from_fn(g.clone(), None, 1, |x, _, _| x[0].sin()).unwrap();
        let s = besov_seminorm(&v, 0.99, 2.0).unwrap();
        let h = g.spacing(0);
        // closed form ‖δ_ℓ sin‖²_{L²} = 2π(1 − cos ℓ) at the dyadic shells
        let oracle = (0..)
            .map(|k| 2f64.powi(k) * h)
            .take_while(|&l| l <= TAU / 4.0 * (1.0 + 1e-9))
            .map(|l| (TAU * (1.0 - l.cos())).sqrt() / l.powf(0.99))
            .fold(0.0, f64::max);
        assert!(s.is_finite());
        assert!((s - oracle).abs() < 1e-9 * oracle, "{s} {oracle}");
    }

    #[test]
    fn bound_anchor_values() {
        let b = beta_model_bound(6.0, 3.0, 2.0).unwrap();
        assert_eq!(b.zeta, Some(1.0));
        assert_eq!(b.theta, 1.0 / 6.0);
        assert_eq!(beta_model_bound(6.0, 3.0, 3.0).unwrap().zeta, Some(2.0));
        assert_eq!(beta_model_bound(7.0, 3.0, 3.0).unwrap().theta, 1.0 / 3.0);
        assert_eq!(beta_model_bound(3.0, 2.0, 0.7).unwrap().zeta, Some(1.0));
        assert_eq!(eulerian_threshold(6.0, 3.0, 2.0).unwrap().theta_e, 1.0 / 5.0);
        assert_eq!(eulerian_threshold(6.0, 3.0, 3.0).unwrap().theta_e, 1.0 / 3.0);
        assert_eq!(eulerian_threshold(3.0, 3.0, 0.0).unwrap().theta_e, 1.0 / 3.0);
        assert_eq!(time_gamma_critical(6.0, 0.25, 0.25).unwrap(), Some(1.0 / 3.0));
        assert_eq!(time_gamma_critical(3.0, 0.25, 0.25).unwrap(), None);
        assert!(beta_model_bound(2.0, 3.0, 1.0).is_err());
        assert!(beta_model_bound(4.0, 3.0, 3.5).is_err());
    }

    #[test]
    fn vacuous_eulerian_condition() {
        let e = eulerian_threshold(12.0, 3.0, 0.0).unwrap();
        assert!(e.vacuous && e.theta_e == 0.0);
    }

    #[test]
    fn time_critical_limits() {
        let near = time_gamma_critical(6.0, 1.0 / 3.0 - 1e-9, 0.5).unwrap().unwrap();
        assert!((near - 1.0).abs() < 1e-6);
        let small = time_gamma_critical(6.0, 0.2, 1e-9).unwrap().unwrap();
        assert!((small - (1.0 - 6.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn infinite_order_limits() {
        let b = beta_model_bound(f64::INFINITY, 3.0, 2.0).unwrap();
        assert!(b.zeta.is_none() && b.theta == 0.0);
        let e = eulerian_threshold(f64::INFINITY, 3.0, 2.5).unwrap();
        assert!((e.theta_e - 0.2).abs() < 1e-15);
    }

    #[test]
    fn verdict_rules() {
        let tg = Measurements {
            theta: Some(Band::new(1.0, 0.98, 1.02)),
            gamma_eulerian: Some(2.0),
            pairing: Some(1e-14),
            pairing_floor: 1e-10,
            ..Default::default()
        };
        let r = verdict(&tg, 3.0, 2.0).unwrap();
        assert!(r.verdicts.iter().all(|v| v.side == Side::Above));
        assert!(r.verdicts[0].conclusion.starts_with("conservative"));
        let burgers = Measurements {
            theta: Some(Band::symmetric(1.0 / 3.0, 0.02)),
            gamma_eulerian: Some(0.0),
            pairing: Some(0.66),
            pairing_floor: 1e-10,
            ..Default::default()
        };
        let r = verdict(&burgers, 3.0, 1.0).unwrap();
        assert!(r.verdicts.iter().all(|v| v.side == Side::Within && v.conclusion.starts_with("saturating")));
        assert!(r.missing.contains(&"beta".to_string()));
        let partial = verdict(&Measurements::default(), 3.0, 2.0).unwrap();
        assert!(partial.verdicts.is_empty() && partial.missing.contains(&"theta".to_string()));
    }
}
