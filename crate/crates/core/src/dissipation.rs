//! Duchon–Robert dissipation estimator, local energy balance, kinetic energy
//! and the time regularity of the energy.

use std::f64::consts::PI;

use serde::Serialize;

use crate::commutators::{pressure_from_velocity, reynolds_commutator, tensor_times_vector};
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid, ScalarSeries, TimeGrid};
use crate::mollify::{derivatives, divergence, mollify, MollifierKernel};

/// Normalization of the balance law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxConvention {
    /// `∂_t v + div(v⊗v) + ∇p = 0`: `D = R:∇v_ε`.
    Euler,
    /// 1D `∂_t u + ∂_x(u²/2) = 0`: `D = ½·R·∂_x u_ε`.
    Burgers,
}

#[derive(Debug, Clone)]
pub struct DissipationEstimate {
    pub eps: f64,
    pub convention: FluxConvention,
    /// Scalar space-time field `R_ε:∇v_ε` (times ½ for Burgers).
    pub d: Field,
    /// `(|v_ε|²/2 + p_ε)v_ε`, or `u_ε³/3` for Burgers.
    pub transport_flux: Field,
    /// `R_ε v_ε`, or `R u_ε/2` for Burgers.
    pub commutator_flux: Field,
    /// `|v_ε|²/2`.
    pub energy_density: Field,
}

/// Estimator with the convention picked from the dimension: 1D data is the
/// Burgers analog, higher dimensions are Euler with the pressure solved from `v`.
pub fn duchon_robert(v: &Field, kernel: &MollifierKernel) -> Result<DissipationEstimate> {
    if v.grid().dim() == 1 {
        duchon_robert_with(v, None, kernel, FluxConvention::Burgers)
    } else {
        let p = pressure_from_velocity(v)?;
        duchon_robert_with(v, Some(&p), kernel, FluxConvention::Euler)
    }
}

pub fn duchon_robert_with(
    v: &Field,
    p: Option<&Field>,
    kernel: &MollifierKernel,
    convention: FluxConvention,
) -> Result<DissipationEstimate> {
    let g = v.grid();
    let d = g.dim();
    if v.components() != d {
        return Err(Error::ShapeMismatch("dissipation needs a vector field".into()));
    }
    if v.nt() < 3 || v.time().is_none() {
        return Err(invalid("dissipation needs a time axis with nt >= 3"));
    }
    if convention == FluxConvention::Burgers && d != 1 {
        return Err(invalid("the Burgers convention is one-dimensional"));
    }
    let n = g.len();
    let nt = v.nt();
    let ve = mollify(v, kernel)?;
    let r = reynolds_commutator(v, kernel)?;
    let grad = derivatives(&ve, 1)?; // component i*d + j = ∂_j (v_ε)_i
    let half = if convention == FluxConvention::Burgers { 0.5 } else { 1.0 };

    let mut dd = vec![0.0; nt * n];
    let mut energy = vec![0.0; nt * n];
    for t in 0..nt {
        let out = &mut dd[t * n..(t + 1) * n];
        for c in 0..d * d {
            for ((o, rr), gg) in out.iter_mut().zip(r.slice(t, c)).zip(grad.slice(t, c)) {
                *o += rr * gg;
            }
        }
        out.iter_mut().for_each(|o| *o *= half);
        let e = &mut energy[t * n..(t + 1) * n];
        for c in 0..d {
            for (o, x) in e.iter_mut().zip(ve.slice(t, c)) {
                *o += 0.5 * x * x;
            }
        }
    }
    let time = v.time().copied();
    let energy_density = Field::new(g.clone(), time, 1, energy)?;

    let transport_flux = match convention {
        FluxConvention::Euler => {
            let pe = match p {
                Some(p) => {
                    if p.grid() != g || p.nt() != nt || p.components() != 1 {
                        return Err(Error::ShapeMismatch("pressure shape".into()));
                    }
                    Some(mollify(p, kernel)?)
                }
                None => None,
            };
            let mut data = Vec::with_capacity(nt * d * n);
            for t in 0..nt {
                let e = energy_density.slice(t, 0);
                for c in 0..d {
                    let vc = ve.slice(t, c);
                    data.extend((0..n).map(|x| {
                        let pp = pe.as_ref().map_or(0.0, |pe| pe.slice(t, 0)[x]);
                        (e[x] + pp) * vc[x]
                    }));
                }
            }
            Field::new(g.clone(), time, d, data)?
        }
        FluxConvention::Burgers => ve.map(|u| u * u * u / 3.0)?,
    };
    let commutator_flux = tensor_times_vector(&r, &ve)?.scaled(half);
    Ok(DissipationEstimate {
        eps: kernel.scale(),
        convention,
        d: Field::new(g.clone(), time, 1, dd)?,
        transport_flux,
        commutator_flux,
        energy_density,
    })
}

fn check_test_function(phi: &Field, like: &Field) -> Result<()> {
    if phi.components() != 1 || phi.grid() != like.grid() || phi.time() != like.time() {
        return Err(Error::ShapeMismatch("test function must be a scalar on the data grid".into()));
    }
    let scale = phi.max_abs();
    let last = phi.nt() - 1;
    let edge = phi.slice(0, 0).iter().chain(phi.slice(last, 0)).fold(0.0f64, |m, v| m.max(v.abs()));
    if edge > 1e-12 * scale {
        return Err(invalid("test function must vanish on the first and last time slices"));
    }
    Ok(())
}

/// Space-time quadrature `Σ D·φ·∏h·dt`. `φ` must vanish on the end slices.
pub fn pair_with_test(est: &DissipationEstimate, phi: &Field) -> Result<f64> {
    check_test_function(phi, &est.d)?;
    Ok(pair(&est.d, phi))
}

fn pair(a: &Field, phi: &Field) -> f64 {
    let w = a.grid().cell_volume() * a.time().map_or(1.0, |t| t.dt);
    a.data().iter().zip(phi.data()).map(|(x, y)| x * y).sum::<f64>() * w
}

/// Spatial quadrature `Σ D(·, t)·ψ·∏h` on one slice, with a static weight `ψ`.
pub fn spatial_pairing(est: &DissipationEstimate, t: usize, psi: &[f64]) -> Result<f64> {
    if t >= est.d.nt() {
        return Err(Error::OutOfRange(format!("time index {t}")));
    }
    if psi.len() != est.d.grid().len() {
        return Err(Error::ShapeMismatch("weight length".into()));
    }
    Ok(est.d.slice(t, 0).iter().zip(psi).map(|(a, b)| a * b).sum::<f64>() * est.d.grid().cell_volume())
}

/// Smooth bump `sin²(π(t−t0)/T)·∏_i ((1 + cos(2π(x_i − c_i)/L_i))/2)⁴` centred
/// off the diagonal at `c_i = (0.3 − 0.07 i) L_i`,
/// exactly zero on the first and last slices.
pub fn default_test_function(grid: &Grid, time: &TimeGrid) -> Result<Field> {
    let span = (time.nt - 1) as f64 * time.dt;
    let t0 = time.t0;
    let last = time.t_end();
    let lengths = grid.lengths().to_vec();
    Field::from_fn(grid.clone(), Some(*time), 1, move |x, t, _| {
        if t == t0 || t == last {
            return 0.0;
        }
        let tf = (PI * (t - t0) / span).sin().powi(2);
        let sf: f64 = x
            .iter()
            .zip(&lengths)
            .enumerate()
            .map(|(i, (&xi, &l))| {
                let c = (0.3 - 0.07 * i as f64) * l;
                (0.5 * (1.0 + (2.0 * PI * (xi - c) / l).cos())).powi(4)
            })
            .product();
        tf * sf
    })
}

/// Summation-by-parts first derivative in time: centred in the interior,
/// one-sided on the end slices, paired with trapezoid weights.
fn sbp_time_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / dt
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / dt
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    pub residual: f64,
    /// Sum of the absolute pairings of the individual terms.
    pub magnitude: f64,
    /// `|residual| > 1e−2·magnitude`: the data does not solve the equation.
    pub not_a_solution: bool,
}

/// `⟨∂_t(|v_ε|²/2) + div F_transport + D − div F_comm, φ⟩` with the time
/// derivative moved onto `φ` by summation by parts.
pub fn local_balance(v: &Field, p: Option<&Field>, kernel: &MollifierKernel, phi: &Field) -> Result<BalanceReport> {
    let convention = if v.grid().dim() == 1 { FluxConvention::Burgers } else { FluxConvention::Euler };
    let est = duchon_robert_with(v, p, kernel, convention)?;
    check_test_function(phi, &est.d)?;
    let n = v.grid().len();
    let nt = v.nt();
    let dt = v.time().expect("checked").dt;
    let vol = v.grid().cell_volume();
    // −Σ_n w_n E_n (Dφ)_n with trapezoid weights w_n
    let mut time_term = 0.0;
    for x in 0..n {
        let series: Vec<f64> = (0..nt).map(|t| phi.slice(t, 0)[x]).collect();
        let dphi = sbp_time_derivative(&series, dt);
        for t in 0..nt {
            let w = if t == 0 || t == nt - 1 { 0.5 * dt } else { dt };
            time_term -= w * est.energy_density.slice(t, 0)[x] * dphi[t];
        }
    }
    time_term *= vol;
    let div_t = divergence(&est.transport_flux)?;
    let div_c = divergence(&est.commutator_flux)?;
    let a = pair(&div_t, phi);
    let b = pair(&est.d, phi);
    let c = pair(&div_c, phi);
    let residual = time_term + a + b - c;
    let magnitude = time_term.abs() + a.abs() + b.abs() + c.abs();
    Ok(BalanceReport { residual, magnitude, not_a_solution: residual.abs() > 1e-2 * magnitude })
}

pub fn local_balance_residual(v: &Field, p: Option<&Field>, kernel: &MollifierKernel, phi: &Field) -> Result<f64> {
    Ok(local_balance(v, p, kernel, phi)?.residual)
}

/// `e(t) = ½∫|v|²` per slice.
pub fn kinetic_energy(v: &Field) -> Result<ScalarSeries> {
    let time = *v.time().ok_or_else(|| invalid("kinetic energy needs a time axis"))?;
    let vol = v.grid().cell_volume();
    let values = (0..v.nt())
        .map(|t| {
            let s: f64 = (0..v.components()).map(|c| v.slice(t, c).iter().map(|x| x * x).sum::<f64>()).sum();
            0.5 * s * vol
        })
        .collect();
    ScalarSeries::new(time, values)
}

/// `(Σ_t |e(t+h) − e(t)|^q dt)^{1/q}` for each dyadic lag `h = 2^k dt`, over
/// the times with both `t` and `t+h` sampled. Returns `(lag, increment norm)`.
pub fn energy_increments(e: &ScalarSeries, q: f64) -> Result<Vec<(f64, f64)>> {
    if !(q >= 1.0) {
        return Err(invalid(format!("integrability q = {q} must be >= 1")));
    }
    let nt = e.values.len();
    if nt < 16 {
        return Err(invalid(format!("need at least 16 samples, got {nt}")));
    }
    let dt = e.time.dt;
    let mut out = Vec::new();
    let mut lag = 1;
    while lag < nt {
        let s: f64 = (0..nt - lag).map(|t| (e.values[t + lag] - e.values[t]).abs().powf(q)).sum();
        out.push((lag as f64 * dt, (s * dt).powf(1.0 / q)));
        lag *= 2;
    }
    Ok(out)
}

/// `max_h ‖e(·+h) − e(·)‖_{L^q} / h^s` over dyadic lags.
pub fn energy_besov_seminorm(e: &ScalarSeries, s: f64, q: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("exponent s = {s} must lie in (0, 1)")));
    }
    Ok(energy_increments(e, q)?
        .into_iter()
        .map(|(h, v)| v / h.powf(s))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::{make_kernel, KernelProfile};

    fn tg(n: usize, nt: usize) -> (Field, TimeGrid) {
        let g = Grid::periodic(&[n, n]).unwrap();
        let time = TimeGrid::new(nt, 0.1, 0.0).unwrap();
        let v = Field::from_fn(g, Some(time), 2, |x, _, c| {
            if c == 0 {
                x[0].sin() * x[1].cos()
            } else {
                -x[0].cos() * x[1].sin()
            }
        })
        .unwrap();
        (v, time)
    }

    #[test]
    fn taylor_green_energy() {
        let (v, _) = tg(32, 4);
        let e = kinetic_energy(&v).unwrap();
        for x in &e.values {
            assert!((x - PI * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_no_dissipation() {
        let g = Grid::periodic(&[16, 16]).unwrap();
        let time = TimeGrid::new(5, 0.1, 0.0).unwrap();
        let v = Field::from_fn(g.clone(), Some(time), 2, |_, _, c| 1.0 - c as f64).unwrap();
        let k = make_kernel(&g, 2.0 * g.max_spacing(), KernelProfile::Bump).unwrap();
        let est = duchon_robert(&v, &k).unwrap();
        assert!(est.d.max_abs() < 1e-14);
        let phi = default_test_function(&g, &time).unwrap();
        assert!(local_balance_residual(&v, None, &k, &phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn needs_three_slices() {
        let (v, _) = tg(16, 2);
        let k = make_kernel(v.grid(), 2.0 * v.grid().max_spacing(), KernelProfile::Bump).unwrap();
        assert!(duchon_robert(&v, &k).is_err());
    }

    #[test]
    fn taylor_green_balance_closes() {
        let (v, time) = tg(32, 6);
        let p = pressure_from_velocity(&v).unwrap();
        let k = make_kernel(v.grid(), 4.0 * v.grid().max_spacing(), KernelProfile::Bump).unwrap();
        let phi = default_test_function(v.grid(), &time).unwrap();
        let rep = local_balance(&v, Some(&p), &k, &phi).unwrap();
        assert!(rep.residual.abs() < 1e-12, "{rep:?}");
    }

    #[test]
    fn sbp_telescopes_on_constants() {
        let phi = [0.0, 0.3, 1.0, 0.2, 0.7, 0.0];
        let d = sbp_time_derivative(&phi, 0.5);
        let s: f64 = d.iter().enumerate().map(|(i, v)| if i == 0 || i == 5 { 0.25 * v } else { 0.5 * v }).sum();
        assert!(s.abs() < 1e-15);
    }

    #[test]
    fn pairing_rejects_live_endpoints() {
        let (v, time) = tg(16, 4);
        let k = make_kernel(v.grid(), 2.0 * v.grid().max_spacing(), KernelProfile::Bump).unwrap();
        let est = duchon_robert(&v, &k).unwrap();
        let ones = Field::from_fn(v.grid().clone(), Some(time), 1, |_, _, _| 1.0).unwrap();
        assert!(pair_with_test(&est, &ones).is_err());
        let zero = ones.scaled(0.0);
        assert_eq!(pair_with_test(&est, &zero).unwrap(), 0.0);
    }

    #[test]
    fn energy_seminorm_lag_scan() {
        let time = TimeGrid::new(33, 1.0 / 32.0, 0.0).unwrap();
        let c = ScalarSeries::new(time, vec![2.0; 33]).unwrap();
        assert_eq!(energy_besov_seminorm(&c, 0.5, 1.0).unwrap(), 0.0);
        let lin = ScalarSeries::new(time, time.times()).unwrap();
        // brute force over all dyadic lags: (1−h)·h / h^s with q = 1
        let s = 0.75;
        let mut brute: f64 = 0.0;
        let mut lag = 1;
        while lag < 33 {
            let h = lag as f64 / 32.0;
            let norm = (33 - lag) as f64 / 32.0 * h;
            brute = brute.max(norm / h.powf(s));
            lag *= 2;
        }
        assert!((energy_besov_seminorm(&lin, s, 1.0).unwrap() - brute).abs() < 1e-12);
        assert!(energy_besov_seminorm(&lin, 1.0, 1.0).is_err());
    }
}
