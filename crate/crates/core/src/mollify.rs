//! Discrete Friedrichs mollifiers, periodic mollification, and scaling scans.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::commutators::{cubic_commutator, pressure_commutator, pressure_from_velocity, reynolds_commutator, trace};
use crate::dissipation::{default_test_function, duchon_robert, duchon_robert_with, pair_with_test, FluxConvention};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, is_dyadic, ExponentFit};
use crate::grid::{Field, Grid};
use crate::spectral::{Fftn, Modes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelProfile {
    /// `exp(−1/(1−r²))` on `r < 1`.
    Bump,
    /// `1 − r` on `r < 1`.
    Triangle,
}

impl KernelProfile {
    /// Unnormalized profile at `r = |h|/ε`.
    pub fn eval(self, r: f64) -> f64 {
        if !(r.abs() < 1.0) {
            return 0.0;
        }
        match self {
            KernelProfile::Bump => (-1.0 / (1.0 - r * r)).exp(),
            KernelProfile::Triangle => 1.0 - r.abs(),
        }
    }

    /// Derivative of [`eval`](Self::eval) with respect to a signed 1D `r`.
    pub fn eval_derivative(self, r: f64) -> f64 {
        if !(r.abs() < 1.0) {
            return 0.0;
        }
        match self {
            KernelProfile::Bump => {
                let q = 1.0 - r * r;
                -2.0 * r / (q * q) * (-1.0 / q).exp()
            }
            KernelProfile::Triangle => -r.signum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelProfile::Bump => "bump",
            KernelProfile::Triangle => "triangle",
        }
    }
}

impl std::str::FromStr for KernelProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(Self::Bump),
            "triangle" => Ok(Self::Triangle),
            other => Err(invalid(format!("unknown kernel profile {other:?}"))),
        }
    }
}

/// One nonzero kernel sample: lattice offset and its quadrature mass `ρ(h)·∏h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    pub offset: Vec<isize>,
    pub mass: f64,
}

/// Sampled, renormalized mollifier on a grid. The masses sum to one; this
/// discrete kernel is used as-is for every identity.
pub struct MollifierKernel {
    scale: f64,
    grid: Grid,
    profile: KernelProfile,
    radius: Vec<usize>,
    entries: Vec<KernelEntry>,
    multiplier: OnceLock<Arc<Vec<f64>>>,
    fft: OnceLock<Arc<Fftn>>,
}

impl std::fmt::Debug for MollifierKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MollifierKernel")
            .field("scale", &self.scale)
            .field("profile", &self.profile)
            .field("radius", &self.radius)
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl Clone for MollifierKernel {
    fn clone(&self) -> Self {
        Self {
            scale: self.scale,
            grid: self.grid.clone(),
            profile: self.profile,
            radius: self.radius.clone(),
            entries: self.entries.clone(),
            multiplier: self.multiplier.clone(),
            fft: self.fft.clone(),
        }
    }
}

pub fn make_kernel(grid: &Grid, eps: f64, profile: KernelProfile) -> Result<MollifierKernel> {
    let hmax = grid.max_spacing();
    let tol = 1e-12 * eps.abs().max(1.0);
    if !(eps.is_finite() && eps + tol >= 2.0 * hmax) {
        return Err(Error::UnderResolved(format!("ε = {eps} below 2·h_max = {}", 2.0 * hmax)));
    }
    if eps > grid.min_length() / 4.0 + tol {
        return Err(invalid(format!("ε = {eps} exceeds L_min/4 = {}", grid.min_length() / 4.0)));
    }
    let d = grid.dim();
    let spacing = grid.spacings();
    let radius: Vec<usize> = spacing.iter().map(|&h| (eps / h + 1e-9).floor() as usize).collect();
    let mut entries = Vec::new();
    let mut idx = vec![0isize; d];
    let span: Vec<usize> = radius.iter().map(|&r| 2 * r + 1).collect();
    let count: usize = span.iter().product();
    for flat in 0..count {
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = (rem % span[a]) as isize - radius[a] as isize;
            rem /= span[a];
        }
        let r2: f64 = idx.iter().zip(&spacing).map(|(&i, &h)| (i as f64 * h).powi(2)).sum();
        let r = r2.sqrt() / eps;
        let w = profile.eval(r);
        if w > 0.0 {
            entries.push(KernelEntry { offset: idx.clone(), mass: w });
        }
    }
    let total: f64 = entries.iter().map(|e| e.mass).sum();
    for e in &mut entries {
        e.mass /= total;
    }
    Ok(MollifierKernel {
        scale: eps,
        grid: grid.clone(),
        profile,
        radius,
        entries,
        multiplier: OnceLock::new(),
        fft: OnceLock::new(),
    })
}

impl MollifierKernel {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    /// Stencil half-width per axis, `floor(ε/h_i)`.
    pub fn radius(&self) -> &[usize] {
        &self.radius
    }

    /// Stencil width per axis, `2·floor(ε/h_i) + 1`.
    pub fn stencil_width(&self) -> Vec<usize> {
        self.radius.iter().map(|r| 2 * r + 1).collect()
    }

    pub fn entries(&self) -> &[KernelEntry] {
        &self.entries
    }

    /// Density `ρ_ε(h)` at an offset (0 outside the support).
    pub fn density(&self, offset: &[isize]) -> f64 {
        let vol = self.grid.cell_volume();
        self.entries
            .iter()
            .find(|e| e.offset == offset)
            .map_or(0.0, |e| e.mass / vol)
    }

    /// `Σ_h ρ(h)·∏h_i`, which is 1 up to round-off.
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub(crate) fn fft(&self) -> Arc<Fftn> {
        self.fft.get_or_init(|| Arc::new(Fftn::new(&self.grid))).clone()
    }

    /// Fourier multiplier `m̂(k) = Σ_h mass(h)·cos(k·h)` in FFT order.
    pub fn multiplier(&self) -> Arc<Vec<f64>> {
        self.multiplier
            .get_or_init(|| {
                let n = self.grid.len();
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                for e in &self.entries {
                    buf[self.grid.flat_wrapped(&e.offset)].re += e.mass;
                }
                self.fft().forward(&mut buf);
                Arc::new(buf.into_iter().map(|z| z.re).collect())
            })
            .clone()
    }

    /// Multiplier at one wavevector, summed directly over the stencil.
    pub fn multiplier_direct(&self, k: &[f64]) -> f64 {
        let h = self.grid.spacings();
        self.entries
            .iter()
            .map(|e| {
                let phase: f64 = e.offset.iter().zip(&h).zip(k).map(|((&o, &hh), &kk)| o as f64 * hh * kk).sum();
                e.mass * phase.cos()
            })
            .sum()
    }

    /// Mollify one real slice via the FFT.
    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        let fft = self.fft();
        let m = self.multiplier();
        let mut spec = fft.forward_real(data);
        for (z, &w) in spec.iter_mut().zip(m.iter()) {
            *z *= w;
        }
        fft.inverse_real(spec)
    }

    /// Mollify one real slice by direct summation over the stencil.
    pub fn apply_direct(&self, data: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        let d = g.dim();
        let mut out = vec![0.0; n];
        let mut src = vec![0isize; d];
        for (x, o) in out.iter_mut().enumerate() {
            let idx = g.multi_index(x);
            let mut acc = 0.0;
            for e in &self.entries {
                for a in 0..d {
                    src[a] = idx[a] as isize - e.offset[a];
                }
                acc += e.mass * data[g.flat_wrapped(&src)];
            }
            *o = acc;
        }
        out
    }
}

fn check_grid(field: &Field, kernel: &MollifierKernel) -> Result<()> {
    if field.grid() != kernel.grid() {
        return Err(Error::ShapeMismatch("field and kernel live on different grids".into()));
    }
    Ok(())
}

/// Periodic convolution of every component and time slice with the kernel.
pub fn mollify(field: &Field, kernel: &MollifierKernel) -> Result<Field> {
    check_grid(field, kernel)?;
    let n = field.grid().len();
    let blocks: Vec<Vec<f64>> = field.data().par_chunks(n).map(|s| kernel.apply(s)).collect();
    Ok(Field::from_parts_unchecked(
        field.grid().clone(),
        field.time().copied(),
        field.components(),
        blocks.concat(),
    ))
}

/// Direct-summation mollification; slow, used to cross-check [`mollify`].
pub fn mollify_direct(field: &Field, kernel: &MollifierKernel) -> Result<Field> {
    check_grid(field, kernel)?;
    let n = field.grid().len();
    let blocks: Vec<Vec<f64>> = field.data().par_chunks(n).map(|s| kernel.apply_direct(s)).collect();
    Ok(Field::from_parts_unchecked(
        field.grid().clone(),
        field.time().copied(),
        field.components(),
        blocks.concat(),
    ))
}

/// All spectral partial derivatives of order `order` (1 or 2) of every
/// component: `components·d^order` output components.
pub fn derivatives(field: &Field, order: usize) -> Result<Field> {
    if !(1..=2).contains(&order) {
        return Err(invalid(format!("derivative order {order} not in 1..=2")));
    }
    let g = field.grid();
    let fft = Fftn::new(g);
    let modes = Modes::new(g);
    let d = g.dim();
    let n = g.len();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut idx = vec![0; d];
    for t in 0..field.nt() {
        for c in 0..field.components() {
            let spec = fft.forward_real(field.slice(t, c));
            let multi: Vec<Vec<usize>> = if order == 1 {
                (0..d).map(|a| vec![a]).collect()
            } else {
                (0..d).flat_map(|a| (0..d).map(move |b| vec![a, b])).collect()
            };
            for axes in multi {
                let mut s = spec.clone();
                for (flat, z) in s.iter_mut().enumerate() {
                    modes.index(flat, &mut idx);
                    let factor = if axes.len() == 2 && axes[0] == axes[1] {
                        let k = modes.k(axes[0], idx[axes[0]]);
                        Complex64::new(-k * k, 0.0)
                    } else {
                        axes.iter()
                            .fold(Complex64::new(1.0, 0.0), |acc, &a| acc * Complex64::new(0.0, modes.k_odd(a, idx[a])))
                    };
                    *z *= factor;
                }
                blocks.push(fft.inverse_real(s));
            }
        }
    }
    let comps = field.components() * d.pow(order as u32);
    debug_assert_eq!(blocks.len(), field.nt() * comps);
    debug_assert!(blocks.iter().all(|b| b.len() == n));
    Field::new(g.clone(), field.time().copied(), comps, blocks.concat())
}

/// Spectral divergence: for a `d`-vector gives a scalar; for a `d×d` tensor
/// (row-major) gives the vector `Σ_j ∂_j T_ij`.
pub fn divergence(field: &Field) -> Result<Field> {
    let g = field.grid();
    let d = g.dim();
    let rows = if field.components() == d {
        1
    } else if field.components() == d * d {
        d
    } else {
        return Err(Error::ShapeMismatch(format!("divergence of a {}-component field", field.components())));
    };
    let fft = Fftn::new(g);
    let mut blocks = Vec::with_capacity(field.nt() * rows);
    for t in 0..field.nt() {
        for i in 0..rows {
            let comps: Vec<&[f64]> = (0..d).map(|j| field.slice(t, i * d + j)).collect();
            blocks.push(crate::spectral::divergence(&fft, g, &comps));
        }
    }
    Field::new(g.clone(), field.time().copied(), rows, blocks.concat())
}

/// Named quantities whose `L^p` norm is scanned across `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanQuantity {
    /// `D^k(f − f_ε)`.
    MollError,
    /// `D^k f_ε`; expected slope `θ − k`.
    MollDerivative,
    /// `tr R_ε` (k = 0) or `div R_ε` (k = 1).
    Reynolds,
    /// `P_ε` (k = 0) or `div P_ε` (k = 1).
    PressureComm,
    /// `K_ε` with `f = g = v` (k = 0) or its divergence (k = 1).
    CubicComm,
    /// `|⟨D_ε, φ⟩|` for the default smooth test function.
    DrPairing,
}

impl ScanQuantity {
    pub fn name(self) -> &'static str {
        match self {
            Self::MollError => "moll_error",
            Self::MollDerivative => "moll_derivative",
            Self::Reynolds => "reynolds",
            Self::PressureComm => "pressure_comm",
            Self::CubicComm => "cubic_comm",
            Self::DrPairing => "dr_pairing",
        }
    }
}

impl std::str::FromStr for ScanQuantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "moll_error" => Self::MollError,
            "moll_derivative" => Self::MollDerivative,
            "reynolds" => Self::Reynolds,
            "pressure_comm" => Self::PressureComm,
            "cubic_comm" => Self::CubicComm,
            "dr_pairing" => Self::DrPairing,
            other => return Err(invalid(format!("unknown scan quantity {other:?}"))),
        })
    }
}

/// Which norm to take: `L^p` of the `k`-th derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSpec {
    pub p: f64,
    pub k: usize,
}

/// Norm of the named quantity at a single scale.
pub fn scan_value(quantity: ScanQuantity, field: &Field, kernel: &MollifierKernel, norm: NormSpec) -> Result<f64> {
    let pressure = scan_pressure(quantity, field)?;
    scan_value_with(quantity, field, pressure.as_ref(), kernel, norm)
}

/// The pressure a quantity needs, solved once per field.
fn scan_pressure(quantity: ScanQuantity, field: &Field) -> Result<Option<Field>> {
    let needs = match quantity {
        ScanQuantity::PressureComm => true,
        ScanQuantity::DrPairing => field.grid().dim() > 1,
        _ => false,
    };
    needs.then(|| pressure_from_velocity(field)).transpose()
}

fn scan_value_with(
    quantity: ScanQuantity,
    field: &Field,
    pressure: Option<&Field>,
    kernel: &MollifierKernel,
    norm: NormSpec,
) -> Result<f64> {
    let k = norm.k;
    let differentiate = |f: Field| -> Result<Field> {
        match k {
            0 => Ok(f),
            1 | 2 => derivatives(&f, k),
            _ => Err(invalid(format!("derivative order {k} not supported"))),
        }
    };
    let reduce = |f: Field| -> Result<Field> {
        match k {
            0 => Ok(f),
            1 => divergence(&f),
            _ => Err(invalid(format!("order {k} not supported for commutators"))),
        }
    };
    let value = match quantity {
        ScanQuantity::MollError => {
            let fe = mollify(field, kernel)?;
            differentiate(field.sub(&fe)?)?.lp_norm(norm.p)
        }
        ScanQuantity::MollDerivative => {
            if k == 0 {
                return Err(invalid("moll_derivative needs k >= 1"));
            }
            differentiate(mollify(field, kernel)?)?.lp_norm(norm.p)
        }
        ScanQuantity::Reynolds => {
            let r = reynolds_commutator(field, kernel)?;
            match k {
                0 => trace(&r)?.lp_norm(norm.p),
                _ => reduce(r)?.lp_norm(norm.p),
            }
        }
        ScanQuantity::PressureComm => {
            let p = pressure.ok_or_else(|| invalid("pressure_comm needs a pressure"))?;
            reduce(pressure_commutator(field, p, kernel)?)?.lp_norm(norm.p)
        }
        ScanQuantity::CubicComm => reduce(cubic_commutator(field, field, kernel)?)?.lp_norm(norm.p),
        ScanQuantity::DrPairing => {
            let est = match pressure {
                Some(p) => duchon_robert_with(field, Some(p), kernel, FluxConvention::Euler)?,
                None => duchon_robert(field, kernel)?,
            };
            let time = field
                .time()
                .ok_or_else(|| invalid("dr_pairing needs a time axis"))?;
            let phi = default_test_function(field.grid(), time)?;
            pair_with_test(&est, &phi)?.abs()
        }
    };
    Ok(value)
}

/// Evaluate a named quantity at every `ε` and fit a power law.
pub fn scaling_scan(
    quantity: ScanQuantity,
    field: &Field,
    eps: &[f64],
    norm: NormSpec,
    profile: KernelProfile,
) -> Result<ExponentFit> {
    if eps.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 scales, got {}", eps.len())));
    }
    if !is_dyadic(eps) {
        return Err(invalid("ε-list must be dyadic"));
    }
    let kernels = eps
        .iter()
        .map(|&e| make_kernel(field.grid(), e, profile))
        .collect::<Result<Vec<_>>>()?;
    let pressure = scan_pressure(quantity, field)?;
    let values = kernels
        .iter()
        .map(|kern| scan_value_with(quantity, field, pressure.as_ref(), kern, norm))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(eps, &values)
}

/// `2π·2^{-j}` for `j` from `hi` down to `lo`, decreasing.
pub fn dyadic_range(base: f64, lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|j| base * 2f64.powi(-j)).collect()
}
