//! Reynolds, pressure and cubic commutators, the spectral pressure solve and
//! the higher-order averaging identity.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::mollify::{derivatives, divergence, mollify, MollifierKernel};
use crate::spectral::{pad, truncate, Fftn, Modes};

/// All commutators at one scale.
#[derive(Debug, Clone)]
pub struct CommutatorSet {
    pub eps: f64,
    /// `d×d` tensor, row-major components.
    pub reynolds: Field,
    pub trace_r: Field,
    pub pressure_comm: Option<Field>,
    pub cubic: Option<Field>,
}

pub fn commutator_set(
    v: &Field,
    p: Option<&Field>,
    kernel: &MollifierKernel,
    with_cubic: bool,
) -> Result<CommutatorSet> {
    let reynolds = reynolds_commutator(v, kernel)?;
    let trace_r = trace(&reynolds)?;
    let pressure_comm = p.map(|p| pressure_commutator(v, p, kernel)).transpose()?;
    let cubic = if with_cubic { Some(cubic_commutator(v, v, kernel)?) } else { None };
    Ok(CommutatorSet { eps: kernel.scale(), reynolds, trace_r, pressure_comm, cubic })
}

fn require_vector(v: &Field) -> Result<usize> {
    let d = v.grid().dim();
    if v.components() != d {
        return Err(Error::ShapeMismatch(format!(
            "expected a {d}-component vector field, got {} components",
            v.components()
        )));
    }
    Ok(d)
}

/// Trace of a row-major `d×d` tensor field.
pub fn trace(tensor: &Field) -> Result<Field> {
    let d = tensor.grid().dim();
    if tensor.components() != d * d {
        return Err(Error::ShapeMismatch("trace needs a d×d tensor".into()));
    }
    let n = tensor.grid().len();
    let mut out = Vec::with_capacity(tensor.nt() * n);
    for t in 0..tensor.nt() {
        let mut acc = vec![0.0; n];
        for i in 0..d {
            for (a, v) in acc.iter_mut().zip(tensor.slice(t, i * d + i)) {
                *a += v;
            }
        }
        out.extend(acc);
    }
    Field::new(tensor.grid().clone(), tensor.time().copied(), 1, out)
}

/// Contract a row-major tensor with a vector: `(T a)_i = Σ_j T_ij a_j`.
pub fn tensor_times_vector(tensor: &Field, a: &Field) -> Result<Field> {
    let d = require_vector(a)?;
    if tensor.components() != d * d || tensor.grid() != a.grid() || tensor.nt() != a.nt() {
        return Err(Error::ShapeMismatch("tensor/vector shapes disagree".into()));
    }
    let n = a.grid().len();
    let mut out = Vec::with_capacity(a.nt() * d * n);
    for t in 0..a.nt() {
        for i in 0..d {
            let mut acc = vec![0.0; n];
            for j in 0..d {
                for ((o, r), v) in acc.iter_mut().zip(tensor.slice(t, i * d + j)).zip(a.slice(t, j)) {
                    *o += r * v;
                }
            }
            out.extend(acc);
        }
    }
    Field::new(a.grid().clone(), a.time().copied(), d, out)
}

/// Solve `−Δp = div div(v⊗v)` per time slice with the zero mode pinned to 0.
/// Products are formed on the doubled grid, so `p` is the pressure of the
/// trigonometric interpolant of `v` restricted to the grid's modes.
pub fn pressure_from_velocity(v: &Field) -> Result<Field> {
    let d = require_vector(v)?;
    let g = v.grid();
    let div = divergence(v)?;
    let div_l2 = div.lp_norm(2.0);
    let grad_l2 = derivatives(v, 1)?.lp_norm(2.0);
    if div_l2 > 1e-8 * grad_l2.max(1.0) {
        return Err(Error::NotDivergenceFree(div_l2));
    }
    let fft = Fftn::new(g);
    let modes = Modes::new(g);
    let n = g.len();
    // products on a doubled grid are free of aliasing
    let sizes: Vec<usize> = g.sizes().iter().map(|&k| 2 * k).collect();
    let big = Grid::new(&sizes, g.lengths())?;
    let big_fft = Fftn::new(&big);
    let mut out = Vec::with_capacity(v.nt() * n);
    let mut idx = vec![0; d];
    for t in 0..v.nt() {
        let fine: Vec<Vec<f64>> = (0..d)
            .map(|i| big_fft.inverse_real(pad(g, &big, &fft.forward_real(v.slice(t, i)))))
            .collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..d {
            for j in i..d {
                let prod: Vec<f64> = fine[i].iter().zip(&fine[j]).map(|(a, b)| a * b).collect();
                let spec = truncate(&big, g, &big_fft.forward_real(&prod));
                let mult = if i == j { 1.0 } else { 2.0 };
                for (flat, z) in spec.iter().enumerate() {
                    modes.index(flat, &mut idx);
                    let kk = if i == j {
                        modes.k(i, idx[i]).powi(2)
                    } else {
                        modes.k_odd(i, idx[i]) * modes.k_odd(j, idx[j])
                    };
                    acc[flat] += *z * (mult * kk);
                }
            }
        }
        for (flat, z) in acc.iter_mut().enumerate() {
            modes.index(flat, &mut idx);
            let k2: f64 = (0..d).map(|a| modes.k(a, idx[a]).powi(2)).sum();
            *z = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { -*z / k2 };
        }
        out.extend(fft.inverse_real(acc));
    }
    Field::new(g.clone(), v.time().copied(), 1, out)
}

/// `R_ε = v_ε⊗v_ε − (v⊗v)_ε` as a row-major `d×d` tensor; exactly symmetric.
pub fn reynolds_commutator(v: &Field, kernel: &MollifierKernel) -> Result<Field> {
    let d = require_vector(v)?;
    let ve = mollify(v, kernel)?;
    let n = v.grid().len();
    let nt = v.nt();
    let mut data = vec![0.0; nt * d * d * n];
    let pairs: Vec<(usize, usize, usize)> = (0..nt)
        .flat_map(|t| (0..d).flat_map(move |i| (i..d).map(move |j| (t, i, j))))
        .collect();
    let blocks: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(t, i, j)| {
            let prod: Vec<f64> = v.slice(t, i).iter().zip(v.slice(t, j)).map(|(a, b)| a * b).collect();
            let pe = kernel.apply(&prod);
            ve.slice(t, i)
                .iter()
                .zip(ve.slice(t, j))
                .zip(&pe)
                .map(|((a, b), c)| a * b - c)
                .collect()
        })
        .collect();
    for (&(t, i, j), b) in pairs.iter().zip(&blocks) {
        let at = |c: usize| (t * d * d + c) * n;
        data[at(i * d + j)..at(i * d + j) + n].copy_from_slice(b);
        if i != j {
            data[at(j * d + i)..at(j * d + i) + n].copy_from_slice(b);
        }
    }
    Field::new(v.grid().clone(), v.time().copied(), d * d, data)
}

/// `P_ε = (p v)_ε − p_ε v_ε`.
pub fn pressure_commutator(v: &Field, p: &Field, kernel: &MollifierKernel) -> Result<Field> {
    let d = require_vector(v)?;
    if p.components() != 1 || p.grid() != v.grid() || p.nt() != v.nt() {
        return Err(Error::ShapeMismatch("pressure must be a scalar on the velocity grid".into()));
    }
    let n = v.grid().len();
    let pe = mollify(p, kernel)?;
    let ve = mollify(v, kernel)?;
    let jobs: Vec<(usize, usize)> = (0..v.nt()).flat_map(|t| (0..d).map(move |i| (t, i))).collect();
    let blocks: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(t, i)| {
            let prod: Vec<f64> = p.slice(t, 0).iter().zip(v.slice(t, i)).map(|(a, b)| a * b).collect();
            let mut out = kernel.apply(&prod);
            for ((o, a), b) in out.iter_mut().zip(pe.slice(t, 0)).zip(ve.slice(t, i)) {
                *o -= a * b;
            }
            out
        })
        .collect();
    debug_assert!(blocks.iter().all(|b| b.len() == n));
    Field::new(v.grid().clone(), v.time().copied(), d, blocks.concat())
}

/// `K(x) = Σ_h |f(x−h) − f_ε(x)|²·(g(x−h) − g_ε(x))·ρ_ε(h)·∏h_i` by direct
/// summation over the kernel support. `f` may have any number of components
/// (the squared norm sums over them); the output has `g`'s components.
pub fn cubic_commutator(f: &Field, g: &Field, kernel: &MollifierKernel) -> Result<Field> {
    if f.grid() != g.grid() || f.grid() != kernel.grid() || f.nt() != g.nt() {
        return Err(Error::ShapeMismatch("cubic commutator inputs must share grid and time axis".into()));
    }
    let grid = f.grid();
    let fe = mollify(f, kernel)?;
    let ge = mollify(g, kernel)?;
    let sizes = grid.sizes();
    let d = grid.dim();
    let last = sizes[d - 1];
    let rows = grid.len() / last;
    let row_sizes = &sizes[..d - 1];
    let mf = f.components();
    let mg = g.components();
    let entries = kernel.entries();
    let mut out = Vec::with_capacity(f.nt() * mg * grid.len());
    for t in 0..f.nt() {
        let fs: Vec<&[f64]> = (0..mf).map(|c| f.slice(t, c)).collect();
        let fes: Vec<&[f64]> = (0..mf).map(|c| fe.slice(t, c)).collect();
        let gs: Vec<&[f64]> = (0..mg).map(|c| g.slice(t, c)).collect();
        let ges: Vec<&[f64]> = (0..mg).map(|c| ge.slice(t, c)).collect();
        // one output row (all components) per job
        let row_out: Vec<Vec<f64>> = (0..rows)
            .into_par_iter()
            .map(|row| {
                let mut acc = vec![0.0; mg * last];
                let mut sq = vec![0.0; last];
                let mut row_idx = vec![0usize; d - 1];
                let mut rem = row;
                for a in (0..d - 1).rev() {
                    row_idx[a] = rem % row_sizes[a];
                    rem /= row_sizes[a];
                }
                let dst = row * last;
                for e in entries {
                    let mut src_row = 0usize;
                    for a in 0..d - 1 {
                        let s = (row_idx[a] as isize - e.offset[a]).rem_euclid(row_sizes[a] as isize) as usize;
                        src_row = src_row * row_sizes[a] + s;
                    }
                    let src = src_row * last;
                    let shift = e.offset[d - 1].rem_euclid(last as isize) as usize;
                    sq.iter_mut().for_each(|v| *v = 0.0);
                    for c in 0..mf {
                        let fr = &fs[c][src..src + last];
                        let fer = &fes[c][dst..dst + last];
                        for x in 0..last {
                            let xs = if x >= shift { x - shift } else { x + last - shift };
                            let df = fr[xs] - fer[x];
                            sq[x] += df * df;
                        }
                    }
                    let w = e.mass;
                    for c in 0..mg {
                        let gr = &gs[c][src..src + last];
                        let ger = &ges[c][dst..dst + last];
                        let out = &mut acc[c * last..(c + 1) * last];
                        for x in 0..last {
                            let xs = if x >= shift { x - shift } else { x + last - shift };
                            out[x] += w * sq[x] * (gr[xs] - ger[x]);
                        }
                    }
                }
                acc
            })
            .collect();
        for c in 0..mg {
            for r in &row_out {
                out.extend_from_slice(&r[c * last..(c + 1) * last]);
            }
        }
    }
    Field::new(grid.clone(), f.time().copied(), mg, out)
}

/// Max-norm of `(|v|²v)_ε − [K − 2R_ε v_ε − v_ε tr R_ε + |v_ε|² v_ε]`, all
/// terms built from the same kernel. Returns the absolute residual.
pub fn higher_average_residual(v: &Field, kernel: &MollifierKernel) -> Result<f64> {
    let d = require_vector(v)?;
    let n = v.grid().len();
    let ve = mollify(v, kernel)?;
    let r = reynolds_commutator(v, kernel)?;
    let tr = trace(&r)?;
    let rv = tensor_times_vector(&r, &ve)?;
    let k = cubic_commutator(v, v, kernel)?;
    let mut cubic = Vec::with_capacity(v.data().len());
    for t in 0..v.nt() {
        let mut m2 = vec![0.0; n];
        for c in 0..d {
            for (m, x) in m2.iter_mut().zip(v.slice(t, c)) {
                *m += x * x;
            }
        }
        for c in 0..d {
            cubic.extend(m2.iter().zip(v.slice(t, c)).map(|(m, x)| m * x));
        }
    }
    let lhs = mollify(&Field::new(v.grid().clone(), v.time().copied(), d, cubic)?, kernel)?;
    let mut worst: f64 = 0.0;
    for t in 0..v.nt() {
        let mut ve2 = vec![0.0; n];
        for c in 0..d {
            for (m, x) in ve2.iter_mut().zip(ve.slice(t, c)) {
                *m += x * x;
            }
        }
        for c in 0..d {
            let (l, kk, rvc, vec_, trs) = (lhs.slice(t, c), k.slice(t, c), rv.slice(t, c), ve.slice(t, c), tr.slice(t, 0));
            for x in 0..n {
                let rhs = kk[x] - 2.0 * rvc[x] - vec_[x] * trs[x] + ve2[x] * vec_[x];
                worst = worst.max((l[x] - rhs).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::mollify::{make_kernel, KernelProfile};

    fn taylor_green(n: usize) -> Field {
        let g = Grid::periodic(&[n, n]).unwrap();
        Field::from_fn(g, None, 2, |x, _, c| {
            if c == 0 {
                x[0].sin() * x[1].cos()
            } else {
                -x[0].cos() * x[1].sin()
            }
        })
        .unwrap()
    }

    #[test]
    fn taylor_green_pressure() {
        let v = taylor_green(32);
        let p = pressure_from_velocity(&v).unwrap();
        for i in 0..v.grid().len() {
            let x = v.grid().position(i);
            let exact = ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) / 4.0;
            assert!((p.data()[i] - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_velocity_has_zero_pressure_and_commutators() {
        let g = Grid::periodic(&[16, 16]).unwrap();
        let v = Field::from_fn(g.clone(), None, 2, |_, _, c| 0.5 + c as f64).unwrap();
        let p = pressure_from_velocity(&v).unwrap();
        assert!(p.max_abs() < 1e-14);
        let k = make_kernel(&g, 2.0 * g.max_spacing(), KernelProfile::Bump).unwrap();
        assert!(reynolds_commutator(&v, &k).unwrap().max_abs() < 1e-14);
        assert!(cubic_commutator(&v, &v, &k).unwrap().max_abs() < 1e-30);
    }

    #[test]
    fn divergent_field_is_rejected() {
        let g = Grid::periodic(&[16, 16]).unwrap();
        let v = Field::from_fn(g, None, 2, |x, _, c| if c == 0 { x[0].sin() } else { 0.0 }).unwrap();
        assert!(matches!(pressure_from_velocity(&v), Err(Error::NotDivergenceFree(_))));
    }

    #[test]
    fn cubic_matches_brute_force_1d() {
        let g = Grid::periodic(&[64]).unwrap();
        let h = g.spacing(0);
        let kern = make_kernel(&g, 16.0 * h, KernelProfile::Bump).unwrap();
        let f = Field::from_fn(g.clone(), None, 1, |x, _, _| x[0].sin()).unwrap();
        let k = cubic_commutator(&f, &f, &kern).unwrap();
        // brute force over every (x, y) pair using the sampled, renormalized profile
        let n = 64;
        let w: Vec<f64> = (0..n)
            .map(|j| {
                let off = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                KernelProfile::Bump.eval((off * h / (16.0 * h)).abs())
            })
            .collect();
        let total: f64 = w.iter().sum();
        for x in 0..n {
            let mut fe = 0.0;
            for y in 0..n {
                fe += w[(x + n - y) % n] / total * f.data()[y];
            }
            let mut acc = 0.0;
            for y in 0..n {
                let df = f.data()[y] - fe;
                acc += df * df * df * w[(x + n - y) % n] / total;
            }
            assert!((acc - k.data()[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn reynolds_trace_matches_direct_convolution() {
        let g = Grid::periodic(&[128]).unwrap();
        let kern = make_kernel(&g, 8.0 * g.spacing(0), KernelProfile::Bump).unwrap();
        let v = Field::from_fn(g.clone(), None, 1, |x, _, _| x[0].sin()).unwrap();
        let r = reynolds_commutator(&v, &kern).unwrap();
        let ve = kern.apply_direct(v.data());
        let sq: Vec<f64> = v.data().iter().map(|x| x * x).collect();
        let sqe = kern.apply_direct(&sq);
        for i in 0..128 {
            assert!((r.data()[i] - (ve[i] * ve[i] - sqe[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_on_taylor_green() {
        let v = taylor_green(64);
        let kern = make_kernel(v.grid(), 8.0 * v.grid().max_spacing(), KernelProfile::Bump).unwrap();
        let res = higher_average_residual(&v, &kern).unwrap();
        assert!(res <= 1e-12 * v.max_magnitude().powi(3), "{res}");
    }

    #[test]
    fn symmetric_skew_and_quadratic() {
        let g = Grid::periodic(&[32, 32]).unwrap();
        let v = Field::from_fn(g.clone(), None, 2, |x, _, c| {
            if c == 0 {
                (x[1] + 0.3).sin() + 0.2 * (3.0 * x[1]).cos()
            } else {
                (2.0 * x[0]).cos()
            }
        })
        .unwrap();
        let kern = make_kernel(&g, 4.0 * g.max_spacing(), KernelProfile::Bump).unwrap();
        let r = reynolds_commutator(&v, &kern).unwrap();
        assert_eq!(r.slice(0, 1), r.slice(0, 2));
        let r2 = reynolds_commutator(&v.scaled(2.0), &kern).unwrap();
        assert_eq!(r2.data(), r.scaled(4.0).data());
        let k = cubic_commutator(&v, &v, &kern).unwrap();
        let kneg = cubic_commutator(&v, &v.scaled(-1.0), &kern).unwrap();
        assert_eq!(kneg.data(), k.scaled(-1.0).data());
    }

    #[test]
    fn constant_pressure_commutes() {
        let v = taylor_green(32);
        let p = Field::from_fn(v.grid().clone(), None, 1, |_, _, _| 3.0).unwrap();
        let kern = make_kernel(v.grid(), 4.0 * v.grid().max_spacing(), KernelProfile::Bump).unwrap();
        assert!(pressure_commutator(&v, &p, &kern).unwrap().max_abs() < 1e-14);
    }
}
