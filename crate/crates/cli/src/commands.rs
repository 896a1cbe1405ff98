//! Subcommand implementations. Each reads its inputs, runs the core routine
//! and writes a CSV table and a JSON report named after the subcommand.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use itl_core::commutators::pressure_from_velocity;
use itl_core::dissipation::{
    default_test_function, duchon_robert, kinetic_energy, local_balance, pair_with_test, spatial_pairing,
};
use itl_core::geometry::{
    eulerian_cover, lagrangian_cover, minkowski_dimension, CoverOptions, CoverReport, SpaceTimeSet, VelocityFamily,
};
use itl_core::grid::{read_field, write_field};
use itl_core::mollify::{dyadic_range, make_kernel, scaling_scan, KernelProfile, NormSpec, ScanQuantity};
use itl_core::regularity::{fit_zeta, structure_functions, verdict, Band, Measurements, ShiftSet, StructureOptions};
use itl_core::synth::{besov_random, burgers, cantor_set, riemann_data, taylor_green, vortex_sheet};
use itl_core::{Field, Grid};

use crate::report::{digest_file, Cell, Report, Sink, Table};
use crate::verify::{determinism, run_criterion, CriterionResult};
use crate::*;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Info(a) => info(cli, a),
        Command::Synth(a) => synth(cli, a),
        Command::Mollify(a) => mollify(cli, a),
        Command::Dissipation(a) => dissipation(cli, a),
        Command::Structure(a) => structure(cli, a),
        Command::Dimension(a) => dimension(cli, a),
        Command::Bounds(a) => bounds(cli, a),
        Command::Verify(a) => verify(cli, a),
    }
}

fn report(cli: &Cli, inputs: &[&Path]) -> Result<Report, CliError> {
    let digests = inputs.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>, _>>()?;
    Report::new(cli.command.name(), cli, digests, !cli.no_timestamp)
}

fn sink(cli: &Cli) -> Sink {
    Sink::new(&cli.out, cli.command.name())
}

fn load(path: &Path) -> Result<Field, CliError> {
    read_field(path).map_err(|e| match e {
        itl_core::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Core(other),
    })
}

fn profile(p: ProfileArg) -> KernelProfile {
    match p {
        ProfileArg::Bump => KernelProfile::Bump,
        ProfileArg::Triangle => KernelProfile::Triangle,
    }
}

/// `lo:hi` with `lo < hi`.
pub fn parse_levels(s: &str) -> Result<(i32, i32), CliError> {
    let bad = || CliError::Validation(format!("levels {s:?}: expected lo:hi with lo < hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: i32 = a.trim().parse().map_err(|_| bad())?;
    let hi: i32 = b.trim().parse().map_err(|_| bad())?;
    if lo >= hi || lo < 0 {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn print_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

#[derive(Serialize)]
struct FieldSummary {
    dim: usize,
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    components: usize,
    nt: usize,
    dt: Option<f64>,
    max_magnitude: f64,
}

fn summary(f: &Field) -> FieldSummary {
    FieldSummary {
        dim: f.grid().dim(),
        sizes: f.grid().sizes().to_vec(),
        lengths: f.grid().lengths().to_vec(),
        components: f.components(),
        nt: f.nt(),
        dt: f.time().map(|t| t.dt),
        max_magnitude: f.max_magnitude(),
    }
}

fn info(cli: &Cli, a: &InfoArgs) -> Result<(), CliError> {
    let f = load(&a.file)?;
    let mut r = report(cli, &[&a.file])?;
    r.section("field", &summary(&f))?;
    print_stdout(&r.to_bytes())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<(), CliError> {
    let grid = Grid::cube(a.d, a.n, a.length)?;
    let field = match a.kind {
        SynthKind::TaylorGreen => taylor_green(&grid, a.nt, a.dt)?.0,
        SynthKind::VortexSheet => vortex_sheet(&grid, a.jump, a.width)?,
        SynthKind::Besov => besov_random(&grid, a.theta, cli.seed)?,
        SynthKind::Burgers => burgers(&grid, &riemann_data(&grid), a.nt, a.dt)?.u,
        SynthKind::Cantor => {
            let set = cantor_set(a.level, &grid)?;
            let data = set.slice_mask(0).into_iter().map(|m| if m { 1.0 } else { 0.0 }).collect();
            Field::new(grid.clone(), None, 1, data)?
        }
    };
    write_field(&field, &a.output).map_err(|e| CliError::Io(format!("{}: {e}", a.output.display())))?;
    let mut r = report(cli, &[&a.output])?;
    r.section("field", &summary(&field))?;
    sink(cli).write(None, &r)?;
    Ok(())
}

fn mollify(cli: &Cli, a: &MollifyArgs) -> Result<(), CliError> {
    let quantity: ScanQuantity = a.quantity.parse()?;
    let (lo, hi) = parse_levels(&a.levels)?;
    let f = load(&a.file)?;
    let eps = dyadic_range(f.grid().min_length(), lo, hi);
    let fit = scaling_scan(quantity, &f, &eps, NormSpec { p: a.p, k: a.k }, profile(a.profile))?;
    let mut t = Table::new(&["eps", "value"]);
    for (e, v) in fit.scales.iter().zip(&fit.values) {
        t.push(vec![Cell::from(*e), Cell::from(*v)])?;
    }
    let mut r = report(cli, &[&a.file])?;
    r.section("quantity", quantity.name())?;
    r.section("fit", &fit)?;
    sink(cli).write(Some(&t), &r)?;
    Ok(())
}

#[derive(Serialize)]
struct DissipationSummary {
    eps: f64,
    convention: itl_core::dissipation::FluxConvention,
    /// `|⟨D_ε, φ⟩|` with the default test function.
    pairing: f64,
    /// Trapezoid time integral of `∫D_ε dx`.
    total: f64,
    balance: itl_core::dissipation::BalanceReport,
}

fn dissipation(cli: &Cli, a: &DissipationArgs) -> Result<(), CliError> {
    let v = load(&a.file)?;
    let eps = v.grid().min_length() * 2f64.powi(-(a.level as i32));
    let kernel = make_kernel(v.grid(), eps, profile(a.profile))?;
    let est = duchon_robert(&v, &kernel)?;
    let time = *v.time().ok_or_else(|| CliError::Validation("dissipation needs a time axis".into()))?;
    let energy = kinetic_energy(&v)?;
    let ones = vec![1.0; v.grid().len()];
    let mut t = Table::new(&["t", "energy", "dissipation_integral"]);
    let mut total = 0.0;
    for n in 0..v.nt() {
        let dn = spatial_pairing(&est, n, &ones)?;
        let w = if n == 0 || n + 1 == v.nt() { 0.5 } else { 1.0 };
        total += w * time.dt * dn;
        t.push(vec![time.time(n).into(), energy.values[n].into(), dn.into()])?;
    }
    let phi = default_test_function(v.grid(), &time)?;
    let pressure = if v.grid().dim() > 1 { Some(pressure_from_velocity(&v)?) } else { None };
    let balance = local_balance(&v, pressure.as_ref(), &kernel, &phi)?;
    let s = DissipationSummary {
        eps,
        convention: est.convention,
        pairing: pair_with_test(&est, &phi)?.abs(),
        total,
        balance,
    };
    let mut r = report(cli, &[&a.file])?;
    r.section("dissipation", &s)?;
    sink(cli).write(Some(&t), &r)?;
    Ok(())
}

fn structure(cli: &Cli, a: &StructureArgs) -> Result<(), CliError> {
    let v = load(&a.file)?;
    if a.orders.is_empty() {
        return Err(CliError::Validation("no orders given".into()));
    }
    let h = v.grid().max_spacing();
    let shells: Vec<f64> = (0..a.shells).map(|k| 2.0 * h * 2f64.powi(k as i32)).collect();
    let opts = StructureOptions {
        shift_set: a.axis.map_or(ShiftSet::Isotropic, ShiftSet::Axis),
        ..StructureOptions::default()
    };
    let tables = structure_functions(&v, &a.orders, &shells, opts)?;
    let mut t = Table::new(&["p", "shell", "value"]);
    for tab in &tables {
        for (s, val) in tab.shells.iter().zip(&tab.values) {
            t.push(vec![tab.p.into(), (*s).into(), (*val).into()])?;
        }
    }
    let fits = tables.iter().map(|tab| fit_zeta(tab, None)).collect::<Result<Vec<_>, _>>()?;
    let mut r = report(cli, &[&a.file])?;
    r.section("tables", &tables)?;
    r.section("zeta", &fits)?;
    sink(cli).write(Some(&t), &r)?;
    Ok(())
}

/// Pointwise `|f|` over the components.
fn magnitude(f: &Field) -> Result<Field, CliError> {
    if f.components() == 1 {
        return Ok(f.clone());
    }
    let n = f.grid().len();
    let mut data = Vec::with_capacity(n * f.nt());
    for t in 0..f.nt() {
        data.extend((0..n).map(|i| (0..f.components()).map(|c| f.slice(t, c)[i].powi(2)).sum::<f64>().sqrt()));
    }
    Ok(Field::new(f.grid().clone(), f.time().copied(), 1, data)?)
}

fn dimension_set(f: &Field, a: &DimensionArgs) -> Result<SpaceTimeSet, CliError> {
    Ok(match a.set {
        SetArg::Superlevel => SpaceTimeSet::superlevel(&magnitude(f)?, a.quantile)?,
        SetArg::Mask => {
            if f.components() != 1 {
                return Err(CliError::Validation("a mask must be a scalar field".into()));
            }
            let mask = f.data().iter().map(|&x| x > 0.5).collect();
            match f.time() {
                Some(t) => SpaceTimeSet::from_masks(f.grid().clone(), *t, mask)?,
                None => SpaceTimeSet::from_mask(f.grid().clone(), mask)?,
            }
        }
    })
}

fn dimension(cli: &Cli, a: &DimensionArgs) -> Result<(), CliError> {
    let (lo, hi) = parse_levels(&a.levels)?;
    let f = load(&a.file)?;
    let set = dimension_set(&f, a)?;
    let deltas = dyadic_range(f.grid().min_length(), lo, hi);
    let opts = CoverOptions { refine: a.refine };
    let mut inputs: Vec<&Path> = vec![&a.file];
    let velocity;
    let rep: CoverReport = match a.mode {
        ModeArg::Minkowski => minkowski_dimension(&set, &deltas, opts)?,
        ModeArg::Eulerian => eulerian_cover(&set, &deltas, a.beta, opts)?,
        ModeArg::Lagrangian => {
            let path = a
                .velocity
                .as_ref()
                .ok_or_else(|| CliError::Validation("lagrangian mode needs --velocity".into()))?;
            velocity = load(path)?;
            inputs.push(path);
            let family = VelocityFamily::Mollified { v: &velocity, profile: KernelProfile::Bump };
            lagrangian_cover(&set, family, &deltas, None, a.beta2, opts)?
        }
    };
    let mut t = Table::new(&["delta", "tau", "volume"]);
    for (i, (d, v)) in rep.deltas.iter().zip(&rep.volumes).enumerate() {
        let tau = rep.taus.as_ref().map(|ts| ts[i]);
        t.push(vec![(*d).into(), tau.into(), (*v).into()])?;
    }
    let mut r = report(cli, &inputs)?;
    r.section("cover", &rep)?;
    sink(cli).write(Some(&t), &r)?;
    Ok(())
}

fn bounds(cli: &Cli, a: &BoundsArgs) -> Result<(), CliError> {
    if !a.p.is_finite() {
        return Err(CliError::Validation("p must be finite in reports; use a large p for the limit".into()));
    }
    let theta = a.theta.map(|t| Band::new(t, a.theta_lower.unwrap_or(t), a.theta_upper.unwrap_or(t)));
    if a.theta.is_none() && (a.theta_lower.is_some() || a.theta_upper.is_some()) {
        return Err(CliError::Validation("--theta-lower/--theta-upper need --theta".into()));
    }
    let m = Measurements {
        theta,
        gamma_eulerian: a.gamma,
        gamma_lagrangian: a.gamma_lagrangian,
        pairing: a.pairing,
        pairing_floor: a.pairing_floor,
        beta: a.beta,
    };
    let b = verdict(&m, a.p, a.d)?;
    let mut r = report(cli, &[])?;
    r.section("inputs", &b.inputs)?;
    r.section("beta_model", &b.beta_model)?;
    r.section("eulerian_threshold", &b.eulerian_threshold)?;
    r.section("time_critical", &b.time_critical)?;
    r.section("verdicts", &b.verdicts)?;
    r.section("missing", &b.missing)?;
    print_stdout(&r.to_bytes())
}

/// Run criteria `ids` (1 to 9), reporting each with its wall time on stderr.
pub fn run_suite(ids: &[u32], seed: u64) -> Vec<(CriterionResult, f64)> {
    ids.iter()
        .map(|&id| {
            let start = Instant::now();
            let r = run_criterion(id, seed);
            let secs = start.elapsed().as_secs_f64();
            eprintln!("criterion {id}: {} ({secs:.1} s)", if r.pass { "PASS" } else { "FAIL" });
            (r, secs)
        })
        .collect()
}

/// Table and report for a set of results. Timings are left out so that the
/// artifacts depend only on the inputs.
pub fn suite_artifacts<C: Serialize>(
    results: &[CriterionResult],
    config: &C,
    timestamp: bool,
) -> Result<(Table, Report), CliError> {
    let mut t = Table::new(&["criterion", "title", "check", "value", "lower", "upper", "pass"]);
    for r in results {
        if let Some(e) = &r.error {
            t.push(vec![
                Cell::from(r.id as usize),
                r.title.as_str().into(),
                format!("error: {e}").into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                "false".into(),
            ])?;
        }
        for c in &r.checks {
            t.push(vec![
                Cell::from(r.id as usize),
                r.title.as_str().into(),
                c.name.as_str().into(),
                c.value.into(),
                c.lower.into(),
                c.upper.into(),
                if c.pass { "true" } else { "false" }.into(),
            ])?;
        }
    }
    let mut rep = Report::new("verify", config, Vec::new(), timestamp)?;
    rep.section("criteria", results)?;
    rep.section("passed", &results.iter().filter(|r| r.pass).count())?;
    rep.section("failed", &results.iter().filter(|r| !r.pass).map(|r| r.id).collect::<Vec<_>>())?;
    Ok((t, rep))
}

/// Serialized artifacts of a run, for the determinism comparison.
pub fn suite_bytes<C: Serialize>(results: &[CriterionResult], config: &C) -> Result<Vec<u8>, CliError> {
    let (t, r) = suite_artifacts(results, config, false)?;
    let mut bytes = t.to_bytes();
    bytes.extend(r.to_bytes());
    Ok(bytes)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<(), CliError> {
    let ids: Vec<u32> = if a.only.is_empty() { (1..=10).collect() } else { a.only.clone() };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
        return Err(CliError::Validation(format!("no criterion {bad}; criteria are 1 to 10")));
    }
    let computed: Vec<u32> = ids.iter().copied().filter(|&i| i <= 9).collect();
    let first: Vec<CriterionResult> = run_suite(&computed, cli.seed).into_iter().map(|(r, _)| r).collect();
    let mut results = first.clone();
    if ids.contains(&10) {
        eprintln!("criterion 10: repeating criteria {computed:?}");
        let second: Vec<CriterionResult> = run_suite(&computed, cli.seed).into_iter().map(|(r, _)| r).collect();
        results.push(determinism(&suite_bytes(&first, cli)?, &suite_bytes(&second, cli)?));
    }
    let (t, r) = suite_artifacts(&results, cli, !cli.no_timestamp)?;
    sink(cli).write(Some(&t), &r)?;
    let mut out = String::new();
    for res in &results {
        out.push_str(&format!("{:>2} {} {}\n", res.id, if res.pass { "PASS" } else { "FAIL" }, res.title));
    }
    print_stdout(out.as_bytes())?;
    let failed = results.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::FailedChecks(failed));
    }
    Ok(())
}
