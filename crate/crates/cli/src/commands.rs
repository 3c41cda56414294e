//! Subcommand implementations.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use qsample_core::io::{
    eigenfunctions_csv, points_csv, read_points, read_samples, samples_csv, spectrum_json, to_json, write_atomic,
};
use qsample_core::kernels::{check_admissibility, KernelSpec};
use qsample_core::nystrom::{eigensystem, NystromOperator, PsqwsBasis};
use qsample_core::sampling::{
    concentration_ratio, psqws_coefficients, psqws_series, reconstruct_wsk, sample_lattice, synth, synth_smooth,
    trace_identity, BandlimitedSignal,
};
use qsample_core::Quaternion;
use serde::Serialize;

use crate::config::{Method, RunConfig};
use crate::error::CliError;
use crate::verify::{self, KernelTarget, VerifyOptions};

/// Nodes per axis for bases evaluated on the sampling lattice.
const SAMPLING_NODES: usize = 128;

/// Nodes per axis of the full tensor basis used for concentration in 2D.
const CONCENTRATION_NODES_2D: usize = 16;

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()).map_err(CliError::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::Failure(format!("writing to stdout: {e}")))
        }
    }
}

/// Summary lines go to stdout when the payload goes to a file, else stderr.
fn summary(cfg: &RunConfig, line: &str) {
    if cfg.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn input_error(path: &Path, e: qsample_core::Error) -> CliError {
    match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn build_basis(spec: &KernelSpec, nodes: usize, floor: f64, direct: bool) -> Result<PsqwsBasis, CliError> {
    if matches!(spec, KernelSpec::QftSeparable2D { .. }) && !direct {
        return Ok(PsqwsBasis::tensor(spec, nodes, floor)?);
    }
    let op = NystromOperator::build(spec, &spec.grid(nodes)?)?;
    Ok(eigensystem(&op, floor)?)
}

pub fn eigensys(cfg: &RunConfig, dump: Option<&Path>, direct: bool) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let nodes = if direct { cfg.direct_nodes(&spec) } else { cfg.basis_nodes(&spec) };
    let basis = build_basis(&spec, nodes, cfg.floor, direct)?;
    emit(cfg.out.as_deref(), &spectrum_json(&basis)?)?;
    if let Some(path) = dump {
        write_atomic(path, eigenfunctions_csv(&basis)?.as_bytes())?;
    }
    let (lhs, rhs) = trace_identity(&basis)?;
    let retained: f64 = basis.mu().iter().sum();
    summary(cfg, &format!("mu_1 = {:.15e}", basis.mu()[0]));
    summary(cfg, &format!("modes retained = {} of {}", basis.len(), basis.all_mu().len()));
    summary(cfg, &format!("sum mu (retained) = {retained:.15e}"));
    summary(
        cfg,
        &format!("trace identity: sum mu = {lhs:.15e}, kernel trace = {rhs:.15e}, relative residual = {:.3e}", ((lhs - rhs) / rhs).abs()),
    );
    Ok(())
}

pub fn reconstruct(
    cfg: &RunConfig,
    input: &Path,
    method: Method,
    eval_points: &Path,
    modes: Option<usize>,
) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let samples = read_samples(open(input)?).map_err(|e| input_error(input, e))?;
    let points = read_points(open(eval_points)?).map_err(|e| input_error(eval_points, e))?;
    if samples.dim() != spec.dim() {
        return Err(CliError::Input(format!(
            "{}: samples have dimension {} but the kernel has dimension {}",
            input.display(),
            samples.dim(),
            spec.dim()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != spec.dim()) {
        return Err(CliError::Input(format!(
            "{}: point of dimension {} for a kernel of dimension {}",
            eval_points.display(),
            p.len(),
            spec.dim()
        )));
    }
    let values: Vec<Quaternion> = match method {
        Method::Wsk => points
            .iter()
            .map(|x| reconstruct_wsk(&samples, &spec, x))
            .collect::<Result<_, _>>()?,
        Method::Psqws => {
            let nodes = cfg.nodes.unwrap_or(SAMPLING_NODES);
            let basis = build_basis(&spec, nodes, cfg.floor, false)?;
            let m = modes.unwrap_or(basis.len());
            if m == 0 || m > basis.len() {
                return Err(CliError::Usage(format!("--modes must lie in 1..={}, got {m}", basis.len())));
            }
            let c = psqws_coefficients(&samples, &basis, m)?;
            points
                .iter()
                .map(|x| psqws_series(&c, &basis, x))
                .collect::<Result<_, _>>()?
        }
    };
    emit(cfg.out.as_deref(), &points_csv(&points, &values)?)
}

pub fn verify(cfg: &RunConfig, report_path: Option<&Path>, trials: usize) -> Result<(), CliError> {
    let mut opts = VerifyOptions::reference(cfg.seed);
    opts.trials = trials;
    opts.floor = cfg.floor;
    opts.tolerances = cfg.tolerances.clone();
    if cfg.kernel.is_some() {
        let spec = cfg.kernel_spec()?;
        let target = KernelTarget::new(spec.clone(), cfg.basis_nodes(&spec), cfg.direct_nodes(&spec));
        opts.targets = vec![target];
    }
    let report = verify::run(&opts);
    let json = to_json(&report)?;
    match report_path.or(cfg.out.as_deref()) {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => emit(None, &json)?,
    }
    for s in &report.suites {
        let kernel = s.kernel.as_deref().map(|k| format!(" [{k}]")).unwrap_or_default();
        for c in &s.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            eprintln!("{status} {}{kernel} {}: {:.3e} (tolerance {:.1e})", s.name, c.name, c.value, c.tolerance);
        }
        if let Some(e) = &s.error {
            eprintln!("FAIL {}{kernel}: {e}", s.name);
        }
    }
    eprintln!("{} checks, {} failures", report.checks, report.failures.len());
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Failure(format!("verification failed: {}", report.failures.join("; "))))
    }
}

#[derive(Debug, Serialize)]
struct ConcentrationReport {
    kernel: String,
    trials: usize,
    seed: u64,
    mu_1: f64,
    beta_estimate: f64,
    beta_bound_holds: bool,
    beta_phi_1: f64,
    extremizer_error: f64,
    extremizer_passed: bool,
}

pub fn concentrate(cfg: &RunConfig, trials: usize) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let nodes = match spec {
        KernelSpec::QftSeparable2D { .. } => cfg.nodes.unwrap_or(CONCENTRATION_NODES_2D),
        _ => cfg.direct_nodes(&spec),
    };
    let basis = build_basis(&spec, nodes, 0.0, false)?;
    let grid = basis.grid().clone();
    let mu_1 = basis.mu()[0];
    let mut best: f64 = 0.0;
    for t in 0..trials {
        let f = synth(&spec, &grid, cfg.seed.wrapping_add(t as u64))?;
        best = best.max(concentration_ratio(&f, &basis)?.quadrature);
    }
    let beta_phi_1 = concentration_ratio(&BandlimitedSignal::from_mode(&basis, 0)?, &basis)?.quadrature;
    let extremizer_error = (beta_phi_1 - mu_1).abs();
    let report = ConcentrationReport {
        kernel: spec.name().into(),
        trials,
        seed: cfg.seed,
        mu_1,
        beta_estimate: best,
        beta_bound_holds: best <= mu_1 * (1.0 + 1e-8),
        beta_phi_1,
        extremizer_error,
        extremizer_passed: extremizer_error <= 1e-8,
    };
    let pass = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("mu_1 = {mu_1:.15e}");
    println!("beta estimate over {trials} trials = {best:.15e}");
    println!("bound beta <= mu_1 (1 + 1e-8): {}", pass(report.beta_bound_holds));
    println!("extremizer beta(phi_1) = {beta_phi_1:.15e}: {}", pass(report.extremizer_passed));
    if let Some(path) = &cfg.out {
        write_atomic(path, to_json(&report)?.as_bytes())?;
    }
    if report.beta_bound_holds && report.extremizer_passed {
        Ok(())
    } else {
        Err(CliError::Failure("concentration bound or extremizer check failed".into()))
    }
}

pub fn admissibility(cfg: &RunConfig, trials: usize) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let grid = spec.grid(cfg.direct_nodes(&spec).min(24))?;
    let report = check_admissibility(&spec, &grid, trials, cfg.seed)?;
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {}: {:.3e} (threshold {:.1e})", c.name, c.value, c.threshold);
    }
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        Err(CliError::Failure(format!("kernel is not admissible: {}", names.join(", "))))
    }
}

pub fn sample(
    cfg: &RunConfig,
    n_max: usize,
    degree: usize,
    eval_points: Option<&Path>,
    exact_out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    spec.lattice_weight()?;
    if degree == 0 {
        return Err(CliError::Usage("--degree must be at least 1".into()));
    }
    let grid = spec.grid(cfg.nodes.unwrap_or(SAMPLING_NODES))?;
    let f = synth_smooth(&spec, &grid, cfg.seed, degree)?;
    let samples = sample_lattice(&f, n_max)?;
    emit(cfg.out.as_deref(), &samples_csv(&samples)?)?;
    if let (Some(points_path), Some(out)) = (eval_points, exact_out) {
        let points = read_points(open(points_path)?).map_err(|e| input_error(points_path, e))?;
        let values: Vec<Quaternion> = points.iter().map(|x| f.eval(x)).collect::<Result<_, _>>()?;
        write_atomic(out, points_csv(&points, &values)?.as_bytes())?;
    }
    Ok(())
}
