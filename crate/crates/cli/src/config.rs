//! Command-line surface and validated run configuration.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsample_core::io::read_table;
use qsample_core::kernels::KernelSpec;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qsample", version, about = "Prolate spheroidal quaternion wave signals and quaternion sampling series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Sinc1d,
    Qft2d,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Wsk,
    Psqws,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Kernel family.
    #[arg(long, global = true, value_enum)]
    pub kernel: Option<KernelKind>,
    /// CSV table `w1[,w2],x1[,x2],w,x,y,z` for `--kernel tabulated`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Bandwidth.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Half-width of the concentration domain D = [-tau, tau]^d.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tau: f64,
    /// Quadrature nodes per axis (at least 2).
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Seed for every randomized quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Retention floor: modes with mu < floor * mu_1 are dropped.
    #[arg(long, global = true, default_value = "1e-12")]
    pub floor: f64,
    /// Tolerance override `suite.check=value` (repeatable).
    #[arg(long = "tol", global = true, value_parser = parse_tolerance)]
    pub tolerances: Vec<(String, f64)>,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = value.parse().map_err(|_| format!("invalid tolerance value {value:?}"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("tolerance must be finite and non-negative, got {v}"));
    }
    Ok((name.trim().to_string(), v))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the PSQWS eigensystem and write the spectrum as JSON.
    Eigensys {
        /// Write grid values of every retained phi_n as CSV.
        #[arg(long)]
        dump_eigenfunctions: Option<PathBuf>,
        /// For qft2d, solve the full 2D Nystrom problem instead of the tensor product.
        #[arg(long)]
        direct: bool,
    },
    /// Reconstruct a signal from samples with the WSK or PSQWS series.
    Reconstruct {
        /// Samples CSV `x1[,x2],w,x,y,z`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Evaluation points CSV with columns `x1[,x2]`.
        #[arg(long)]
        eval_points: PathBuf,
        /// Number of PSQWS modes (default: all retained).
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Run every invariant suite and write a JSON report.
    Verify {
        #[arg(long)]
        report: Option<PathBuf>,
        /// Random signals in the concentration suite.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Estimate the concentration supremum over random signals.
    Concentrate {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Check the four kernel admissibility conditions.
    Admissibility {
        #[arg(long, default_value_t = 16)]
        trials: usize,
    },
    /// Write lattice samples of a seeded smooth band-limited signal as CSV.
    Sample {
        /// Lattice truncation radius.
        #[arg(long, default_value_t = 16)]
        n_max: usize,
        /// Legendre degrees per axis of the random spectral function.
        #[arg(long, default_value_t = 4)]
        degree: usize,
        /// Also write exact signal values at these points to `--exact-out`.
        #[arg(long, requires = "exact_out")]
        eval_points: Option<PathBuf>,
        /// Output CSV `x1[,x2],w,x,y,z` for the exact values.
        #[arg(long)]
        exact_out: Option<PathBuf>,
    },
}

/// Validated global configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: Option<KernelKind>,
    pub table: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub tau: f64,
    pub nodes: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub floor: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        if let Some(s) = g.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::Usage(format!("--sigma must be positive and finite, got {s}")));
            }
        }
        if !(g.tau > 0.0 && g.tau.is_finite()) {
            return Err(CliError::Usage(format!("--tau must be positive and finite, got {}", g.tau)));
        }
        if let Some(n) = g.nodes {
            if n < 2 {
                return Err(CliError::Usage(format!("--nodes must be at least 2, got {n}")));
            }
        }
        if !(0.0..=1.0).contains(&g.floor) {
            return Err(CliError::Usage(format!("--floor must lie in [0, 1], got {}", g.floor)));
        }
        Ok(Self {
            kernel: g.kernel,
            table: g.table.clone(),
            sigma: g.sigma,
            tau: g.tau,
            nodes: g.nodes,
            seed: g.seed,
            out: g.out.clone(),
            floor: g.floor,
            tolerances: g.tolerances.iter().cloned().collect(),
        })
    }

    /// The selected kernel; every command except `verify` requires one.
    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let kind = self
            .kernel
            .ok_or_else(|| CliError::Usage("--kernel is required (sinc1d, qft2d or tabulated)".into()))?;
        match kind {
            KernelKind::Sinc1d | KernelKind::Qft2d => {
                let sigma = self
                    .sigma
                    .ok_or_else(|| CliError::Usage("--sigma is required for built-in kernels".into()))?;
                let spec = if kind == KernelKind::Sinc1d {
                    KernelSpec::sinc1d(sigma, self.tau)
                } else {
                    KernelSpec::qft2d(sigma, self.tau)
                };
                spec.map_err(|e| CliError::Usage(e.to_string()))
            }
            KernelKind::Tabulated => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--table is required for --kernel tabulated".into()))?;
                let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let table = read_table(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                Ok(KernelSpec::Tabulated(table))
            }
        }
    }

    /// Nodes per axis for a direct Nystrom grid.
    pub fn direct_nodes(&self, spec: &KernelSpec) -> usize {
        self.nodes.unwrap_or(match (spec, spec.dim()) {
            (KernelSpec::Tabulated(_), 1) => 32,
            (KernelSpec::Tabulated(_), _) => 12,
            (_, 1) => 64,
            _ => 24,
        })
    }

    /// Nodes per axis for the production basis (tensor path in 2D).
    pub fn basis_nodes(&self, spec: &KernelSpec) -> usize {
        match spec {
            KernelSpec::QftSeparable2D { .. } => self.nodes.unwrap_or(64),
            _ => self.direct_nodes(spec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsample_core::nystrom::DEFAULT_FLOOR;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qsample").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn floor_default_matches_library() {
        let cli = parse(&["verify"]);
        assert_eq!(cli.global.floor, DEFAULT_FLOOR);
    }

    #[test]
    fn tolerance_overrides_parse() {
        let cli = parse(&["verify", "--tol", "sampling.wsk-monotone=0.5", "--tol", "a.b=1e-3"]);
        let cfg = RunConfig::from_args(&cli.global).unwrap();
        assert_eq!(cfg.tolerances["sampling.wsk-monotone"], 0.5);
        assert_eq!(cfg.tolerances["a.b"], 1e-3);
        assert!(parse_tolerance("x=-1").is_err());
        assert!(parse_tolerance("x=nan").is_err());
    }

    #[test]
    fn default_node_counts() {
        let cfg = RunConfig::from_args(&parse(&["verify"]).global).unwrap();
        let sinc = KernelSpec::sinc1d(1.0, 1.0).unwrap();
        let qft = KernelSpec::qft2d(1.0, 1.0).unwrap();
        assert_eq!(cfg.direct_nodes(&sinc), 64);
        assert_eq!(cfg.direct_nodes(&qft), 24);
        assert_eq!(cfg.basis_nodes(&qft), 64);
    }

    #[test]
    fn kernel_is_required_outside_verify() {
        let cfg = RunConfig::from_args(&parse(&["eigensys"]).global).unwrap();
        assert!(matches!(cfg.kernel_spec(), Err(CliError::Usage(_))));
    }
}
