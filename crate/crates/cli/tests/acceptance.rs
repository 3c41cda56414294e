//! Acceptance criteria: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

use std::time::{Duration, Instant};

use qsample_cli::verify::{self, Check, KernelTarget, Suite, VerifyOptions};
use qsample_core::io::to_json;
use qsample_core::kernels::KernelSpec;
use qsample_core::nystrom::{eigensystem, NystromOperator, DEFAULT_FLOOR};

struct Criterion {
    name: &'static str,
    details: Vec<String>,
    passed: bool,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            details: Vec::new(),
            passed: true,
        }
    }

    fn checks(mut self, suite: &Suite, names: &[&str]) -> Self {
        if let Some(e) = &suite.error {
            self.passed = false;
            self.details.push(format!("{} error: {e}", suite.name));
        }
        for &n in names {
            match suite.checks.iter().find(|c| c.name == n) {
                Some(c) => self.check(suite, c),
                None => {
                    self.passed = false;
                    self.details.push(format!("{} missing", n));
                }
            }
        }
        self
    }

    fn check(&mut self, suite: &Suite, c: &Check) {
        let kernel = suite.kernel.as_deref().map(|k| format!("[{k}] ")).unwrap_or_default();
        let op = if c.lower_bound { ">=" } else { "<=" };
        self.details.push(format!("{kernel}{}={:.2e} {op} {:.0e}", c.name, c.value, c.tolerance));
        self.passed &= c.passed;
    }

    fn value(mut self, label: &str, value: f64, tolerance: f64) -> Self {
        self.details.push(format!("{label}={value:.2e} <= {tolerance:.0e}"));
        self.passed &= value <= tolerance;
        self
    }

    fn runtime(mut self, label: &str, elapsed: Duration, limit: Duration) -> Self {
        self.details.push(format!("{label} {:.2}s < {}s", elapsed.as_secs_f64(), limit.as_secs()));
        self.passed &= elapsed < limit;
        self
    }

    fn flag(mut self, label: &str, ok: bool) -> Self {
        self.details.push(format!("{label}={ok}"));
        self.passed &= ok;
        self
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn analytic_trace(spec: &KernelSpec, nodes: usize) -> (f64, f64) {
    let op = NystromOperator::build(spec, &spec.grid(nodes).expect("grid")).expect("operator");
    let basis = eigensystem(&op, DEFAULT_FLOOR).expect("eigensystem");
    (basis.all_mu().iter().sum(), basis.mu().iter().sum())
}

fn main() {
    let opts = VerifyOptions::reference(0);
    let sinc: &KernelTarget = &opts.targets[0];
    let qft: &KernelTarget = &opts.targets[1];
    let (s1, s2) = (verify::target_stream(0), verify::target_stream(1));
    let mut out = Vec::new();

    let (algebra, t) = timed(|| verify::algebra_suite(&opts));
    out.push(
        Criterion::new("quaternion algebra suite")
            .checks(&algebra, &["norm-multiplicativity", "associativity", "conjugate-anti-homomorphism", "inverse-identity"])
            .runtime("runtime", t, secs(1)),
    );

    let (embedding, t) = timed(|| verify::embedding_suite(&opts));
    out.push(
        Criterion::new("embedding homomorphism")
            .checks(&embedding, &["embedding-homomorphism"])
            .runtime("runtime", t, secs(5)),
    );

    let (spectral, t) = timed(|| verify::spectral_suite(&opts));
    out.push(
        Criterion::new("spectral contracts")
            .checks(&spectral, &["planted-modulus-recovery", "eigenvector-orthonormality", "normal-residual"])
            .runtime("runtime", t, secs(30)),
    );

    let ((sum1, kept1), _) = timed(|| analytic_trace(&sinc.spec, sinc.direct_nodes));
    let ((sum2, kept2), t2) = timed(|| analytic_trace(&qft.spec, qft.direct_nodes));
    out.push(
        Criterion::new("trace identities")
            .value("sinc1d |sum mu - 2|/2", (sum1 - 2.0).abs() / 2.0, 1e-10)
            .value("qft2d |sum mu - 4|/4", (sum2 - 4.0).abs() / 4.0, 1e-10)
            .value("sinc1d retained", (kept1 - 2.0).abs() / 2.0, 1e-10)
            .value("qft2d retained", (kept2 - 4.0).abs() / 4.0, 1e-10)
            .runtime("2D 24^2 runtime", t2, secs(60)),
    );

    let nys1 = verify::nystrom_suite(&opts, sinc, s1 + 1);
    let nys2 = verify::nystrom_suite(&opts, qft, s2 + 1);
    out.push(
        Criterion::new("eigenpair equations")
            .checks(&nys1, &["integral-equation-top-10", "lambda-mu"])
            .checks(&nys2, &["integral-equation-top-10", "direct-lambda-mu", "tensor-lambda-mu"]),
    );

    let tensor = verify::tensor_suite(&opts, qft, s2 + 5);
    out.push(
        Criterion::new("tensor cross-validation")
            .checks(&tensor, &["tensor-direct-mu", "degenerate-pairs-detected"]),
    );

    let exp1 = verify::expansion_suite(&opts, sinc, s1 + 2);
    let exp2 = verify::expansion_suite(&opts, qft, s2 + 2);
    out.push(
        Criterion::new("kernel expansions")
            .checks(&exp1, &["e-expansion-monotone", "s-diagonal-monotone"])
            .checks(&exp2, &["e-expansion-monotone", "s-diagonal-monotone", "s-diagonal-full-retention"]),
    );

    let (samp1, t1) = timed(|| verify::sampling_suite(&opts, sinc, s1 + 3));
    let (samp2, t2) = timed(|| verify::sampling_suite(&opts, qft, s2 + 3));
    out.push(
        Criterion::new("WSK reconstruction")
            .checks(&samp1, &["wsk-lattice-interpolation", "wsk-convergence-n32", "wsk-monotone"])
            .checks(&samp2, &["wsk-lattice-interpolation", "wsk-convergence-n32", "wsk-monotone"])
            .runtime("sinc1d sampling runtime", t1, secs(60))
            .runtime("qft2d sampling runtime", t2, secs(60)),
    );
    out.push(
        Criterion::new("PSQWS reconstruction")
            .checks(&samp1, &["psqws-wsk-agreement", "psqws-monotone"])
            .checks(&samp2, &["psqws-wsk-agreement", "psqws-monotone"]),
    );
    out.push(
        Criterion::new("discrete orthogonality")
            .checks(&samp1, &["discrete-orthogonality", "discrete-orthogonality-monotone"])
            .checks(&samp2, &["discrete-orthogonality", "discrete-orthogonality-monotone"]),
    );

    let (conc1, t1) = timed(|| verify::concentration_suite(&opts, sinc, s1 + 4));
    let (conc2, t2) = timed(|| verify::concentration_suite(&opts, qft, s2 + 4));
    out.push(
        Criterion::new("energy concentration")
            .checks(&conc1, &["beta-phi-1", "beta-bound", "beta-forms-agree"])
            .checks(&conc2, &["beta-phi-1", "beta-bound", "beta-forms-agree"])
            .runtime("sinc1d runtime", t1, secs(30))
            .runtime("qft2d runtime", t2, secs(30)),
    );

    let seven = VerifyOptions::reference(7);
    let (a, b) = std::thread::scope(|s| {
        let a = s.spawn(|| to_json(&verify::run(&seven)).expect("json"));
        let b = s.spawn(|| to_json(&verify::run(&seven)).expect("json"));
        (a.join().expect("run"), b.join().expect("run"))
    });
    out.push(Criterion::new("determinism (seed 7)").flag("byte-identical", a == b));

    let mut failed = 0;
    for c in &out {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.details.join("; "));
        failed += usize::from(!c.passed);
    }
    println!("acceptance: {} of {} criteria passed", out.len() - failed, out.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
