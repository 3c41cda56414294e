//! Nystrom discretization of the band-limiting operator
//! `(T F)(x) = int_D F(w) conj(E(w, x)) dw` and of `K = T* T`, and the
//! resulting PSQWS eigensystem.
//!
//! With quadrature nodes `w_k` and weights `c_k` the symmetrized matrix is
//! `T[k][j] = sqrt(c_k c_j) conj(E(w_k, w_j))`, acting on weighted vectors
//! `v_k = sqrt(c_k) F(w_k)`. Grid eigenfunctions are stored as function
//! values `Phi(w_k) = v_k / sqrt(c_k)`, orthonormal under the weighted inner
//! product `sum_k c_k Phi_n(w_k) conj(Phi_m(w_k))`. The extended signals are
//! `phi_n = T Phi_n`: orthonormal in the range space, with
//! `int_D |phi_n|^2 = mu_n` and `phi_n = lambda_n Phi_n` on `D`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_admissibility, transform_matrix, AdmissibilityReport, KernelSpec, QuadratureGrid};
use crate::qlinalg::{
    cluster_ranges, eig_normal_from_gram, eig_selfadjoint_with, spectral_order,
    EigenOptions, QMatrix, QVector,
};
use crate::quaternion::{pairwise_sum, Quaternion, INVERSION_EPSILON};

pub const DEFAULT_FLOOR: f64 = 1e-12;
pub const DEFAULT_NODES_1D: usize = 64;
pub const DEFAULT_NODES_2D_DIRECT: usize = 24;
/// Random trials of the admissibility check run by [`NystromOperator::build`].
const BUILD_TRIALS: usize = 16;

#[derive(Clone, Debug)]
pub struct NystromOperator {
    spec: KernelSpec,
    grid: QuadratureGrid,
    t: QMatrix,
    k: QMatrix,
    admissibility: AdmissibilityReport,
}

impl NystromOperator {
    /// Discretizes `spec` on `grid`; fails if the kernel is not admissible.
    pub fn build(spec: &KernelSpec, grid: &QuadratureGrid) -> Result<Self> {
        let admissibility = check_admissibility(spec, grid, BUILD_TRIALS, 0)?;
        if !admissibility.passed() {
            let names: Vec<String> = admissibility
                .failures()
                .iter()
                .map(|c| format!("{} ({:.3e} vs {:.1e})", c.name, c.value, c.threshold))
                .collect();
            return Err(Error::Inadmissible(names.join(", ")));
        }
        let t = transform_matrix(spec, grid)?;
        let k = t.adjoint_self_product();
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            t,
            k,
            admissibility,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn t_matrix(&self) -> &QMatrix {
        &self.t
    }

    pub fn k_matrix(&self) -> &QMatrix {
        &self.k
    }

    pub fn admissibility(&self) -> &AdmissibilityReport {
        &self.admissibility
    }

    /// `max |K - K*|`.
    pub fn selfadjoint_residual(&self) -> f64 {
        self.k.selfadjoint_deviation()
    }

    /// `|T T* - T* T|_F / |T|_F^2`.
    pub fn normality_residual(&self) -> f64 {
        let adj = self.t.adjoint();
        let a = &self.t * &adj;
        let b = &adj * &self.t;
        a.sub(&b).fro_norm() / self.t.fro_norm().powi(2)
    }

    /// `max |K - K_S| / max |K|` where `K_S[a][b] = sqrt(c_a c_b) S(w_b, w_a)`
    /// uses the closed-form kernel; measures quadrature error of `S`.
    /// `None` for tabulated kernels, whose `S` is itself a quadrature.
    pub fn quadrature_residual(&self) -> Option<f64> {
        if matches!(self.spec, KernelSpec::Tabulated(_)) {
            return None;
        }
        let n = self.grid.len();
        let sq: Vec<f64> = self.grid.weights().iter().map(|c| c.sqrt()).collect();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let s = self.spec.eval_s(self.grid.node(b), self.grid.node(a)).ok()? * sq[a] * sq[b];
                worst = worst.max((self.k[(a, b)] - Quaternion::real(s)).norm());
            }
        }
        Some(worst / self.k.max_abs())
    }

    /// `sum_k c_k S(w_k, w_k)`.
    pub fn kernel_trace(&self) -> Result<f64> {
        kernel_trace(&self.spec, &self.grid)
    }
}

pub fn kernel_trace(spec: &KernelSpec, grid: &QuadratureGrid) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..grid.len() {
        acc += grid.weight(k) * spec.eval_s(grid.node(k), grid.node(k))?;
    }
    Ok(acc)
}

/// One-dimensional factor of a tensor-product basis: real eigenvectors of the
/// unit-normalized finite Fourier operator with kernel
/// `(2tau)^(-1/2) exp(i sigma x w / tau)`.
#[derive(Clone, Debug)]
struct AxisModes {
    grid: QuadratureGrid,
    sigma: f64,
    tau: f64,
    /// Weighted unit vectors `sqrt(c_k) Phi_m(w_k)`, real.
    vectors: Vec<Vec<f64>>,
    rho: Vec<Complex64>,
    /// `|A v_m|^2`.
    mu: Vec<f64>,
    /// Residual vectors `A v_m - rho_m v_m`.
    errors: Vec<Vec<Complex64>>,
}

impl AxisModes {
    fn new(sigma: f64, tau: f64, n: usize) -> Result<Self> {
        let spec = KernelSpec::sinc1d(sigma, tau)?;
        let grid = spec.grid(n)?;
        let op = NystromOperator::build(&spec, &grid)?;
        let gram = eig_selfadjoint_with(op.k_matrix(), &EigenOptions::default())?;
        let unit = 1.0 / (2.0 * tau).sqrt();
        let sq: Vec<f64> = grid.weights().iter().map(|c| c.sqrt()).collect();
        let nodes = grid.axis_nodes();
        let a = |j: usize, k: usize| -> Complex64 {
            Complex64::from_polar(unit * sq[j] * sq[k], sigma * nodes[j] * nodes[k] / tau)
        };
        let mut vectors = Vec::with_capacity(n);
        let mut rho = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        let mut errors = Vec::with_capacity(n);
        for xi in &gram.eigenvectors {
            if xi.iter().any(|q| q.vector_norm() != 0.0) {
                return Err(Error::InvalidKernel(
                    "one-dimensional factor produced complex eigenvectors".into(),
                ));
            }
            let v: Vec<f64> = xi.iter().map(|q| q.w).collect();
            // image under the row action: (v A)_j = sum_k v_k A[k][j]
            let image: Vec<Complex64> = (0..n)
                .map(|j| (0..n).map(|k| a(k, j) * v[k]).sum())
                .collect();
            let r: Complex64 = image.iter().zip(&v).map(|(z, &x)| z * x).sum();
            let err: Vec<Complex64> = image.iter().zip(&v).map(|(z, &x)| z - r * x).collect();
            mu.push(image.iter().map(|z| z.norm_sqr()).sum());
            rho.push(r);
            errors.push(err);
            vectors.push(v);
        }
        Ok(Self {
            grid,
            sigma,
            tau,
            vectors,
            rho,
            mu,
            errors,
        })
    }

    /// `sum_k sqrt(c_k) v_m(k) (2tau)^(-1/2) exp(i sigma x w_k / tau)` for
    /// every mode in `modes`.
    fn extend(&self, modes: &[usize], x: f64) -> Vec<Complex64> {
        let unit = 1.0 / (2.0 * self.tau).sqrt();
        let phases: Vec<Complex64> = self
            .grid
            .axis_nodes()
            .iter()
            .zip(self.grid.weights())
            .map(|(&w, &c)| Complex64::from_polar(unit * c.sqrt(), self.sigma * x * w / self.tau))
            .collect();
        modes
            .iter()
            .map(|&m| self.vectors[m].iter().zip(&phases).map(|(&v, z)| z * v).sum())
            .collect()
    }
}

/// Real inner product `Re sum a_k conj(b_k)`.
fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

fn scaled(v: &[f64], r: Complex64) -> Vec<Complex64> {
    v.iter().map(|&x| r * x).collect()
}

#[derive(Clone, Debug)]
struct TensorMode {
    /// Mode index along `x1` (the `i` factor).
    m: usize,
    /// Mode index along `x2` (the `j` factor).
    n: usize,
    rotor: Quaternion,
}

#[derive(Clone, Debug)]
enum Modes {
    /// Grid eigenfunction values `Phi_n(w_k)`.
    Dense(Vec<QVector>),
    Tensor {
        axis: Box<AxisModes>,
        modes: Vec<TensorMode>,
    },
}

/// Retained PSQWS eigensystem `{Phi_n, lambda_n, mu_n}`, sorted by `mu`
/// descending.
#[derive(Clone, Debug)]
pub struct PsqwsBasis {
    spec: KernelSpec,
    grid: QuadratureGrid,
    floor: f64,
    lambda: Vec<Quaternion>,
    mu: Vec<f64>,
    residuals: Vec<f64>,
    all_mu: Vec<f64>,
    modes: Modes,
}

/// Eigensystem of a discretized operator; modes with `mu < floor * mu_1` are
/// dropped.
pub fn eigensystem(op: &NystromOperator, floor: f64) -> Result<PsqwsBasis> {
    let opts = EigenOptions {
        floor,
        ..Default::default()
    };
    let gram = eig_selfadjoint_with(op.k_matrix(), &opts)?;
    let all_mu: Vec<f64> = gram.eigenvalues.iter().map(|l| l.w).collect();
    let dec = eig_normal_from_gram(op.t_matrix(), &gram, &opts)?;
    let sq: Vec<f64> = op.grid.weights().iter().map(|c| c.sqrt()).collect();
    let mut mu = Vec::with_capacity(dec.len());
    let mut phi = Vec::with_capacity(dec.len());
    for u in &dec.eigenvectors {
        // |T u|^2 keeps relative accuracy for small modes
        mu.push(op.t_matrix().apply(u)?.norm_sqr());
        phi.push(QVector::new(u.iter().zip(&sq).map(|(&q, &s)| q * (1.0 / s)).collect()));
    }
    Ok(PsqwsBasis {
        spec: op.spec.clone(),
        grid: op.grid.clone(),
        floor,
        lambda: dec.eigenvalues,
        mu,
        residuals: dec.residuals,
        all_mu,
        modes: Modes::Dense(phi),
    })
}

impl PsqwsBasis {
    /// Tensor-product basis of the separable 2D kernel built from the 1D
    /// eigensystem on `n_per_axis` nodes: `Phi_mn = r Phi_m(w1) Phi_n(w2)`
    /// with `lambda_mn = rho_n^(j) rho_m`, rotated by `r` into `C_i^+`.
    pub fn tensor(spec: &KernelSpec, n_per_axis: usize, floor: f64) -> Result<Self> {
        let KernelSpec::QftSeparable2D { sigma, tau } = *spec else {
            return Err(Error::InvalidKernel(format!(
                "tensor construction needs the qft2d kernel, got {}",
                spec.name()
            )));
        };
        let axis = AxisModes::new(sigma, tau, n_per_axis)?;
        let grid = spec.grid(n_per_axis)?;
        let count = axis.vectors.len();

        let mut lambdas = Vec::with_capacity(count * count);
        let mut mus = Vec::with_capacity(count * count);
        let mut pairs = Vec::with_capacity(count * count);
        for m in 0..count {
            for n in 0..count {
                let rj = axis.rho[n];
                let lambda = Quaternion::from_complex_j(rj) * Quaternion::from_complex_i(axis.rho[m]);
                lambdas.push(lambda);
                mus.push(axis.mu[m] * axis.mu[n]);
                pairs.push((m, n));
            }
        }
        let mut all_mu = mus.clone();
        all_mu.sort_by(|a, b| b.total_cmp(a));
        let top = all_mu[0];

        let order = spectral_order(&lambdas);
        let mut lambda = Vec::new();
        let mut mu = Vec::new();
        let mut residuals = Vec::new();
        let mut modes = Vec::new();
        for idx in order {
            if mus[idx] < floor * top {
                continue;
            }
            let (m, n) = pairs[idx];
            let rotor = lambdas[idx].canonical_rotor();
            let (re, im) = lambdas[idx].canonical_complex_representative();
            lambda.push(Quaternion::new(re, im, 0.0, 0.0));
            mu.push(mus[idx]);
            residuals.push(tensor_residual(&axis, m, n));
            modes.push(TensorMode { m, n, rotor });
        }
        // spectral_order sorts by |lambda|; keep mu descending as well
        let mut perm: Vec<usize> = (0..mu.len()).collect();
        perm.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]));
        let take = |v: &Vec<Quaternion>| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let lambda = take(&lambda);
        let residuals = perm.iter().map(|&i| residuals[i]).collect();
        let modes = perm.iter().map(|&i| modes[i].clone()).collect();
        let mu = perm.iter().map(|&i| mu[i]).collect();

        Ok(Self {
            spec: spec.clone(),
            grid,
            floor,
            lambda,
            mu,
            residuals,
            all_mu,
            modes: Modes::Tensor {
                axis: Box::new(axis),
                modes,
            },
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn is_tensor(&self) -> bool {
        matches!(self.modes, Modes::Tensor { .. })
    }

    pub fn lambda(&self) -> &[Quaternion] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `|T Phi_n - lambda_n Phi_n|` in the weighted norm.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Full discrete spectrum of `K` before the floor is applied.
    pub fn all_mu(&self) -> &[f64] {
        &self.all_mu
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            return Err(Error::ModeOutOfRange {
                index: n,
                count: self.len(),
            });
        }
        Ok(())
    }

    /// Grid eigenfunction `Phi_n(w_k)` at every node.
    pub fn eigenvector(&self, n: usize) -> Result<QVector> {
        self.check_index(n)?;
        Ok(match &self.modes {
            Modes::Dense(phi) => phi[n].clone(),
            Modes::Tensor { axis, modes } => {
                let mode = &modes[n];
                let p = self.grid.per_axis();
                let w = self.grid.axis_weights();
                let (a, b) = (&axis.vectors[mode.m], &axis.vectors[mode.n]);
                let mut out = Vec::with_capacity(p * p);
                for k1 in 0..p {
                    for k2 in 0..p {
                        let v = a[k1] * b[k2] / (w[k1] * w[k2]).sqrt();
                        out.push(mode.rotor * v);
                    }
                }
                QVector::new(out)
            }
        })
    }

    /// `phi_n(w_k) = lambda_n Phi_n(w_k)` at every node.
    pub fn grid_values(&self, n: usize) -> Result<QVector> {
        Ok(self.eigenvector(n)?.scale_left(self.lambda[n]))
    }

    /// `phi_n(x) = lambda_n^-1 sum_k c_k phi_n(w_k) conj(E(w_k, x))` for any `x`.
    pub fn extend(&self, n: usize, x: &[f64]) -> Result<Quaternion> {
        self.check_index(n)?;
        let inv = self.inverse_lambda(n)?;
        match &self.modes {
            Modes::Dense(phi) => {
                let row = self.spec.conj_e_row(&self.grid, x)?;
                let lambda = self.lambda[n];
                let terms: Vec<Quaternion> = (0..self.grid.len())
                    .map(|k| (lambda * phi[n][k]) * row[k] * self.grid.weight(k))
                    .collect();
                Ok(inv * pairwise_sum(&terms))
            }
            Modes::Tensor { .. } => Ok(self.mode_values(x, n + 1)?[n]),
        }
    }

    fn inverse_lambda(&self, n: usize) -> Result<Quaternion> {
        let norm = self.lambda[n].norm();
        if norm < INVERSION_EPSILON {
            return Err(Error::SingularMode { index: n, norm });
        }
        self.lambda[n].inverse()
    }

    /// `phi_0(x), ..., phi_{count-1}(x)`.
    pub fn mode_values(&self, x: &[f64], count: usize) -> Result<Vec<Quaternion>> {
        if count > self.len() {
            return Err(Error::ModeOutOfRange {
                index: count.saturating_sub(1),
                count: self.len(),
            });
        }
        if x.len() != self.spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim(),
                got: x.len(),
            });
        }
        match &self.modes {
            Modes::Dense(phi) => {
                let row = self.spec.conj_e_row(&self.grid, x)?;
                let weighted: Vec<Quaternion> = row
                    .iter()
                    .zip(self.grid.weights())
                    .map(|(&r, &c)| r * c)
                    .collect();
                Ok(phi[..count]
                    .iter()
                    .map(|p| {
                        let terms: Vec<Quaternion> =
                            p.iter().zip(&weighted).map(|(&a, &b)| a * b).collect();
                        pairwise_sum(&terms)
                    })
                    .collect())
            }
            Modes::Tensor { axis, modes } => {
                let needed = axis.vectors.len();
                let all: Vec<usize> = (0..needed).collect();
                let g = axis.extend(&all, x[0]);
                let h = axis.extend(&all, x[1]);
                Ok(modes[..count]
                    .iter()
                    .map(|md| {
                        let hj = Quaternion::from_complex_j(h[md.n]);
                        md.rotor * hj * Quaternion::from_complex_i(g[md.m])
                    })
                    .collect())
            }
        }
    }

    /// `|sum_k c_k phi_n(w_k) S(x, w_k) - mu_n phi_n(x)|`.
    pub fn bbb_residual(&self, n: usize, x: &[f64]) -> Result<f64> {
        let values = self.grid_values(n)?;
        let terms: Vec<Quaternion> = (0..self.grid.len())
            .map(|k| Ok(values[k] * (self.grid.weight(k) * self.spec.eval_s(x, self.grid.node(k))?)))
            .collect::<Result<_>>()?;
        let lhs = pairwise_sum(&terms);
        Ok((lhs - self.extend(n, x)? * self.mu[n]).norm())
    }

    /// Weighted inner product `sum_k c_k a_k conj(b_k)` on the grid.
    pub fn weighted_inner(&self, a: &QVector, b: &QVector) -> Quaternion {
        let terms: Vec<Quaternion> = (0..self.grid.len())
            .map(|k| a[k] * b[k].conj() * self.grid.weight(k))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Exact `|A (v_m x v_n) - lambda (v_m x v_n)|` from the 1D residuals.
fn tensor_residual(axis: &AxisModes, m: usize, n: usize) -> f64 {
    // X = a (x) f + e (x) b + e (x) f with a = rho_n v_n, e = residual of n
    // (the j factor) and b = rho_m v_m, f = residual of m (the i factor)
    let a = scaled(&axis.vectors[n], axis.rho[n]);
    let b = scaled(&axis.vectors[m], axis.rho[m]);
    let (e, f) = (&axis.errors[n], &axis.errors[m]);
    let nn = |x: &[Complex64]| real_inner(x, x);
    let total = nn(&a) * nn(f)
        + nn(e) * nn(&b)
        + nn(e) * nn(f)
        + 2.0 * real_inner(&a, e) * real_inner(f, &b)
        + 2.0 * real_inner(&a, e) * nn(f)
        + 2.0 * nn(e) * real_inner(&b, f);
    total.max(0.0).sqrt()
}

/// Tensor-versus-direct comparison of the 2D eigensystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub compared: usize,
    pub direct_mu: Vec<f64>,
    pub tensor_mu: Vec<f64>,
    pub max_relative_mu_error: f64,
    /// Direct `mu_1` over the square of the top 1D eigenvalue (sinc normalization).
    pub fitted_constant: f64,
    /// `(pi / sigma)^2`.
    pub predicted_constant: f64,
    /// Index pairs `(i, i+1)` that are exact tensor degeneracies.
    pub degenerate_pairs: Vec<(usize, usize)>,
    /// Whether every degenerate pair shares a cluster in the direct spectrum.
    pub degenerate_pairs_detected: bool,
    /// `|<phi_00, Phi_1>|` on the direct grid, normalized.
    pub top_correlation: f64,
    /// Worst 2D integral-equation residual of the tensor modes at random points.
    pub max_bbb_residual: f64,
}

/// Compares the tensor-product 2D spectrum built from the 1D `basis1d` grid
/// with a direct 2D Nystrom eigensystem on `direct_nodes` per axis.
pub fn cross_validate_tensor(
    spec2d: &KernelSpec,
    basis1d: &PsqwsBasis,
    direct_nodes: usize,
    compared: usize,
    seed: u64,
) -> Result<CrossValidationReport> {
    let (KernelSpec::QftSeparable2D { sigma, tau }, KernelSpec::Sinc1D { sigma: s1, tau: t1 }) =
        (spec2d, basis1d.spec())
    else {
        return Err(Error::InvalidKernel(
            "cross-validation needs a qft2d kernel and a sinc1d basis".into(),
        ));
    };
    if (sigma - s1).abs() > 1e-12 * sigma || (tau - t1).abs() > 1e-12 * tau {
        return Err(Error::InvalidKernel("1D and 2D parameters differ".into()));
    }
    let tensor = PsqwsBasis::tensor(spec2d, basis1d.grid().per_axis(), DEFAULT_FLOOR)?;
    let grid = spec2d.grid(direct_nodes)?;
    let op = NystromOperator::build(spec2d, &grid)?;
    let direct = eigensystem(&op, DEFAULT_FLOOR)?;
    let compared = compared.min(direct.len()).min(tensor.len());

    let direct_mu = direct.mu[..compared].to_vec();
    let tensor_mu = tensor.mu[..compared].to_vec();
    let max_relative_mu_error = direct_mu
        .iter()
        .zip(&tensor_mu)
        .map(|(d, t)| ((d - t) / t).abs())
        .fold(0.0, f64::max);
    let fitted_constant = direct.mu[0] / basis1d.mu[0].powi(2);
    let predicted_constant = (PI / sigma).powi(2);

    let mut degenerate_pairs = Vec::new();
    for i in 0..compared.saturating_sub(1) {
        if (tensor_mu[i] - tensor_mu[i + 1]).abs() <= 1e-12 * tensor_mu[0] {
            degenerate_pairs.push((i, i + 1));
        }
    }
    let gap = EigenOptions::default().cluster_gap * direct.mu[0];
    let clusters = cluster_ranges(&direct.mu, gap);
    let degenerate_pairs_detected = degenerate_pairs.iter().all(|&(a, b)| {
        clusters.iter().any(|r| r.contains(&a) && r.contains(&b))
    });

    // tensor phi_00 on the direct grid against the direct top mode
    let psi: Vec<Quaternion> = (0..grid.len())
        .map(|k| tensor.extend(0, grid.node(k)))
        .collect::<Result<_>>()?;
    let psi = QVector::new(psi);
    let top = direct.eigenvector(0)?;
    let overlap = direct.weighted_inner(&psi, &top).norm();
    let top_correlation =
        overlap / (direct.weighted_inner(&psi, &psi).w.sqrt() * direct.weighted_inner(&top, &top).w.sqrt());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_bbb_residual: f64 = 0.0;
    for n in 0..compared {
        for _ in 0..4 {
            let x = [rng.random_range(-4.0 * tau..4.0 * tau), rng.random_range(-4.0 * tau..4.0 * tau)];
            max_bbb_residual = max_bbb_residual.max(tensor.bbb_residual(n, &x)?);
        }
    }

    Ok(CrossValidationReport {
        compared,
        direct_mu,
        tensor_mu,
        max_relative_mu_error,
        fitted_constant,
        predicted_constant,
        degenerate_pairs,
        degenerate_pairs_detected,
        top_correlation,
        max_bbb_residual,
    })
}

/// Truncation behaviour of the kernel expansions
/// `E(w, x) = sum conj(phi_n(x)) lambda_n^-1 phi_n(w)` and
/// `S(x, y) = sum conj(phi_n(y)) phi_n(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// Truncation levels `N` (number of modes summed).
    pub levels: Vec<usize>,
    /// Worst `L^2(D)` residual in `w` of the `E` expansion, per level.
    pub e_l2: Vec<f64>,
    /// Worst pointwise `E` residual at the sample pairs, per level.
    pub e_pointwise: Vec<f64>,
    /// Worst pointwise `S` residual at the sample pairs, per level.
    pub s_pointwise: Vec<f64>,
    /// Worst `S(y, y) - sum_{n<N} |phi_n(y)|^2`, the squared range-space norm
    /// of the truncation remainder of `S(., y)`, per level.
    pub s_diagonal: Vec<f64>,
}

impl ExpansionReport {
    /// Non-increasing in `N` up to `slack`.
    pub fn monotone(values: &[f64], slack: f64) -> bool {
        values.windows(2).all(|p| p[1] <= p[0] + slack)
    }
}

/// Levels `0, 1, 2, 4, ...` up to and including `count`.
pub fn doubling_levels(count: usize) -> Vec<usize> {
    let mut levels = vec![0];
    let mut n = 1;
    while n < count {
        levels.push(n);
        n *= 2;
    }
    if count > 0 {
        levels.push(count);
    }
    levels
}

/// Evaluates both expansions at the sample pairs `(w_i, x_i)` (for `E`, with
/// `w_i` in `D`) and `(x_i, y_i)` (for `S`).
pub fn expansion_residuals(
    basis: &PsqwsBasis,
    e_points: &[(Vec<f64>, Vec<f64>)],
    s_points: &[(Vec<f64>, Vec<f64>)],
    levels: &[usize],
) -> Result<ExpansionReport> {
    let spec = basis.spec();
    let grid = basis.grid();
    let max_level = levels.iter().copied().max().unwrap_or(0);
    if max_level > basis.len() {
        return Err(Error::ModeOutOfRange {
            index: max_level,
            count: basis.len(),
        });
    }
    let phis: Vec<QVector> = (0..max_level).map(|n| basis.eigenvector(n)).collect::<Result<_>>()?;
    let mut report = ExpansionReport {
        levels: levels.to_vec(),
        e_l2: vec![0.0; levels.len()],
        e_pointwise: vec![0.0; levels.len()],
        s_pointwise: vec![0.0; levels.len()],
        s_diagonal: vec![0.0; levels.len()],
    };

    for (w, x) in e_points {
        let at_x = basis.mode_values(x, max_level)?;
        let at_w = basis.mode_values(w, max_level)?;
        let exact_w = spec.eval_e(w, x)?;
        let exact_row: Vec<Quaternion> = spec.conj_e_row(grid, x)?.iter().map(|q| q.conj()).collect();
        for (li, &level) in levels.iter().enumerate() {
            let mut residual_row = exact_row.clone();
            let mut pointwise = exact_w;
            for n in 0..level {
                let c = at_x[n].conj();
                for (r, &p) in residual_row.iter_mut().zip(phis[n].iter()) {
                    *r -= c * p;
                }
                pointwise -= c * basis.inverse_lambda(n)? * at_w[n];
            }
            let l2: f64 = residual_row
                .iter()
                .zip(grid.weights())
                .map(|(r, &c)| c * r.norm_sqr())
                .sum::<f64>()
                .sqrt();
            report.e_l2[li] = report.e_l2[li].max(l2);
            report.e_pointwise[li] = report.e_pointwise[li].max(pointwise.norm());
        }
    }

    for (x, y) in s_points {
        let at_x = basis.mode_values(x, max_level)?;
        let at_y = basis.mode_values(y, max_level)?;
        let sxy = spec.eval_s(x, y)?;
        let syy = spec.eval_s(y, y)?;
        for (li, &level) in levels.iter().enumerate() {
            let terms: Vec<Quaternion> = (0..level).map(|n| at_y[n].conj() * at_x[n]).collect();
            let partial = pairwise_sum(&terms);
            let diag: f64 = (0..level).map(|n| at_y[n].norm_sqr()).sum();
            report.s_pointwise[li] = report.s_pointwise[li].max((Quaternion::real(sxy) - partial).norm());
            report.s_diagonal[li] = report.s_diagonal[li].max(syy - diag);
        }
    }
    Ok(report)
}

/// Orthonormality defect `max |<Phi_n, Phi_m>_w - delta_nm|` of the first
/// `count` grid eigenfunctions.
pub fn orthonormality_defect(basis: &PsqwsBasis, count: usize) -> Result<f64> {
    let phis: Vec<QVector> = (0..count).map(|n| basis.eigenvector(n)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for a in 0..count {
        for b in a..count {
            let g = basis.weighted_inner(&phis[a], &phis[b]);
            let target = if a == b { Quaternion::ONE } else { Quaternion::ZERO };
            worst = worst.max((g - target).norm());
        }
    }
    Ok(worst)
}

/// `max |int_D phi_n conj(phi_m) - mu_n delta_nm|` over the first `count`
/// extended signals, by quadrature on the basis grid.
pub fn dual_orthogonality_defect(basis: &PsqwsBasis, count: usize) -> Result<f64> {
    let values: Vec<QVector> = (0..count).map(|n| basis.grid_values(n)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for a in 0..count {
        for b in a..count {
            let g = basis.weighted_inner(&values[a], &values[b]);
            let target = if a == b { Quaternion::real(basis.mu[a]) } else { Quaternion::ZERO };
            worst = worst.max((g - target).norm());
        }
    }
    Ok(worst)
}

/// `max_n ||lambda_n|^2 - mu_n| / mu_n`.
pub fn lambda_mu_defect(basis: &PsqwsBasis) -> f64 {
    basis
        .lambda
        .iter()
        .zip(&basis.mu)
        .map(|(l, &m)| ((l.norm_sqr() - m) / m).abs())
        .fold(0.0, f64::max)
}
