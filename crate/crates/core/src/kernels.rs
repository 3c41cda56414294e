//! Band-limiting kernels `E(w, x)` with their reproducing kernels
//! `S(x, y) = int_D E(w, y) conj(E(w, x)) dw`, Gauss-Legendre grids over
//! `D = [-tau, tau]^d`, and the admissibility checks a kernel must pass
//! before it is discretized.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{eig_selfadjoint, QMatrix};
use crate::quaternion::Quaternion;

/// Relative slack when testing `w in D`.
const DOMAIN_SLACK: f64 = 1e-12;

/// Tensor-product Gauss-Legendre rule on `[-tau, tau]^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    tau: f64,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn per_axis(&self) -> usize {
        self.axis_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Node `k`; in 2D `k = k1 * per_axis + k2`.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    /// The one-dimensional rule this grid is a tensor power of.
    pub fn axis_grid(&self) -> QuadratureGrid {
        QuadratureGrid {
            dim: 1,
            tau: self.tau,
            axis_nodes: self.axis_nodes.clone(),
            axis_weights: self.axis_weights.clone(),
            nodes: self.axis_nodes.clone(),
            weights: self.axis_weights.clone(),
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending, exactly
/// symmetric about the origin.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d.is_finite() {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

pub fn gauss_legendre_grid(dim: usize, tau: f64, n_per_axis: usize) -> Result<QuadratureGrid> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if n_per_axis < 2 {
        return Err(Error::InvalidGrid(format!(
            "at least 2 nodes per axis required, got {n_per_axis}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidGrid(format!("tau must be positive and finite, got {tau}")));
    }
    let (x, w) = gauss_legendre(n_per_axis);
    let axis_nodes: Vec<f64> = x.iter().map(|&v| v * tau).collect();
    let axis_weights: Vec<f64> = w.iter().map(|&v| v * tau).collect();
    let (nodes, weights) = if dim == 1 {
        (axis_nodes.clone(), axis_weights.clone())
    } else {
        let mut nodes = Vec::with_capacity(2 * n_per_axis * n_per_axis);
        let mut weights = Vec::with_capacity(n_per_axis * n_per_axis);
        for k1 in 0..n_per_axis {
            for k2 in 0..n_per_axis {
                nodes.push(axis_nodes[k1]);
                nodes.push(axis_nodes[k2]);
                weights.push(axis_weights[k1] * axis_weights[k2]);
            }
        }
        (nodes, weights)
    };
    Ok(QuadratureGrid {
        dim,
        tau,
        axis_nodes,
        axis_weights,
        nodes,
        weights,
    })
}

/// `sin(t) / t`, with a series branch near zero.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-6 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Kernel `E` sampled on a rectilinear grid over `(w, x)`, interpolated
/// multilinearly.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedKernel {
    dim: usize,
    tau: f64,
    /// `w1[, w2], x1[, x2]` coordinate axes, each strictly increasing.
    axes: Vec<Vec<f64>>,
    /// Row-major over `axes`, last axis fastest.
    values: Vec<Quaternion>,
    quad_nodes: usize,
}

/// Gauss-Legendre nodes per axis used to integrate tabulated kernels.
pub const TABULATED_QUAD_NODES: usize = 32;

impl TabulatedKernel {
    pub fn new(dim: usize, axes: Vec<Vec<f64>>, values: Vec<Quaternion>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidKernel(format!("dimension must be 1 or 2, got {dim}")));
        }
        if axes.len() != 2 * dim {
            return Err(Error::InvalidKernel(format!(
                "expected {} coordinate axes, got {}",
                2 * dim,
                axes.len()
            )));
        }
        for (a, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::InvalidKernel(format!("axis {a} needs at least 2 values")));
            }
            if axis.windows(2).any(|p| !(p[1] > p[0])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidKernel(format!("axis {a} must be strictly increasing")));
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(Error::InvalidKernel(format!(
                "table has {} values, grid needs {expected}",
                values.len()
            )));
        }
        if values.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidKernel("table contains non-finite values".into()));
        }
        let tau = *axes[0].last().unwrap();
        for axis in &axes[..dim] {
            let (lo, hi) = (axis[0], *axis.last().unwrap());
            let slack = 1e-9 * tau.abs().max(1.0);
            if !(tau > 0.0) || (lo + tau).abs() > slack || (hi - tau).abs() > slack {
                return Err(Error::InvalidKernel(
                    "w axes must span a symmetric interval [-tau, tau]".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            tau,
            axes,
            values,
            quad_nodes: TABULATED_QUAD_NODES,
        })
    }

    /// Builds the table from scattered rows `(coordinates, value)`, which must
    /// cover a full rectilinear grid exactly once.
    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, Quaternion)]) -> Result<Self> {
        let ncoord = 2 * dim;
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); ncoord];
        for (coords, _) in rows {
            if coords.len() != ncoord {
                return Err(Error::InvalidKernel(format!(
                    "expected {ncoord} coordinates per row, got {}",
                    coords.len()
                )));
            }
            for (axis, &c) in axes.iter_mut().zip(coords) {
                axis.push(c);
            }
        }
        for axis in &mut axes {
            axis.sort_by(|a, b| a.total_cmp(b));
            axis.dedup();
        }
        let total: usize = axes.iter().map(Vec::len).product();
        let mut values = vec![None; total];
        for (coords, q) in rows {
            let mut flat = 0;
            for (axis, c) in axes.iter().zip(coords) {
                let idx = axis.partition_point(|v| v < c);
                flat = flat * axis.len() + idx;
            }
            if values[flat].replace(*q).is_some() {
                return Err(Error::InvalidKernel(format!("duplicate table entry at {coords:?}")));
            }
        }
        let values: Option<Vec<Quaternion>> = values.into_iter().collect();
        let values = values.ok_or_else(|| {
            Error::InvalidKernel("table rows do not cover a complete rectilinear grid".into())
        })?;
        Self::new(dim, axes, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[Quaternion] {
        &self.values
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    pub fn with_quad_nodes(mut self, n: usize) -> Self {
        self.quad_nodes = n.max(2);
        self
    }

    /// Range `[lo, hi]` of the `x` coordinates along each axis.
    pub fn x_range(&self) -> Vec<(f64, f64)> {
        self.axes[self.dim..]
            .iter()
            .map(|a| (a[0], *a.last().unwrap()))
            .collect()
    }

    fn interpolate(&self, w: &[f64], x: &[f64]) -> Result<Quaternion> {
        let coords: Vec<f64> = w.iter().chain(x).copied().collect();
        let n = coords.len();
        let mut cell = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        for (axis, &c) in self.axes.iter().zip(&coords) {
            let (lo, hi) = (axis[0], *axis.last().unwrap());
            let slack = 1e-12 * (hi - lo);
            if !(c >= lo - slack && c <= hi + slack) {
                return Err(Error::OutsideTable { point: coords });
            }
            let i = axis.partition_point(|v| *v <= c).clamp(1, axis.len() - 1) - 1;
            let t = ((c - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            cell.push(i);
            frac.push(t);
        }
        let mut acc = Quaternion::ZERO;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut flat = 0;
            for a in 0..n {
                let bit = (corner >> (n - 1 - a)) & 1;
                weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.axes[a].len() + cell[a] + bit;
            }
            if weight != 0.0 {
                acc += self.values[flat] * weight;
            }
        }
        Ok(acc)
    }
}

/// A band-limiting kernel `E(w, x)` on `D x X` with `D = [-tau, tau]^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// `E(w, x) = sqrt(sigma / (2 pi tau)) exp(-i sigma x w / tau)`, so that
    /// `S(x, y) = sin(sigma (x - y)) / (pi (x - y))`.
    Sinc1D { sigma: f64, tau: f64 },
    /// `E(w, x) = (1 / 2tau) exp(-i sigma x1 w1 / tau) exp(-j sigma x2 w2 / tau)`.
    QftSeparable2D { sigma: f64, tau: f64 },
    Tabulated(TabulatedKernel),
}

impl KernelSpec {
    pub fn sinc1d(sigma: f64, tau: f64) -> Result<Self> {
        check_params(sigma, tau)?;
        Ok(Self::Sinc1D { sigma, tau })
    }

    pub fn qft2d(sigma: f64, tau: f64) -> Result<Self> {
        check_params(sigma, tau)?;
        Ok(Self::QftSeparable2D { sigma, tau })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sinc1D { .. } => "sinc1d",
            Self::QftSeparable2D { .. } => "qft2d",
            Self::Tabulated(_) => "tabulated",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Sinc1D { .. } => 1,
            Self::QftSeparable2D { .. } => 2,
            Self::Tabulated(t) => t.dim,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            Self::Sinc1D { tau, .. } | Self::QftSeparable2D { tau, .. } => *tau,
            Self::Tabulated(t) => t.tau,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            Self::Sinc1D { sigma, .. } | Self::QftSeparable2D { sigma, .. } => Some(*sigma),
            Self::Tabulated(_) => None,
        }
    }

    /// Default grid for this kernel with `n` nodes per axis.
    pub fn grid(&self, n: usize) -> Result<QuadratureGrid> {
        gauss_legendre_grid(self.dim(), self.tau(), n)
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        let tau = self.tau();
        w.len() == self.dim() && w.iter().all(|v| v.abs() <= tau * (1.0 + DOMAIN_SLACK))
    }

    /// `E(w, x)`; `w` must lie in `D`.
    pub fn eval_e(&self, w: &[f64], x: &[f64]) -> Result<Quaternion> {
        self.check_point(x)?;
        if !self.contains(w) {
            return Err(Error::OutsideDomain {
                point: w.to_vec(),
                tau: self.tau(),
            });
        }
        self.e_unchecked(w, x)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn e_unchecked(&self, w: &[f64], x: &[f64]) -> Result<Quaternion> {
        Ok(match self {
            Self::Sinc1D { sigma, tau } => {
                let scale = (sigma / (2.0 * PI * tau)).sqrt();
                Quaternion::cis_unchecked(Quaternion::I, -sigma * x[0] * w[0] / tau) * scale
            }
            Self::QftSeparable2D { sigma, tau } => {
                let a = Quaternion::cis_unchecked(Quaternion::I, -sigma * x[0] * w[0] / tau);
                let b = Quaternion::cis_unchecked(Quaternion::J, -sigma * x[1] * w[1] / tau);
                (a * b) * (0.5 / tau)
            }
            Self::Tabulated(t) => t.interpolate(w, x)?,
        })
    }

    /// `conj(E(w_k, x))` for every node `w_k` of `grid`.
    pub fn conj_e_row(&self, grid: &QuadratureGrid, x: &[f64]) -> Result<Vec<Quaternion>> {
        self.check_point(x)?;
        self.check_grid(grid)?;
        match self {
            Self::Sinc1D { sigma, tau } => {
                let scale = (sigma / (2.0 * PI * tau)).sqrt();
                Ok(grid
                    .axis_nodes()
                    .iter()
                    .map(|&w| Quaternion::cis_unchecked(Quaternion::I, sigma * x[0] * w / tau) * scale)
                    .collect())
            }
            Self::QftSeparable2D { sigma, tau } => {
                // conj(a b) = conj(b) conj(a), separable over the two axes
                let ei: Vec<Quaternion> = grid
                    .axis_nodes()
                    .iter()
                    .map(|&w| Quaternion::cis_unchecked(Quaternion::I, sigma * x[0] * w / tau))
                    .collect();
                let ej: Vec<Quaternion> = grid
                    .axis_nodes()
                    .iter()
                    .map(|&w| Quaternion::cis_unchecked(Quaternion::J, sigma * x[1] * w / tau) * (0.5 / tau))
                    .collect();
                let mut out = Vec::with_capacity(grid.len());
                for a in &ei {
                    for b in &ej {
                        out.push(*b * *a);
                    }
                }
                Ok(out)
            }
            Self::Tabulated(t) => (0..grid.len())
                .map(|k| Ok(t.interpolate(grid.node(k), x)?.conj()))
                .collect(),
        }
    }

    pub(crate) fn check_grid(&self, grid: &QuadratureGrid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::InvalidGrid(format!(
                "grid dimension {} does not match kernel dimension {}",
                grid.dim(),
                self.dim()
            )));
        }
        let tau = self.tau();
        if (grid.tau() - tau).abs() > 1e-12 * tau {
            return Err(Error::InvalidGrid(format!(
                "grid half-width {} does not match kernel tau {tau}",
                grid.tau()
            )));
        }
        Ok(())
    }

    /// `S(x, y)`: closed form for the built-in kernels, quadrature otherwise.
    pub fn eval_s(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(match self {
            Self::Sinc1D { sigma, .. } => sigma / PI * sinc(sigma * (x[0] - y[0])),
            Self::QftSeparable2D { sigma, .. } => {
                sinc(sigma * (x[0] - y[0])) * sinc(sigma * (x[1] - y[1]))
            }
            Self::Tabulated(t) => {
                let grid = gauss_legendre_grid(t.dim, t.tau, t.quad_nodes)?;
                self.s_quadrature(&grid, x, y)?.w
            }
        })
    }

    /// `sum_k c_k E(w_k, y) conj(E(w_k, x))`.
    pub fn s_quadrature(&self, grid: &QuadratureGrid, x: &[f64], y: &[f64]) -> Result<Quaternion> {
        let cx = self.conj_e_row(grid, x)?;
        let cy = self.conj_e_row(grid, y)?;
        let mut acc = Quaternion::ZERO;
        for k in 0..grid.len() {
            acc += cy[k].conj() * cx[k] * grid.weight(k);
        }
        Ok(acc)
    }

    /// `sum_k c_k conj(E(w_k, x)) E(w_k, y)`, the other integration order.
    pub fn s_quadrature_swapped(&self, grid: &QuadratureGrid, x: &[f64], y: &[f64]) -> Result<Quaternion> {
        let cx = self.conj_e_row(grid, x)?;
        let cy = self.conj_e_row(grid, y)?;
        let mut acc = Quaternion::ZERO;
        for k in 0..grid.len() {
            acc += cx[k] * cy[k].conj() * grid.weight(k);
        }
        Ok(acc)
    }

    /// Spacing `pi / sigma` of the sampling lattice `{E(., x_n)}`.
    pub fn lattice_spacing(&self) -> Result<f64> {
        match self.sigma() {
            Some(sigma) => Ok(PI / sigma),
            None => Err(Error::NoLattice(self.name().into())),
        }
    }

    /// Weight `1 / S(x_n, x_n)` that makes the lattice kernels orthonormal.
    pub fn lattice_weight(&self) -> Result<f64> {
        match self {
            Self::Sinc1D { sigma, .. } => Ok(PI / sigma),
            Self::QftSeparable2D { .. } => Ok(1.0),
            Self::Tabulated(_) => Err(Error::NoLattice(self.name().into())),
        }
    }

    /// Box used to draw random points of `X` in randomized checks.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Tabulated(t) => t.x_range(),
            _ => {
                let r = 4.0 * self.tau();
                vec![(-r, r); self.dim()]
            }
        }
    }
}

fn check_params(sigma: f64, tau: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidKernel(format!("sigma must be positive, got {sigma}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidKernel(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Symmetrized Nystrom matrix `T[k][j] = sqrt(c_k c_j) conj(E(w_k, w_j))`.
pub fn transform_matrix(spec: &KernelSpec, grid: &QuadratureGrid) -> Result<QMatrix> {
    spec.check_grid(grid)?;
    let n = grid.len();
    let sq: Vec<f64> = grid.weights().iter().map(|c| c.sqrt()).collect();
    let mut data = Vec::with_capacity(n * n);
    for k in 0..n {
        for j in 0..n {
            let e = spec.e_unchecked(grid.node(k), grid.node(j))?;
            data.push(e.conj() * (sq[k] * sq[j]));
        }
    }
    QMatrix::new(n, n, data)
}

/// One admissibility condition and how it fared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    /// Measured quantity: worst violation, or for totality the singular
    /// value ratio.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub kernel: String,
    pub trials: usize,
    pub checks: Vec<ConditionCheck>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const TOTALITY_THRESHOLD: f64 = 1e-12;
pub const REAL_KERNEL_TOL: f64 = 1e-11;
pub const ORDER_TOL: f64 = 1e-11;
/// Nodes per axis of the grid on which totality is measured.
pub const TOTALITY_NODES: usize = 4;

/// Randomized check of the four kernel conditions:
/// 1. `E(w, x) = E(x, w)`;
/// 2. totality, as the singular value ratio of the Nystrom matrix on a
///    coarse grid;
/// 3. `S(x, y)` real;
/// 4. both integration orders of `S` agree.
pub fn check_admissibility(
    spec: &KernelSpec,
    grid: &QuadratureGrid,
    trials: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    spec.check_grid(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let tau = spec.tau();
    let x_box = spec.sample_box();
    // symmetric pairs must be valid as both w and x arguments
    let sym_box: Vec<(f64, f64)> = x_box
        .iter()
        .map(|&(lo, hi)| (lo.max(-tau), hi.min(tau)))
        .collect();
    let draw = |rng: &mut ChaCha8Rng, b: &[(f64, f64)]| -> Vec<f64> {
        b.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
    };

    let mut sym_worst: f64 = 0.0;
    let mut e_scale: f64 = 0.0;
    let mut real_worst: f64 = 0.0;
    let mut order_worst: f64 = 0.0;
    let mut s_scale: f64 = 1.0;
    for _ in 0..trials {
        let a = draw(&mut rng, &sym_box);
        let b = draw(&mut rng, &sym_box);
        let eab = spec.e_unchecked(&a, &b)?;
        let eba = spec.e_unchecked(&b, &a)?;
        sym_worst = sym_worst.max((eab - eba).norm());
        e_scale = e_scale.max(eab.norm()).max(eba.norm());

        let x = draw(&mut rng, &x_box);
        let y = draw(&mut rng, &x_box);
        let s1 = spec.s_quadrature(grid, &x, &y)?;
        let s2 = spec.s_quadrature_swapped(grid, &x, &y)?;
        s_scale = s_scale.max(s1.norm());
        real_worst = real_worst.max(s1.vector_norm());
        order_worst = order_worst.max((s1 - s2).norm());
    }
    let sym_rel = if e_scale > 0.0 { sym_worst / e_scale } else { sym_worst };

    let coarse = gauss_legendre_grid(dim, tau, TOTALITY_NODES.min(grid.per_axis()))?;
    let t = transform_matrix(spec, &coarse)?;
    let mu = eig_selfadjoint(&t.adjoint_self_product())?.mu();
    let top = mu.first().copied().unwrap_or(0.0);
    let bottom = mu.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let ratio = if top > 0.0 { (bottom / top).sqrt() } else { 0.0 };

    let checks = vec![
        ConditionCheck {
            name: "condition-1 symmetry".into(),
            value: sym_rel,
            threshold: SYMMETRY_TOL,
            passed: sym_rel <= SYMMETRY_TOL,
        },
        ConditionCheck {
            name: "condition-2 totality".into(),
            value: ratio,
            threshold: TOTALITY_THRESHOLD,
            passed: ratio >= TOTALITY_THRESHOLD,
        },
        ConditionCheck {
            name: "condition-3 real kernel".into(),
            value: real_worst / s_scale,
            threshold: REAL_KERNEL_TOL,
            passed: real_worst / s_scale <= REAL_KERNEL_TOL,
        },
        ConditionCheck {
            name: "condition-4 integration order".into(),
            value: order_worst / s_scale,
            threshold: ORDER_TOL,
            passed: order_worst / s_scale <= ORDER_TOL,
        },
    ];
    Ok(AdmissibilityReport {
        kernel: spec.name().into(),
        trials,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn two_point_rule() {
        let g = gauss_legendre_grid(1, 1.0, 2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(close(g.node(0)[0], -s, 1e-15) && close(g.node(1)[0], s, 1e-15));
        assert!(close(g.weight(0), 1.0, 1e-15) && close(g.weight(1), 1.0, 1e-15));
        let x2: f64 = (0..2).map(|k| g.weight(k) * g.node(k)[0].powi(2)).sum();
        assert!(close(x2, 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn weights_integrate_constants_and_polynomials() {
        let g = gauss_legendre_grid(2, 1.0, 16).unwrap();
        assert!(close(g.weights().iter().sum(), 4.0, 1e-13));
        assert_eq!(g.len(), 256);
        let g = gauss_legendre_grid(1, 2.0, 8).unwrap();
        let x4: f64 = (0..8).map(|k| g.weight(k) * g.node(k)[0].powi(4)).sum();
        assert!(close(x4, 64.0 / 5.0, 1e-12));
        for n in [3, 17, 64, 200] {
            let g = gauss_legendre_grid(1, 1.5, n).unwrap();
            let sum: f64 = g.weights().iter().sum();
            assert!(close(sum, 3.0, 3e-12 * 3.0), "n={n}");
            assert!(g.axis_nodes().iter().all(|x| x.abs() < 1.5));
            // degree 2n-1 exactness
            let p: f64 = (0..n).map(|k| g.weight(k) * g.node(k)[0].powi(2 * (n as i32) - 2)).sum();
            let exact = 2.0 * 1.5f64.powi(2 * n as i32 - 1) / (2 * n - 1) as f64;
            assert!(((p - exact) / exact).abs() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(gauss_legendre_grid(1, 1.0, 1).is_err());
        assert!(gauss_legendre_grid(3, 1.0, 4).is_err());
        assert!(gauss_legendre_grid(1, 0.0, 4).is_err());
        assert!(gauss_legendre_grid(2, f64::NAN, 4).is_err());
    }

    #[test]
    fn nodes_are_symmetric() {
        let g = gauss_legendre_grid(1, 1.0, 33).unwrap();
        let n = g.per_axis();
        for k in 0..n {
            assert_eq!(g.axis_nodes()[k], -g.axis_nodes()[n - 1 - k]);
            assert_eq!(g.axis_weights()[k], g.axis_weights()[n - 1 - k]);
        }
    }

    #[test]
    fn sinc_branches() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(close(sinc(1e-7), 1.0, 1e-14));
        assert!(close(sinc(PI), 0.0, 1e-16));
        let t = 1.1e-6;
        assert!(close(sinc(t), t.sin() / t, 1e-16));
    }

    #[test]
    fn qft_e_examples() {
        let spec = KernelSpec::qft2d(1.3, 0.7).unwrap();
        let e = spec.eval_e(&[0.0, 0.0], &[3.0, -2.0]).unwrap();
        assert!((e - Quaternion::real(1.0 / 1.4)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let x = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let e = spec.eval_e(&w, &x).unwrap();
            assert!(close(e.norm(), 1.0 / 1.4, 1e-15));
            assert!((e - spec.eval_e(&x, &w).unwrap()).norm() < 1e-15);
        }
        assert!(matches!(
            spec.eval_e(&[0.8, 0.0], &[0.0, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn qft_e_factor_order() {
        let spec = KernelSpec::qft2d(1.0, 1.0).unwrap();
        let e = spec.eval_e(&[1.0, 1.0], &[PI / 2.0, PI / 2.0]).unwrap();
        // (1/2) (-i)(-j) = k/2
        assert!((e - Quaternion::K * 0.5).norm() < 1e-15);
    }

    #[test]
    fn s_examples() {
        let spec = KernelSpec::qft2d(2.0, 1.0).unwrap();
        assert_eq!(spec.eval_s(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
        let h = PI / 2.0;
        for (n, m) in [((0, 0), (1, 0)), ((1, 2), (1, -1)), ((-3, 2), (4, 4))] {
            let x = [n.0 as f64 * h, n.1 as f64 * h];
            let y = [m.0 as f64 * h, m.1 as f64 * h];
            assert!(spec.eval_s(&x, &y).unwrap().abs() < 1e-15);
        }
        let s1 = KernelSpec::sinc1d(PI, 1.0).unwrap();
        assert!(close(s1.eval_s(&[0.5], &[0.5]).unwrap(), 1.0, 1e-15));
        assert!(close(
            s1.eval_s(&[0.3], &[1.1]).unwrap(),
            (PI * 0.8).sin() / (PI * 0.8),
            1e-15
        ));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = KernelSpec::qft2d(1.7, 1.2).unwrap();
        let grid = spec.grid(64).unwrap();
        for _ in 0..20 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let q = spec.s_quadrature(&grid, &x, &y).unwrap();
            assert!((q.w - spec.eval_s(&x, &y).unwrap()).abs() < 1e-10);
            assert!(q.vector_norm() < 1e-11);
        }
        let spec = KernelSpec::sinc1d(PI, 1.0).unwrap();
        let grid = spec.grid(64).unwrap();
        for _ in 0..20 {
            let x = [rng.random_range(-5.0..5.0)];
            let y = [rng.random_range(-5.0..5.0)];
            let q = spec.s_quadrature(&grid, &x, &y).unwrap();
            assert!((q.w - spec.eval_s(&x, &y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_converges_spectrally() {
        let spec = KernelSpec::qft2d(3.0, 1.0).unwrap();
        let (x, y) = ([1.3, -0.4], [-0.9, 2.2]);
        let exact = spec.eval_s(&x, &y).unwrap();
        let err = |n| (spec.s_quadrature(&spec.grid(n).unwrap(), &x, &y).unwrap().w - exact).abs();
        let (e8, e16, e32) = (err(8), err(16), err(32));
        assert!(e16 < e8);
        assert!(e32 <= 1e-3 * e16.max(1e-300) || e32 < 1e-14, "{e16} {e32}");
    }

    #[test]
    fn sinc_quadrature_matrix_is_psd() {
        let spec = KernelSpec::sinc1d(2.0, 1.5).unwrap();
        let grid = spec.grid(24).unwrap();
        let n = grid.len();
        let m = QMatrix::from_fn(n, n, |a, b| {
            let s = spec.eval_s(grid.node(a), grid.node(b)).unwrap();
            Quaternion::real(s * (grid.weight(a) * grid.weight(b)).sqrt())
        });
        let s = eig_selfadjoint(&m).unwrap();
        assert!(s.eigenvalues.iter().all(|l| l.w >= -1e-10));
    }

    #[test]
    fn builtins_are_admissible() {
        for spec in [
            KernelSpec::qft2d(1.0, 1.0).unwrap(),
            KernelSpec::qft2d(3.5, 0.4).unwrap(),
            KernelSpec::sinc1d(PI, 1.0).unwrap(),
        ] {
            let grid = spec.grid(12).unwrap();
            let report = check_admissibility(&spec, &grid, 50, 3).unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    fn table_from_fn(f: impl Fn(f64, f64) -> Quaternion) -> TabulatedKernel {
        let axis: Vec<f64> = (0..=40).map(|k| -1.0 + k as f64 * 0.05).collect();
        let mut values = Vec::new();
        for &w in &axis {
            for &x in &axis {
                values.push(f(w, x));
            }
        }
        TabulatedKernel::new(1, vec![axis.clone(), axis], values).unwrap()
    }

    #[test]
    fn tabulated_interpolation_is_exact_for_bilinear_data() {
        let t = table_from_fn(|w, x| Quaternion::new(1.0 + w, x, w * x, 2.0));
        let spec = KernelSpec::Tabulated(t);
        let e = spec.eval_e(&[0.123], &[-0.777]).unwrap();
        let want = Quaternion::new(1.123, -0.777, 0.123 * -0.777, 2.0);
        assert!((e - want).norm() < 1e-14);
        assert!(matches!(
            spec.eval_e(&[0.0], &[1.5]),
            Err(Error::OutsideTable { .. })
        ));
    }

    #[test]
    fn tabulated_sinc_is_admissible() {
        let t = table_from_fn(|w, x| Quaternion::from_complex_i(num_complex::Complex64::from_polar(0.5f64.sqrt(), -w * x)));
        let spec = KernelSpec::Tabulated(t);
        let grid = spec.grid(16).unwrap();
        let report = check_admissibility(&spec, &grid, 30, 4).unwrap();
        assert!(report.checks[0].passed, "{report:?}");
        assert!(report.checks[1].passed, "{report:?}");
    }

    #[test]
    fn asymmetric_table_fails_condition_one() {
        let t = table_from_fn(|w, x| Quaternion::new(1.0 + w, 0.3 * x, 0.0, 0.0));
        let spec = KernelSpec::Tabulated(t);
        let grid = spec.grid(8).unwrap();
        let report = check_admissibility(&spec, &grid, 20, 5).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures()[0].name, "condition-1 symmetry");
    }

    #[test]
    fn from_rows_requires_complete_grid() {
        let rows = vec![
            (vec![-1.0, 0.0], Quaternion::ONE),
            (vec![1.0, 0.0], Quaternion::ONE),
            (vec![-1.0, 1.0], Quaternion::ONE),
        ];
        assert!(TabulatedKernel::from_rows(1, &rows).is_err());
        let mut rows = rows;
        rows.push((vec![1.0, 1.0], Quaternion::I));
        let t = TabulatedKernel::from_rows(1, &rows).unwrap();
        assert_eq!(t.tau(), 1.0);
        assert_eq!(t.interpolate(&[1.0], &[1.0]).unwrap(), Quaternion::I);
    }

    /// `conj(a b)` taken as `conj(a) conj(b)`: wrong for quaternions.
    fn naive_conj_e(spec: &KernelSpec, w: &[f64], x: &[f64]) -> Quaternion {
        let KernelSpec::QftSeparable2D { sigma, tau } = spec else {
            unreachable!()
        };
        let a = Quaternion::cis_unchecked(Quaternion::I, -sigma * x[0] * w[0] / tau);
        let b = Quaternion::cis_unchecked(Quaternion::J, -sigma * x[1] * w[1] / tau);
        a.conj() * b.conj() * (0.5 / tau)
    }

    #[test]
    fn naive_conjugation_is_detected() {
        let spec = KernelSpec::qft2d(2.0, 1.0).unwrap();
        let grid = spec.grid(24).unwrap();
        let (x, y) = ([0.7, -1.3], [-0.4, 0.9]);
        let exact = spec.eval_s(&x, &y).unwrap();
        let mut naive = Quaternion::ZERO;
        for k in 0..grid.len() {
            let w = grid.node(k);
            naive += spec.eval_e(w, &y).unwrap() * naive_conj_e(&spec, w, &x) * grid.weight(k);
        }
        assert!((naive.w - exact).abs() > 0.1, "{naive} vs {exact}");
        let good = spec.s_quadrature(&grid, &x, &y).unwrap();
        assert!((good.w - exact).abs() < 1e-12);
    }

    #[test]
    fn condition_four_detects_order_dependence() {
        // symmetric in (w, x) but with generic quaternion values
        let axis: Vec<f64> = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = axis.len();
        let mut raw = vec![Quaternion::ZERO; n * n * n * n];
        for v in raw.iter_mut() {
            *v = Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
        }
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        let mut values = vec![Quaternion::ZERO; raw.len()];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        values[idx(a, b, c, d)] = (raw[idx(a, b, c, d)] + raw[idx(c, d, a, b)]) * 0.5;
                    }
                }
            }
        }
        let t = TabulatedKernel::new(2, vec![axis.clone(), axis.clone(), axis.clone(), axis], values).unwrap();
        let spec = KernelSpec::Tabulated(t);
        let grid = spec.grid(6).unwrap();
        let report = check_admissibility(&spec, &grid, 20, 7).unwrap();
        assert!(report.checks[0].passed);
        assert!(!report.checks[3].passed, "{report:?}");
    }
}
