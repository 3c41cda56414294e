//! Band-limited signals `f = T F`, lattice sampling, the WSK and PSQWS
//! sampling series, discrete orthogonality, the trace identity and energy
//! concentration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, QuadratureGrid};
use crate::nystrom::{kernel_trace, PsqwsBasis};
use crate::qlinalg::QVector;
use crate::quaternion::{pairwise_sum, Quaternion};

/// `f(x) = sum_k c_k F(w_k) conj(E(w_k, x))`, the quadrature form of `T F`.
#[derive(Clone, Debug)]
pub struct BandlimitedSignal {
    spec: KernelSpec,
    grid: QuadratureGrid,
    coeffs: QVector,
}

impl BandlimitedSignal {
    pub fn new(spec: &KernelSpec, grid: &QuadratureGrid, coeffs: QVector) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        if grid.dim() != spec.dim() {
            return Err(Error::InvalidGrid(format!(
                "grid dimension {} does not match kernel dimension {}",
                grid.dim(),
                spec.dim()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Signal whose spectral function is the grid eigenfunction `Phi_n`, so
    /// that `f = phi_n`.
    pub fn from_mode(basis: &PsqwsBasis, n: usize) -> Result<Self> {
        Self::new(basis.spec(), basis.grid(), basis.eigenvector(n)?)
    }

    /// `F = sum_n a_n Phi_n` over the first `count` modes with seeded
    /// coefficients `a_n` (components uniform in `[-1, 1]`).
    pub fn random_combination(basis: &PsqwsBasis, count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = QVector::zeros(basis.grid().len());
        for n in 0..count {
            let a = random_quaternion(&mut rng);
            acc = acc.add(&basis.eigenvector(n)?.scale_left(a));
        }
        Self::new(basis.spec(), basis.grid(), acc)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// Spectral function values `F(w_k)`.
    pub fn coeffs(&self) -> &QVector {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> Result<Quaternion> {
        let row = self.spec.conj_e_row(&self.grid, x)?;
        let terms: Vec<Quaternion> = (0..self.grid.len())
            .map(|k| self.coeffs[k] * row[k] * self.grid.weight(k))
            .collect();
        Ok(pairwise_sum(&terms))
    }

    pub fn scale_left(&self, q: Quaternion) -> Self {
        Self {
            spec: self.spec.clone(),
            grid: self.grid.clone(),
            coeffs: self.coeffs.scale_left(q),
        }
    }

    /// `(f, g)_H = sum_k c_k F(w_k) conj(G(w_k))`.
    pub fn h_inner(&self, other: &Self) -> Result<Quaternion> {
        if other.coeffs.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.len(),
                got: other.coeffs.len(),
            });
        }
        Ok(weighted_inner(&self.grid, &self.coeffs, &other.coeffs))
    }

    pub fn h_norm_sqr(&self) -> f64 {
        weighted_inner(&self.grid, &self.coeffs, &self.coeffs).w
    }
}

fn weighted_inner(grid: &QuadratureGrid, a: &QVector, b: &QVector) -> Quaternion {
    let terms: Vec<Quaternion> = (0..grid.len())
        .map(|k| a[k] * b[k].conj() * grid.weight(k))
        .collect();
    pairwise_sum(&terms)
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    )
}

/// Seeded random spectral function with components uniform in `[-1, 1]`.
pub fn synth(spec: &KernelSpec, grid: &QuadratureGrid, seed: u64) -> Result<BandlimitedSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = QVector::new((0..grid.len()).map(|_| random_quaternion(&mut rng)).collect());
    BandlimitedSignal::new(spec, grid, coeffs)
}

/// Seeded smooth random spectral function
/// `F(w) = prod_a (1 - (w_a/tau)^2)^2 sum_p a_p prod_a P_{p_a}(w_a/tau)`
/// over Legendre degrees `p_a < degree`, coefficient components uniform in
/// `[-1, 1]`. `F` vanishes to second order at the band edge, so `f = T F`
/// decays like `|x|^-3` along each axis.
pub fn synth_smooth(spec: &KernelSpec, grid: &QuadratureGrid, seed: u64, degree: usize) -> Result<BandlimitedSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let terms = degree.pow(dim as u32);
    let coeffs: Vec<Quaternion> = (0..terms).map(|_| random_quaternion(&mut rng)).collect();
    let tau = grid.tau();
    let values = (0..grid.len())
        .map(|k| {
            let w = grid.node(k);
            let legendre: Vec<Vec<f64>> = w.iter().map(|&t| legendre_values(t / tau, degree)).collect();
            let taper: f64 = w.iter().map(|&t| (1.0 - (t / tau).powi(2)).powi(2)).product();
            let mut acc = Quaternion::ZERO;
            for (idx, &a) in coeffs.iter().enumerate() {
                let (p0, p1) = (idx % degree, idx / degree);
                let basis = if dim == 1 { legendre[0][p0] } else { legendre[0][p1] * legendre[1][p0] };
                acc += a * (taper * basis);
            }
            acc
        })
        .collect();
    BandlimitedSignal::new(spec, grid, QVector::new(values))
}

/// `P_0(t), ..., P_{count-1}(t)` by the three-term recurrence.
fn legendre_values(t: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let (mut prev, mut cur) = (0.0, 1.0);
    for p in 0..count {
        out.push(cur);
        let next = ((2 * p + 1) as f64 * t * cur - p as f64 * prev) / (p + 1) as f64;
        prev = cur;
        cur = next;
    }
    out
}

/// Point samples `f(x_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<Quaternion>,
    n_max: Option<usize>,
}

impl SampledSignal {
    /// Validates that points are distinct, finite and of one dimension and
    /// that values are finite.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<Quaternion>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let dim = points.first().map_or(1, Vec::len);
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidGrid(format!("sample points must have 1 or 2 coordinates, got {dim}")));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidGrid(format!("non-finite sample point {p:?}")));
            }
        }
        if let Some(v) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample value at index {v}")));
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::InvalidGrid(format!("duplicate sample point {:?}", pair[0])));
        }
        Ok(Self {
            dim,
            points,
            values,
            n_max: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[Quaternion] {
        &self.values
    }

    /// Lattice truncation radius when produced by [`sample_lattice`].
    pub fn n_max(&self) -> Option<usize> {
        self.n_max
    }

    /// Restriction of lattice samples of `spec` to `|n_axis| <= n_max`.
    pub fn truncated(&self, spec: &KernelSpec, n_max: usize) -> Result<Self> {
        let h = spec.lattice_spacing()?;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.points[i].iter().all(|&c| (c / h).round().abs() <= n_max as f64))
            .collect();
        Ok(Self {
            dim: self.dim,
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            n_max: Some(self.n_max.map_or(n_max, |m| m.min(n_max))),
        })
    }

    pub fn scale_left(&self, q: Quaternion) -> Self {
        Self {
            values: self.values.iter().map(|&v| q * v).collect(),
            ..self.clone()
        }
    }
}

/// Integer lattice indices with `|n_axis| <= n_max`, row-major in 2D.
pub fn lattice_indices(dim: usize, n_max: usize) -> Vec<Vec<i64>> {
    let r = n_max as i64;
    match dim {
        1 => (-r..=r).map(|n| vec![n]).collect(),
        _ => (-r..=r)
            .flat_map(|a| (-r..=r).map(move |b| vec![a, b]))
            .collect(),
    }
}

/// Lattice point `x_n = (pi / sigma) n`.
pub fn lattice_point(spec: &KernelSpec, index: &[i64]) -> Result<Vec<f64>> {
    let h = spec.lattice_spacing()?;
    Ok(index.iter().map(|&n| h * n as f64).collect())
}

/// Samples an arbitrary function on the lattice of `spec`.
pub fn sample_lattice_with(
    spec: &KernelSpec,
    n_max: usize,
    mut f: impl FnMut(&[f64]) -> Result<Quaternion>,
) -> Result<SampledSignal> {
    spec.lattice_weight()?;
    let points: Vec<Vec<f64>> = lattice_indices(spec.dim(), n_max)
        .iter()
        .map(|n| lattice_point(spec, n))
        .collect::<Result<_>>()?;
    let values = points.iter().map(|p| f(p)).collect::<Result<_>>()?;
    let mut s = SampledSignal::new(points, values)?;
    s.n_max = Some(n_max);
    Ok(s)
}

pub fn sample_lattice(f: &BandlimitedSignal, n_max: usize) -> Result<SampledSignal> {
    sample_lattice_with(f.spec(), n_max, |x| f.eval(x))
}

/// `w sum_n f(x_n) S(x, x_n)` with `w = 1 / S(x_n, x_n)` the lattice weight.
pub fn reconstruct_wsk(s: &SampledSignal, spec: &KernelSpec, x: &[f64]) -> Result<Quaternion> {
    if x.len() != spec.dim() || s.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: if x.len() != spec.dim() { x.len() } else { s.dim() },
        });
    }
    let weight = spec.lattice_weight()?;
    let terms: Vec<Quaternion> = s
        .points
        .iter()
        .zip(&s.values)
        .map(|(p, &v)| Ok(v * (weight * spec.eval_s(x, p)?)))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// Inner sums `c_n = w sum_m f(x_m) conj(phi_n(x_m))` for the first `modes`.
pub fn psqws_coefficients(s: &SampledSignal, basis: &PsqwsBasis, modes: usize) -> Result<Vec<Quaternion>> {
    let weight = basis.spec().lattice_weight()?;
    let mut columns: Vec<Vec<Quaternion>> = vec![Vec::with_capacity(s.len()); modes];
    for (p, &v) in s.points.iter().zip(&s.values) {
        let phi = basis.mode_values(p, modes)?;
        for (col, ph) in columns.iter_mut().zip(phi) {
            col.push(v * ph.conj());
        }
    }
    Ok(columns.iter().map(|c| pairwise_sum(c) * weight).collect())
}

/// `sum_n c_n phi_n(x)` from precomputed coefficients.
pub fn psqws_series(coefficients: &[Quaternion], basis: &PsqwsBasis, x: &[f64]) -> Result<Quaternion> {
    let phi = basis.mode_values(x, coefficients.len())?;
    let terms: Vec<Quaternion> = coefficients.iter().zip(phi).map(|(&c, p)| c * p).collect();
    Ok(pairwise_sum(&terms))
}

/// `sum_{n < modes} (w sum_m f(x_m) conj(phi_n(x_m))) phi_n(x)`.
pub fn reconstruct_psqws(s: &SampledSignal, basis: &PsqwsBasis, x: &[f64], modes: usize) -> Result<Quaternion> {
    let c = psqws_coefficients(s, basis, modes)?;
    psqws_series(&c, basis, x)
}

/// `w sum_{n < modes} conj(phi_n(x_l)) phi_n(x_m)` for lattice indices `l`, `m`.
pub fn discrete_orthogonality(basis: &PsqwsBasis, l: &[i64], m: &[i64], modes: usize) -> Result<Quaternion> {
    let spec = basis.spec();
    let weight = spec.lattice_weight()?;
    let a = basis.mode_values(&lattice_point(spec, l)?, modes)?;
    let b = basis.mode_values(&lattice_point(spec, m)?, modes)?;
    let terms: Vec<Quaternion> = a.iter().zip(&b).map(|(p, &q)| p.conj() * q).collect();
    Ok(pairwise_sum(&terms) * weight)
}

/// Discrete orthogonality over all lattice pairs within `radius`, per
/// truncation level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub radius: usize,
    pub levels: Vec<usize>,
    /// `max_l (1 - w sum_n |phi_n(x_l)|^2)`, non-increasing in the level and
    /// a bound for every entry of the error matrix.
    pub diagonal_defect: Vec<f64>,
    /// `max_{l,m} |w sum_n conj(phi_n(x_l)) phi_n(x_m) - delta_lm|`.
    pub max_error: Vec<f64>,
}

pub fn orthogonality_report(basis: &PsqwsBasis, radius: usize, levels: &[usize]) -> Result<OrthogonalityReport> {
    let spec = basis.spec();
    let weight = spec.lattice_weight()?;
    let top = levels.iter().copied().max().unwrap_or(0);
    let values: Vec<Vec<Quaternion>> = lattice_indices(spec.dim(), radius)
        .iter()
        .map(|n| basis.mode_values(&lattice_point(spec, n)?, top))
        .collect::<Result<_>>()?;
    let mut report = OrthogonalityReport {
        radius,
        levels: levels.to_vec(),
        diagonal_defect: Vec::with_capacity(levels.len()),
        max_error: Vec::with_capacity(levels.len()),
    };
    for &level in levels {
        let mut diag: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for (l, a) in values.iter().enumerate() {
            for (m, b) in values.iter().enumerate().skip(l) {
                let terms: Vec<Quaternion> = (0..level).map(|n| a[n].conj() * b[n]).collect();
                let g = pairwise_sum(&terms) * weight;
                let delta = if l == m { Quaternion::ONE } else { Quaternion::ZERO };
                worst = worst.max((g - delta).norm());
                if l == m {
                    diag = diag.max(1.0 - g.w);
                }
            }
        }
        report.diagonal_defect.push(diag);
        report.max_error.push(worst);
    }
    Ok(report)
}

/// `beta_f` computed two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRatio {
    /// `sum |a_n|^2 mu_n / sum |a_n|^2` with `a_n = <F, Phi_n>`.
    pub coefficient: f64,
    /// `sum_k c_k |f(w_k)|^2 / sum_k c_k |F(w_k)|^2`.
    pub quadrature: f64,
}

/// `beta_f = |f|^2_{L2(D)} / |f|^2_H`. The coefficient form is exact only
/// when `basis` retains every mode of the grid.
pub fn concentration_ratio(f: &BandlimitedSignal, basis: &PsqwsBasis) -> Result<ConcentrationRatio> {
    let grid = f.grid();
    if grid.len() != basis.grid().len() {
        return Err(Error::DimensionMismatch {
            expected: basis.grid().len(),
            got: grid.len(),
        });
    }
    let h = f.h_norm_sqr();
    if !(h > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..basis.len() {
        let a = weighted_inner(grid, f.coeffs(), &basis.eigenvector(n)?).norm_sqr();
        num += a * basis.mu()[n];
        den += a;
    }
    if !(den > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut d = 0.0;
    for k in 0..grid.len() {
        d += grid.weight(k) * f.eval(grid.node(k))?.norm_sqr();
    }
    Ok(ConcentrationRatio {
        coefficient: num / den,
        quadrature: d / h,
    })
}

/// `(sum_k c_k S(w_k, w_k), sum of every discrete mu)`.
pub fn trace_identity(basis: &PsqwsBasis) -> Result<(f64, f64)> {
    let lhs = kernel_trace(basis.spec(), basis.grid())?;
    Ok((lhs, basis.all_mu().iter().sum()))
}

/// `(f, g)_H` from the basis coefficients: `sum_n a_n conj(b_n)`.
pub fn h_inner_from_coefficients(f: &BandlimitedSignal, g: &BandlimitedSignal, basis: &PsqwsBasis) -> Result<Quaternion> {
    let grid = f.grid();
    let terms: Vec<Quaternion> = (0..basis.len())
        .map(|n| {
            let phi = basis.eigenvector(n)?;
            let a = weighted_inner(grid, f.coeffs(), &phi);
            let b = weighted_inner(grid, g.coeffs(), &phi);
            Ok(a * b.conj())
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// Truncated lattice Parseval sum `w sum_n f(x_n) conj(g(x_n))`.
pub fn lattice_parseval(spec: &KernelSpec, f: &SampledSignal, g: &SampledSignal) -> Result<Quaternion> {
    if f.points != g.points {
        return Err(Error::InvalidGrid("samples are on different point sets".into()));
    }
    let weight = spec.lattice_weight()?;
    let terms: Vec<Quaternion> = f.values.iter().zip(&g.values).map(|(&a, &b)| a * b.conj()).collect();
    Ok(pairwise_sum(&terms) * weight)
}
