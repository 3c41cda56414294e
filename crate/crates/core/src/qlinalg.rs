//! Dense vectors and matrices over the quaternions, acting as left-linear
//! operators, plus spectral decompositions of self-adjoint and normal
//! matrices.
//!
//! A matrix acts on a (row) vector from the right: `(M u)_j = sum_k u_k M[k][j]`.
//! Scalars multiply vectors from the left, so `apply(M, q u) = q apply(M, u)`
//! holds exactly. Under this convention the ordinary matrix product `P * Q`
//! is the operator "first `P`, then `Q`".
//!
//! Spectra are computed through the complex adjoint embedding
//! `q = alpha + beta j  ->  [[alpha, beta], [-conj(beta), conj(alpha)]]`.
//! Normal matrices follow the route of the compact-normal spectral theorem:
//! diagonalize `K = M M*`, group its eigenvalues, then diagonalize `M`
//! restricted to each group.

use std::cmp::Ordering;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quaternion::Quaternion;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct QVector(Vec<Quaternion>);

impl QVector {
    pub fn new(entries: Vec<Quaternion>) -> Self {
        Self(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Quaternion::ZERO; n])
    }

    /// Standard basis vector `e_k` of length `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = Quaternion::ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Quaternion] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Quaternion] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Quaternion> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Quaternion> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `q u`, the left module action.
    pub fn scale_left(&self, q: Quaternion) -> Self {
        Self(self.0.iter().map(|&u| q * u).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|&u| u * s).collect())
    }

    /// `self += q other`.
    pub fn add_scaled_left(&mut self, q: Quaternion, other: &QVector) {
        for (a, &b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += q * b;
        }
    }

    pub fn sub(&self, other: &QVector) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn add(&self, other: &QVector) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }
}

impl From<Vec<Quaternion>> for QVector {
    fn from(v: Vec<Quaternion>) -> Self {
        Self(v)
    }
}

impl Index<usize> for QVector {
    type Output = Quaternion;
    fn index(&self, i: usize) -> &Quaternion {
        &self.0[i]
    }
}

impl IndexMut<usize> for QVector {
    fn index_mut(&mut self, i: usize) -> &mut Quaternion {
        &mut self.0[i]
    }
}

/// `(u, v) = sum_k u_k conj(v_k)`: left-linear in `u`, conjugate-linear in `v`.
pub fn inner(u: &QVector, v: &QVector) -> Result<Quaternion> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(inner_unchecked(u.as_slice(), v.as_slice()))
}

#[inline]
pub(crate) fn inner_unchecked(u: &[Quaternion], v: &[Quaternion]) -> Quaternion {
    let mut acc = Quaternion::ZERO;
    for (&a, &b) in u.iter().zip(v) {
        acc += a * b.conj();
    }
    acc
}

/// Row-major dense quaternion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Quaternion>,
}

impl QMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Quaternion>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Quaternion::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { Quaternion::ONE } else { Quaternion::ZERO })
    }

    pub fn from_diagonal(d: &[Quaternion]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |r, c| if r == c { d[r] } else { Quaternion::ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Quaternion) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose rows are the given vectors.
    pub fn from_rows(rows: &[QVector]) -> Result<Self> {
        let cols = rows.first().map_or(0, QVector::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r.as_slice());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Quaternion] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Quaternion] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `(M u)_j = sum_k u_k M[k][j]`.
    pub fn apply(&self, u: &QVector) -> Result<QVector> {
        if u.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: u.len(),
            });
        }
        let mut out = vec![Quaternion::ZERO; self.cols];
        for (k, &uk) in u.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(k)) {
                *o += uk * m;
            }
        }
        Ok(QVector(out))
    }

    /// `(M*)[j][k] = conj(M[k][j])`.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |j, k| self[(k, j)].conj())
    }

    /// Ordinary matrix product; as operators, `apply(P * Q, u) = apply(Q, apply(P, u))`.
    pub fn matmul(&self, other: &QMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = vec![Quaternion::ZERO; self.rows * other.cols];
        for r in 0..self.rows {
            let orow = &mut out[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            data: out,
        })
    }

    /// `M* M`, computed on the upper triangle and mirrored so the result is
    /// exactly self-adjoint.
    pub fn adjoint_self_product(&self) -> Self {
        let n = self.cols;
        let adj = self.adjoint();
        let mut out = vec![Quaternion::ZERO; n * n];
        for a in 0..n {
            let arow = adj.row(a);
            for b in a..n {
                let mut acc = Quaternion::ZERO;
                for (k, &x) in arow.iter().enumerate() {
                    acc += x * self.data[k * n + b];
                }
                out[a * n + b] = acc;
            }
        }
        for a in 0..n {
            // the diagonal of M* M is real
            let d = out[a * n + a];
            out[a * n + a] = Quaternion::real(d.w);
            for b in (a + 1)..n {
                out[b * n + a] = out[a * n + b].conj();
            }
        }
        Self {
            rows: n,
            cols: n,
            data: out,
        }
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise `|a - b|`.
    pub fn max_abs_diff(&self, other: &QMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &QMatrix) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Largest `|M[j][k] - conj(M[k][j])|`.
    pub fn selfadjoint_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// Largest entrywise `|M M* - M* M|`.
    pub fn normality_deviation(&self) -> f64 {
        let adj = self.adjoint();
        let a = self.matmul(&adj).expect("square");
        let b = adj.matmul(self).expect("square");
        a.max_abs_diff(&b)
    }

    /// Complex adjoint image `[[A, B], [-conj(B), conj(A)]]` with `M = A + B j`.
    pub fn embed(&self) -> Result<ComplexAdjoint> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                let (a, b) = self[(r, c)].complex_pair();
                m[(r, c)] = a;
                m[(r, n + c)] = b;
                m[(n + r, c)] = -b.conj();
                m[(n + r, n + c)] = a.conj();
            }
        }
        Ok(ComplexAdjoint(m))
    }
}

impl Index<(usize, usize)> for QMatrix {
    type Output = Quaternion;
    fn index(&self, (r, c): (usize, usize)) -> &Quaternion {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Quaternion {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &QMatrix {
    type Output = QMatrix;
    fn mul(self, rhs: &QMatrix) -> QMatrix {
        self.matmul(rhs).expect("incompatible matrix dimensions")
    }
}

/// `2n x 2n` complex image of an `n x n` quaternion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexAdjoint(pub DMatrix<Complex64>);

impl ComplexAdjoint {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Quaternion dimension `n`.
    pub fn quaternion_dim(&self) -> usize {
        self.0.nrows() / 2
    }
}

/// Reassembles `a + b j` from a complex `2n`-vector `[a; b]`.
///
/// If `[a; b]` is a (column) eigenvector of `embed(M)^T` with eigenvalue
/// `lambda`, the result is a left eigenvector of `M`: `apply(M, u) = lambda u`.
fn quaternion_from_halves(z: &DVector<Complex64>) -> QVector {
    let n = z.len() / 2;
    QVector((0..n).map(|k| Quaternion::from_complex_pair(z[k], z[n + k])).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    /// Canonical representatives, sorted by `|lambda|` descending.
    pub eigenvalues: Vec<Quaternion>,
    /// Orthonormal under [`inner`].
    pub eigenvectors: Vec<QVector>,
    /// `|apply(M, xi) - lambda xi|` per pair.
    pub residuals: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `mu_k = |lambda_k|^2`.
    pub fn mu(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.norm_sqr()).collect()
    }
}

/// Knobs shared by the spectral routines.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    /// Allowed `max |M - M*| / max |M|` for self-adjoint input.
    pub selfadjoint_tol: f64,
    /// Allowed `max |M M* - M* M| / max|M|^2` for normal input.
    pub normality_tol: f64,
    /// Consecutive `mu` closer than `cluster_gap * mu_1` share an eigenspace.
    pub cluster_gap: f64,
    /// Residual threshold relative to `|lambda_1|`.
    pub residual_tol: f64,
    /// Eigenvalues `mu < floor * mu_1` of `K` are dropped before recovery
    /// (normal path only). Non-positive keeps everything.
    pub floor: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            selfadjoint_tol: 1e-10,
            normality_tol: 1e-9,
            cluster_gap: 1e-6,
            residual_tol: 1e-8,
            floor: 0.0,
        }
    }
}

/// Vector parts below this fraction of `max|M|` are treated as exact zeros
/// when deciding whether the real symmetric solver applies.
const REAL_PATH_TOL: f64 = 1e-13;

/// Factor between successive sub-cluster gaps.
const FINE_CLUSTER_RATIO: f64 = 1e-4;

/// Smallest sub-cluster gap relative to `mu_1`, near the eigenvalue noise of a
/// dense Gram matrix.
const MIN_CLUSTER_GAP: f64 = 1e-14;

/// Clusters at most this large are diagonalized without splitting.
const SMALL_CLUSTER: usize = 8;

pub fn eig_selfadjoint(m: &QMatrix) -> Result<SpectralDecomposition> {
    eig_selfadjoint_with(m, &EigenOptions::default())
}

pub fn eig_selfadjoint_with(m: &QMatrix, opts: &EigenOptions) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: vec![],
            eigenvectors: vec![],
            residuals: vec![],
        });
    }
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let deviation = m.selfadjoint_deviation();
    if deviation > opts.selfadjoint_tol * scale {
        return Err(Error::NotSelfAdjoint { deviation });
    }

    let is_real = m.data.iter().all(|q| q.vector_norm() <= REAL_PATH_TOL * scale);
    let (values, vectors) = if is_real {
        selfadjoint_real(m)?
    } else {
        selfadjoint_complex(m, scale)?
    };

    let mut pairs: Vec<(Quaternion, QVector)> = values
        .into_iter()
        .map(Quaternion::real)
        .zip(vectors)
        .collect();
    sort_spectrum(&mut pairs);
    Ok(finish(m, pairs))
}

fn selfadjoint_real(m: &QMatrix) -> Result<(Vec<f64>, Vec<QVector>)> {
    let n = m.rows;
    let a = DMatrix::<f64>::from_fn(n, n, |r, c| 0.5 * (m[(r, c)].w + m[(c, r)].w));
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 1000 * n).ok_or(Error::NoConvergence)?;
    let values = eig.eigenvalues.iter().copied().collect();
    let vectors = (0..n)
        .map(|k| {
            QVector(
                eig.eigenvectors
                    .column(k)
                    .iter()
                    .map(|&x| Quaternion::real(x))
                    .collect(),
            )
        })
        .collect();
    Ok((values, vectors))
}

fn selfadjoint_complex(m: &QMatrix, scale: f64) -> Result<(Vec<f64>, Vec<QVector>)> {
    let n = m.rows;
    // eigenvectors of embed(M)^T give left eigenvectors of M; for Hermitian
    // input embed(M)^T = conj(embed(M)) is Hermitian too
    let e = m.embed()?.into_inner().transpose();
    let e = (&e + e.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(e, f64::EPSILON, 1000 * n).ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
    });

    // every eigenvalue appears twice (z and its j-partner); keep one
    // quaternion-independent vector per pair
    let pair_tol = 1e-9 * scale;
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<QVector> = Vec::with_capacity(n);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]] <= pair_tol
        {
            end += 1;
        }
        let candidates: Vec<(f64, QVector)> = order[start..end]
            .iter()
            .map(|&idx| {
                let z = eig.eigenvectors.column(idx).into_owned();
                (eig.eigenvalues[idx], quaternion_from_halves(&z))
            })
            .collect();
        let accepted = select_independent(candidates, (end - start).div_ceil(2));
        for (value, v) in accepted {
            values.push(value);
            vectors.push(v);
        }
        start = end;
    }
    if vectors.len() != n {
        return Err(Error::RecoveryFailed {
            residual: (vectors.len() as f64 - n as f64).abs(),
            tolerance: 0.0,
        });
    }
    Ok((values, vectors))
}

/// Removes the components along the orthonormal `basis` and normalizes;
/// `None` if less than `keep` of the original norm survives.
fn project_and_normalize(u: &QVector, basis: &[QVector], keep: f64) -> Option<QVector> {
    let original = u.norm();
    if original == 0.0 {
        return None;
    }
    let mut v = u.clone();
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = inner_unchecked(v.as_slice(), b.as_slice());
            v.add_scaled_left(-c, b);
        }
    }
    let norm = v.norm();
    if norm <= keep * original {
        None
    } else {
        Some(v.scale(1.0 / norm))
    }
}

/// Picks `want` quaternion-independent vectors from complex-eigenvector
/// candidates, orthonormalized in order.
///
/// The first pass keeps candidates in the given order whenever at least half
/// of their norm survives projection; if that falls short (large clusters of
/// nearly equal eigenvalues), the candidate with the largest surviving part
/// is taken repeatedly.
fn select_independent<T: Copy>(candidates: Vec<(T, QVector)>, want: usize) -> Vec<(T, QVector)> {
    let mut accepted: Vec<(T, QVector)> = Vec::with_capacity(want);
    let mut basis: Vec<QVector> = Vec::with_capacity(want);
    let mut rest = Vec::new();
    for (value, u) in candidates {
        if basis.len() == want {
            break;
        }
        match project_and_normalize(&u, &basis, 0.5) {
            Some(v) => {
                basis.push(v.clone());
                accepted.push((value, v));
            }
            None => rest.push((value, u)),
        }
    }
    while basis.len() < want && !rest.is_empty() {
        let (best, _) = rest
            .iter()
            .enumerate()
            .map(|(i, (_, u))| (i, remainder_fraction(u, &basis)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (value, u) = rest.swap_remove(best);
        match project_and_normalize(&u, &basis, 1e-8) {
            Some(v) => {
                basis.push(v.clone());
                accepted.push((value, v));
            }
            None => break,
        }
    }
    accepted
}

fn remainder_fraction(u: &QVector, basis: &[QVector]) -> f64 {
    let original = u.norm();
    if original == 0.0 {
        return 0.0;
    }
    let mut v = u.clone();
    for b in basis {
        let c = inner_unchecked(v.as_slice(), b.as_slice());
        v.add_scaled_left(-c, b);
    }
    v.norm() / original
}

/// Sorts by `|lambda|` descending; near-ties (relative `1e-12`) are ordered by
/// canonical representative, real part then imaginary part descending.
fn sort_spectrum(pairs: &mut Vec<(Quaternion, QVector)>) {
    let lambdas: Vec<Quaternion> = pairs.iter().map(|p| p.0).collect();
    let order = spectral_order(&lambdas);
    let mut slots: Vec<Option<(Quaternion, QVector)>> = pairs.drain(..).map(Some).collect();
    pairs.extend(order.into_iter().map(|i| slots[i].take().expect("permutation")));
}

/// Permutation sorting eigenvalues by `|lambda|` descending; near-ties
/// (relative `1e-12`) are ordered by canonical representative, real part then
/// imaginary part descending. Stable, so exact ties keep their input order.
pub fn spectral_order(lambdas: &[Quaternion]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    let norm = |i: usize| lambdas[i].norm();
    order.sort_by(|&a, &b| norm(b).partial_cmp(&norm(a)).unwrap_or(Ordering::Equal));
    let top = order.first().map_or(0.0, |&i| norm(i));
    let tie = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && norm(order[end - 1]) - norm(order[end]) <= tie {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| {
            let (ar, ai) = lambdas[a].canonical_complex_representative();
            let (br, bi) = lambdas[b].canonical_complex_representative();
            br.partial_cmp(&ar)
                .unwrap_or(Ordering::Equal)
                .then(bi.partial_cmp(&ai).unwrap_or(Ordering::Equal))
        });
        start = end;
    }
    order
}

fn finish(m: &QMatrix, pairs: Vec<(Quaternion, QVector)>) -> SpectralDecomposition {
    let residuals = pairs
        .iter()
        .map(|(l, v)| residual(m, *l, v))
        .collect();
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        residuals,
    }
}

/// `|apply(M, v) - lambda v|`.
pub fn residual(m: &QMatrix, lambda: Quaternion, v: &QVector) -> f64 {
    let mv = m.apply(v).expect("dimension checked by caller");
    mv.iter()
        .zip(v.iter())
        .map(|(&a, &b)| (a - lambda * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn eig_normal(m: &QMatrix) -> Result<SpectralDecomposition> {
    eig_normal_with(m, &EigenOptions::default())
}

pub fn eig_normal_with(m: &QMatrix, opts: &EigenOptions) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let scale = m.max_abs();
    let deviation = m.normality_deviation();
    if deviation > opts.normality_tol * scale * scale * (m.rows.max(1) as f64) {
        return Err(Error::NotNormal { deviation });
    }
    let gram = eig_selfadjoint_with(&m.adjoint_self_product(), opts)?;
    eig_normal_from_gram(m, &gram, opts)
}

/// Groups indices `0..values.len()` (values sorted descending) into runs whose
/// consecutive gaps are at most `gap`.
pub fn cluster_ranges(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end - 1] - values[end] <= gap {
            end += 1;
        }
        out.push(start..end);
        start = end;
    }
    out
}

/// Spectral decomposition of a normal `m` given the decomposition of its
/// Gram matrix `K = M* M` (equal to `M M*`).
///
/// Only eigenvalues `mu >= floor * mu_1` are recovered.
pub fn eig_normal_from_gram(
    m: &QMatrix,
    gram: &SpectralDecomposition,
    opts: &EigenOptions,
) -> Result<SpectralDecomposition> {
    let mu: Vec<f64> = gram.eigenvalues.iter().map(|l| l.w).collect();
    let mu1 = mu.first().copied().unwrap_or(0.0).max(0.0);
    let above = if opts.floor > 0.0 {
        mu.iter().take_while(|&&x| x >= opts.floor * mu1).count()
    } else {
        mu.len()
    };
    let norm_m = mu1.sqrt();
    let tolerance = opts.residual_tol * norm_m.max(f64::MIN_POSITIVE);

    let mut pairs = Vec::with_capacity(above);
    let recovery = Recovery {
        m,
        gram,
        mu: &mu,
        above,
        tolerance,
        normality_tol: opts.normality_tol * mu1,
        min_gap: MIN_CLUSTER_GAP * mu1,
    };
    for range in cluster_ranges(&mu, opts.cluster_gap * mu1) {
        if range.start >= above {
            break;
        }
        pairs.extend(recovery.cluster(range, opts.cluster_gap * mu1 * FINE_CLUSTER_RATIO)?);
    }
    sort_spectrum(&mut pairs);
    // the straddling cluster is diagonalized whole, then cut back to the
    // floor count without splitting a degenerate pair
    if above < pairs.len() && above > 0 {
        let last = pairs[above - 1].0.norm_sqr();
        let keep = above
            + pairs[above..]
                .iter()
                .take_while(|(l, _)| (l.norm_sqr() - last).abs() <= 1e-8 * last)
                .count();
        pairs.truncate(keep);
    }
    Ok(finish(m, pairs))
}

struct Recovery<'a> {
    m: &'a QMatrix,
    gram: &'a SpectralDecomposition,
    mu: &'a [f64],
    above: usize,
    tolerance: f64,
    normality_tol: f64,
    min_gap: f64,
}

impl Recovery<'_> {
    /// Eigenpairs of `m` on the Gram eigenvectors in `range`. Large clusters
    /// are split at `gap` and the pieces reaching above the floor are
    /// recovered recursively with a smaller gap; if any piece fails the
    /// cluster is diagonalized whole.
    fn cluster(&self, range: std::ops::Range<usize>, gap: f64) -> Result<Vec<(Quaternion, QVector)>> {
        if range.len() > SMALL_CLUSTER && gap >= self.min_gap {
            let pieces: Vec<_> = cluster_ranges(&self.mu[range.clone()], gap)
                .into_iter()
                .map(|r| range.start + r.start..range.start + r.end)
                .filter(|r| r.start < self.above)
                .collect();
            if pieces.len() > 1 || pieces.first().is_some_and(|r| r.len() < range.len()) {
                let split: Result<Vec<_>> = pieces
                    .into_iter()
                    .map(|r| self.cluster(r, gap * FINE_CLUSTER_RATIO))
                    .collect();
                if let Ok(parts) = split {
                    return Ok(parts.into_iter().flatten().collect());
                }
            } else {
                return self.cluster(range, gap * FINE_CLUSTER_RATIO);
            }
        }
        diagonalize_restriction(self.m, &self.gram.eigenvectors[range], self.tolerance, self.normality_tol)
    }
}

/// Diagonalizes `m` on the invariant subspace spanned by the orthonormal
/// `basis`, returning canonical eigenpairs.
fn diagonalize_restriction(
    m: &QMatrix,
    basis: &[QVector],
    tolerance: f64,
    normality_tol: f64,
) -> Result<Vec<(Quaternion, QVector)>> {
    let images: Vec<QVector> = basis.iter().map(|b| m.apply(b)).collect::<Result<_>>()?;
    let dim = basis.len();
    // R = V M V*, acting on coefficient rows c with u = c V
    let restriction = QMatrix::from_fn(dim, dim, |a, b| {
        inner_unchecked(images[a].as_slice(), basis[b].as_slice())
    });
    let deviation = restriction.normality_deviation();
    if deviation > normality_tol {
        return Err(Error::NotNormal { deviation });
    }

    let attempt = recover_small(&restriction)?;
    let lift = |c: &QVector| -> QVector {
        let mut u = QVector::zeros(m.rows);
        for (a, &ca) in c.iter().enumerate() {
            u.add_scaled_left(ca, &basis[a]);
        }
        u
    };
    let mut pairs: Vec<(Quaternion, QVector)> = attempt.iter().map(|(l, c)| (*l, lift(c))).collect();
    if pairs.iter().all(|(l, u)| residual(m, *l, u) <= tolerance) {
        return Ok(pairs);
    }

    // retry once: re-orthonormalize and take Rayleigh quotients
    let mut orthonormal: Vec<QVector> = Vec::with_capacity(pairs.len());
    for (_, u) in &pairs {
        let v = project_and_normalize(u, &orthonormal, 1e-8).ok_or(Error::RankDeficient {
            index: orthonormal.len(),
            norm: 0.0,
        })?;
        orthonormal.push(v);
    }
    pairs = orthonormal
        .into_iter()
        .map(|u| {
            let mu = m.apply(&u).expect("square");
            let lambda = inner_unchecked(mu.as_slice(), u.as_slice());
            let rotor = lambda.canonical_rotor();
            (rotor * lambda * rotor.conj(), u.scale_left(rotor))
        })
        .collect();
    let worst = pairs
        .iter()
        .map(|(l, u)| residual(m, *l, u))
        .fold(0.0, f64::max);
    if worst > tolerance {
        return Err(Error::RecoveryFailed {
            residual: worst,
            tolerance,
        });
    }
    Ok(pairs)
}

/// Eigenpairs of a small normal quaternion matrix through a complex Schur
/// decomposition of its embedding.
fn recover_small(r: &QMatrix) -> Result<Vec<(Quaternion, QVector)>> {
    let dim = r.rows;
    let e = r.embed()?.into_inner().transpose();
    let schur = Schur::try_new(e, f64::EPSILON, 1000 * (2 * dim).max(1)).ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();

    // prefer the upper half plane so that each (lambda, conj(lambda)) pair
    // contributes its canonical member
    let mut order: Vec<usize> = (0..2 * dim).collect();
    order.sort_by(|&a, &b| {
        t[(b, b)]
            .im
            .partial_cmp(&t[(a, a)].im)
            .unwrap_or(Ordering::Equal)
            .then(t[(b, b)].re.partial_cmp(&t[(a, a)].re).unwrap_or(Ordering::Equal))
    });

    let candidates: Vec<(Complex64, QVector)> = order
        .iter()
        .map(|&idx| (t[(idx, idx)], quaternion_from_halves(&q.column(idx).into_owned())))
        .collect();
    let out: Vec<(Quaternion, QVector)> = select_independent(candidates, dim)
        .into_iter()
        .map(|(lambda, v)| {
            if lambda.im < 0.0 {
                // j u has eigenvalue conj(lambda)
                (Quaternion::from_complex_i(lambda.conj()), v.scale_left(Quaternion::J))
            } else {
                (Quaternion::from_complex_i(lambda), v)
            }
        })
        .collect();
    if out.len() != dim {
        return Err(Error::RecoveryFailed {
            residual: (dim - out.len()) as f64,
            tolerance: 0.0,
        });
    }
    Ok(out)
}

/// Orthonormalizes with left coefficients; fails when a vector's norm
/// collapses below `1e-10` of its original size.
pub fn gram_schmidt(vs: &[QVector]) -> Result<Vec<QVector>> {
    let mut out: Vec<QVector> = Vec::with_capacity(vs.len());
    for (index, v) in vs.iter().enumerate() {
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
        }
        let original = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                let c = inner_unchecked(w.as_slice(), b.as_slice());
                w.add_scaled_left(-c, b);
            }
        }
        let norm = w.norm();
        if original == 0.0 || norm <= 1e-10 * original {
            return Err(Error::RankDeficient { index, norm });
        }
        out.push(w.scale(1.0 / norm));
    }
    Ok(out)
}

/// Seeded random quaternion vectors and matrices for randomized checks.
pub mod random {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Components uniform in `[-1, 1)`.
    pub fn random_q(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> QVector {
        QVector::new((0..n).map(|_| random_q(rng)).collect())
    }

    pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> QMatrix {
        QMatrix::from_fn(r, c, |_, _| random_q(rng))
    }

    /// Random unitary: Gram-Schmidt on random rows.
    pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> QMatrix {
        let rows: Vec<QVector> = (0..n).map(|_| random_vector(rng, n)).collect();
        QMatrix::from_rows(&gram_schmidt(&rows).unwrap()).unwrap()
    }

    /// `U* D U`: normal with spectrum `d` (as operator, eigenvectors are the rows of `U`).
    pub fn planted_normal(rng: &mut ChaCha8Rng, d: &[Quaternion]) -> QMatrix {
        let u = random_unitary(rng, d.len());
        let ud = QMatrix::from_diagonal(d);
        &(&u.adjoint() * &ud) * &u
    }
}

#[cfg(test)]
mod tests {
    use super::random::*;
    use super::*;

    fn vclose(a: &QVector, b: &QVector, tol: f64) -> bool {
        a.sub(b).iter().all(|q| q.norm() <= tol)
    }

    fn cmax(a: &DMatrix<Complex64>) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn inner_examples() {
        let e1 = QVector::basis(3, 0);
        assert_eq!(inner(&e1, &e1).unwrap(), Quaternion::ONE);
        let mut rng = rng(1);
        let (u, v) = (random_vector(&mut rng, 5), random_vector(&mut rng, 5));
        let q = random_q(&mut rng);
        let lhs = inner(&u.scale_left(q), &v).unwrap();
        assert!((lhs - q * inner(&u, &v).unwrap()).norm() < 1e-14);
        let rhs = inner(&u, &v.scale_left(q)).unwrap();
        assert!((rhs - inner(&u, &v).unwrap() * q.conj()).norm() < 1e-14);
        assert!(inner(&u, &QVector::zeros(4)).is_err());
    }

    #[test]
    fn inner_axioms() {
        let mut rng = rng(2);
        for _ in 0..100 {
            let (u, v, w) = (
                random_vector(&mut rng, 6),
                random_vector(&mut rng, 6),
                random_vector(&mut rng, 6),
            );
            let (p, q) = (random_q(&mut rng), random_q(&mut rng));
            // (pu + qv, w) = p(u,w) + q(v,w)
            let mut pu_qv = u.scale_left(p);
            pu_qv.add_scaled_left(q, &v);
            let lhs = inner(&pu_qv, &w).unwrap();
            let rhs = p * inner(&u, &w).unwrap() + q * inner(&v, &w).unwrap();
            assert!((lhs - rhs).norm() < 1e-13);
            // (u, v) = conj((v, u))
            assert!((inner(&u, &v).unwrap() - inner(&v, &u).unwrap().conj()).norm() < 1e-14);
            // (u, u) real and nonnegative
            let uu = inner(&u, &u).unwrap();
            assert!(uu.vector_norm() < 1e-14 && uu.w >= 0.0);
            // Cauchy-Schwarz
            let uv = inner(&u, &v).unwrap().norm_sqr();
            assert!(uv <= u.norm_sqr() * v.norm_sqr() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn apply_examples() {
        let mut rng = rng(3);
        let u = random_vector(&mut rng, 4);
        assert_eq!(QMatrix::identity(4).apply(&u).unwrap(), u);
        let m = random_matrix(&mut rng, 4, 3);
        let q = random_q(&mut rng);
        let lhs = m.apply(&u.scale_left(q)).unwrap();
        let rhs = m.apply(&u).unwrap().scale_left(q);
        assert!(vclose(&lhs, &rhs, 1e-14));
        let one = QMatrix::new(1, 1, vec![Quaternion::I]).unwrap();
        let out = one.apply(&QVector::new(vec![Quaternion::J])).unwrap();
        assert_eq!(out[0], -Quaternion::K);
        assert!(m.apply(&QVector::zeros(3)).is_err());
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(QMatrix::identity(3).adjoint(), QMatrix::identity(3));
        let mut rng = rng(4);
        let m = random_matrix(&mut rng, 4, 4);
        assert_eq!(m.adjoint().adjoint(), m);
        for _ in 0..20 {
            let (u, v) = (random_vector(&mut rng, 4), random_vector(&mut rng, 4));
            let lhs = inner(&m.apply(&u).unwrap(), &v).unwrap();
            let rhs = inner(&u, &m.adjoint().apply(&v).unwrap()).unwrap();
            assert!((lhs - rhs).norm() < 1e-11);
        }
    }

    #[test]
    fn product_composes_in_apply_order() {
        let mut rng = rng(5);
        let p = random_matrix(&mut rng, 3, 4);
        let q = random_matrix(&mut rng, 4, 2);
        let u = random_vector(&mut rng, 3);
        let lhs = (&p * &q).apply(&u).unwrap();
        let rhs = q.apply(&p.apply(&u).unwrap()).unwrap();
        assert!(vclose(&lhs, &rhs, 1e-13));
    }

    #[test]
    fn adjoint_self_product_matches_matmul() {
        let mut rng = rng(6);
        let m = random_matrix(&mut rng, 5, 5);
        let fast = m.adjoint_self_product();
        let slow = &m.adjoint() * &m;
        assert!(fast.max_abs_diff(&slow) < 1e-13);
        assert_eq!(fast.selfadjoint_deviation(), 0.0);
    }

    #[test]
    fn embed_examples() {
        let e = QMatrix::identity(3).embed().unwrap();
        assert_eq!(e.0, DMatrix::<Complex64>::identity(6, 6));
        let j = QMatrix::new(1, 1, vec![Quaternion::J]).unwrap().embed().unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert_eq!(j.0, expected);
        assert!(QMatrix::zeros(2, 3).embed().is_err());
    }

    #[test]
    fn embed_is_multiplicative_and_respects_adjoint() {
        let mut rng = rng(7);
        for _ in 0..20 {
            let p = random_matrix(&mut rng, 3, 3);
            let q = random_matrix(&mut rng, 3, 3);
            let lhs = (&p * &q).embed().unwrap().0;
            let rhs = p.embed().unwrap().0 * q.embed().unwrap().0;
            assert!(cmax(&(lhs - rhs)) < 1e-11);
            let adj = p.adjoint().embed().unwrap().0 - p.embed().unwrap().0.adjoint();
            assert!(cmax(&adj) < 1e-15);
        }
    }

    #[test]
    fn selfadjoint_examples() {
        let d = QMatrix::from_diagonal(&[3.0.into(), 1.0.into(), 2.0.into()]);
        let s = eig_selfadjoint(&d).unwrap();
        let vals: Vec<f64> = s.eigenvalues.iter().map(|l| l.w).collect();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);

        let swap = QMatrix::new(
            2,
            2,
            vec![Quaternion::ZERO, Quaternion::ONE, Quaternion::ONE, Quaternion::ZERO],
        )
        .unwrap();
        let s = eig_selfadjoint(&swap).unwrap();
        assert!((s.eigenvalues[0].w - 1.0).abs() < 1e-15);
        assert!((s.eigenvalues[1].w + 1.0).abs() < 1e-15);
    }

    #[test]
    fn selfadjoint_gram_is_positive_with_matching_trace() {
        let mut rng = rng(8);
        let a = random_matrix(&mut rng, 7, 7);
        let m = &a * &a.adjoint();
        let s = eig_selfadjoint(&m).unwrap();
        assert_eq!(s.len(), 7);
        let trace: f64 = (0..7).map(|k| m[(k, k)].w).sum();
        let sum: f64 = s.eigenvalues.iter().map(|l| l.w).sum();
        assert!((trace - sum).abs() < 1e-9);
        for (l, r) in s.eigenvalues.iter().zip(&s.residuals) {
            assert!(l.w >= -1e-10 && l.vector_norm() == 0.0);
            assert!(*r < 1e-10 * m.fro_norm());
        }
        for a in 0..7 {
            for b in 0..7 {
                let g = inner(&s.eigenvectors[a], &s.eigenvectors[b]).unwrap();
                let target = if a == b { Quaternion::ONE } else { Quaternion::ZERO };
                assert!((g - target).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn selfadjoint_rejects_non_hermitian() {
        let mut rng = rng(9);
        let m = random_matrix(&mut rng, 3, 3);
        assert!(matches!(eig_selfadjoint(&m), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn selfadjoint_handles_degenerate_quaternion_spectrum() {
        let mut rng = rng(10);
        let d: Vec<Quaternion> = [2.0, 2.0, 2.0, -1.0, 0.5].iter().map(|&x| x.into()).collect();
        let m = planted_normal(&mut rng, &d);
        let s = eig_selfadjoint(&m).unwrap();
        let vals: Vec<f64> = s.eigenvalues.iter().map(|l| l.w).collect();
        for (got, want) in vals.iter().zip([2.0, 2.0, 2.0, -1.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(s.residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn normal_examples() {
        let s = eig_normal(&QMatrix::identity(4)).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - Quaternion::ONE).norm() < 1e-14));
        let s = eig_normal(&QMatrix::new(1, 1, vec![Quaternion::I]).unwrap()).unwrap();
        assert!((s.eigenvalues[0] - Quaternion::I).norm() < 1e-14);
        assert!((s.mu()[0] - 1.0).abs() < 1e-14);
        // j is in the orbit of i; the canonical representative is reported
        let s = eig_normal(&QMatrix::new(1, 1, vec![Quaternion::J]).unwrap()).unwrap();
        assert!((s.eigenvalues[0] - Quaternion::I).norm() < 1e-14);
        assert!(s.residuals[0] < 1e-14);
    }

    #[test]
    fn normal_recovers_planted_spectrum() {
        let mut rng = rng(11);
        let d = vec![
            Quaternion::new(1.0, 2.0, 0.0, 0.0),
            Quaternion::new(0.5, 0.0, -1.0, 1.0),
            Quaternion::new(-2.0, 0.0, 0.0, 0.0),
            Quaternion::new(0.1, 0.0, 0.0, 0.3),
            Quaternion::new(0.1, 0.0, 0.0, 0.3),
        ];
        let m = planted_normal(&mut rng, &d);
        let s = eig_normal(&m).unwrap();
        let mut want: Vec<(f64, f64)> = d.iter().map(|q| q.canonical_complex_representative()).collect();
        want.sort_by(|a, b| (b.0.hypot(b.1)).partial_cmp(&a.0.hypot(a.1)).unwrap());
        for (got, (a, b)) in s.eigenvalues.iter().zip(want) {
            assert!((got.w - a).abs() < 1e-9 && (got.x - b).abs() < 1e-9, "{got} vs {a} {b}");
            assert!(got.y == 0.0 && got.z == 0.0 && got.x >= 0.0);
        }
        let scale = s.eigenvalues[0].norm();
        assert!(s.residuals.iter().all(|&r| r <= 1e-8 * scale));
        // ||T u|| = ||T* u||
        let u = random_vector(&mut rng, 5);
        let a = m.apply(&u).unwrap().norm();
        let b = m.adjoint().apply(&u).unwrap().norm();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn normal_rejects_non_normal() {
        let m = QMatrix::new(
            2,
            2,
            vec![Quaternion::ONE, Quaternion::ONE, Quaternion::ZERO, Quaternion::ONE],
        )
        .unwrap();
        assert!(matches!(eig_normal(&m), Err(Error::NotNormal { .. })));
    }

    #[test]
    fn floor_limits_recovered_modes() {
        let mut rng = rng(12);
        let d: Vec<Quaternion> = [3.0, 1.0, 0.1, 0.01].iter().map(|&x| Quaternion::new(0.0, x, 0.0, 0.0)).collect();
        let m = planted_normal(&mut rng, &d);
        let opts = EigenOptions {
            floor: 0.01,
            ..Default::default()
        };
        let s = eig_normal_with(&m, &opts).unwrap();
        // mu = 9, 1, 0.01, 1e-4 -> mu >= 0.09 keeps two
        assert_eq!(s.len(), 2);
        let opts = EigenOptions {
            floor: 1.0,
            ..Default::default()
        };
        assert_eq!(eig_normal_with(&m, &opts).unwrap().len(), 1);
    }

    #[test]
    fn gram_schmidt_examples() {
        let e: Vec<QVector> = (0..3).map(|k| QVector::basis(3, k)).collect();
        let out = gram_schmidt(&e).unwrap();
        for (a, b) in out.iter().zip(&e) {
            assert!(vclose(a, b, 1e-12));
        }
        let vs = vec![
            QVector::new(vec![Quaternion::ONE, Quaternion::ZERO]),
            QVector::new(vec![Quaternion::ONE, Quaternion::ONE]),
        ];
        let out = gram_schmidt(&vs).unwrap();
        assert!(vclose(&out[1], &QVector::basis(2, 1), 1e-15));

        let mut rng = rng(13);
        let vs: Vec<QVector> = (0..5).map(|_| random_vector(&mut rng, 8)).collect();
        let out = gram_schmidt(&vs).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let g = inner(&out[a], &out[b]).unwrap();
                let t = if a == b { Quaternion::ONE } else { Quaternion::ZERO };
                assert!((g - t).norm() < 1e-10);
            }
        }
        // left-quaternion multiples are dependent
        let q = random_q(&mut rng);
        let dep = vec![vs[0].clone(), vs[0].scale_left(q)];
        assert!(matches!(gram_schmidt(&dep), Err(Error::RankDeficient { index: 1, .. })));
    }

    #[test]
    fn parseval_and_expansion_in_eigenbasis() {
        let mut rng = rng(14);
        let a = random_matrix(&mut rng, 6, 6);
        let s = eig_selfadjoint(&(&a * &a.adjoint())).unwrap();
        for _ in 0..10 {
            let u = random_vector(&mut rng, 6);
            let coeffs: Vec<Quaternion> = s.eigenvectors.iter().map(|xi| inner(&u, xi).unwrap()).collect();
            let energy: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            assert!((energy - u.norm_sqr()).abs() < 1e-10);
            let mut rebuilt = QVector::zeros(6);
            for (c, xi) in coeffs.iter().zip(&s.eigenvectors) {
                rebuilt.add_scaled_left(*c, xi);
            }
            assert!(vclose(&rebuilt, &u, 1e-10));
        }
    }
}
