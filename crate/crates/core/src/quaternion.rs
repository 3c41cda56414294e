//! Real quaternions `w + x i + y j + z k` with Hamilton's multiplication rules.
//!
//! Storage and serialization order is always `(w, x, y, z)`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`Quaternion::inverse`].
pub const INVERSION_EPSILON: f64 = 1e-300;

/// Tolerance used when validating unit pure axes in [`Quaternion::cis`].
pub const AXIS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    /// Embeds `a + b i` as a quaternion in the `i`-complex plane.
    #[inline]
    pub fn from_complex_i(c: Complex64) -> Self {
        Self::new(c.re, c.im, 0.0, 0.0)
    }

    /// Embeds `a + b i` as `a + b j`.
    #[inline]
    pub fn from_complex_j(c: Complex64) -> Self {
        Self::new(c.re, 0.0, c.im, 0.0)
    }

    /// Builds `alpha + beta j` from two `i`-plane complex numbers.
    #[inline]
    pub fn from_complex_pair(alpha: Complex64, beta: Complex64) -> Self {
        Self::new(alpha.re, alpha.im, beta.re, beta.im)
    }

    /// Splits `q = alpha + beta j` with `alpha = w + x i` and `beta = y + z i`.
    #[inline]
    pub fn complex_pair(self) -> (Complex64, Complex64) {
        (Complex64::new(self.w, self.x), Complex64::new(self.y, self.z))
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Scalar part `Sc(q)`.
    #[inline]
    pub fn scalar(self) -> f64 {
        self.w
    }

    /// Vector part `Vec(q)` as a pure quaternion.
    #[inline]
    pub fn vector(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.w.hypot(self.x).hypot(self.y.hypot(self.z))
    }

    #[inline]
    pub fn vector_norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `conj(q) / |q|^2`; fails for `|q| < 1e-300`.
    pub fn inverse(self) -> Result<Self> {
        let norm = self.norm();
        if !(norm >= INVERSION_EPSILON) {
            return Err(Error::DivisionByZero { norm });
        }
        // divide twice so tiny norms do not underflow when squared
        Ok(self.conj() / norm / norm)
    }

    /// `cos(angle) + axis sin(angle)` for a unit pure `axis`.
    pub fn cis(axis: Self, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > AXIS_TOLERANCE || axis.w.abs() > AXIS_TOLERANCE {
            return Err(Error::InvalidAxis {
                norm,
                scalar: axis.w,
            });
        }
        Ok(Self::cis_unchecked(axis, angle))
    }

    #[inline]
    pub(crate) fn cis_unchecked(axis: Self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, axis.x * s, axis.y * s, axis.z * s)
    }

    /// The representative `a + b i` (with `b >= 0`) of the similarity orbit
    /// `{u q u^-1}`, returned as `(a, b) = (Sc(q), |Vec(q)|)`.
    pub fn canonical_complex_representative(self) -> (f64, f64) {
        (self.w, self.vector_norm())
    }

    /// Unit quaternion `u` with `u q u^-1 = a + b i`, the canonical representative.
    ///
    /// Returns `1` for real `q`.
    pub fn canonical_rotor(self) -> Self {
        let v = self.vector_norm();
        if v == 0.0 {
            return Self::ONE;
        }
        let axis = self.vector() / v;
        // r = (1 - i p) / |1 - i p| rotates the unit pure p onto i
        let r = Self::ONE - Self::I * axis;
        let rn = r.norm();
        if rn < 1e-8 {
            // p is (numerically) -i: a half turn about j maps it to i
            Self::J
        } else {
            r / rn
        }
    }

    /// Full-precision `w,x,y,z` CSV fields.
    pub fn csv_fields(self) -> [String; 4] {
        self.to_array().map(format_f64)
    }
}

/// Full-precision (17 significant digit) rendering used by all CSV output.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl From<f64> for Quaternion {
    fn from(w: f64) -> Self {
        Self::real(w)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:+}i {:+}j {:+}k", self.w, self.x, self.y, self.z)
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl Div<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        Self::new(self.w / s, self.x / s, self.y / s, self.z / s)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Quaternion {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign<f64> for Quaternion {
    #[inline]
    fn mul_assign(&mut self, s: f64) {
        *self = *self * s;
    }
}

impl Sum for Quaternion {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Quaternion> for Quaternion {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + *b)
    }
}

/// Pairwise (cascade) summation; result is independent of how the caller
/// chunks work and has `O(log n)` error growth.
pub fn pairwise_sum(terms: &[Quaternion]) -> Quaternion {
    const BLOCK: usize = 16;
    if terms.len() <= BLOCK {
        return terms.iter().sum();
    }
    let mid = terms.len() / 2;
    pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
}
