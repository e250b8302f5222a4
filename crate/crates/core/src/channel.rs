//! Channel draws and the small complex-vector vocabulary used by every module.

use std::ops::{Add, Index, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Complex scalar used throughout the crate.
pub type ComplexScalar = Complex64;

/// A complex 2-vector. Used both for column vectors (directions, codewords,
/// precoders) and for matrix rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CVec2(pub [Complex64; 2]);

impl CVec2 {
    pub const ZERO: CVec2 = CVec2([Complex64::new(0.0, 0.0); 2]);

    pub fn new(e1: Complex64, e2: Complex64) -> Self {
        CVec2([e1, e2])
    }

    pub fn from_real(e1: f64, e2: f64) -> Self {
        CVec2([Complex64::new(e1, 0.0), Complex64::new(e2, 0.0)])
    }

    pub fn e1(&self) -> Complex64 {
        self.0[0]
    }

    pub fn e2(&self) -> Complex64 {
        self.0[1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> CVec2 {
        CVec2([self.0[0].conj(), self.0[1].conj()])
    }

    pub fn scale(&self, s: f64) -> CVec2 {
        CVec2([self.0[0] * s, self.0[1] * s])
    }

    pub fn scale_complex(&self, s: Complex64) -> CVec2 {
        CVec2([self.0[0] * s, self.0[1] * s])
    }

    /// Unit-norm copy. The zero vector is returned unchanged.
    pub fn normalized(&self) -> CVec2 {
        let n = self.norm();
        if n == 0.0 {
            *self
        } else {
            self.scale(1.0 / n)
        }
    }

    /// Bilinear product `self^T other`, i.e. a matrix row applied to a column.
    pub fn row_dot(&self, column: &CVec2) -> Complex64 {
        self.0[0] * column.0[0] + self.0[1] * column.0[1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// The eight real coordinates `[Re e1, Im e1, Re e2, Im e2]` of one row,
    /// as used by the stacked-estimate statistics.
    pub fn to_reals(&self) -> [f64; 4] {
        [self.0[0].re, self.0[0].im, self.0[1].re, self.0[1].im]
    }
}

impl Index<usize> for CVec2 {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl Add for CVec2 {
    type Output = CVec2;

    fn add(self, rhs: CVec2) -> CVec2 {
        CVec2([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for CVec2 {
    type Output = CVec2;

    fn sub(self, rhs: CVec2) -> CVec2 {
        CVec2([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

impl Neg for CVec2 {
    type Output = CVec2;

    fn neg(self) -> CVec2 {
        CVec2([-self.0[0], -self.0[1]])
    }
}

impl Mul<f64> for CVec2 {
    type Output = CVec2;

    fn mul(self, rhs: f64) -> CVec2 {
        self.scale(rhs)
    }
}

/// Hermitian inner product `a^H b`, conjugate-linear in `a`.
pub fn inner_product_herm(a: &CVec2, b: &CVec2) -> Complex64 {
    a.0[0].conj() * b.0[0] + a.0[1].conj() * b.0[1]
}

/// 2×2 complex matrix stored by rows.
///
/// For channel matrices row `i` is `h_i^H`: entry `(i, k)` is the coefficient
/// from transmitter `k` to receiver `i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CMat2 {
    pub rows: [CVec2; 2],
}

impl CMat2 {
    pub fn from_rows(r1: CVec2, r2: CVec2) -> Self {
        CMat2 { rows: [r1, r2] }
    }

    pub fn identity() -> Self {
        CMat2::from_rows(CVec2::from_real(1.0, 0.0), CVec2::from_real(0.0, 1.0))
    }

    pub fn row(&self, i: usize) -> &CVec2 {
        &self.rows[i]
    }

    /// Entry `(i, k)` with zero-based indices.
    pub fn entry(&self, i: usize, k: usize) -> Complex64 {
        self.rows[i].0[k]
    }

    pub fn det(&self) -> Complex64 {
        self.entry(0, 0) * self.entry(1, 1) - self.entry(0, 1) * self.entry(1, 0)
    }

    /// Matrix times column vector.
    pub fn apply(&self, v: &CVec2) -> CVec2 {
        CVec2([self.rows[0].row_dot(v), self.rows[1].row_dot(v)])
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(CVec2::is_finite)
    }

    /// Row-major stacking of real and imaginary parts (8 reals).
    pub fn to_reals(&self) -> [f64; 8] {
        let a = self.rows[0].to_reals();
        let b = self.rows[1].to_reals();
        [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]
    }
}

/// One draw of the true channel together with its row norms and unit
/// directions `h~_i = h_i / ||h_i||` (column vectors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h: CMat2,
    pub norms: [f64; 2],
    pub directions: [CVec2; 2],
}

impl ChannelRealization {
    /// Wraps a channel matrix, deriving norms and directions from its rows.
    pub fn from_matrix(h: CMat2) -> Self {
        let norms = [h.rows[0].norm(), h.rows[1].norm()];
        let directions = [
            h.rows[0].conj().scale(1.0 / norms[0]),
            h.rows[1].conj().scale(1.0 / norms[1]),
        ];
        ChannelRealization { h, norms, directions }
    }

    /// Row `i` of the true channel, `h_i^H`.
    pub fn row(&self, i: usize) -> &CVec2 {
        &self.h.rows[i]
    }
}

/// One circularly-symmetric `CN(0, 1)` draw.
pub fn sample_cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A vector with i.i.d. `CN(0, 1)` entries.
pub fn sample_cn_vec2<R: Rng + ?Sized>(rng: &mut R) -> CVec2 {
    let a = sample_cn01(rng);
    let b = sample_cn01(rng);
    CVec2([a, b])
}

/// Channel with four i.i.d. `CN(0, 1)` coefficients drawn from `stream`.
pub fn sample_channel(stream: &RngStream) -> ChannelRealization {
    sample_channel_with(&mut stream.generator())
}

pub fn sample_channel_with<R: Rng + ?Sized>(rng: &mut R) -> ChannelRealization {
    let r1 = sample_cn_vec2(rng);
    let r2 = sample_cn_vec2(rng);
    ChannelRealization::from_matrix(CMat2::from_rows(r1, r2))
}
