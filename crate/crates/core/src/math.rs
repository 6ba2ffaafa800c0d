//! Scalar and small-vector helpers shared across the crate.
//!
//! All floating-point math routes through [`Real`] so the crate builds both
//! with `std` (inherent `f64` methods) and without it (libm).

use num_complex::Complex;

pub type C64 = Complex<f64>;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

pub const PI: f64 = core::f64::consts::PI;

/// `f64` operations available under `no_std`.
pub trait Real {
    fn sqrt(self) -> f64;
    fn sin(self) -> f64;
    fn cos(self) -> f64;
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn abs(self) -> f64;
    fn powi(self, n: i32) -> f64;
    fn hypot(self, other: f64) -> f64;
    fn sinh(self) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn round(self) -> f64;
    fn max_r(self, other: f64) -> f64;
    fn min_r(self, other: f64) -> f64;
}

#[cfg(feature = "std")]
impl Real for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }
    #[inline]
    fn hypot(self, other: f64) -> f64 {
        f64::hypot(self, other)
    }
    #[inline]
    fn sinh(self) -> f64 {
        f64::sinh(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        f64::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        f64::ceil(self)
    }
    #[inline]
    fn round(self) -> f64 {
        f64::round(self)
    }
    #[inline]
    fn max_r(self, other: f64) -> f64 {
        f64::max(self, other)
    }
    #[inline]
    fn min_r(self, other: f64) -> f64 {
        f64::min(self, other)
    }
}

#[cfg(not(feature = "std"))]
impl Real for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> f64 {
        let mut acc = 1.0f64;
        let mut base = if n < 0 { 1.0 / self } else { self };
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        acc
    }
    #[inline]
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
    #[inline]
    fn sinh(self) -> f64 {
        libm::sinh(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
    #[inline]
    fn max_r(self, other: f64) -> f64 {
        if self > other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn min_r(self, other: f64) -> f64 {
        if self < other {
            self
        } else {
            other
        }
    }
}

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Normalizes `a`; caller guarantees `a` is not the zero vector.
#[inline]
pub fn unit(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// 3x3 complex matrix stored row-major.
pub type Mat3 = [[C64; 3]; 3];

pub const ZERO_MAT3: Mat3 = [[C64::new(0.0, 0.0); 3]; 3];

/// Quadratic form a . M . b.
pub fn quad_form(a: Vec3, m: &Mat3, b: Vec3) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            acc += entry * a[i] * b[j];
        }
    }
    acc
}

/// Max entrywise absolute difference between two matrices.
pub fn mat3_max_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max_r((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}

/// Max entrywise absolute value.
pub fn mat3_max_abs(a: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for row in a {
        for entry in row {
            worst = worst.max_r(entry.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_orthogonal() {
        let a = [1.0, 2.0, 3.0];
        let b = [-0.3, 0.7, 0.1];
        let c = cross(a, b);
        assert!(dot(a, c).abs() < 1e-14);
        assert!(dot(b, c).abs() < 1e-14);
    }

    #[test]
    fn quad_form_matches_manual_expansion() {
        let mut m = ZERO_MAT3;
        m[0][1] = C64::new(2.0, -1.0);
        m[2][2] = C64::new(0.5, 0.0);
        let a = [1.0, 0.0, 2.0];
        let b = [0.0, 3.0, 1.0];
        let q = quad_form(a, &m, b);
        // a0*m01*b1 + a2*m22*b2 = 1*(2-i)*3 + 2*0.5*1
        assert!((q - C64::new(7.0, -3.0)).norm() < 1e-14);
    }
}
