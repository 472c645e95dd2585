//! Scalar abstraction over binary64 and MPFR extended precision.
//!
//! Every numerical routine in this crate is generic over [`Real`]. The f64
//! implementation is the default; [`MpReal`] wraps `rug::Float` for the
//! extended-precision mode (configurable decimal digits, default 50), which
//! is required for deep Cantor approximants and large polynomial degrees
//! where products like `Cap(K)^n` leave the binary64 exponent range.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_rational::Rational64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

/// Default number of decimal digits for the extended-precision mode.
pub const DEFAULT_EXTENDED_DIGITS: u32 = 50;

/// Real scalar usable by the numerical core.
///
/// Values carry their own precision; `val`, `val_i64`, `from_ratio` and
/// `pi` create new values at the precision of `self`, so a routine only
/// needs one seed value to stay at a uniform precision throughout.
pub trait Real:
    Sized
    + Clone
    + PartialOrd
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign<Self>
    + SubAssign<Self>
    + MulAssign<Self>
    + DivAssign<Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
{
    /// Root constructor: a value at `digits` decimal digits of working
    /// precision. The f64 implementation ignores `digits`.
    fn seed(digits: u32, x: f64) -> Self;

    /// New value with the same precision as `self`.
    fn val(&self, x: f64) -> Self;

    fn val_i64(&self, k: i64) -> Self;

    /// Exact rational `num/den` rendered at the precision of `self`.
    fn from_ratio(&self, r: Rational64) -> Self;

    fn pi(&self) -> Self;

    /// Decimal digits of working precision.
    fn digits(&self) -> u32;

    /// Unit roundoff at this precision.
    fn epsilon(&self) -> Self;

    fn to_f64(&self) -> f64;

    fn is_finite_val(&self) -> bool;

    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cos(self) -> Self;
    fn sin(self) -> Self;
    fn cosh(self) -> Self;
    fn sinh(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn powf(self, e: &Self) -> Self;

    fn is_zero(&self) -> bool {
        *self == self.val(0.0)
    }

    fn is_sign_neg(&self) -> bool {
        *self < self.val(0.0)
    }
}

/// max of two scalars by value.
pub fn rmax<R: Real>(a: R, b: R) -> R {
    if a >= b {
        a
    } else {
        b
    }
}

/// min of two scalars by value.
pub fn rmin<R: Real>(a: R, b: R) -> R {
    if a <= b {
        a
    } else {
        b
    }
}

impl Real for f64 {
    fn seed(_digits: u32, x: f64) -> Self {
        x
    }
    fn val(&self, x: f64) -> Self {
        x
    }
    fn val_i64(&self, k: i64) -> Self {
        k as f64
    }
    fn from_ratio(&self, r: Rational64) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }
    fn pi(&self) -> Self {
        std::f64::consts::PI
    }
    fn digits(&self) -> u32 {
        15
    }
    fn epsilon(&self) -> Self {
        f64::EPSILON
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn powf(self, e: &Self) -> Self {
        f64::powf(self, *e)
    }
}

/// Extended-precision scalar backed by MPFR.
#[derive(Clone, Debug)]
pub struct MpReal(pub Float);

fn digits_to_bits(digits: u32) -> u32 {
    // log2(10) = 3.3219..., plus guard bits
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

impl MpReal {
    pub fn with_digits(digits: u32, x: f64) -> Self {
        MpReal(Float::with_val(digits_to_bits(digits), x))
    }

    pub fn prec_bits(&self) -> u32 {
        self.0.prec()
    }
}

impl fmt::Display for MpReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl PartialEq for MpReal {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for MpReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! mp_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<MpReal> for MpReal {
            type Output = MpReal;
            fn $method(self, rhs: MpReal) -> MpReal {
                MpReal($trait::$method(self.0, rhs.0))
            }
        }
        impl<'a> $trait<&'a MpReal> for MpReal {
            type Output = MpReal;
            fn $method(self, rhs: &'a MpReal) -> MpReal {
                MpReal($trait::$method(self.0, &rhs.0))
            }
        }
    };
}

macro_rules! mp_assign {
    ($trait:ident, $method:ident) => {
        impl $trait<MpReal> for MpReal {
            fn $method(&mut self, rhs: MpReal) {
                $trait::$method(&mut self.0, rhs.0);
            }
        }
        impl<'a> $trait<&'a MpReal> for MpReal {
            fn $method(&mut self, rhs: &'a MpReal) {
                $trait::$method(&mut self.0, &rhs.0);
            }
        }
    };
}

mp_binop!(Add, add);
mp_binop!(Sub, sub);
mp_binop!(Mul, mul);
mp_binop!(Div, div);
mp_assign!(AddAssign, add_assign);
mp_assign!(SubAssign, sub_assign);
mp_assign!(MulAssign, mul_assign);
mp_assign!(DivAssign, div_assign);

impl Neg for MpReal {
    type Output = MpReal;
    fn neg(self) -> MpReal {
        MpReal(-self.0)
    }
}

impl Real for MpReal {
    fn seed(digits: u32, x: f64) -> Self {
        MpReal::with_digits(digits, x)
    }
    fn val(&self, x: f64) -> Self {
        MpReal(Float::with_val(self.0.prec(), x))
    }
    fn val_i64(&self, k: i64) -> Self {
        MpReal(Float::with_val(self.0.prec(), k))
    }
    fn from_ratio(&self, r: Rational64) -> Self {
        let num = Float::with_val(self.0.prec(), *r.numer());
        MpReal(num / *r.denom())
    }
    fn pi(&self) -> Self {
        MpReal(Float::with_val(self.0.prec(), Constant::Pi))
    }
    fn digits(&self) -> u32 {
        ((self.0.prec().saturating_sub(16)) as f64 / std::f64::consts::LOG2_10).floor() as u32
    }
    fn epsilon(&self) -> Self {
        let prec = self.0.prec();
        MpReal(Float::with_val(prec, 1) >> (prec - 1))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn is_finite_val(&self) -> bool {
        self.0.is_finite()
    }
    fn abs(self) -> Self {
        MpReal(self.0.abs())
    }
    fn sqrt(self) -> Self {
        MpReal(self.0.sqrt())
    }
    fn exp(self) -> Self {
        MpReal(self.0.exp())
    }
    fn ln(self) -> Self {
        MpReal(self.0.ln())
    }
    fn cos(self) -> Self {
        MpReal(self.0.cos())
    }
    fn sin(self) -> Self {
        MpReal(self.0.sin())
    }
    fn cosh(self) -> Self {
        MpReal(self.0.cosh())
    }
    fn sinh(self) -> Self {
        MpReal(self.0.sinh())
    }
    fn powi(self, k: i32) -> Self {
        MpReal(self.0.pow(k))
    }
    fn powf(self, e: &Self) -> Self {
        MpReal(self.0.pow(&e.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_roundtrips() {
        let x: f64 = Real::seed(0, 0.5);
        assert_eq!(x.val(2.0), 2.0);
        assert_eq!(x.from_ratio(Rational64::new(1, 3)), 1.0 / 3.0);
        assert!((x.pi() - std::f64::consts::PI).abs() == 0.0);
    }

    #[test]
    fn mp_basic_arithmetic() {
        let x = MpReal::seed(50, 2.0);
        let s = x.clone().sqrt();
        let back = s.clone() * &s;
        let err = (back - &x).abs();
        assert!(err < x.val(1e-48), "err = {err}");
    }

    #[test]
    fn mp_exact_ratio() {
        let t = MpReal::seed(50, 0.0);
        let third = t.from_ratio(Rational64::new(1, 3));
        let three = third.clone() * t.val(3.0);
        assert!((three - t.val(1.0)).abs() < t.epsilon().val(1e-45));
    }

    #[test]
    fn mp_pi_digits() {
        let t = MpReal::seed(50, 0.0);
        let pi = t.pi();
        // 50-digit pi starts 3.14159265358979323846264338327950288419716939937510
        let diff = (pi - t.val(std::f64::consts::PI)).abs();
        assert!(diff < t.val(1e-15));
        assert!(t.digits() >= 50);
    }

    #[test]
    fn mp_epsilon_scale() {
        let t = MpReal::seed(50, 1.0);
        let eps = t.epsilon();
        assert!(eps < t.val(1e-49));
        assert!(eps > t.val(0.0));
    }
}
