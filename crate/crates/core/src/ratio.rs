//! Threshold weight arithmetic.
//!
//! The engine's branch test compares an integer margin against `c0 * R`,
//! where `c0` is the positive root of `w*c^2 = rho*(w+1)*(1-c)` and is
//! irrational for most `(rho, w)`. Floating point would make the tie case
//! ambiguous, so two exact tools are provided instead:
//!
//! * a sign test on the defining quadratic, which decides `x >= c0` for any
//!   rational `x` with integer arithmetic only, and
//! * a rational enclosure `[lo, hi]` of width below 1e-13 (collapsing to a
//!   point when `c0` is rational), for bound certification.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatioError {
    #[error("approximation factor must lie in (0, 1], got {0}")]
    RhoOutOfRange(String),
    #[error("cannot parse {0:?} as a decimal or fraction in (0, 1]")]
    RhoParse(String),
    #[error("lookahead must be at least 1")]
    ZeroLookahead,
}

/// Exact approximation factor in (0, 1], kept as a reduced fraction so that
/// grid values like 0.05 are representable without rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rho {
    num: u64,
    den: u64,
}

impl Rho {
    pub const ONE: Rho = Rho { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self, RatioError> {
        if num == 0 || den == 0 || num > den {
            return Err(RatioError::RhoOutOfRange(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Rho {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses either a decimal literal ("0.25") or a fraction ("1/4").
    pub fn parse(s: &str) -> Result<Self, RatioError> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: u64 = a.trim().parse().map_err(|_| RatioError::RhoParse(s.into()))?;
            let den: u64 = b.trim().parse().map_err(|_| RatioError::RhoParse(s.into()))?;
            return Rho::new(num, den);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if frac_part.len() > 18 || int_part.len() > 18 {
            return Err(RatioError::RhoParse(s.into()));
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| RatioError::RhoParse(s.into()))?
        };
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| RatioError::RhoParse(s.into()))?
        };
        let scale = 10u64.pow(frac_part.len() as u32);
        let num = int_val
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(|| RatioError::RhoParse(s.into()))?;
        Rho::new(num, scale)
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }
}

impl std::fmt::Display for Rho {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Enclosure scale: the interval width is `1/(2*w*den*SCALE) < 1e-13`.
const ENCLOSURE_SCALE: u64 = 10_000_000_000_000;

/// The threshold weight for a `(rho, w)` pair: the positive root of
/// `w*c^2 = rho*(w+1)*(1-c)`, held as a rational enclosure plus the exact
/// quadratic for sign tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdWeight {
    rho: Rho,
    lookahead: u32,
    lo: BigRational,
    hi: BigRational,
    exact: bool,
}

impl ThresholdWeight {
    pub fn compute(rho: Rho, lookahead: u32) -> Result<Self, RatioError> {
        if lookahead == 0 {
            return Err(RatioError::ZeroLookahead);
        }
        let w = BigInt::from(lookahead);
        let den = BigInt::from(rho.den);
        // c0 = (sqrt(M) - B) / (2*w*den) with B = num*(w+1), M = B^2 + 4*w*B*den.
        let b = BigInt::from(rho.num) * (&w + 1);
        let m = &b * &b + BigInt::from(4u32) * &w * &b * &den;
        let scale = BigInt::from(ENCLOSURE_SCALE);
        let scaled: BigInt = &m * &scale * &scale;
        let root = scaled.sqrt();
        let exact = &root * &root == scaled;
        let divisor = BigInt::from(2u32) * &w * &den * &scale;
        let lo = BigRational::new(&root - &b * &scale, divisor.clone());
        let hi = if exact {
            lo.clone()
        } else {
            BigRational::new(&root + 1 - &b * &scale, divisor)
        };
        debug_assert!(lo.is_positive());
        Ok(ThresholdWeight {
            rho,
            lookahead,
            lo,
            hi,
            exact,
        })
    }

    pub fn rho(&self) -> Rho {
        self.rho
    }

    pub fn lookahead(&self) -> u32 {
        self.lookahead
    }

    /// Rational enclosure `[lo, hi]` with `lo <= c0 <= hi`; `lo == hi` when
    /// the root is rational.
    pub fn enclosure(&self) -> (&BigRational, &BigRational) {
        (&self.lo, &self.hi)
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn as_f64(&self) -> f64 {
        self.lo.to_f64().unwrap_or(f64::NAN)
    }

    /// The guaranteed competitive ratio `(1 - c0) * rho` as a float.
    pub fn competitive_ratio_f64(&self) -> f64 {
        (1.0 - self.as_f64()) * self.rho.as_f64()
    }

    /// A rational lower bound on `(1 - c0) * rho`, safe to certify against.
    pub fn competitive_ratio_lower(&self) -> BigRational {
        (BigRational::from(BigInt::from(1)) - &self.hi) * self.rho.as_rational()
    }

    /// Decides `margin >= c0 * scale` exactly.
    ///
    /// For non-negative `margin` and positive `scale` this is the sign of
    /// `w*den*margin^2 + num*(w+1)*margin*scale - num*(w+1)*scale^2`, because
    /// the defining quadratic is strictly increasing on the non-negative ray
    /// and vanishes exactly at `c0`.
    pub fn margin_meets(&self, margin: i128, scale: u64) -> bool {
        if scale == 0 {
            return margin >= 0;
        }
        if margin < 0 {
            return false;
        }
        let w = BigInt::from(self.lookahead);
        let den = BigInt::from(self.rho.den);
        let coef = BigInt::from(self.rho.num) * (&w + 1);
        let d = BigInt::from(margin);
        let r = BigInt::from(scale);
        let sign: BigInt = w * den * &d * &d + &coef * &d * &r - coef * &r * &r;
        !sign.is_negative()
    }

    /// Residual of the defining equation at the enclosure midpoint, for
    /// sanity checks: `|w*c^2 - rho*(w+1)*(1-c)|`.
    pub fn residual_f64(&self) -> f64 {
        let two = BigRational::from(BigInt::from(2));
        let mid = (&self.lo + &self.hi) / two;
        let w = BigRational::from(BigInt::from(self.lookahead));
        let wp1 = BigRational::from(BigInt::from(self.lookahead + 1));
        let one = BigRational::from(BigInt::from(1));
        let res = &w * &mid * &mid - self.rho.as_rational() * wp1 * (one - &mid);
        res.to_f64().map(f64::abs).unwrap_or(f64::NAN)
    }
}
