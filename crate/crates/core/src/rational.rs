//! Exact rational arithmetic.
//!
//! Streaming intervals and node levels are ratios of element counts and need
//! not be integers, so every analysis carries them as exact rationals. The
//! wide integer backing keeps products like `(k_out - 1) * si_out` exact for
//! 64-bit data volumes.

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::error::CoreError;

/// Exact rational quantity (streaming intervals, levels, error metrics).
pub type Q = Ratio<i128>;

/// Rational from an unsigned count.
pub fn q(n: u64) -> Q {
    Q::from_integer(n as i128)
}

/// Rational from a numerator/denominator pair.
pub fn q_ratio(num: u64, den: u64) -> Q {
    Q::new(num as i128, den as i128)
}

/// Ceiling of a nonnegative rational as a `u64` time/count value.
pub fn ceil_u64(x: Q) -> u64 {
    debug_assert!(x >= Q::from_integer(0), "ceil_u64 on negative value");
    let c = x.ceil().to_integer();
    u64::try_from(c).expect("rational value exceeds u64 range")
}

pub fn q_to_f64(x: Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Production rate of a compute or buffer node: a positive rational in
/// lowest terms. `k_out = rate * k_in` for every canonical node.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u64,
    den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self, CoreError> {
        if num == 0 || den == 0 {
            return Err(CoreError::BadRate {
                id: String::new(),
                reason: format!("rate {num}/{den} must be positive"),
            });
        }
        let g = num_integer::gcd(num, den);
        Ok(Rate {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_q(&self) -> Q {
        q_ratio(self.num, self.den)
    }

    pub fn is_elementwise(&self) -> bool {
        self.num == self.den
    }

    pub fn is_downsampler(&self) -> bool {
        self.num < self.den
    }

    pub fn is_upsampler(&self) -> bool {
        self.num > self.den
    }

    /// Exact `rate * k_in`, or `None` when the product is not an integer or
    /// does not fit in 64 bits.
    pub fn apply(&self, k_in: u64) -> Option<u64> {
        let prod = k_in as u128 * self.num as u128;
        if !prod.is_multiple_of(self.den as u128) {
            return None;
        }
        u64::try_from(prod / self.den as u128).ok()
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
