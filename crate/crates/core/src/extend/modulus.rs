use std::fmt;

use serde::{Serialize, Serializer};

use super::ExtendError;

/// Budgets below this are treated as lost to underflow.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// The extension modulus `E`: an `(E(ε), E(ε))`-Lipschitz partition of unity
/// on a subset extends to an `(ε, ε)`-Lipschitz one on the whole space.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulus {
    /// `E(ε) = ε² / (32 + 7ε)`: pasting radius `r = 8/ε` with the largest
    /// admissible input constant.
    Paper,
    /// `E(ε) = ε / c` with `c > 1`. Carries no guarantee of its own; outputs
    /// built with it stand or fall by verification.
    Linear(f64),
    /// Step function through `(ε_k, E_k)`: `E(ε) = E_k` for the largest
    /// `ε_k ≤ ε`.
    Table(Vec<(f64, f64)>),
}

/// Default modulus from the pasting constants.
pub fn default_modulus() -> Modulus {
    Modulus::Paper
}

impl Modulus {
    pub fn linear(c: f64) -> Result<Self, ExtendError> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(ExtendError::BadModulus(format!("linear modulus needs c > 1, got {c}")));
        }
        Ok(Modulus::Linear(c))
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self, ExtendError> {
        if points.is_empty() {
            return Err(ExtendError::BadModulus("modulus table is empty".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(x, e)) in points.iter().enumerate() {
            if !(x > 0.0 && e > 0.0 && e < x && x.is_finite()) {
                return Err(ExtendError::BadModulus(format!("table entry ({x}, {e}) must satisfy 0 < E < ε")));
            }
            if i > 0 && (points[i - 1].0 == x || points[i - 1].1 > e) {
                return Err(ExtendError::BadModulus(format!("table must be strictly increasing in ε and non-decreasing in E at ε = {x}")));
            }
        }
        Ok(Modulus::Table(points))
    }

    /// `E(ε)`.
    pub fn eval(&self, eps: f64) -> Result<f64, ExtendError> {
        match self {
            Modulus::Paper => Ok(eps * eps / (32.0 + 7.0 * eps)),
            Modulus::Linear(c) => Ok(eps / c),
            Modulus::Table(points) => match points.iter().rev().find(|p| p.0 <= eps) {
                Some(&(_, e)) => Ok(e),
                None => Err(ExtendError::BadModulus(format!("ε = {eps} lies below the modulus table"))),
            },
        }
    }

    /// `E^k(ε)`, failing once an iterate drops below [`UNDERFLOW_FLOOR`].
    pub fn iterate(&self, eps: f64, k: u64) -> Result<f64, ExtendError> {
        let mut x = eps;
        for i in 0..k {
            x = self.eval(x)?;
            if x < UNDERFLOW_FLOOR {
                return Err(ExtendError::Underflow {
                    level: 0,
                    iterations: k,
                    log10: self.log10_iterate(eps, k),
                    message: format!("E^{}({eps}) is below {UNDERFLOW_FLOOR:e}", i + 1),
                });
            }
        }
        Ok(x)
    }

    /// `log₁₀ E^k(ε)`, tracked past the range of `f64` where the modulus allows.
    pub fn log10_iterate(&self, eps: f64, k: u64) -> Option<f64> {
        let mut x = Magnitude::new(eps);
        for _ in 0..k {
            x = match self {
                Modulus::Paper => {
                    let small = x.to_f64();
                    x.square().scale(1.0 / (32.0 + 7.0 * small))
                }
                Modulus::Linear(c) => x.scale(1.0 / c),
                Modulus::Table(_) => Magnitude::new(self.eval(x.to_f64()).ok()?),
            };
        }
        Some(x.log10())
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulus::Paper => write!(f, "paper"),
            Modulus::Linear(c) => write!(f, "linear:{c}"),
            Modulus::Table(points) => write!(f, "table({} points)", points.len()),
        }
    }
}

impl Serialize for Modulus {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Positive number `mantissa · 2^exp` with `mantissa ∈ [1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnitude {
    mantissa: f64,
    exp: i64,
}

impl Magnitude {
    pub fn new(x: f64) -> Self {
        assert!(x > 0.0 && x.is_finite(), "magnitude of {x}");
        Magnitude { mantissa: x, exp: 0 }.normalized()
    }

    fn normalized(mut self) -> Self {
        let e = self.mantissa.log2().floor() as i64;
        self.mantissa /= 2f64.powi(e as i32);
        self.exp += e;
        while self.mantissa >= 2.0 {
            self.mantissa /= 2.0;
            self.exp += 1;
        }
        while self.mantissa < 1.0 {
            self.mantissa *= 2.0;
            self.exp -= 1;
        }
        self
    }

    pub fn square(self) -> Self {
        Magnitude { mantissa: self.mantissa * self.mantissa, exp: 2 * self.exp }.normalized()
    }

    pub fn scale(self, factor: f64) -> Self {
        Magnitude { mantissa: self.mantissa * factor, exp: self.exp }.normalized()
    }

    /// Nearest `f64`; zero below the subnormal range.
    pub fn to_f64(self) -> f64 {
        if self.exp < -1074 {
            0.0
        } else if self.exp > 1023 {
            f64::INFINITY
        } else {
            self.mantissa * 2f64.powi((self.exp / 2) as i32) * 2f64.powi((self.exp - self.exp / 2) as i32)
        }
    }

    pub fn log10(self) -> f64 {
        self.mantissa.log10() + self.exp as f64 * std::f64::consts::LOG10_2
    }
}
