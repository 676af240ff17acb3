use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Div, Mul};

/// `exp(log_magnitude + i phase)`, for values whose modulus over- or
/// underflows a double. Phase is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScaledComplex {
    pub log_magnitude: f64,
    pub phase: f64,
}

fn wrap(mut phase: f64) -> f64 {
    phase %= 2.0 * PI;
    if phase > PI {
        phase -= 2.0 * PI;
    } else if phase <= -PI {
        phase += 2.0 * PI;
    }
    phase
}

impl LogScaledComplex {
    pub fn new(log_magnitude: f64, phase: f64) -> Self {
        Self {
            log_magnitude,
            phase: wrap(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.norm().ln(), z.arg())
    }

    /// `e^w` for complex `w`.
    pub fn exp(w: Complex64) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    pub fn norm(self) -> f64 {
        self.log_magnitude.exp()
    }

    /// Principal logarithm.
    pub fn ln(self) -> Complex64 {
        Complex64::new(self.log_magnitude, self.phase)
    }

    pub fn scale_log(self, log_factor: f64) -> Self {
        Self {
            log_magnitude: self.log_magnitude + log_factor,
            phase: self.phase,
        }
    }
}

impl Mul for LogScaledComplex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.log_magnitude + o.log_magnitude, self.phase + o.phase)
    }
}

impl Div for LogScaledComplex {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Self::new(self.log_magnitude - o.log_magnitude, self.phase - o.phase)
    }
}
