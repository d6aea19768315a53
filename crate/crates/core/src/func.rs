//! Closed-form scalar functions used for coefficients, forcing, initial data
//! and analytic references. They are plain data so problems can be written
//! to and read from config files.

use serde::{Deserialize, Serialize};

/// A scalar function of space and (optionally) time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceFn {
    Constant(f64),
    /// `Σ c_k x^k`
    Polynomial(Vec<f64>),
    /// `amplitude · sin(wavenumber · x + phase)`
    Sine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · cos(wavenumber · x + phase)`
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sech²(width · (x − center − speed·t))`
    Sech2 {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        speed: f64,
    },
    Sum(Vec<SpaceFn>),
    Product(Vec<SpaceFn>),
}

impl SpaceFn {
    pub fn zero() -> Self {
        SpaceFn::Constant(0.0)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            SpaceFn::Constant(c) => *c,
            SpaceFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            SpaceFn::Sine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * x + phase).sin(),
            SpaceFn::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * x + phase).cos(),
            SpaceFn::Sech2 {
                amplitude,
                width,
                center,
                speed,
            } => {
                let s = 1.0 / (width * (x - center - speed * t)).cosh();
                amplitude * s * s
            }
            SpaceFn::Sum(fs) => fs.iter().map(|f| f.eval(x, t)).sum(),
            SpaceFn::Product(fs) => fs.iter().map(|f| f.eval(x, t)).product(),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            SpaceFn::Sech2 { speed, .. } => *speed != 0.0,
            SpaceFn::Sum(fs) | SpaceFn::Product(fs) => fs.iter().any(SpaceFn::is_time_dependent),
            _ => false,
        }
    }

    /// True when the function is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            SpaceFn::Constant(c) => *c == 0.0,
            SpaceFn::Polynomial(c) => c.iter().all(|&v| v == 0.0),
            SpaceFn::Sine { amplitude, .. }
            | SpaceFn::Cosine { amplitude, .. }
            | SpaceFn::Sech2 { amplitude, .. } => *amplitude == 0.0,
            SpaceFn::Sum(fs) => fs.iter().all(SpaceFn::is_zero),
            SpaceFn::Product(fs) => fs.iter().any(SpaceFn::is_zero),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            SpaceFn::Constant(c) => Some(*c),
            _ if self.is_zero() => Some(0.0),
            _ => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> SpaceFn {
        match self {
            SpaceFn::Constant(c) => SpaceFn::Constant(c * factor),
            SpaceFn::Polynomial(c) => SpaceFn::Polynomial(c.iter().map(|v| v * factor).collect()),
            SpaceFn::Sine {
                amplitude,
                wavenumber,
                phase,
            } => SpaceFn::Sine {
                amplitude: amplitude * factor,
                wavenumber: *wavenumber,
                phase: *phase,
            },
            SpaceFn::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => SpaceFn::Cosine {
                amplitude: amplitude * factor,
                wavenumber: *wavenumber,
                phase: *phase,
            },
            SpaceFn::Sech2 {
                amplitude,
                width,
                center,
                speed,
            } => SpaceFn::Sech2 {
                amplitude: amplitude * factor,
                width: *width,
                center: *center,
                speed: *speed,
            },
            SpaceFn::Sum(fs) => SpaceFn::Sum(fs.iter().map(|f| f.scaled(factor)).collect()),
            SpaceFn::Product(fs) => {
                let mut fs = fs.clone();
                match fs.first_mut() {
                    Some(first) => *first = first.scaled(factor),
                    None => fs.push(SpaceFn::Constant(factor)),
                }
                SpaceFn::Product(fs)
            }
        }
    }

    pub fn sample(&self, xs: &[f64], t: f64) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x, t)).collect()
    }
}

/// The auxiliary time function H(t) that weights the deformation right-hand sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFn {
    Constant(f64),
    /// `Σ c_k t^k`
    Polynomial(Vec<f64>),
    /// `amplitude · exp(rate · t)`
    Exponential { amplitude: f64, rate: f64 },
}

impl Default for TimeFn {
    fn default() -> Self {
        TimeFn::Constant(1.0)
    }
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            TimeFn::Exponential { amplitude, rate } => amplitude * (rate * t).exp(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TimeFn::Constant(_) => true,
            TimeFn::Polynomial(c) => c.iter().skip(1).all(|&v| v == 0.0),
            TimeFn::Exponential { amplitude, rate } => *rate == 0.0 || *amplitude == 0.0,
        }
    }
}
