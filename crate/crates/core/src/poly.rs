//! Polynomials in the deformation weight `g = h·H(t)`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense coefficient list `c_0 + c_1 g + c_2 g² + ...`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c]).trimmed()
    }

    /// `c · g^k`
    pub fn monomial(k: usize, c: f64) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly(v).trimmed()
    }

    /// `c · g · (1 + g)^k`
    pub fn g_times_one_plus_g(k: usize, c: f64) -> Self {
        let mut p = Poly::monomial(1, c);
        for _ in 0..k {
            p = p.mul(&Poly(vec![1.0, 1.0]));
        }
        p
    }

    fn trimmed(mut self) -> Self {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// True when every term carries at least one factor of g.
    pub fn is_h_scaled(&self) -> bool {
        !self.is_zero() && self.0.first().map_or(true, |&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    /// `(power, coefficient)` pairs for the nonzero terms.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, c)| c != 0.0)
    }

    pub fn eval(&self, g: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * g + c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.0.len().max(other.0.len());
        Poly((0..len).map(|k| self.coeff(k) + other.coeff(k)).collect()).trimmed()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut v = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly(v).trimmed()
    }

    pub fn scale(&self, c: f64) -> Poly {
        Poly(self.0.iter().map(|v| v * c).collect()).trimmed()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .terms()
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}*g"),
                _ => format!("{c}*g^{k}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion() {
        // g(1+g)^2 = g + 2g² + g³
        assert_eq!(Poly::g_times_one_plus_g(2, 1.0), Poly(vec![0.0, 1.0, 2.0, 1.0]));
        assert!(Poly::g_times_one_plus_g(0, -1.0).is_h_scaled());
        assert!(!Poly::constant(1.0).is_h_scaled());
        assert!(!Poly::zero().is_h_scaled());
    }

    #[test]
    fn eval_and_arith() {
        let p = Poly(vec![1.0, -2.0]);
        let q = Poly(vec![0.0, 0.5]);
        assert_eq!(p.mul(&q).eval(3.0), p.eval(3.0) * q.eval(3.0));
        assert_eq!(p.add(&p.scale(-1.0)), Poly::zero());
        assert_eq!(format!("{}", Poly(vec![0.0, -1.0, 2.0])), "-1*g + 2*g^2");
    }
}
