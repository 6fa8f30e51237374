use alloc::vec::Vec;

use crate::math::{cos, exp, floor, sin, Vec2, TAU};

/// One-dimensional factor of a trigonometric term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Cos,
    Sin,
}

impl Basis {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Basis::Cos => cos(x),
            Basis::Sin => sin(x),
        }
    }
}

/// `coeff * b1(2π k1 y1) * b2(2π k2 y2)`.
///
/// Integer frequencies give period-1 terms; a zero frequency with the cosine
/// basis is the constant 1 in that variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub coeff: f64,
    pub freq: Vec2,
    pub basis: [Basis; 2],
}

impl TrigTerm {
    pub fn constant(c: f64) -> Self {
        TrigTerm {
            coeff: c,
            freq: [0.0, 0.0],
            basis: [Basis::Cos, Basis::Cos],
        }
    }

    pub fn new(coeff: f64, freq: Vec2, basis: [Basis; 2]) -> Self {
        TrigTerm { coeff, freq, basis }
    }

    #[inline]
    pub fn eval(&self, y: Vec2) -> f64 {
        let mut v = self.coeff;
        for d in 0..2 {
            if self.freq[d] != 0.0 {
                v *= self.basis[d].apply(TAU * self.freq[d] * y[d]);
            } else if self.basis[d] == Basis::Sin {
                return 0.0;
            }
        }
        v
    }

    pub(crate) fn is_constant(&self) -> bool {
        self.coeff == 0.0 || (self.freq[0] == 0.0 && self.freq[1] == 0.0)
    }

    pub(crate) fn has_integer_freqs(&self) -> bool {
        self.freq.iter().all(|&k| k == floor(k))
    }
}

/// `amplitude * exp(-|y - center|² / sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub amplitude: f64,
    pub center: Vec2,
    pub sigma: f64,
}

impl GaussianTerm {
    #[inline]
    pub fn eval(&self, y: Vec2) -> f64 {
        let dx = y[0] - self.center[0];
        let dy = y[1] - self.center[1];
        self.amplitude * exp(-(dx * dx + dy * dy) / (self.sigma * self.sigma))
    }
}

/// A scalar closed-form expression: a trigonometric polynomial (the periodic
/// or almost-periodic part) plus a sum of Gaussian bumps (the decaying part).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    pub trig: Vec<TrigTerm>,
    pub gaussians: Vec<GaussianTerm>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn constant(c: f64) -> Self {
        Expr {
            trig: alloc::vec![TrigTerm::constant(c)],
            gaussians: Vec::new(),
        }
    }

    pub fn from_terms(trig: Vec<TrigTerm>) -> Self {
        Expr {
            trig,
            gaussians: Vec::new(),
        }
    }

    /// Appends a trigonometric term.
    pub fn with(mut self, term: TrigTerm) -> Self {
        self.trig.push(term);
        self
    }

    /// Appends a Gaussian bump.
    pub fn with_gaussian(mut self, g: GaussianTerm) -> Self {
        self.gaussians.push(g);
        self
    }

    #[inline]
    pub fn eval(&self, y: Vec2) -> f64 {
        let mut v = 0.0;
        for t in &self.trig {
            v += t.eval(y);
        }
        for g in &self.gaussians {
            v += g.eval(y);
        }
        v
    }

    #[inline]
    pub fn eval_periodic(&self, y: Vec2) -> f64 {
        self.trig.iter().map(|t| t.eval(y)).sum()
    }

    #[inline]
    pub fn eval_decaying(&self, y: Vec2) -> f64 {
        self.gaussians.iter().map(|g| g.eval(y)).sum()
    }

    pub fn periodic_part(&self) -> Expr {
        Expr::from_terms(self.trig.clone())
    }

    pub fn decaying_part(&self) -> Expr {
        Expr {
            trig: Vec::new(),
            gaussians: self.gaussians.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.trig.iter().all(|t| t.coeff == 0.0) && self.gaussians.iter().all(|g| g.amplitude == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.trig.iter().all(TrigTerm::is_constant) && self.gaussians.iter().all(|g| g.amplitude == 0.0)
    }

    pub(crate) fn has_integer_freqs(&self) -> bool {
        self.trig.iter().all(TrigTerm::has_integer_freqs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_with_zero_frequency_vanishes() {
        let t = TrigTerm::new(2.0, [0.0, 1.0], [Basis::Sin, Basis::Cos]);
        assert_eq!(t.eval([0.3, 0.0]), 0.0);
    }

    #[test]
    fn integer_terms_are_one_periodic() {
        let e = Expr::constant(2.0)
            .with(TrigTerm::new(1.0, [1.0, 0.0], [Basis::Cos, Basis::Cos]))
            .with(TrigTerm::new(0.5, [2.0, 3.0], [Basis::Sin, Basis::Cos]));
        for &y in &[[0.1, 0.2], [0.77, 0.31], [-0.4, 0.9]] {
            let base = e.eval(y);
            assert!((e.eval([y[0] + 1.0, y[1]]) - base).abs() < 1e-12);
            assert!((e.eval([y[0], y[1] + 1.0]) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_peak() {
        let g = GaussianTerm {
            amplitude: 1.0,
            center: [0.0, 0.0],
            sigma: 1.0,
        };
        assert_eq!(g.eval([0.0, 0.0]), 1.0);
    }
}
