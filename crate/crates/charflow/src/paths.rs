//! Model symplectic paths built from planar factors.
//!
//! Used to validate the index machinery against closed forms: each factor
//! is a curve in Sp(2) starting at the identity, factors are embedded into
//! the conjugate coordinate planes, and the whole path can be conjugated by
//! a fixed symplectic matrix to exercise the non-block-diagonal code path.

use crate::dynamics::SymplecticPath;
use crate::linalg;
use nalgebra::{DMatrix, Matrix2};
use std::f64::consts::PI;

/// A planar path factor on t in [0, 1].
#[derive(Debug, Clone, Copy)]
pub enum PlanarFactor {
    /// R(total * t)
    Rotation { total: f64 },
    /// N1(1, b t) = [[1, b t], [0, 1]]
    Shear { b: f64 },
    /// R(2 pi wraps t) * N1(1, b t); endpoint N1(1, b) after full loops
    RotatingShear { wraps: i32, b: f64 },
    /// R(pi t) * N1(1, -b t); endpoint N1(-1, b)
    ToNegativePair { b: f64 },
    /// diag(e^{s t}, e^{-s t}); endpoint positive hyperbolic
    Hyperbolic { stretch: f64 },
    /// R(pi t) * diag(e^{s t}, e^{-s t}); endpoint negative hyperbolic
    NegHyperbolic { stretch: f64 },
    /// R(2 pi wraps t) * diag(e^{s t}, e^{-s t})
    HyperbolicWrapped { wraps: i32, stretch: f64 },
}

fn rot(theta: f64) -> Matrix2<f64> {
    Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
}

impl PlanarFactor {
    pub fn eval(&self, t: f64) -> Matrix2<f64> {
        match *self {
            PlanarFactor::Rotation { total } => rot(total * t),
            PlanarFactor::Shear { b } => Matrix2::new(1.0, b * t, 0.0, 1.0),
            PlanarFactor::RotatingShear { wraps, b } => {
                rot(2.0 * PI * wraps as f64 * t) * Matrix2::new(1.0, b * t, 0.0, 1.0)
            }
            PlanarFactor::ToNegativePair { b } => {
                rot(PI * t) * Matrix2::new(1.0, -b * t, 0.0, 1.0)
            }
            PlanarFactor::Hyperbolic { stretch } => {
                Matrix2::new((stretch * t).exp(), 0.0, 0.0, (-stretch * t).exp())
            }
            PlanarFactor::NegHyperbolic { stretch } => {
                rot(PI * t) * Matrix2::new((stretch * t).exp(), 0.0, 0.0, (-stretch * t).exp())
            }
            PlanarFactor::HyperbolicWrapped { wraps, stretch } => {
                rot(2.0 * PI * wraps as f64 * t)
                    * Matrix2::new((stretch * t).exp(), 0.0, 0.0, (-stretch * t).exp())
            }
        }
    }

    /// Sample density needed for safe angle unwrapping and interpolation.
    fn suggested_samples(&self) -> usize {
        let wraps = match *self {
            PlanarFactor::Rotation { total } => (total.abs() / (2.0 * PI)).ceil() as usize,
            PlanarFactor::RotatingShear { wraps, .. }
            | PlanarFactor::HyperbolicWrapped { wraps, .. } => wraps.unsigned_abs() as usize,
            _ => 1,
        };
        192 * (wraps + 1)
    }
}

/// Builds the direct-sum path of the factors over [0, 1], optionally
/// conjugated by a fixed symplectic matrix.
pub fn model_path(factors: &[PlanarFactor], conjugation: Option<&DMatrix<f64>>) -> SymplecticPath {
    let samples = factors
        .iter()
        .map(PlanarFactor::suggested_samples)
        .max()
        .unwrap_or(192);
    let n = factors.len();
    let (p_inv, p) = match conjugation {
        Some(p) => (p.clone().try_inverse().expect("symplectic conjugation"), p.clone()),
        None => (DMatrix::identity(2 * n, 2 * n), DMatrix::identity(2 * n, 2 * n)),
    };
    let mut times = Vec::with_capacity(samples + 1);
    let mut matrices = Vec::with_capacity(samples + 1);
    for j in 0..=samples {
        let t = j as f64 / samples as f64;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (k, f) in factors.iter().enumerate() {
            let b = f.eval(t);
            m[(k, k)] = b[(0, 0)];
            m[(k, n + k)] = b[(0, 1)];
            m[(n + k, k)] = b[(1, 0)];
            m[(n + k, n + k)] = b[(1, 1)];
        }
        times.push(t);
        matrices.push(&p_inv * m * &p);
    }
    SymplecticPath::from_samples(times, matrices, None)
}

/// Deterministic pseudo-random symplectic matrix, exp(J S) with S symmetric.
pub fn random_symplectic(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xD1B54A32D192ED03);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state as f64 / u64::MAX as f64) - 0.5
    };
    let mut s = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = 0.6 * next();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    linalg::mat_exp(&linalg::j_mul_mat(&s))
}
