//! Points of the probability simplex and reference distributions on it.
//!
//! The continuous chains act on wealth fractions `(x_1, ..., x_N)` with
//! `x_i >= 0` and `sum x_i = 1`. This module provides the validated point
//! type, the uniform sampler, and the Beta/Dirichlet reference laws that the
//! statistical checks compare trajectories against.

use rand::Rng;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A point of the standard simplex: nonnegative coordinates summing to one.
///
/// Construction normalizes the input, so the invariant `sum == 1` holds up to
/// one final rounding per coordinate. Coordinates equal to zero are allowed;
/// see [`SimplexPoint::is_interior`] for the strict case.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    /// Validates and normalizes raw coordinates into a simplex point.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidDimension(coords.len()));
        }
        for (k, &c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidPoint(format!("coordinate {k} is not finite")));
            }
            if c < 0.0 {
                return Err(Error::InvalidPoint(format!(
                    "coordinate {k} is negative ({c})"
                )));
            }
        }
        let sum: f64 = coords.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidPoint("coordinates sum to zero".into()));
        }
        let coords = coords.into_iter().map(|c| c / sum).collect();
        Ok(Self { coords })
    }

    /// Wraps coordinates already known to sum to one, skipping renormalization
    /// so that untouched coordinates keep their exact bit patterns.
    pub(crate) fn from_normalized(coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() >= 2);
        debug_assert!(coords.iter().all(|&c| (0.0..=1.0).contains(&c)));
        debug_assert!((coords.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { coords }
    }

    /// In-place access for the chain kernels; callers must preserve the
    /// nonnegativity and sum-to-one invariants.
    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// The equal-shares point `(1/N, ..., 1/N)`.
    pub fn barycenter(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            coords: vec![1.0 / dim as f64; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Whether every coordinate is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&c| c > 0.0)
    }
}

/// The `l1` distance between two points of the same simplex.
pub fn l1_distance(a: &SimplexPoint, b: &SimplexPoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Draws a point uniformly from the simplex of the given dimension.
///
/// Normalized i.i.d. exponentials are uniform on the simplex; `-ln(1 - u)`
/// with `u` from `[0, 1)` keeps the logarithm's argument strictly positive.
pub fn sample_uniform_simplex<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<SimplexPoint> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    SimplexPoint::new(raw)
}

/// Shape parameters of a Beta law on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaMarginalSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaMarginalSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta shapes must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// The marginal law of one coordinate under the uniform law on the
    /// `dim`-coordinate simplex: `Beta(1, dim - 1)`.
    pub fn uniform_simplex_marginal(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Self::new(1.0, (dim - 1) as f64)
    }
}

/// The Beta cumulative distribution function at `x`.
///
/// Integer-free shapes go through the regularized incomplete beta function;
/// the `alpha == 1` and `beta == 1` cases use the closed forms so that the
/// reference values in tests carry no quadrature error.
pub fn beta_cdf(spec: BetaMarginalSpec, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "beta cdf argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let cdf = if spec.alpha == 1.0 {
        1.0 - (1.0 - x).powf(spec.beta)
    } else if spec.beta == 1.0 {
        x.powf(spec.alpha)
    } else {
        beta_reg(spec.alpha, spec.beta, x)
    };
    Ok(cdf)
}

/// Concentration parameters of a Dirichlet law on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec {
    alphas: Vec<f64>,
}

impl DirichletSpec {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidDimension(alphas.len()));
        }
        if alphas.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidParams(
                "dirichlet concentrations must be positive and finite".into(),
            ));
        }
        Ok(Self { alphas })
    }

    /// The uniform law on the `dim`-coordinate simplex (all concentrations 1).
    pub fn flat(dim: usize) -> Result<Self> {
        Self::new(vec![1.0; dim])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// Log density of the Dirichlet law at a simplex point, with respect to the
/// uniform measure induced by the first `N - 1` coordinates.
///
/// Boundary points are admitted where the density extends continuously:
/// a zero coordinate contributes nothing when its concentration is 1, gives
/// `-inf` when the concentration exceeds 1, and is rejected below 1 because
/// the density diverges there.
pub fn dirichlet_log_density(spec: &DirichletSpec, point: &SimplexPoint) -> Result<f64> {
    if spec.alphas.len() != point.dim() {
        return Err(Error::DimensionMismatch {
            left: spec.alphas.len(),
            right: point.dim(),
        });
    }
    let total: f64 = spec.alphas.iter().sum();
    let mut log_density = ln_gamma(total);
    for &a in &spec.alphas {
        log_density -= ln_gamma(a);
    }
    for (&a, &p) in spec.alphas.iter().zip(point.coords()) {
        if a == 1.0 {
            continue;
        }
        if p == 0.0 {
            if a < 1.0 {
                return Err(Error::NonFiniteDensity);
            }
            return Ok(f64::NEG_INFINITY);
        }
        log_density += (a - 1.0) * p.ln();
    }
    Ok(log_density)
}
