//! Simulation and verification toolkit for conservative pairwise-exchange
//! dynamics of wealth.
//!
//! Three related models share one conservation law (total wealth is fixed)
//! and one elementary move (pool the holdings of two agents, then split the
//! pool at random):
//!
//! - [`chain_dd`]: a Markov chain on integer compositions of `n` coins among
//!   `N` agents. Its transition matrix is doubly stochastic, so the uniform
//!   distribution on the discrete simplex is stationary.
//! - [`chain_dc`]: the same move with a continuous split, a chain on the
//!   simplex whose stationary law is uniform (flat Dirichlet) with
//!   Beta(1, N-1) coordinate marginals. Includes a deterministic router that
//!   connects any two interior points in exactly N-1 moves.
//! - [`kinetic`]: binary wealth exchange with a propensity parameter and
//!   multiplicative noise, simulated by direct Monte Carlo over interaction
//!   events; moment growth rates follow S(s) = (1-lambda)^s + lambda^s - 1.
//! - [`fokker_planck`]: a conservative finite-volume solver for the
//!   mean-field limit of the kinetic model, with a closed-form zero-flux
//!   stationary profile used as the accuracy oracle.
//!
//! [`stats`] holds the shared verification machinery: Kolmogorov-Smirnov
//! distances, total variation, return-time survival curves, tail fits, and
//! the coupling experiment that measures how the discrete chain approaches
//! the continuous one.

pub mod chain_dc;
pub mod chain_dd;
pub mod error;
pub mod fokker_planck;
pub mod kinetic;
pub mod rng;
pub mod simplex;
pub mod stats;

pub use chain_dd::DiscretePoint;
pub use error::{Error, Result};
pub use fokker_planck::{DensityField, FpConfig};
pub use kinetic::{ExchangeParams, WealthPopulation};
pub use simplex::SimplexPoint;
