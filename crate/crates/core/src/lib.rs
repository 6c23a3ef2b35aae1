//! Estimation of the covariance kernel Γ(x,y) = Cov(Z(x), Z(y)) of a latent
//! process from n noisy curves observed synchronously at p design points.
//!
//! The estimator smooths the empirical covariances z_{j,k} with bivariate
//! local-polynomial weights restricted to the upper triangle
//! T = {(x,y): 0 ≤ x ≤ y ≤ 1}. Restricting to pairs j < k keeps the
//! σ_ε²-biased empirical variances out of the fit and lets the estimator
//! track kernels with a kink on the diagonal (Ornstein-Uhlenbeck being the
//! canonical example). A comparator that smooths across the diagonal
//! (excluding only j = k) is available through the same code path.
//!
//! Modules:
//! - [`grid`]: design grids on [0,1] and triangular evaluation grids
//! - [`kernels`]: monomial basis vectors and compactly supported kernels
//! - [`weights`]: the local-polynomial weight field and its axioms
//! - [`estimator`]: empirical covariances, the smoothed surface, std/correlation
//! - [`cv`]: K-fold sup-norm cross-validation for the bandwidth
//! - [`sim`]: exact-in-law process simulators and observation noise
//! - [`experiments`]: Monte Carlo studies (sweeps, rates, decomposition, CLT)
//! - [`io`]: CSV formats with exact float round-trips

#![forbid(unsafe_code)]

pub mod cv;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod sim;
pub mod weights;

pub use error::{Error, Result};
