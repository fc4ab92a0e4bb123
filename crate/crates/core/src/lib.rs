//! Lyapunov exponents of Brownian motion in random potentials: a variational
//! solver on the one-dimensional torus, a Feynman–Kac Monte Carlo estimator
//! of travel costs, and the Poisson line-process constructions.

pub mod experiments;
pub mod lines;
pub mod mc;
pub mod potential;
pub mod rng;
pub mod special;
pub mod stats;
pub mod varform;

pub use lines::{LineProcessSample, LineRep, StripeParams};
pub use mc::{McConfig, PotentialField, TravelCostEstimate};
pub use potential::{PotentialSpec, TorusPotential};
pub use varform::{gamma, GammaResult, SolverOptions};
