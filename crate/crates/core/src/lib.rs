//! Two-sided open-system dynamics at desk scale.
//!
//! This crate implements the standard reductions of a system coupled to a
//! harmonic-oscillator bath — the generalized and Markovian Langevin
//! equations, the Brownian-motion, Lindblad and Pauli master equations, and
//! the Wigner/Fokker–Planck phase-space picture — in their *two-sided* form:
//! the Markov approximation is applied symmetrically about the time origin,
//! so friction and diffusion carry a factor of `sgn(t)` and the dynamics
//! thermalize toward both the future and the past of `t = 0`.
//!
//! Each solver module ships the diagnostics that certify the defining
//! properties of this formulation: time-reversal residuals, same-sign
//! semigroup (divisibility) defects, bidirectional Gibbs fixed points, and
//! time-translation-breaking tests.
//!
//! The `cli` module binds everything into a scenario runner; see the crate
//! README for the configuration format.

pub mod bath;
pub mod brownian;
pub mod cli;
pub mod grid;
pub mod langevin;
pub mod linalg;
pub mod lindblad;
pub mod pauli;
pub mod phasespace;
pub mod quad;
pub mod quantum;

pub use grid::TimeGrid;
