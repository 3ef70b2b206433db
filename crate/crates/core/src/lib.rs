//! Infinite compositions for modified Schröder and Abel equations.
//!
//! The crate builds solutions of `P(w/λ) = p(w) f(P(w))` and
//! `F(s+1) = u(s) f(F(s))` as truncated compositions
//! `H_1(x, H_2(x, ... H_n(x, z0)))`, checks the functional equations
//! numerically, and constructs a Schröder function `Φ(λw) = f(Φ(w))` near
//! `w = 0` from inverse orbits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod engine;
pub mod expr;
pub mod kernels;
pub mod render;
pub mod solver;
pub mod verify;

pub use num_complex::Complex64;
