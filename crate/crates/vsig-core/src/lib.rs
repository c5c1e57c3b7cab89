//! Core library for Volterra signatures of piecewise-linear paths.
//!
//! A *Volterra path* is the kernel-weighted primitive `z_t^tau = int_0^t K(tau, s) dx_s`
//! of a driving path `x`. Its truncated signature collects all iterated integrals of
//! `x` weighted by the memory kernel `K`, indexed by words over the alphabet
//! `{1..m}` and an outer evaluation time `tau`. This crate provides
//!
//! * the truncated tensor algebra ([`tensor`]),
//! * piecewise-linear path handling and augmentations ([`path`]),
//! * memory-kernel specifications ([`kernel`]),
//! * the general-kernel signature engine built on the diagonal recursion ([`vsig`]),
//! * the linear-cost state-space engine for exponential-family kernels ([`statespace`]),
//! * the induced signature kernel and Gram assembly ([`sigkernel`]),
//! * linear Volterra equation solvers and the linear Volterra SDE simulator ([`volterra`]),
//! * ridge regression on signature features plus the HAR benchmark ([`learning`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); all transcendental math goes
//! through [`libm`] so results are identical across targets and feature sets.

#![no_std]
#![deny(unsafe_code)]
// Index-based loops are the house style for the numeric kernels, and the
// published special-function constants keep their full printed precision.
#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod error;
pub mod kernel;
pub mod learning;
pub mod linalg;
pub mod math;
pub mod path;
pub mod rng;
pub mod sigkernel;
pub mod statespace;
pub mod tensor;
pub mod volterra;
pub mod vsig;

pub use error::Error;
