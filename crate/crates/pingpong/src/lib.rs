//! Exact-arithmetic ping-pong partitions for marked virtually free groups
//! acting on the circle, realized as PL homeomorphisms in Thompson's group T,
//! with dynamical analysis (minimality certificates, DKN quantities,
//! multiconvergence probes, rotation spectra) and a floating-point
//! trigonometric-interpolation module for smooth realizations.

pub mod analytic;
pub mod arith;
pub mod cli;
pub mod dynamics;
pub mod fixtures;
pub mod groups;
pub mod realize;
pub mod render;
pub mod scheme;
