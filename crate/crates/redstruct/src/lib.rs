//! Exact-arithmetic toolkit for reduction structures on spherical pairs of
//! split reductive groups, and for the rationality recursion on cone-indexed
//! formal power series with exponential-polynomial coefficients.
//!
//! All arithmetic is exact (big rationals, or univariate rational-coefficient
//! polynomials for one-parameter families); no floating point enters any
//! verification path.

pub mod cli;
pub mod cone_calculus;
pub mod linalg;
pub mod period_evaluator;
pub mod reduction_verifier;
pub mod ring;
pub mod root_datum;
pub mod series_engine;
