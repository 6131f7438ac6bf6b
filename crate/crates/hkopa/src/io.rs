//! File formats: PGM images (P2/P5), the `KOPAMAT1` binary matrix format,
//! JSON model files, and CSV reports.
//!
//! All writers produce byte-deterministic output for identical inputs;
//! floating-point values are written with the shortest representation that
//! parses back to the same bits.

pub mod mat;
pub mod model;
pub mod pgm;
pub mod report;
