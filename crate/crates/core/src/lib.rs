//! Isogenies between abelian varieties in theta coordinates, computed from a
//! kernel given over an étale algebra.

pub mod cli;
pub mod etale;
pub mod ff;
pub mod instances;
pub mod isogeny;
pub mod kernel;
pub mod poly;
pub mod ring;
pub mod theta;
pub mod velu;
