//! Numerical engine for certifying a relativistic stability criterion.
//!
//! The crate has two halves. The continuum half builds a localization kernel
//! from smooth cutoffs ([`cutoff`], [`kernel`]), integrates it with adaptive
//! quadrature ([`quad`]), and assembles the certified constant chain up to
//! the critical coupling ([`chain`]). The lattice half discretizes the
//! relativistic kinetic operator with a magnetic field and checks the
//! operator inequalities the chain relies on ([`lattice`], [`linalg`]).
//!
//! All routines are deterministic: randomized inputs are seeded, adaptive
//! refinement breaks ties by cell age, and reported error bounds include the
//! propagated error of nested integrals.

pub mod chain;
pub mod cutoff;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod opt;
pub mod quad;
pub mod tolerances;
