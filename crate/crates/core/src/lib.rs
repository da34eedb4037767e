//! Quadratic Wasserstein distances and weighted negative Sobolev norms of
//! measures on intervals and flat tori, plus a harness that checks the
//! comparison inequalities between them on generated instances.
//!
//! Modules:
//!
//! * [`grid`]: domains, densities, scalar fields and instance generators.
//! * [`sobolev`]: weighted `H^1` seminorm and dual `H^-1` norm through a
//!   conjugate-gradient weighted Poisson solver (with a dense oracle).
//! * [`wasserstein`]: exact `W_2` by quantile integration and by network
//!   simplex, couplings and the dilation transform of couplings.
//! * [`interpolation`]: mixture and displacement paths and density audits.
//! * [`bounds`]: inequality checks, check reports and seeded sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod grid;
pub mod interpolation;
pub mod par;
pub mod sobolev;
pub mod wasserstein;

pub use error::{Error, Result};
pub use grid::{make_measure, Boundary, Density, Generator, GridDomain, ScalarField, SignedDensity};
pub use par::Execution;
