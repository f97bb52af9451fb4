//! Workbench for harmonic bundles on punctured Riemann surfaces and polydisks.
//!
//! The crate builds explicit model harmonic metrics from unipotent monodromy
//! data, relaxes equivariant maps into the symmetric space `P_n` of positive
//! definite Hermitian matrices, extracts Higgs fields and residues, decides
//! weighted L² membership of germs near a normal-crossing divisor, and solves
//! the weighted ∂̄-problem on the punctured disk.
//!
//! Module map:
//! - [`mats`]: complex dense matrix kernel and the geometry of `P_n`.
//! - [`monodromy`]: unipotent logarithms, Jordan profiles, sl2 triples,
//!   monodromy weight filtrations (exact rational arithmetic).
//! - [`model`]: the explicit model metric on the punctured disk.
//! - [`flow`]: discrete equivariant harmonic-map relaxation on the twisted
//!   cylinder.
//! - [`higgs`]: Higgs field extraction, residues, operator quadruple and
//!   Kähler identity checks.
//! - [`l2sheaf`]: symbolic L² membership of germs and the graded
//!   exact-sequence probe.
//! - [`dbar`]: constructive weighted ∂̄ solver.
//! - [`report`]: structured verification reports shared by every pipeline.

pub mod acceptance;
pub mod dbar;
pub mod error;
pub mod flow;
pub mod higgs;
pub mod l2sheaf;
pub mod mats;
pub mod model;
pub mod monodromy;
pub mod report;

pub use error::{HbError, Result};
