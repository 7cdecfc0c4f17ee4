//! Finite-volume laboratory for transport by nearly incompressible vector
//! fields on box domains.
//!
//! The crate couples an explicit Godunov solver for the scalar conservation
//! law `d/dt rho + div(F(rho) rho) = 0` with a conservative upwind transport
//! solver that reuses the density's own face fluxes, so the discrete
//! continuity equation holds exactly. On top of these sit discrete normal
//! traces, a mollification-based approximation scheme, and a
//! splitting solver for the Keyfitz-Kranzer system.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod claw;
pub mod error;
pub mod grid;
pub mod kk;
pub mod regularize;
pub mod trace;
pub mod transport;

pub use boundary::FaceData;
pub use claw::{solve_claw, ClawSolution, FluxFamily, ScalarIBVP, Velocity};
pub use error::{Error, Result};
pub use grid::{BoundaryFace, CellField, FaceTopology, Grid, InteriorFace, Side};
pub use transport::{solve_transport, DensityFluxRecord, TransportIBVP, TransportSolution};
pub use kk::{solve_kk, split_data, KKData, KKState};
pub use regularize::{characteristics_solve, mollify_pair, MollifierSpec, SmoothFields, SpaceTimePair};
pub use trace::{extract_traces, hyperplane_trace, renormalization_check, BoundaryTrace};
