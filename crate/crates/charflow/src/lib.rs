//! charflow: closed characteristics on compact star-shaped hypersurfaces.
//!
//! The crate finds periodic solutions of the characteristic flow on gauge
//! hypersurfaces in R^{2n}, computes their symplectic invariants (action,
//! Floquet multipliers, Maslov-type and mean indices), and verifies the
//! global identities that tie those invariants together (resonance sums,
//! Morse-series positivity, action and pinching bounds, ellipticity
//! verdicts).
//!
//! Start with the runnable programs in `examples/`; each one exercises a
//! major capability end to end. The `charflow` binary drives the same
//! pipeline in batch mode (`survey`, `analyze`, `verify`, `table`).

pub mod error;
pub mod linalg;
pub mod surface;
pub mod dynamics;
pub mod spectral;
pub mod maslov;
pub mod paths;

pub use error::{Error, Result};
