//! Stochastic network model of the low Earth orbit object population.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::field_reassign_with_default)]

pub mod breakup;
pub mod capacity;
pub mod collision;
pub mod decay;
pub mod domain;
pub mod engine;
pub mod error;
pub mod io;
pub mod launch;
pub mod netanalysis;
pub mod orbit;
pub mod population;
pub mod validation;

pub use domain::{CircularDrag, DensityMode, SimConfig};
pub use domain::{NetworkState, Node, NodeId, OrbitSite, SiteGrid, SiteLookup, SpaceObject, Species};
pub use error::{Error, Result};
