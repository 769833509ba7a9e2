//! Orbit propagation and coordinate tools for generating surrogate training data.
//!
//! Dynamics run in canonical units (Earth mean radius, `TU = √(DU³/μ)`);
//! physical inputs are converted at the boundary by [`CanonicalUnits`].

pub mod atmosphere;
pub mod elements;
pub mod error;
pub mod forces;
pub mod gravity;
pub mod integrator;
pub mod ric;
pub mod sampling;
pub mod state;
pub mod units;

pub use atmosphere::{Atmosphere, AtmosphereBand};
pub use elements::{
    cartesian_to_equinoctial, cartesian_to_keplerian, equinoctial_to_cartesian, equinoctial_to_keplerian,
    keplerian_to_cartesian, keplerian_to_equinoctial, retrograde_factor, wrap_pi, EquinoctialState, KeplerianElements,
};
pub use error::{AstroError, Result};
pub use forces::{acceleration, ForceModel, ForceModelConfig};
pub use gravity::{StokesEntry, StokesTable};
pub use integrator::{propagate, Propagation};
pub use ric::{ric_frame, ric_transform};
pub use sampling::{sample_initial_states, InitialSamples};
pub use state::CartesianState;
pub use units::CanonicalUnits;
