pub mod eigen;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod ode;
pub mod phase;
pub mod ptrig;
pub mod quad;
pub mod sweep;

pub use error::{Error, Result};
