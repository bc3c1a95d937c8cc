//! Dose simulation for electron-beam lithography of Dolan-bridge junctions:
//! Monte Carlo electron transport through a resist stack, radial PSF
//! extraction and fitting, dose maps over exposure layouts, proximity-effect
//! correction, and dose-window sweeps.

// Validation comparisons are written `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dose;
pub mod error;
pub mod io;
pub mod layout;
pub mod material;
pub mod pec;
pub mod psf;
pub mod transport;
pub mod window;

pub use error::{EblError, Result};
