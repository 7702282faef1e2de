//! Layered hard instances for streaming bipartite matching: construction,
//! exact verification of their structure, and a budgeted-algorithm harness.

pub mod analytic;
pub mod cube;
pub mod error;
pub mod fixtures;
pub mod fvec;
pub mod gadget;
pub mod glue;
pub mod harness;
pub mod instance;
pub mod matching;
pub mod params;
pub mod predecessor;
pub mod verify;

pub use error::{Error, Result};
