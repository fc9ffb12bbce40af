pub mod equivariant;
pub mod error;
pub mod evalviz;
pub mod grids;
pub mod head;
pub mod harmonics;
pub mod io;
pub mod projection;
pub mod rotation;
pub mod selftest;
pub mod symsol;
pub mod trainer;

pub use error::{Error, Result};
pub use rotation::Rotation;
