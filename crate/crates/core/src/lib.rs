pub mod config;
pub mod error;
pub mod forward;
pub mod generator;
pub mod io;
pub mod math;
pub mod metrics;
pub mod optimizer;
pub mod phantom;
pub mod spcl;
pub mod theory;

pub use error::{Error, Result};
pub use math::{ComplexGrid, SmallMatrix};
pub use num_complex::Complex64;
