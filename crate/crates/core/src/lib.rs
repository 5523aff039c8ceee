pub mod engine;
pub mod error;
pub mod forms;
pub mod geomfe;
pub mod geometry;
pub mod jets;
pub mod quadrature;
pub mod specfun;


pub use error::{Error, Result};
