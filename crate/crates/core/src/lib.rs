pub mod attack;
pub mod bounds;
pub mod error;
pub mod keyrate;
pub mod linalg;
pub mod optim;
pub mod quantum;
pub mod search;
pub mod sim;
pub mod source;

pub use error::{Error, Result};
