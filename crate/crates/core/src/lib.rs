pub mod error;
pub mod harness;
pub mod inference;
pub mod innovations;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod population;
pub mod statistics;
pub mod symmat;

pub use error::{Error, Result};
pub use harness::VERSION;
