pub mod determinants;
pub mod error;
pub mod gutzwiller;
pub mod model;
pub mod nlie;
pub mod oracle;
pub mod par;
pub mod quad;
pub mod quantize;
pub mod specfun;

pub use error::{Result, TodaError};
