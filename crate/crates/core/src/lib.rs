pub mod cli;
pub mod entropy;
pub mod error;
pub mod fit;
pub mod holography;
pub mod flow;
pub mod linalg;
pub mod mera;
pub mod mps;
pub mod optimizer;
pub mod par;
pub mod superop;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Tensor, C64};
