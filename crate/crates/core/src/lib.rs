pub mod bench;
pub mod channel;
pub mod codec;
pub mod dna;
pub mod error;
pub mod gf;
pub mod inner;
pub mod io;
pub mod outer;
pub mod reads;
pub mod rs;

pub use error::{Error, Result};
