pub mod cli;
pub mod codec;
pub mod decoder;
pub mod field;
pub mod hmm;
pub mod transform;
