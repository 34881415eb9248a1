//! κ-to-1 noisy trapdoor claw-free functions over LWE.

pub mod codec;
pub mod gaussian;
pub mod ntcf;
pub mod oracle;
pub mod params;
pub mod protocol;
pub mod prover;
pub mod reductions;
pub mod trapdoor;
pub mod zq;
