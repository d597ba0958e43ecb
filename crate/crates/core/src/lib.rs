pub mod admissibility;
pub mod analysis;
pub mod cli;
pub mod green;
pub mod io;
pub mod kernels;
pub mod numerics;
pub mod rate;
pub mod sim;

pub use sim::Params;
