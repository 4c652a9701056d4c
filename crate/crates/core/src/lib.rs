pub mod couplings;
pub mod io;
pub mod meanfield;
pub mod spin;
pub mod sequence;
