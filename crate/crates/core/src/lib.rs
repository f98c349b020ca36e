//! Positioning over 60 GHz fine timing measurement: frame codecs, Golay
//! channel estimation, a geometric channel simulator, beam training, the
//! measurement session, PASN security and a trigonometric position solver.

pub mod beamtraining;
pub mod channel;
pub mod frames;
pub mod geom;
pub mod golay;
pub mod harness;
pub mod rng;
pub mod secure;
pub mod session;
pub mod solver;

pub use geom::SPEED_OF_LIGHT;
