//! Geometric mmWave channel: ray paths, array gains, dual-polarization taps
//! and sampled propagation of training sequences.

mod antenna;
mod geometry;
mod propagate;

pub use antenna::{array_gain, ArrayConfig, AwvConfig};
pub use geometry::{
    compute_paths, Blocker, ChannelTap, Geometry, PathKind, ReflectionModel, Room, WallId,
};
pub use propagate::{
    add_awgn, measure_pdp, pdp_from_cir, propagate, Link, Pdp, PdpTap, Polarization, SimChannel,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("unknown station {0:?}")]
    UnknownSta(String),
    #[error("station {0:?} is not strictly inside the room")]
    OutsideRoom(String),
    #[error("transmitter and receiver share a position")]
    CoincidentStations,
    #[error("channel has no taps")]
    EmptyChannel,
    #[error("invalid array configuration: {0}")]
    InvalidArray(&'static str),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error(transparent)]
    Golay(#[from] crate::golay::GolayError),
}
