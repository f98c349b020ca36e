use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::geom::{segments_cross, Direction, Plane, Vec3, C_M_PER_PS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
}

/// Vertical room boundaries: west `x = 0`, east `x = width`, south `y = 0`,
/// north `y = depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WallId {
    West,
    East,
    South,
    North,
}

impl WallId {
    pub const ALL: [WallId; 4] = [WallId::West, WallId::East, WallId::South, WallId::North];
}

impl Room {
    /// Wall plane with its normal pointing into the room.
    pub fn wall_plane(&self, wall: WallId) -> Plane {
        match wall {
            WallId::West => Plane::new(Vec3::new(1.0, 0.0, 0.0), Vec3::default()),
            WallId::East => Plane::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(self.width_m, 0.0, 0.0)),
            WallId::South => Plane::new(Vec3::new(0.0, 1.0, 0.0), Vec3::default()),
            WallId::North => Plane::new(Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, self.depth_m, 0.0)),
        }
    }

    pub fn walls(&self) -> [(WallId, Plane); 4] {
        WallId::ALL.map(|w| (w, self.wall_plane(w)))
    }

    pub fn strictly_contains(&self, p: Vec3) -> bool {
        p.x > 0.0
            && p.x < self.width_m
            && p.y > 0.0
            && p.y < self.depth_m
            && p.z > 0.0
            && p.z < self.height_m
    }
}

/// Floor-to-ceiling panel whose footprint is the segment `start`–`end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blocker {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Blocker {
    pub fn occludes(&self, a: Vec3, b: Vec3) -> bool {
        segments_cross([a.x, a.y], [b.x, b.y], self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionModel {
    pub loss_db: f64,
    /// Polarization rotation on bounce: co-pol keeps `cos χ`, cross-pol gets `sin χ`.
    pub cross_polar_deg: f64,
}

impl Default for ReflectionModel {
    fn default() -> Self {
        Self {
            loss_db: 5.0,
            cross_polar_deg: 35.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub room: Room,
    pub sta_positions: BTreeMap<String, Vec3>,
    #[serde(default)]
    pub blockers: Vec<Blocker>,
    #[serde(default)]
    pub reflection: ReflectionModel,
}

impl Geometry {
    pub fn new(room: Room) -> Self {
        Self {
            room,
            sta_positions: BTreeMap::new(),
            blockers: Vec::new(),
            reflection: ReflectionModel::default(),
        }
    }

    pub fn with_sta(mut self, id: &str, pos: Vec3) -> Self {
        self.sta_positions.insert(id.to_owned(), pos);
        self
    }

    pub fn with_blocker(mut self, start: [f64; 2], end: [f64; 2]) -> Self {
        self.blockers.push(Blocker { start, end });
        self
    }

    pub fn position(&self, id: &str) -> Result<Vec3, ChannelError> {
        self.sta_positions
            .get(id)
            .copied()
            .ok_or_else(|| ChannelError::UnknownSta(id.to_owned()))
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let r = &self.room;
        if !(r.width_m > 0.0 && r.depth_m > 0.0 && r.height_m > 0.0) {
            return Err(ChannelError::InvalidGeometry("room dimensions must be positive"));
        }
        if !(self.reflection.loss_db >= 0.0 && self.reflection.cross_polar_deg.is_finite()) {
            return Err(ChannelError::InvalidGeometry("bad reflection model"));
        }
        for (id, &p) in &self.sta_positions {
            if !r.strictly_contains(p) {
                return Err(ChannelError::OutsideRoom(id.clone()));
            }
        }
        Ok(())
    }

    pub fn blocked(&self, a: Vec3, b: Vec3) -> bool {
        self.blockers.iter().any(|bl| bl.occludes(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    Reflected(WallId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTap {
    /// Exact propagation delay (not quantized).
    pub delay_ps: f64,
    pub gain_co: Complex64,
    pub gain_cross: Complex64,
    pub kind: PathKind,
    pub path_length_m: f64,
    /// Departure direction at the transmitter.
    pub aod: Direction,
    /// Arrival direction at the receiver, pointing back along the path.
    pub aoa: Direction,
    pub bounce: Option<Vec3>,
}

/// Direct path plus one specular bounce per wall, ordered by delay.
pub fn compute_paths(geometry: &Geometry, tx: &str, rx: &str) -> Result<Vec<ChannelTap>, ChannelError> {
    let a = geometry.position(tx)?;
    let b = geometry.position(rx)?;
    let d = a.distance(b);
    if d <= 0.0 {
        return Err(ChannelError::CoincidentStations);
    }
    let mut taps = Vec::with_capacity(5);
    if !geometry.blocked(a, b) {
        taps.push(ChannelTap {
            delay_ps: d / C_M_PER_PS,
            gain_co: Complex64::new(1.0 / d, 0.0),
            gain_cross: Complex64::new(0.0, 0.0),
            kind: PathKind::Direct,
            path_length_m: d,
            aod: Direction::towards(a, b),
            aoa: Direction::towards(b, a),
            bounce: None,
        });
    }
    let refl = geometry.reflection;
    let loss = 10f64.powf(-refl.loss_db / 20.0);
    let chi = refl.cross_polar_deg.to_radians();
    for (wall, plane) in geometry.room.walls() {
        let image = plane.mirror(b);
        let span = image - a;
        let denom = plane.normal.dot(span);
        if denom.abs() < 1e-15 {
            continue;
        }
        let t = -plane.signed_distance(a) / denom;
        if !(t > 0.0 && t < 1.0) {
            continue;
        }
        let bounce = a + span * t;
        if geometry.blocked(a, bounce) || geometry.blocked(bounce, b) {
            continue;
        }
        let len = a.distance(bounce) + bounce.distance(b);
        let amp = loss / len;
        taps.push(ChannelTap {
            delay_ps: len / C_M_PER_PS,
            gain_co: Complex64::new(amp * chi.cos(), 0.0),
            gain_cross: Complex64::new(amp * chi.sin(), 0.0),
            kind: PathKind::Reflected(wall),
            path_length_m: len,
            aod: Direction::towards(a, bounce),
            aoa: Direction::towards(b, bounce),
            bounce: Some(bounce),
        });
    }
    taps.sort_by(|x, y| x.delay_ps.total_cmp(&y.delay_ps));
    Ok(taps)
}
