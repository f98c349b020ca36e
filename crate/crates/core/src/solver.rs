//! Trigonometric positioning from a range and a departure or arrival angle,
//! either along a straight ray or through one specular wall bounce.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Room, WallId};
use crate::geom::{Direction, Plane, Vec3};

pub type Position = Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("ray does not reach the wall")]
    RayMissesWall,
    #[error("path length {path_m} m does not exceed the wall range {a_m} m")]
    PathTooShort { path_m: f64, a_m: f64 },
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("no error samples")]
    EmptyList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleSource {
    I2rAoa,
    I2rAod,
    R2iAod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub source: AngleSource,
}

impl AngleEstimate {
    pub fn new(source: AngleSource, direction: Direction) -> Self {
        Self {
            azimuth_deg: direction.azimuth_deg,
            elevation_deg: direction.elevation_deg,
            source,
        }
    }

    pub fn direction(&self) -> Direction {
        Direction::new(self.azimuth_deg, self.elevation_deg)
    }
}

/// Wall-bounce triangle: `a` from the anchor to the bounce point, `b` from
/// there to the target, `ψ` between the incident ray and the wall plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlosTriangle {
    pub a_m: f64,
    pub b_m: f64,
    pub psi_rad: f64,
    pub bounce: Position,
    pub wall: Plane,
}

pub fn position_los(anchor: Position, distance_m: f64, angle: &AngleEstimate) -> Result<Position, SolverError> {
    if !(distance_m >= 0.0) {
        return Err(SolverError::NegativeDistance(distance_m));
    }
    Ok(anchor + angle.direction().unit_vector() * distance_m)
}

pub fn position_nlos(
    anchor: Position,
    path_length_m: f64,
    angle: &AngleEstimate,
    wall: &Plane,
) -> Result<(Position, NlosTriangle), SolverError> {
    let dir = angle.direction().unit_vector();
    let a = wall
        .ray_intersection(anchor, dir)
        .ok_or(SolverError::RayMissesWall)?;
    if path_length_m <= a {
        return Err(SolverError::PathTooShort {
            path_m: path_length_m,
            a_m: a,
        });
    }
    let bounce = anchor + dir * a;
    let b = path_length_m - a;
    let target = bounce + wall.reflect_direction(dir) * b;
    let psi = dir.dot(wall.normal).abs().clamp(0.0, 1.0).asin();
    Ok((
        target,
        NlosTriangle {
            a_m: a,
            b_m: b,
            psi_rad: psi,
            bounce,
            wall: *wall,
        },
    ))
}

/// First room wall struck by the ray from `anchor` along `angle`.
pub fn first_wall_hit(room: &Room, anchor: Position, angle: &AngleEstimate) -> Option<(WallId, Plane, f64)> {
    let dir = angle.direction().unit_vector();
    room.walls()
        .into_iter()
        .filter_map(|(id, plane)| plane.ray_intersection(anchor, dir).map(|t| (id, plane, t)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
}

pub fn position_error(est: Position, truth: Position) -> f64 {
    est.distance(truth)
}

pub const DEFAULT_PERCENTILES: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

/// Nearest-rank percentiles: the value at rank `ceil(p/100 · n)` (at least 1)
/// of the sorted samples.
pub fn percentile_report(errors: &[f64], percentiles: &[f64]) -> Result<Vec<f64>, SolverError> {
    if errors.is_empty() {
        return Err(SolverError::EmptyList);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(percentiles
        .iter()
        .map(|p| {
            let rank = ((p / 100.0) * n as f64).ceil() as usize;
            sorted[rank.clamp(1, n) - 1]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn az(deg: f64) -> AngleEstimate {
        AngleEstimate::new(AngleSource::I2rAod, Direction::new(deg, 0.0))
    }

    fn close(a: Vec3, b: Vec3) -> bool {
        a.distance(b) < 1e-9
    }

    #[test]
    fn los_examples() {
        let o = Vec3::default();
        assert!(close(position_los(o, 4.0, &az(30.0)).unwrap(), Vec3::new(3.464_101_615_137_754, 2.0, 0.0)));
        assert!(close(position_los(o, 0.0, &az(77.0)).unwrap(), o));
        let up = AngleEstimate::new(AngleSource::I2rAoa, Direction::new(0.0, 90.0));
        assert!(close(position_los(o, 1.0, &up).unwrap(), Vec3::new(0.0, 0.0, 1.0)));
        assert!(position_los(o, -1.0, &up).is_err());
    }

    #[test]
    fn nlos_example() {
        let wall = Plane::new(Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 2.0, 0.0));
        let anchor = Vec3::new(0.0, 0.0, 1.0);
        let (p, tri) = position_nlos(anchor, 4.0 * 2f64.sqrt(), &az(45.0), &wall).unwrap();
        assert!(close(p, Vec3::new(4.0, 0.0, 1.0)));
        assert!(close(tri.bounce, Vec3::new(2.0, 2.0, 1.0)));
        assert!((tri.a_m - 8f64.sqrt()).abs() < 1e-12);
        assert!((tri.b_m - 8f64.sqrt()).abs() < 1e-12);
        assert!((tri.psi_rad.to_degrees() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn nlos_errors() {
        let wall = Plane::new(Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 2.0, 0.0));
        let anchor = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(position_nlos(anchor, 5.0, &az(0.0), &wall), Err(SolverError::RayMissesWall));
        assert!(matches!(
            position_nlos(anchor, 8f64.sqrt(), &az(45.0), &wall),
            Err(SolverError::PathTooShort { .. })
        ));
    }

    #[test]
    fn first_wall() {
        let room = Room {
            width_m: 10.0,
            depth_m: 4.0,
            height_m: 3.0,
        };
        let (id, _, t) = first_wall_hit(&room, Vec3::new(2.0, 1.0, 1.0), &az(-90.0)).unwrap();
        assert_eq!(id, WallId::South);
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(first_wall_hit(&room, Vec3::new(2.0, 1.0, 1.0), &az(10.0)).unwrap().0, WallId::East);
    }

    #[test]
    fn percentiles() {
        let r = percentile_report(&[4.0, 2.0, 3.0, 1.0], &DEFAULT_PERCENTILES).unwrap();
        assert_eq!(r, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(percentile_report(&[7.5], &DEFAULT_PERCENTILES).unwrap(), vec![7.5; 4]);
        assert_eq!(percentile_report(&[], &[50.0]), Err(SolverError::EmptyList));
    }

    #[test]
    fn error_metric() {
        let (p, q) = (Vec3::default(), Vec3::new(3.0, 4.0, 0.0));
        assert_eq!(position_error(p, q), 5.0);
        assert_eq!(position_error(q, p), 5.0);
        assert_eq!(position_error(q, q), 0.0);
    }
}
