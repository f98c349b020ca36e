use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::frames::Bandwidth;
use crate::geom::Direction;

/// Uniform rectangular array. The panel's broadside follows the steering
/// azimuth; columns run horizontally across it and rows vertically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub rows: u32,
    pub cols: u32,
    pub element_spacing_wavelengths: f64,
    pub carrier_ghz: f64,
    pub bandwidth_ghz: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rows: 6,
            cols: 6,
            element_spacing_wavelengths: 0.5,
            carrier_ghz: 60.48,
            bandwidth_ghz: 2.16,
        }
    }
}

impl ArrayConfig {
    /// Single-element receiver with the same RF settings.
    pub fn quasi_omni(&self) -> Self {
        Self {
            rows: 1,
            cols: 1,
            ..*self
        }
    }

    pub fn elements(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn bandwidth(&self) -> Result<Bandwidth, ChannelError> {
        Bandwidth::from_ghz(self.bandwidth_ghz)
            .ok_or(ChannelError::InvalidArray("bandwidth not in the EDMG set"))
    }

    pub fn sample_period_ps(&self) -> f64 {
        1000.0 / self.bandwidth_ghz
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ChannelError::InvalidArray("array needs at least one element"));
        }
        if !(self.element_spacing_wavelengths > 0.0 && self.carrier_ghz > 0.0) {
            return Err(ChannelError::InvalidArray("spacing and carrier must be positive"));
        }
        self.bandwidth().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwvConfig {
    pub awv_id: u16,
    pub steer_azimuth_deg: f64,
    pub steer_elevation_deg: f64,
}

impl AwvConfig {
    pub fn new(awv_id: u16, steer_azimuth_deg: f64, steer_elevation_deg: f64) -> Self {
        Self {
            awv_id,
            steer_azimuth_deg,
            steer_elevation_deg,
        }
    }

    pub fn steering(&self) -> Direction {
        Direction::new(self.steer_azimuth_deg, self.steer_elevation_deg)
    }
}

fn centred_line_sum(count: u32, phase_step: f64) -> Complex64 {
    let centre = (f64::from(count) - 1.0) / 2.0;
    (0..count)
        .map(|m| Complex64::from_polar(1.0, phase_step * (f64::from(m) - centre)))
        .sum()
}

/// Array factor toward `direction` with the beam steered by `awv`. The
/// element indices are centred, so the gain is real and equal to
/// `rows × cols` at the steering direction.
///
/// A multi-element panel faces the steering azimuth and has a ground plane:
/// directions behind it get no gain. A single element is isotropic.
pub fn array_gain(array: &ArrayConfig, awv: &AwvConfig, direction: Direction) -> Complex64 {
    let k = 2.0 * PI * array.element_spacing_wavelengths;
    let (az, el) = (direction.azimuth_deg.to_radians(), direction.elevation_deg.to_radians());
    let (steer_az, steer_el) = (awv.steer_azimuth_deg.to_radians(), awv.steer_elevation_deg.to_radians());
    if array.elements() > 1 && el.cos() * (az - steer_az).cos() < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let horizontal = k * el.cos() * (az - steer_az).sin();
    let vertical = k * (el.sin() - steer_el.sin());
    centred_line_sum(array.cols, horizontal) * centred_line_sum(array.rows, vertical)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boresight_gain_is_element_count() {
        let a = ArrayConfig::default();
        let awv = AwvConfig::new(0, 37.0, 5.0);
        let g = array_gain(&a, &awv, awv.steering());
        assert!((g - Complex64::new(36.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn nothing_behind_the_panel() {
        let a = ArrayConfig::default();
        let awv = AwvConfig::new(0, 180.0, 0.0);
        assert_eq!(array_gain(&a, &awv, Direction::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        assert!(array_gain(&a, &awv, Direction::new(179.0, 0.0)).norm() > 30.0);
    }

    #[test]
    fn single_element_is_isotropic() {
        let a = ArrayConfig::default().quasi_omni();
        for az in [-170.0, -30.0, 0.0, 95.0] {
            let g = array_gain(&a, &AwvConfig::new(0, 10.0, 0.0), Direction::new(az, 20.0));
            assert!((g.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn off_axis_matches_phasor_sum() {
        let a = ArrayConfig::default();
        let g = array_gain(&a, &AwvConfig::new(0, 0.0, 0.0), Direction::new(30.0, 0.0));
        let oracle: Complex64 = (0..6)
            .flat_map(|_row| (0..6).map(|m| Complex64::from_polar(1.0, PI * f64::from(m) * 0.5)))
            .sum();
        assert!((g.norm() - oracle.norm()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let a = ArrayConfig {
            bandwidth_ghz: 3.0,
            ..ArrayConfig::default()
        };
        assert!(a.validate().is_err());
    }
}
