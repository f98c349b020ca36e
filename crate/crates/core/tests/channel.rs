mod common;

use ngp_core::channel::*;
use ngp_core::geom::{Direction, Vec3, C_M_PER_PS};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unfolded path lengths through each wall of a box room, from the
/// coordinates of the mirrored receiver.
fn image_lengths(room: &Room, a: Vec3, b: Vec3) -> Vec<(WallId, f64)> {
    let images = [
        (WallId::West, Vec3::new(-b.x, b.y, b.z)),
        (WallId::East, Vec3::new(2.0 * room.width_m - b.x, b.y, b.z)),
        (WallId::South, Vec3::new(b.x, -b.y, b.z)),
        (WallId::North, Vec3::new(b.x, 2.0 * room.depth_m - b.y, b.z)),
    ];
    images.iter().map(|&(w, img)| (w, a.distance(img))).collect()
}

#[test]
fn reflections_match_mirrored_receiver() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..300 {
        let room = Room {
            width_m: rng.random_range(3.0..15.0),
            depth_m: rng.random_range(3.0..15.0),
            height_m: 3.0,
        };
        let mut place = || {
            Vec3::new(
                rng.random_range(0.1..room.width_m - 0.1),
                rng.random_range(0.1..room.depth_m - 0.1),
                rng.random_range(0.5..2.5),
            )
        };
        let (a, b) = (place(), place());
        let g = Geometry::new(room).with_sta("a", a).with_sta("b", b);
        let taps = compute_paths(&g, "a", "b").unwrap();
        assert_eq!(taps.len(), 5);
        assert!(taps.windows(2).all(|w| w[0].delay_ps <= w[1].delay_ps));
        for (wall, len) in image_lengths(&room, a, b) {
            let t = taps.iter().find(|t| t.kind == PathKind::Reflected(wall)).unwrap();
            assert!((t.path_length_m - len).abs() < 1e-9);
            assert!((t.delay_ps - len / C_M_PER_PS).abs() < 1e-6);
            let p = t.bounce.unwrap();
            assert!((a.distance(p) + p.distance(b) - len).abs() < 1e-9);
            assert!((t.gain_co.norm() * len - 10f64.powf(-0.25) * 35f64.to_radians().cos()).abs() < 1e-12);
        }
        let direct = &taps[0];
        assert_eq!(direct.kind, PathKind::Direct);
        assert!((direct.gain_co.re - 1.0 / a.distance(b)).abs() < 1e-15);
    }
}

#[test]
fn blocker_removes_direct_and_crossing_bounces() {
    let room = Room {
        width_m: 10.0,
        depth_m: 6.0,
        height_m: 3.0,
    };
    let g = Geometry::new(room)
        .with_sta("a", Vec3::new(2.0, 3.0, 1.0))
        .with_sta("b", Vec3::new(8.0, 3.0, 1.0))
        .with_blocker([5.0, 2.0], [5.0, 4.0]);
    let taps = compute_paths(&g, "a", "b").unwrap();
    let kinds: Vec<PathKind> = taps.iter().map(|t| t.kind).collect();
    // West and east bounces retrace the blocked line; north and south clear it.
    assert_eq!(
        kinds,
        vec![PathKind::Reflected(WallId::South), PathKind::Reflected(WallId::North)]
    );
}

#[test]
fn invalid_stations() {
    let g = Geometry::new(Room {
        width_m: 4.0,
        depth_m: 4.0,
        height_m: 3.0,
    })
    .with_sta("a", Vec3::new(1.0, 1.0, 1.0))
    .with_sta("b", Vec3::new(1.0, 1.0, 1.0))
    .with_sta("out", Vec3::new(5.0, 1.0, 1.0));
    assert_eq!(compute_paths(&g, "a", "b"), Err(ChannelError::CoincidentStations));
    assert_eq!(compute_paths(&g, "a", "zz"), Err(ChannelError::UnknownSta("zz".into())));
    assert_eq!(g.validate(), Err(ChannelError::OutsideRoom("out".into())));
}

#[test]
fn array_factor_against_element_sum() {
    let array = ArrayConfig {
        rows: 3,
        cols: 4,
        ..ArrayConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let awv = AwvConfig::new(1, rng.random_range(-180.0..180.0), rng.random_range(-30.0..30.0));
        let dir = Direction::new(rng.random_range(-180.0..180.0), rng.random_range(-60.0..60.0));
        let (az, el) = (dir.azimuth_deg.to_radians(), dir.elevation_deg.to_radians());
        let (saz, sel) = (awv.steer_azimuth_deg.to_radians(), awv.steer_elevation_deg.to_radians());
        let expected = if el.cos() * (az - saz).cos() < 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let k = std::f64::consts::PI;
            let mut sum = Complex64::new(0.0, 0.0);
            for r in 0..3 {
                for c in 0..4 {
                    let (x, y) = (f64::from(c) - 1.5, f64::from(r) - 1.0);
                    let phase = k * (x * el.cos() * (az - saz).sin() + y * (el.sin() - sel.sin()));
                    sum += Complex64::from_polar(1.0, phase);
                }
            }
            sum
        };
        assert!((array_gain(&array, &awv, dir) - expected).norm() < 1e-9);
    }
}

#[test]
fn single_element_is_isotropic() {
    let omni = ArrayConfig::default().quasi_omni();
    for az in [-170.0, -90.0, 0.0, 45.0, 180.0] {
        let g = array_gain(&omni, &AwvConfig::new(0, 0.0, 0.0), Direction::new(az, 10.0));
        assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn impulse_response_sums_shared_bins() {
    let (channel, awv) = common::room_channel("los_2m");
    let link = Link::co_polar(awv, AwvConfig::new(0, 0.0, 0.0));
    let h = channel.impulse_response(&link);
    let mut expected = vec![Complex64::new(0.0, 0.0); h.len()];
    for t in &channel.taps {
        expected[channel.delay_index(t.delay_ps)] += channel.effective_gain(t, &link);
    }
    assert_eq!(h, expected);
    assert!((channel.sample_period_ps() - 1000.0 / 2.16).abs() < 1e-12);
}

#[test]
fn noise_scales_with_snr() {
    let (channel, _) = common::room_channel("los_2m");
    let s10 = channel.noise_sigma(10.0);
    let s30 = channel.noise_sigma(30.0);
    assert!((s10 / s30 - 10.0).abs() < 1e-12);
    assert_eq!(channel.noise_sigma(f64::INFINITY), 0.0);
    let boresight = 36.0;
    let strongest = channel.taps[0].gain_co.norm_sqr();
    assert!((channel.reference_power() - strongest * boresight * boresight).abs() < 1e-12);
}
