mod common;

use ngp_core::golay::*;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{autocorr, convolve, random_taps};

#[test]
fn complementary_delta_for_every_length() {
    let mut n = 2;
    while n <= 256 {
        let pair = golay_pair(n).unwrap();
        let sum: Vec<i64> = autocorr(pair.ga())
            .iter()
            .zip(autocorr(pair.gb()))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(sum[0], 2 * n as i64);
        assert!(sum[1..].iter().all(|&v| v == 0), "n = {n}");
        assert_eq!(complementary_sum(&pair)[n - 1..], sum[..]);
        n *= 2;
    }
}

#[test]
fn non_power_of_two_rejected() {
    for n in [0, 3, 6, 100] {
        assert!(golay_pair(n).is_err(), "n = {n}");
    }
    assert!(GolaySequencePair::from_parts(vec![1, 0], vec![1, 1]).is_err());
    assert!(GolaySequencePair::from_parts(vec![1, 1], vec![1]).is_err());
    assert!(GolaySequencePair::from_parts(vec![1, 1], vec![1, -1]).is_ok());
}

#[test]
fn noiseless_cir_is_exact() {
    let pair = golay_pair(128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let taps = random_taps(&mut rng);
        let extra = rng.random_range(0..40);
        let cir = estimate_cir(&convolve(pair.ga(), &taps, extra), &convolve(pair.gb(), &taps, extra), &pair).unwrap();
        assert!(cir.noise_floor < 1e-15, "{} {taps:?}", cir.noise_floor);
        let found: Vec<usize> = cir.taps.iter().map(|t| t.delay).collect();
        let expected: Vec<usize> = taps.iter().map(|t| t.0).collect();
        assert_eq!(found, expected);
        for (t, (_, g)) in cir.taps.iter().zip(&taps) {
            assert!((t.gain - g).norm() / g.norm() < 1e-12);
        }
    }
}

#[test]
fn single_sample_window_still_detects() {
    let pair = golay_pair(64).unwrap();
    let g = Complex64::new(0.3, -0.4);
    let rx_a: Vec<Complex64> = pair.ga_samples().iter().map(|s| s * g).collect();
    let rx_b: Vec<Complex64> = pair.gb_samples().iter().map(|s| s * g).collect();
    let cir = estimate_cir(&rx_a, &rx_b, &pair).unwrap();
    assert_eq!(cir.taps.len(), 1);
    assert!((cir.taps[0].gain - g).norm() < 1e-12);
}

#[test]
fn noise_floor_tracks_noise_level() {
    let pair = golay_pair(128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma = 0.2;
    let mut noisy = |len: usize| -> Vec<Complex64> {
        (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * sigma / 2f64.sqrt()
            })
            .collect()
    };
    let (a, b) = (noisy(400), noisy(400));
    let cir = estimate_cir(&a, &b, &pair).unwrap();
    let expected = sigma / (2.0 * 128f64).sqrt();
    assert!((cir.noise_floor / expected - 1.0).abs() < 0.15, "{}", cir.noise_floor / expected);
    assert!(cir.taps.is_empty());
}

#[test]
fn mismatched_lengths_rejected() {
    let pair = golay_pair(8).unwrap();
    let z = vec![Complex64::new(0.0, 0.0); 10];
    assert!(matches!(
        estimate_cir(&z, &z[..9], &pair),
        Err(GolayError::LengthMismatch { .. })
    ));
    assert!(matches!(estimate_cir(&z[..4], &z[..4], &pair), Err(GolayError::TooShort { .. })));
}

#[test]
fn floor_estimate_ignores_strong_outputs() {
    let mut corr = vec![Complex64::new(0.01, 0.0); 100];
    corr[10] = Complex64::new(5.0, 0.0);
    corr[40] = Complex64::new(0.0, 1.0);
    assert!((noise_floor_estimate(&corr) - 0.01).abs() < 1e-15);
    let cir = detect_taps(&corr);
    assert_eq!(cir.taps.iter().map(|t| t.delay).collect::<Vec<_>>(), vec![10, 40]);
}
