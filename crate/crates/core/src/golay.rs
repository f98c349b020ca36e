//! Complementary Golay pairs and channel estimation by correlate-and-sum.
//!
//! The aperiodic autocorrelations of `ga` and `gb` add up to `2N·δ`, so
//! correlating each received sequence with its reference and summing the two
//! outputs cancels every sidelobe and leaves `2N` times the channel impulse
//! response.

use num_complex::Complex64;
use thiserror::Error;

/// Fraction of the strongest correlator output a tap must reach.
pub const RELATIVE_TAP_THRESHOLD: f64 = 0.05;
/// Multiple of the noise-floor estimate a tap must reach.
pub const NOISE_FLOOR_FACTOR: f64 = 4.0;
const FLOOR_ITERATIONS: usize = 32;
/// Fewest fully overlapping lags the noise floor is estimated from alone.
pub const MIN_FLOOR_LAGS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GolayError {
    #[error("sequence length {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("received sequences differ in length ({ga} vs {gb})")]
    LengthMismatch { ga: usize, gb: usize },
    #[error("received sequence of {len} samples is shorter than the reference ({n})")]
    TooShort { len: usize, n: usize },
    #[error("sequence entries must be +1 or -1")]
    NotBinary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolaySequencePair {
    ga: Vec<i8>,
    gb: Vec<i8>,
}

impl GolaySequencePair {
    /// Wraps an arbitrary pair of ±1 sequences without checking that they
    /// are complementary.
    pub fn from_parts(ga: Vec<i8>, gb: Vec<i8>) -> Result<Self, GolayError> {
        if ga.len() != gb.len() {
            return Err(GolayError::LengthMismatch {
                ga: ga.len(),
                gb: gb.len(),
            });
        }
        if !ga.len().is_power_of_two() || ga.len() < 2 {
            return Err(GolayError::NotPowerOfTwo(ga.len()));
        }
        if ga.iter().chain(&gb).any(|&v| v != 1 && v != -1) {
            return Err(GolayError::NotBinary);
        }
        Ok(Self { ga, gb })
    }

    pub fn len(&self) -> usize {
        self.ga.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ga.is_empty()
    }

    pub fn ga(&self) -> &[i8] {
        &self.ga
    }

    pub fn gb(&self) -> &[i8] {
        &self.gb
    }

    pub fn ga_samples(&self) -> Vec<Complex64> {
        to_samples(&self.ga)
    }

    pub fn gb_samples(&self) -> Vec<Complex64> {
        to_samples(&self.gb)
    }
}

fn to_samples(seq: &[i8]) -> Vec<Complex64> {
    seq.iter().map(|&v| Complex64::new(f64::from(v), 0.0)).collect()
}

/// Builds a pair of length `n` by recursive doubling:
/// `a' = a ‖ b`, `b' = a ‖ −b`, starting from `a = b = [+1]`.
pub fn golay_pair(n: usize) -> Result<GolaySequencePair, GolayError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(GolayError::NotPowerOfTwo(n));
    }
    let mut ga = vec![1i8];
    let mut gb = vec![1i8];
    while ga.len() < n {
        let next_a: Vec<i8> = ga.iter().chain(&gb).copied().collect();
        let next_b: Vec<i8> = ga.iter().copied().chain(gb.iter().map(|v| -v)).collect();
        ga = next_a;
        gb = next_b;
    }
    Ok(GolaySequencePair { ga, gb })
}

/// Aperiodic autocorrelation over lags `-(N-1)..=N-1`; lag 0 sits at index `N-1`.
pub fn autocorrelation(seq: &[i8]) -> Vec<i64> {
    let n = seq.len() as isize;
    (-(n - 1)..n)
        .map(|lag| {
            (0..n)
                .filter_map(|i| {
                    let j = i + lag;
                    (0..n)
                        .contains(&j)
                        .then(|| i64::from(seq[i as usize]) * i64::from(seq[j as usize]))
                })
                .sum()
        })
        .collect()
}

/// Sum of both autocorrelations; `2N` at the centre and zero elsewhere for a
/// complementary pair.
pub fn complementary_sum(pair: &GolaySequencePair) -> Vec<i64> {
    autocorrelation(&pair.ga)
        .into_iter()
        .zip(autocorrelation(&pair.gb))
        .map(|(a, b)| a + b)
        .collect()
}

/// Sliding correlation `c[k] = Σ_n rx[n+k] · conj(reference[n])` for
/// `k = 0..=rx.len() - reference.len()`.
pub fn cross_correlate(rx: &[Complex64], reference: &[Complex64]) -> Vec<Complex64> {
    if rx.len() < reference.len() {
        return Vec::new();
    }
    let conj: Vec<Complex64> = reference.iter().map(|r| r.conj()).collect();
    (0..=rx.len() - reference.len())
        .map(|k| {
            rx[k..k + conj.len()]
                .iter()
                .zip(&conj)
                .map(|(x, r)| x * r)
                .sum()
        })
        .collect()
}

/// Correlates each received sequence with its reference, sums, and
/// normalizes by `2N`. Linear in the received samples.
pub fn correlate_complementary(
    rx_ga: &[Complex64],
    rx_gb: &[Complex64],
    pair: &GolaySequencePair,
) -> Result<Vec<Complex64>, GolayError> {
    if rx_ga.len() != rx_gb.len() {
        return Err(GolayError::LengthMismatch {
            ga: rx_ga.len(),
            gb: rx_gb.len(),
        });
    }
    let n = pair.len();
    if rx_ga.len() < n {
        return Err(GolayError::TooShort {
            len: rx_ga.len(),
            n,
        });
    }
    let ca = cross_correlate(rx_ga, &pair.ga_samples());
    let cb = cross_correlate(rx_gb, &pair.gb_samples());
    let norm = 1.0 / (2 * n) as f64;
    Ok(ca.iter().zip(&cb).map(|(a, b)| (a + b) * norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirTap {
    pub delay: usize,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub taps: Vec<CirTap>,
    pub length_samples: usize,
    /// Noise magnitude estimated from the correlator output.
    pub noise_floor: f64,
}

/// Noise magnitude (RMS) of a correlator output. Starts from the median
/// scaled to the RMS of circular Gaussian noise, then repeatedly takes the
/// RMS of the outputs below `NOISE_FLOOR_FACTOR` times the estimate, so
/// that strong taps do not inflate it.
pub fn noise_floor_estimate(corr: &[Complex64]) -> f64 {
    if corr.is_empty() {
        return 0.0;
    }
    let mut mags: Vec<f64> = corr.iter().map(|c| c.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let mid = mags.len() / 2;
    let median = if mags.len() % 2 == 1 {
        mags[mid]
    } else {
        0.5 * (mags[mid - 1] + mags[mid])
    };
    let mut floor = median / std::f64::consts::LN_2.sqrt();
    for _ in 0..FLOOR_ITERATIONS {
        let limit = NOISE_FLOOR_FACTOR * floor;
        let kept = mags.partition_point(|&m| m < limit);
        let next = if kept == 0 {
            0.0
        } else {
            (mags[..kept].iter().map(|m| m * m).sum::<f64>() / kept as f64).sqrt()
        };
        if next == floor {
            break;
        }
        floor = next;
    }
    floor
}

/// Keeps the correlator outputs that clear both the relative and the
/// noise-floor threshold.
fn threshold_taps(corr: &[Complex64], floor: f64) -> Cir {
    let peak = corr.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let taps = if peak > 0.0 {
        let threshold = (RELATIVE_TAP_THRESHOLD * peak).max(NOISE_FLOOR_FACTOR * floor);
        corr.iter()
            .enumerate()
            .filter(|(_, c)| c.norm() >= threshold)
            .map(|(delay, &gain)| CirTap { delay, gain })
            .collect()
    } else {
        Vec::new()
    };
    Cir {
        taps,
        length_samples: corr.len(),
        noise_floor: floor,
    }
}

/// Tap detection on a bare correlator output.
pub fn detect_taps(corr: &[Complex64]) -> Cir {
    threshold_taps(corr, noise_floor_estimate(corr))
}

/// Matched-filter channel estimate for an arbitrary pair of reference
/// sequences, normalized by their total energy.
///
/// Taps are reported over the fully overlapping lags `0..=len-N`, and the
/// noise floor is estimated from those lags. When there are fewer than
/// `MIN_FLOOR_LAGS` of them the floor uses every lag of the aperiodic
/// correlation instead, each rescaled by `sqrt(N / overlap)` so partially
/// overlapping edge lags carry the same noise level as interior ones. A
/// noiseless channel leaves exact zeros off its support, so its floor is
/// zero.
pub fn estimate_cir_with_references(
    rx_a: &[Complex64],
    rx_b: &[Complex64],
    ref_a: &[Complex64],
    ref_b: &[Complex64],
) -> Result<Cir, GolayError> {
    if rx_a.len() != rx_b.len() {
        return Err(GolayError::LengthMismatch {
            ga: rx_a.len(),
            gb: rx_b.len(),
        });
    }
    if ref_a.len() != ref_b.len() {
        return Err(GolayError::LengthMismatch {
            ga: ref_a.len(),
            gb: ref_b.len(),
        });
    }
    let n = ref_a.len();
    let len = rx_a.len();
    if n == 0 || len < n {
        return Err(GolayError::TooShort { len, n });
    }
    let pad = |rx: &[Complex64]| {
        let zeros = std::iter::repeat_n(Complex64::new(0.0, 0.0), n - 1);
        zeros.clone().chain(rx.iter().copied()).chain(zeros).collect::<Vec<_>>()
    };
    let energy: f64 = ref_a.iter().chain(ref_b).map(|r| r.norm_sqr()).sum();
    let norm = 1.0 / energy;
    let full: Vec<Complex64> = cross_correlate(&pad(rx_a), ref_a)
        .into_iter()
        .zip(cross_correlate(&pad(rx_b), ref_b))
        .map(|(a, b)| (a + b) * norm)
        .collect();
    let interior = &full[n - 1..len];
    if interior.len() >= MIN_FLOOR_LAGS {
        return Ok(threshold_taps(interior, noise_floor_estimate(interior)));
    }
    let scaled: Vec<Complex64> = full
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let lag = i as isize - (n as isize - 1);
            let hi = (n as isize).min(len as isize - lag);
            let lo = (-lag).max(0);
            c * (n as f64 / (hi - lo) as f64).sqrt()
        })
        .collect();
    Ok(threshold_taps(interior, noise_floor_estimate(&scaled)))
}

pub fn estimate_cir(
    rx_ga: &[Complex64],
    rx_gb: &[Complex64],
    pair: &GolaySequencePair,
) -> Result<Cir, GolayError> {
    estimate_cir_with_references(rx_ga, rx_gb, &pair.ga_samples(), &pair.gb_samples())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Full linear convolution of a ±1 sequence with a sparse channel.
    fn convolve(seq: &[i8], taps: &[(usize, Complex64)]) -> Vec<Complex64> {
        let max_delay = taps.iter().map(|t| t.0).max().unwrap_or(0);
        let mut out = vec![Complex64::new(0.0, 0.0); seq.len() + max_delay];
        for &(d, g) in taps {
            for (i, &s) in seq.iter().enumerate() {
                out[i + d] += g * f64::from(s);
            }
        }
        out
    }

    #[test]
    fn base_case() {
        let p = golay_pair(2).unwrap();
        assert_eq!(p.ga(), &[1, 1]);
        assert_eq!(p.gb(), &[1, -1]);
        assert_eq!(autocorrelation(p.ga()), vec![1, 2, 1]);
        assert_eq!(autocorrelation(p.gb()), vec![-1, 2, -1]);
        assert_eq!(complementary_sum(&p), vec![0, 4, 0]);
    }

    #[test]
    fn length_eight_delta() {
        let s = complementary_sum(&golay_pair(8).unwrap());
        assert_eq!(s.len(), 15);
        assert_eq!(s[7], 16);
        assert!(s.iter().enumerate().all(|(i, &v)| i == 7 || v == 0));
    }

    #[test]
    fn non_complementary_pair_is_not_a_delta() {
        let p = GolaySequencePair::from_parts(vec![1, 1], vec![1, 1]).unwrap();
        assert_eq!(complementary_sum(&p), vec![2, 4, 2]);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert_eq!(golay_pair(12), Err(GolayError::NotPowerOfTwo(12)));
        assert_eq!(golay_pair(1), Err(GolayError::NotPowerOfTwo(1)));
        assert!(GolaySequencePair::from_parts(vec![1, 0], vec![1, 1]).is_err());
    }

    #[test]
    fn unit_tap_recovered_exactly() {
        let p = golay_pair(32).unwrap();
        let one = [(0, Complex64::new(1.0, 0.0))];
        let cir = estimate_cir(&convolve(p.ga(), &one), &convolve(p.gb(), &one), &p).unwrap();
        assert_eq!(cir.taps.len(), 1);
        assert_eq!(cir.taps[0].delay, 0);
        assert!((cir.taps[0].gain - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_taps_recovered() {
        let p = golay_pair(64).unwrap();
        let h = [
            (0, Complex64::new(1.0, 0.0)),
            (3, Complex64::new(0.5, 0.5)),
        ];
        let cir = estimate_cir(&convolve(p.ga(), &h), &convolve(p.gb(), &h), &p).unwrap();
        assert_eq!(cir.length_samples, 4);
        assert_eq!(cir.taps.len(), 2);
        for (tap, (d, g)) in cir.taps.iter().zip(h) {
            assert_eq!(tap.delay, d);
            assert!((tap.gain - g).norm() / g.norm() < 1e-9);
        }
    }

    #[test]
    fn length_mismatch() {
        let p = golay_pair(4).unwrap();
        let a = vec![Complex64::new(1.0, 0.0); 5];
        let b = vec![Complex64::new(1.0, 0.0); 6];
        assert_eq!(
            estimate_cir(&a, &b, &p),
            Err(GolayError::LengthMismatch { ga: 5, gb: 6 })
        );
        assert!(matches!(
            estimate_cir(&a[..3], &a[..3], &p),
            Err(GolayError::TooShort { .. })
        ));
    }

    #[test]
    fn silence_yields_no_taps() {
        let p = golay_pair(4).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 10];
        assert!(estimate_cir(&z, &z, &p).unwrap().taps.is_empty());
    }
}
