use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{array_gain, ArrayConfig, AwvConfig, ChannelError, ChannelTap};
use crate::golay::{estimate_cir, Cir, GolaySequencePair};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Vertical,
    Horizontal,
}

/// Beam and polarization settings at both ends of one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tx_awv: AwvConfig,
    pub rx_awv: AwvConfig,
    pub tx_pol: Polarization,
    pub rx_pol: Polarization,
}

impl Link {
    pub fn co_polar(tx_awv: AwvConfig, rx_awv: AwvConfig) -> Self {
        Self {
            tx_awv,
            rx_awv,
            tx_pol: Polarization::Vertical,
            rx_pol: Polarization::Vertical,
        }
    }

    pub fn with_polarization(self, tx_pol: Polarization, rx_pol: Polarization) -> Self {
        Self { tx_pol, rx_pol, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimChannel {
    pub taps: Vec<ChannelTap>,
    pub tx_array: ArrayConfig,
    pub rx_array: ArrayConfig,
}

impl SimChannel {
    pub fn new(taps: Vec<ChannelTap>, tx_array: ArrayConfig, rx_array: ArrayConfig) -> Self {
        Self {
            taps,
            tx_array,
            rx_array,
        }
    }

    pub fn sample_period_ps(&self) -> f64 {
        self.tx_array.sample_period_ps()
    }

    pub fn delay_index(&self, delay_ps: f64) -> usize {
        (delay_ps / self.sample_period_ps()).round() as usize
    }

    /// Gain of one tap after beamforming at both ends and polarization
    /// selection.
    pub fn effective_gain(&self, tap: &ChannelTap, link: &Link) -> Complex64 {
        let pol = if link.tx_pol == link.rx_pol {
            tap.gain_co
        } else {
            tap.gain_cross
        };
        array_gain(&self.tx_array, &link.tx_awv, tap.aod)
            * array_gain(&self.rx_array, &link.rx_awv, tap.aoa)
            * pol
    }

    /// Sampled impulse response; taps sharing a sample add coherently.
    pub fn impulse_response(&self, link: &Link) -> Vec<Complex64> {
        let Some(last) = self.taps.iter().map(|t| self.delay_index(t.delay_ps)).max() else {
            return Vec::new();
        };
        let mut h = vec![Complex64::new(0.0, 0.0); last + 1];
        for tap in &self.taps {
            h[self.delay_index(tap.delay_ps)] += self.effective_gain(tap, link);
        }
        h
    }

    /// Signal power the SNR is quoted against: the strongest tap's total
    /// power with both arrays on boresight.
    pub fn reference_power(&self) -> f64 {
        let boresight = f64::from(self.tx_array.elements() * self.rx_array.elements());
        let strongest = self
            .taps
            .iter()
            .map(|t| t.gain_co.norm_sqr() + t.gain_cross.norm_sqr())
            .fold(0.0, f64::max);
        strongest * boresight * boresight
    }

    /// Standard deviation of the complex noise per sample at `snr_db`.
    pub fn noise_sigma(&self, snr_db: f64) -> f64 {
        if snr_db.is_infinite() && snr_db > 0.0 {
            return 0.0;
        }
        (self.reference_power() / 10f64.powf(snr_db / 10.0)).sqrt()
    }

    /// Noise magnitude left on a Golay correlator output of length `n`.
    pub fn correlator_noise_floor(&self, snr_db: f64, n: usize) -> f64 {
        self.noise_sigma(snr_db) / ((2 * n) as f64).sqrt()
    }
}

/// Adds circular complex Gaussian noise with total variance `sigma²`.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let s = sigma / std::f64::consts::SQRT_2;
    for x in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x += Complex64::new(re * s, im * s);
    }
}

/// Convolves `sequence` with the sampled channel and adds noise. Output
/// length is `sequence.len() + max_delay_index`.
pub fn propagate(
    sequence: &[Complex64],
    channel: &SimChannel,
    link: &Link,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<Complex64>, ChannelError> {
    if channel.taps.is_empty() {
        return Err(ChannelError::EmptyChannel);
    }
    let h = channel.impulse_response(link);
    let mut out = vec![Complex64::new(0.0, 0.0); sequence.len() + h.len() - 1];
    for (d, &g) in h.iter().enumerate() {
        if g == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, &s) in sequence.iter().enumerate() {
            out[i + d] += g * s;
        }
    }
    add_awgn(&mut out, channel.noise_sigma(snr_db), &mut rng::stream(seed, &[]));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdpTap {
    pub delay_index: usize,
    pub i: f64,
    pub q: f64,
    pub snr_db: f64,
}

impl PdpTap {
    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.i, self.q)
    }

    pub fn power(&self) -> f64 {
        self.i * self.i + self.q * self.q
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pdp {
    pub taps: Vec<PdpTap>,
}

impl Pdp {
    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn tap_at(&self, delay_index: usize) -> Option<&PdpTap> {
        self.taps.iter().find(|t| t.delay_index == delay_index)
    }
}

/// Golay channel estimate of one TRN subfield, reported per tap.
pub fn measure_pdp(
    rx_ga: &[Complex64],
    rx_gb: &[Complex64],
    pair: &GolaySequencePair,
    noise_floor: f64,
) -> Result<Pdp, ChannelError> {
    Ok(pdp_from_cir(&estimate_cir(rx_ga, rx_gb, pair)?, noise_floor))
}

/// Per-tap report of a channel estimate, with SNR against `noise_floor`.
pub fn pdp_from_cir(cir: &Cir, noise_floor: f64) -> Pdp {
    let nf2 = noise_floor * noise_floor;
    Pdp {
        taps: cir
            .taps
            .iter()
            .map(|t| PdpTap {
                delay_index: t.delay,
                i: t.gain.re,
                q: t.gain.im,
                snr_db: 10.0 * (t.gain.norm_sqr() / nf2).log10(),
            })
            .collect(),
    }
}
