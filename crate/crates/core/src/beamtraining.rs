//! First-path beam training and polarization-based LOS assessment.
//!
//! During the sweep the transmitter holds each candidate AWV for a group of
//! consecutive M-subfields while the receiver listens quasi-omni. The PDPs of
//! a group are averaged and scored; the best-scoring candidate is taken as
//! pointing at the first path. The LOS check then sends two subfields on that
//! AWV, one co-polarized and one cross-polarized, and compares the main-tap
//! powers.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{
    measure_pdp, propagate, AwvConfig, ChannelError, Link, Pdp, PdpTap, Polarization, SimChannel,
};
use crate::frames::{FrameError, TrnConfig};
use crate::golay::{correlate_complementary, GolaySequencePair};
use crate::rng::derive_seed;

/// Neighbour window (in samples) around the main tap for the quality score.
pub const QUALITY_WINDOW: usize = 3;
/// A tap with at least this fraction of the peak power can be the main tap.
pub const MAIN_TAP_FRACTION: f64 = 0.5;
pub const XPD_EPSILON: f64 = 1e-12;
/// Likelihood at or above which a link is classified as LOS.
pub const LOS_THRESHOLD: f64 = 0.9;
/// Stream label separating the LOS-check subfields from the sweep.
const LOS_STREAM: u64 = 0x4c4f_53;
/// Floor used for PDP SNR values when the link is noiseless.
const NOISELESS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("cannot combine an empty group of PDPs")]
    EmptyGroup,
    #[error("PDP has no taps")]
    EmptyPdp,
    #[error("sweep plan has no candidates")]
    NoCandidates,
    #[error("{candidates} candidates x group {group} exceed {available} sweep subfields")]
    PlanTooLarge {
        candidates: usize,
        group: usize,
        available: usize,
    },
    #[error(transparent)]
    Trn(#[from] FrameError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub candidates: Vec<AwvConfig>,
    pub trn: TrnConfig,
}

impl SweepPlan {
    pub fn new(candidates: Vec<AwvConfig>, trn: TrnConfig) -> Result<Self, BeamError> {
        trn.validate()?;
        if candidates.is_empty() {
            return Err(BeamError::NoCandidates);
        }
        let group = usize::from(trn.awv_group_size);
        let available = trn.sweep_subfields();
        if candidates.len() * group > available {
            return Err(BeamError::PlanTooLarge {
                candidates: candidates.len(),
                group,
                available,
            });
        }
        Ok(Self { candidates, trn })
    }

    /// Smallest plan holding every candidate: `P = 2`, `M = 2 × group`.
    pub fn fitted(candidates: Vec<AwvConfig>, awv_group_size: u8) -> Result<Self, BeamError> {
        let m = awv_group_size.saturating_mul(2).max(2);
        let per_unit = usize::from(m / awv_group_size.max(1));
        let units = candidates.len().div_ceil(per_unit).max(1);
        let trn = TrnConfig {
            num_units: u16::try_from(units).unwrap_or(u16::MAX),
            p_subfields: 2,
            m_subfields: m,
            awv_group_size,
        };
        Self::new(candidates, trn)
    }

    pub fn group_size(&self) -> usize {
        usize::from(self.trn.awv_group_size)
    }

    /// Candidate assigned to sweep subfield `index` (counting M-subfields only).
    pub fn candidate_for_subfield(&self, index: usize) -> Option<usize> {
        let c = index / self.group_size();
        (c < self.candidates.len()).then_some(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestAwvResult {
    pub awv: AwvConfig,
    pub index: usize,
    pub quality: f64,
    pub combined_pdp: Pdp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosLikelihoodReport {
    pub p_main_copol: f64,
    pub p_main_crosspol: f64,
    pub likelihood: f64,
}

impl LosLikelihoodReport {
    pub fn is_los(&self) -> bool {
        self.likelihood >= LOS_THRESHOLD
    }
}

/// Coherent per-delay average over the group; a PDP lacking a delay
/// contributes zero there. SNR is recomputed from the members' implied noise
/// floors, gaining `10·log10(n)` for identical taps.
pub fn combine_pdps(group: &[Pdp]) -> Result<Pdp, BeamError> {
    if group.is_empty() {
        return Err(BeamError::EmptyGroup);
    }
    let n = group.len() as f64;
    let mut acc: BTreeMap<usize, (Complex64, f64, usize)> = BTreeMap::new();
    for tap in group.iter().flat_map(|p| &p.taps) {
        let e = acc
            .entry(tap.delay_index)
            .or_insert((Complex64::new(0.0, 0.0), 0.0, 0));
        e.0 += tap.gain();
        e.1 += tap.power() / 10f64.powf(tap.snr_db / 10.0);
        e.2 += 1;
    }
    let taps = acc
        .into_iter()
        .map(|(delay_index, (sum, floor_sum, count))| {
            let mean = sum / n;
            let noise = floor_sum / count as f64 / n;
            PdpTap {
                delay_index,
                i: mean.re,
                q: mean.im,
                snr_db: 10.0 * (mean.norm_sqr() / noise).log10(),
            }
        })
        .collect();
    Ok(Pdp { taps })
}

/// Index into `pdp.taps` of the earliest tap within `MAIN_TAP_FRACTION` of
/// the peak power.
pub fn main_tap(pdp: &Pdp) -> Option<usize> {
    let peak = pdp.taps.iter().map(PdpTap::power).fold(0.0, f64::max);
    pdp.taps
        .iter()
        .position(|t| t.power() >= MAIN_TAP_FRACTION * peak && peak > 0.0)
}

/// `P_main / (1 + Σ P_k)` over taps within `QUALITY_WINDOW` samples of the
/// main tap.
pub fn pdp_quality(pdp: &Pdp) -> Result<f64, BeamError> {
    let main = main_tap(pdp).ok_or(BeamError::EmptyPdp)?;
    let k = pdp.taps[main].delay_index;
    let neighbours: f64 = pdp
        .taps
        .iter()
        .filter(|t| t.delay_index != k && t.delay_index.abs_diff(k) <= QUALITY_WINDOW)
        .map(PdpTap::power)
        .sum();
    Ok(pdp.taps[main].power() / (1.0 + neighbours))
}

/// Correlator noise floor used for tap SNR, bounded away from zero.
pub fn pdp_floor(channel: &SimChannel, snr_db: f64, n: usize) -> f64 {
    channel.correlator_noise_floor(snr_db, n).max(NOISELESS_FLOOR)
}

/// Sends one TRN subfield (both Golay halves) over `link` and measures it.
pub fn measure_subfield(
    channel: &SimChannel,
    link: &Link,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<Pdp, BeamError> {
    let (rx_a, rx_b) = receive_subfield(channel, link, pair, snr_db, seed)?;
    Ok(measure_pdp(&rx_a, &rx_b, pair, pdp_floor(channel, snr_db, pair.len()))?)
}

fn receive_subfield(
    channel: &SimChannel,
    link: &Link,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<Complex64>), BeamError> {
    let rx_a = propagate(&pair.ga_samples(), channel, link, snr_db, derive_seed(seed, &[0]))?;
    let rx_b = propagate(&pair.gb_samples(), channel, link, snr_db, derive_seed(seed, &[1]))?;
    Ok((rx_a, rx_b))
}

/// Receive AWV used while the responder listens quasi-omni.
pub fn omni_awv() -> AwvConfig {
    AwvConfig::new(0, 0.0, 0.0)
}

/// Measures and scores one candidate. Sweep subfield `j` draws its noise
/// from `derive_seed(seed, &[j])`.
pub fn evaluate_candidate(
    channel: &SimChannel,
    plan: &SweepPlan,
    index: usize,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<(f64, Pdp), BeamError> {
    let awv = plan.candidates[index];
    let link = Link::co_polar(awv, omni_awv());
    let g = plan.group_size();
    let pdps = (index * g..(index + 1) * g)
        .map(|j| measure_subfield(channel, &link, pair, snr_db, derive_seed(seed, &[j as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine_pdps(&pdps)?;
    let quality = if combined.is_empty() {
        0.0
    } else {
        pdp_quality(&combined)?
    };
    Ok((quality, combined))
}

/// Sweeps every candidate and keeps the best quality; ties go to the lower
/// `awv_id`.
pub fn fpbt(
    channel: &SimChannel,
    plan: &SweepPlan,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<BestAwvResult, BeamError> {
    let mut best: Option<BestAwvResult> = None;
    for (index, awv) in plan.candidates.iter().enumerate() {
        let (quality, combined_pdp) = evaluate_candidate(channel, plan, index, pair, snr_db, seed)?;
        let better = match &best {
            None => true,
            Some(b) => quality > b.quality || (quality == b.quality && awv.awv_id < b.awv.awv_id),
        };
        if better {
            best = Some(BestAwvResult {
                awv: *awv,
                index,
                quality,
                combined_pdp,
            });
        }
    }
    best.ok_or(BeamError::NoCandidates)
}

/// `XPD / (1 + XPD)` with `XPD = P_co / (P_cross + ε)`.
pub fn likelihood_from_powers(p_co: f64, p_cross: f64) -> f64 {
    let xpd = p_co / (p_cross + XPD_EPSILON);
    if xpd.is_infinite() {
        1.0
    } else {
        xpd / (1.0 + xpd)
    }
}

/// Subfield P+1 goes V→V and subfield P+2 goes V→H on `best_awv`. The main
/// tap is located on the co-polar estimate; both powers are read from the
/// raw correlator outputs at that delay.
pub fn los_assessment(
    channel: &SimChannel,
    best_awv: &AwvConfig,
    pair: &GolaySequencePair,
    snr_db: f64,
    seed: u64,
) -> Result<LosLikelihoodReport, BeamError> {
    let co_link = Link::co_polar(*best_awv, omni_awv());
    let cross_link = co_link.with_polarization(Polarization::Vertical, Polarization::Horizontal);
    let co_seed = derive_seed(seed, &[LOS_STREAM, 0]);
    let cross_seed = derive_seed(seed, &[LOS_STREAM, 1]);

    let floor = pdp_floor(channel, snr_db, pair.len());
    let (co_a, co_b) = receive_subfield(channel, &co_link, pair, snr_db, co_seed)?;
    let (x_a, x_b) = receive_subfield(channel, &cross_link, pair, snr_db, cross_seed)?;
    let co_pdp = measure_pdp(&co_a, &co_b, pair, floor)?;
    let co_corr = correlate_complementary(&co_a, &co_b, pair).map_err(ChannelError::from)?;
    let cross_corr = correlate_complementary(&x_a, &x_b, pair).map_err(ChannelError::from)?;
    let k = match main_tap(&co_pdp) {
        Some(i) => co_pdp.taps[i].delay_index,
        None => return Err(BeamError::EmptyPdp),
    };
    let p_co = co_corr[k].norm_sqr();
    let p_cross = cross_corr[k].norm_sqr();
    Ok(LosLikelihoodReport {
        p_main_copol: p_co,
        p_main_crosspol: p_cross,
        likelihood: likelihood_from_powers(p_co, p_cross),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tap(delay_index: usize, i: f64, q: f64) -> PdpTap {
        PdpTap {
            delay_index,
            i,
            q,
            snr_db: 30.0,
        }
    }

    #[test]
    fn combine_rules() {
        let a = Pdp {
            taps: vec![tap(0, 1.0, 0.0)],
        };
        assert_eq!(combine_pdps(std::slice::from_ref(&a)).unwrap(), a);
        let two = combine_pdps(&[a.clone(), a.clone()]).unwrap();
        assert_eq!((two.taps[0].i, two.taps[0].q), (1.0, 0.0));
        assert!((two.taps[0].snr_db - (30.0 + 10.0 * 2f64.log10())).abs() < 1e-9);
        let b = Pdp {
            taps: vec![tap(5, 1.0, 0.0)],
        };
        let joint = combine_pdps(&[a, b]).unwrap();
        let idx: Vec<_> = joint.taps.iter().map(|t| (t.delay_index, t.i)).collect();
        assert_eq!(idx, vec![(0, 0.5), (5, 0.5)]);
        assert_eq!(combine_pdps(&[]), Err(BeamError::EmptyGroup));
    }

    #[test]
    fn quality_examples() {
        let q = |taps| pdp_quality(&Pdp { taps }).unwrap();
        assert_eq!(q(vec![tap(4, 1.0, 0.0)]), 1.0);
        assert_eq!(q(vec![tap(4, 1.0, 0.0), tap(5, 1.0, 0.0)]), 0.5);
        assert!((q(vec![tap(1, 1.0, 0.0), tap(3, 2.0, 0.0), tap(6, 0.0, 1.0)]) - 4.0 / 3.0).abs() < 1e-12);
        // Taps outside the window do not count.
        assert_eq!(q(vec![tap(0, 2.0, 0.0), tap(9, 1.0, 0.0)]), 4.0);
        assert_eq!(pdp_quality(&Pdp::default()), Err(BeamError::EmptyPdp));
    }

    #[test]
    fn earliest_strong_tap_is_main() {
        let pdp = Pdp {
            taps: vec![tap(2, 0.1, 0.0), tap(7, 0.8, 0.0), tap(12, 1.0, 0.0)],
        };
        assert_eq!(main_tap(&pdp), Some(1));
    }

    #[test]
    fn likelihood_mapping() {
        assert!(likelihood_from_powers(1.0, 0.0) >= 1.0 - 1e-9);
        assert!((likelihood_from_powers(0.5, 0.5) - 0.5).abs() < 1e-9);
        assert!(likelihood_from_powers(2.0, 1.0) > likelihood_from_powers(1.0, 1.0));
        assert!(likelihood_from_powers(1.0, 2.0) < likelihood_from_powers(1.0, 1.0));
    }

    #[test]
    fn plan_capacity() {
        let trn = TrnConfig {
            num_units: 1,
            p_subfields: 2,
            m_subfields: 4,
            awv_group_size: 2,
        };
        let c = |n| (0..n).map(|i| AwvConfig::new(i, 0.0, 0.0)).collect::<Vec<_>>();
        assert!(SweepPlan::new(c(2), trn).is_ok());
        assert!(matches!(SweepPlan::new(c(3), trn), Err(BeamError::PlanTooLarge { .. })));
        let fitted = SweepPlan::fitted(c(7), 2).unwrap();
        assert_eq!(fitted.candidate_for_subfield(13), Some(6));
        assert_eq!(fitted.candidate_for_subfield(14), None);
    }
}
