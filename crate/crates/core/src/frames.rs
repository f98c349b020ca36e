//! FTM Action frames, 802.11az measurement elements and EDMG PPDU containers.
//!
//! Wire layout (all multi-byte integers little-endian):
//!
//! ```text
//! FTM frame   dialog_token u8 | follow_up_token u8 | tod u64 | toa u64
//!             | tod_error u16 | toa_error u16 | element*
//! element     tag u8 | length u16 | value[length]
//! PPDU        num_units u16 | P u8 | M u8 | awv_group u8
//!             | body_len u16 | body | seq_count u16 | (kind u8 | value u16)*
//! ```
//!
//! Timestamps count femtoseconds; the error fields count picoseconds.

use std::fmt;

use thiserror::Error;

/// Fixed FTM header length in octets.
pub const FTM_HEADER_LEN: usize = 22;

const TAG_LCI: u8 = 0x01;
const TAG_CHANNEL_MEASUREMENT: u8 = 0x02;
const TAG_AWV: u8 = 0x03;
const TAG_ANGLE: u8 = 0x04;
const TAG_LOS_LIKELIHOOD: u8 = 0x05;

const TLV_HEADER_LEN: usize = 3;
const CMF_TAP_LEN: usize = 7;

const SEQ_GOLAY: u8 = 0x01;
const SEQ_SECURE: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("duplicate {0} element")]
    DuplicateElement(ElementKind),
    #[error("invariant violated: {0}")]
    InvariantViolation(&'static str),
    #[error("TRN field carries {actual} subfield sequences, config requires {expected}")]
    TrnConfigMismatch { expected: usize, actual: usize },
}

/// Non-fatal findings while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeWarning {
    UnknownElementTag(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleKind {
    I2rAod,
    R2iAod,
}

/// Identity of an element for the at-most-one-per-kind rule. Angle reports
/// of different directions count as different kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Lci,
    ChannelMeasurement,
    Awv,
    Angle(AngleKind),
    LosLikelihood,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementKind::Lci => f.write_str("LCI report"),
            ElementKind::ChannelMeasurement => f.write_str("channel measurement feedback"),
            ElementKind::Awv => f.write_str("AWV feedback"),
            ElementKind::Angle(AngleKind::I2rAod) => f.write_str("I2R AoD angle report"),
            ElementKind::Angle(AngleKind::R2iAod) => f.write_str("R2I AoD angle report"),
            ElementKind::LosLikelihood => f.write_str("LOS likelihood"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LciReport {
    pub latitude_microdeg: i32,
    pub longitude_microdeg: i32,
    pub altitude_cm: i32,
}

/// One reported channel tap. I/Q are quantized relative to the strongest
/// reported tap (full scale = `i16::MAX`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmfTap {
    pub delay_index: u16,
    pub i: i16,
    pub q: i16,
    pub snr_db: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMeasurementFeedback {
    pub taps: Vec<CmfTap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AwvFeedback {
    pub awv_id: u16,
    /// Beam quality as 100·10·log10(score).
    pub quality_centi_db: i16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleReport {
    pub kind: AngleKind,
    pub azimuth_centideg: i16,
    pub elevation_centideg: i16,
}

impl AngleReport {
    /// Quantizes degrees to the nearest centidegree. Azimuth is wrapped into
    /// (-180, 180] first.
    pub fn from_degrees(kind: AngleKind, azimuth_deg: f64, elevation_deg: f64) -> Self {
        let mut az = azimuth_deg.rem_euclid(360.0);
        if az > 180.0 {
            az -= 360.0;
        }
        Self {
            kind,
            azimuth_centideg: (az * 100.0).round().clamp(-18000.0, 18000.0) as i16,
            elevation_centideg: (elevation_deg * 100.0).round().clamp(-9000.0, 9000.0) as i16,
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        f64::from(self.azimuth_centideg) / 100.0
    }

    pub fn elevation_deg(&self) -> f64 {
        f64::from(self.elevation_centideg) / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LosLikelihood {
    pub probability_milli: u16,
}

impl LosLikelihood {
    pub fn from_probability(p: f64) -> Self {
        Self {
            probability_milli: (p.clamp(0.0, 1.0) * 1000.0).round() as u16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasurementElement {
    Lci(LciReport),
    ChannelMeasurement(ChannelMeasurementFeedback),
    Awv(AwvFeedback),
    Angle(AngleReport),
    LosLikelihood(LosLikelihood),
}

impl MeasurementElement {
    pub fn kind(&self) -> ElementKind {
        match self {
            MeasurementElement::Lci(_) => ElementKind::Lci,
            MeasurementElement::ChannelMeasurement(_) => ElementKind::ChannelMeasurement,
            MeasurementElement::Awv(_) => ElementKind::Awv,
            MeasurementElement::Angle(a) => ElementKind::Angle(a.kind),
            MeasurementElement::LosLikelihood(_) => ElementKind::LosLikelihood,
        }
    }

    fn validate(&self) -> Result<(), FrameError> {
        match self {
            MeasurementElement::Lci(l) => {
                if !(-90_000_000..=90_000_000).contains(&l.latitude_microdeg) {
                    return Err(FrameError::InvariantViolation("latitude out of range"));
                }
                if !(-180_000_000..=180_000_000).contains(&l.longitude_microdeg) {
                    return Err(FrameError::InvariantViolation("longitude out of range"));
                }
            }
            MeasurementElement::ChannelMeasurement(c) => {
                if c.taps.windows(2).any(|w| w[0].delay_index >= w[1].delay_index) {
                    return Err(FrameError::InvariantViolation(
                        "channel measurement taps not strictly increasing",
                    ));
                }
                if c.taps.len() * CMF_TAP_LEN > usize::from(u16::MAX) {
                    return Err(FrameError::InvariantViolation("too many channel taps"));
                }
            }
            MeasurementElement::Awv(_) => {}
            MeasurementElement::Angle(a) => {
                if !(-18000..=18000).contains(&a.azimuth_centideg) {
                    return Err(FrameError::InvariantViolation("azimuth out of range"));
                }
                if !(-9000..=9000).contains(&a.elevation_centideg) {
                    return Err(FrameError::InvariantViolation("elevation out of range"));
                }
            }
            MeasurementElement::LosLikelihood(l) => {
                if l.probability_milli > 1000 {
                    return Err(FrameError::InvariantViolation("LOS likelihood above 1000"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FtmFrame {
    pub dialog_token: u8,
    pub follow_up_token: u8,
    /// Time of departure, femtoseconds.
    pub tod_fs: u64,
    /// Time of arrival, femtoseconds.
    pub toa_fs: u64,
    pub tod_error_ps: u16,
    pub toa_error_ps: u16,
    pub elements: Vec<MeasurementElement>,
}

impl FtmFrame {
    /// Checks the element invariants: value ranges and at most one element
    /// per kind.
    pub fn validate(&self) -> Result<(), FrameError> {
        let mut seen: Vec<ElementKind> = Vec::with_capacity(self.elements.len());
        for el in &self.elements {
            el.validate()?;
            let kind = el.kind();
            if seen.contains(&kind) {
                return Err(FrameError::DuplicateElement(kind));
            }
            seen.push(kind);
        }
        Ok(())
    }

    pub fn element(&self, kind: ElementKind) -> Option<&MeasurementElement> {
        self.elements.iter().find(|e| e.kind() == kind)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.remaining() < n {
            return Err(FrameError::Truncated {
                needed: self.pos + n,
                available: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FrameError> {
        Ok(self.take(1)?[0])
    }

    fn i8(&mut self) -> Result<i8, FrameError> {
        Ok(self.u8()? as i8)
    }

    fn u16(&mut self) -> Result<u16, FrameError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn i16(&mut self) -> Result<i16, FrameError> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FrameError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, FrameError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FrameError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn encode_element(el: &MeasurementElement, out: &mut Vec<u8>) {
    let mut value = Vec::new();
    let tag = match el {
        MeasurementElement::Lci(l) => {
            value.extend_from_slice(&l.latitude_microdeg.to_le_bytes());
            value.extend_from_slice(&l.longitude_microdeg.to_le_bytes());
            value.extend_from_slice(&l.altitude_cm.to_le_bytes());
            TAG_LCI
        }
        MeasurementElement::ChannelMeasurement(c) => {
            for t in &c.taps {
                value.extend_from_slice(&t.delay_index.to_le_bytes());
                value.extend_from_slice(&t.i.to_le_bytes());
                value.extend_from_slice(&t.q.to_le_bytes());
                value.push(t.snr_db as u8);
            }
            TAG_CHANNEL_MEASUREMENT
        }
        MeasurementElement::Awv(a) => {
            value.extend_from_slice(&a.awv_id.to_le_bytes());
            value.extend_from_slice(&a.quality_centi_db.to_le_bytes());
            TAG_AWV
        }
        MeasurementElement::Angle(a) => {
            value.push(match a.kind {
                AngleKind::I2rAod => 0,
                AngleKind::R2iAod => 1,
            });
            value.extend_from_slice(&a.azimuth_centideg.to_le_bytes());
            value.extend_from_slice(&a.elevation_centideg.to_le_bytes());
            TAG_ANGLE
        }
        MeasurementElement::LosLikelihood(l) => {
            value.extend_from_slice(&l.probability_milli.to_le_bytes());
            TAG_LOS_LIKELIHOOD
        }
    };
    out.push(tag);
    out.extend_from_slice(&(value.len() as u16).to_le_bytes());
    out.extend_from_slice(&value);
}

fn expect_len(value: &[u8], len: usize) -> Result<(), FrameError> {
    if value.len() == len {
        Ok(())
    } else {
        Err(FrameError::InvariantViolation("element length does not match its tag"))
    }
}

fn decode_element(tag: u8, value: &[u8]) -> Result<Option<MeasurementElement>, FrameError> {
    let mut r = Reader::new(value);
    let el = match tag {
        TAG_LCI => {
            expect_len(value, 12)?;
            MeasurementElement::Lci(LciReport {
                latitude_microdeg: r.i32()?,
                longitude_microdeg: r.i32()?,
                altitude_cm: r.i32()?,
            })
        }
        TAG_CHANNEL_MEASUREMENT => {
            if value.len() % CMF_TAP_LEN != 0 {
                return Err(FrameError::InvariantViolation(
                    "channel measurement length is not a whole number of taps",
                ));
            }
            let mut taps = Vec::with_capacity(value.len() / CMF_TAP_LEN);
            while r.remaining() > 0 {
                taps.push(CmfTap {
                    delay_index: r.u16()?,
                    i: r.i16()?,
                    q: r.i16()?,
                    snr_db: r.i8()?,
                });
            }
            MeasurementElement::ChannelMeasurement(ChannelMeasurementFeedback { taps })
        }
        TAG_AWV => {
            expect_len(value, 4)?;
            MeasurementElement::Awv(AwvFeedback {
                awv_id: r.u16()?,
                quality_centi_db: r.i16()?,
            })
        }
        TAG_ANGLE => {
            expect_len(value, 5)?;
            let kind = match r.u8()? {
                0 => AngleKind::I2rAod,
                1 => AngleKind::R2iAod,
                _ => return Err(FrameError::InvariantViolation("unknown angle report kind")),
            };
            MeasurementElement::Angle(AngleReport {
                kind,
                azimuth_centideg: r.i16()?,
                elevation_centideg: r.i16()?,
            })
        }
        TAG_LOS_LIKELIHOOD => {
            expect_len(value, 2)?;
            MeasurementElement::LosLikelihood(LosLikelihood {
                probability_milli: r.u16()?,
            })
        }
        _ => return Ok(None),
    };
    Ok(Some(el))
}

/// Encodes a frame. The frame must satisfy [`FtmFrame::validate`].
pub fn encode_ftm_frame(frame: &FtmFrame) -> Vec<u8> {
    debug_assert!(frame.validate().is_ok(), "encoding an invalid FTM frame");
    let mut out = Vec::with_capacity(FTM_HEADER_LEN + (TLV_HEADER_LEN + 8) * frame.elements.len());
    out.push(frame.dialog_token);
    out.push(frame.follow_up_token);
    out.extend_from_slice(&frame.tod_fs.to_le_bytes());
    out.extend_from_slice(&frame.toa_fs.to_le_bytes());
    out.extend_from_slice(&frame.tod_error_ps.to_le_bytes());
    out.extend_from_slice(&frame.toa_error_ps.to_le_bytes());
    for el in &frame.elements {
        encode_element(el, &mut out);
    }
    out
}

/// Decodes a frame, reporting skipped unknown elements as warnings.
pub fn decode_ftm_frame_with_warnings(
    bytes: &[u8],
) -> Result<(FtmFrame, Vec<DecodeWarning>), FrameError> {
    let mut r = Reader::new(bytes);
    let mut frame = FtmFrame {
        dialog_token: r.u8()?,
        follow_up_token: r.u8()?,
        tod_fs: r.u64()?,
        toa_fs: r.u64()?,
        tod_error_ps: r.u16()?,
        toa_error_ps: r.u16()?,
        elements: Vec::new(),
    };
    let mut warnings = Vec::new();
    while r.remaining() > 0 {
        let tag = r.u8()?;
        let len = usize::from(r.u16()?);
        let value = r.take(len)?;
        match decode_element(tag, value)? {
            Some(el) => {
                el.validate()?;
                if frame.elements.iter().any(|e| e.kind() == el.kind()) {
                    return Err(FrameError::DuplicateElement(el.kind()));
                }
                frame.elements.push(el);
            }
            None => warnings.push(DecodeWarning::UnknownElementTag(tag)),
        }
    }
    Ok((frame, warnings))
}

pub fn decode_ftm_frame(bytes: &[u8]) -> Result<FtmFrame, FrameError> {
    decode_ftm_frame_with_warnings(bytes).map(|(f, _)| f)
}

/// EDMG channel bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bandwidth {
    Ghz2_16,
    Ghz4_32,
    Ghz6_48,
    Ghz8_64,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 4] = [
        Bandwidth::Ghz2_16,
        Bandwidth::Ghz4_32,
        Bandwidth::Ghz6_48,
        Bandwidth::Ghz8_64,
    ];

    pub fn ghz(self) -> f64 {
        match self {
            Bandwidth::Ghz2_16 => 2.16,
            Bandwidth::Ghz4_32 => 4.32,
            Bandwidth::Ghz6_48 => 6.48,
            Bandwidth::Ghz8_64 => 8.64,
        }
    }

    /// Matches a value in GHz against the EDMG set (within 1 MHz).
    pub fn from_ghz(ghz: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|b| (b.ghz() - ghz).abs() < 1e-3)
    }

    fn code(self) -> u8 {
        self as u8 + 1
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }
}

/// Parameters proposed in an initial FTM request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IftmrParams {
    pub burst_count: u16,
    pub session_duration_ms: u32,
    pub bandwidth: Bandwidth,
    pub secure: bool,
    pub request_i2r_aod: bool,
    pub request_r2i_aod: bool,
    pub first_path: bool,
}

impl Default for IftmrParams {
    fn default() -> Self {
        Self {
            burst_count: 1,
            session_duration_ms: 100,
            bandwidth: Bandwidth::Ghz2_16,
            secure: false,
            request_i2r_aod: true,
            request_r2i_aod: true,
            first_path: true,
        }
    }
}

const IFTMR_LEN: usize = 8;

impl IftmrParams {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IFTMR_LEN);
        out.extend_from_slice(&self.burst_count.to_le_bytes());
        out.extend_from_slice(&self.session_duration_ms.to_le_bytes());
        out.push(self.bandwidth.code());
        let flags = u8::from(self.secure)
            | u8::from(self.request_i2r_aod) << 1
            | u8::from(self.request_r2i_aod) << 2
            | u8::from(self.first_path) << 3;
        out.push(flags);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let mut r = Reader::new(bytes);
        let burst_count = r.u16()?;
        let session_duration_ms = r.u32()?;
        let bandwidth = Bandwidth::from_code(r.u8()?)
            .ok_or(FrameError::InvariantViolation("bandwidth outside the EDMG set"))?;
        let flags = r.u8()?;
        if flags & 0xf0 != 0 {
            return Err(FrameError::InvariantViolation("reserved IFTMR flag bits set"));
        }
        if r.remaining() != 0 {
            return Err(FrameError::InvariantViolation("trailing bytes after IFTMR"));
        }
        Ok(Self {
            burst_count,
            session_duration_ms,
            bandwidth,
            secure: flags & 1 != 0,
            request_i2r_aod: flags & 2 != 0,
            request_r2i_aod: flags & 4 != 0,
            first_path: flags & 8 != 0,
        })
    }
}

/// TRN field shape: `num_units` TRN-Units of `P + M` subfields each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrnConfig {
    pub num_units: u16,
    pub p_subfields: u8,
    pub m_subfields: u8,
    pub awv_group_size: u8,
}

impl TrnConfig {
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.num_units == 0 {
            return Err(FrameError::InvariantViolation("TRN field needs at least one unit"));
        }
        if self.m_subfields < 2 {
            return Err(FrameError::InvariantViolation("M must be at least 2"));
        }
        if self.awv_group_size == 0 || self.m_subfields % self.awv_group_size != 0 {
            return Err(FrameError::InvariantViolation("AWV group size must divide M"));
        }
        Ok(())
    }

    pub fn subfields_per_unit(&self) -> usize {
        usize::from(self.p_subfields) + usize::from(self.m_subfields)
    }

    pub fn total_subfields(&self) -> usize {
        usize::from(self.num_units) * self.subfields_per_unit()
    }

    /// M-subfields available to an AWV sweep across the whole field.
    pub fn sweep_subfields(&self) -> usize {
        usize::from(self.num_units) * usize::from(self.m_subfields)
    }
}

/// What a TRN subfield carries; waveforms are synthesized by the channel
/// simulator from these identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrnSequence {
    /// Complementary Golay pair of the given length.
    Golay { length: u16 },
    /// Chunk `index` of the secure pseudorandom TRN sequence.
    Secure { index: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdmgPpdu {
    pub trn: TrnConfig,
    pub mac_body: Vec<u8>,
    pub trn_sequences: Vec<TrnSequence>,
}

impl EdmgPpdu {
    pub fn validate(&self) -> Result<(), FrameError> {
        self.trn.validate()?;
        let expected = self.trn.total_subfields();
        if self.trn_sequences.len() != expected {
            return Err(FrameError::TrnConfigMismatch {
                expected,
                actual: self.trn_sequences.len(),
            });
        }
        if self.mac_body.len() > usize::from(u16::MAX) {
            return Err(FrameError::InvariantViolation("MAC body longer than 65535 bytes"));
        }
        Ok(())
    }
}

pub fn encode_ppdu(ppdu: &EdmgPpdu) -> Result<Vec<u8>, FrameError> {
    ppdu.validate()?;
    let mut out = Vec::with_capacity(9 + ppdu.mac_body.len() + 3 * ppdu.trn_sequences.len());
    out.extend_from_slice(&ppdu.trn.num_units.to_le_bytes());
    out.push(ppdu.trn.p_subfields);
    out.push(ppdu.trn.m_subfields);
    out.push(ppdu.trn.awv_group_size);
    out.extend_from_slice(&(ppdu.mac_body.len() as u16).to_le_bytes());
    out.extend_from_slice(&ppdu.mac_body);
    out.extend_from_slice(&(ppdu.trn_sequences.len() as u16).to_le_bytes());
    for s in &ppdu.trn_sequences {
        let (kind, v) = match *s {
            TrnSequence::Golay { length } => (SEQ_GOLAY, length),
            TrnSequence::Secure { index } => (SEQ_SECURE, index),
        };
        out.push(kind);
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_ppdu(bytes: &[u8]) -> Result<EdmgPpdu, FrameError> {
    let mut r = Reader::new(bytes);
    let trn = TrnConfig {
        num_units: r.u16()?,
        p_subfields: r.u8()?,
        m_subfields: r.u8()?,
        awv_group_size: r.u8()?,
    };
    let body_len = usize::from(r.u16()?);
    let mac_body = r.take(body_len)?.to_vec();
    let count = usize::from(r.u16()?);
    let mut trn_sequences = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = r.u8()?;
        let v = r.u16()?;
        trn_sequences.push(match kind {
            SEQ_GOLAY => TrnSequence::Golay { length: v },
            SEQ_SECURE => TrnSequence::Secure { index: v },
            _ => return Err(FrameError::InvariantViolation("unknown TRN sequence kind")),
        });
    }
    if r.remaining() != 0 {
        return Err(FrameError::InvariantViolation("trailing bytes after PPDU"));
    }
    let ppdu = EdmgPpdu {
        trn,
        mac_body,
        trn_sequences,
    };
    ppdu.validate()?;
    Ok(ppdu)
}

/// Hex rendering used by transcripts and fixtures: 16 octets per line.
pub fn hex_dump(bytes: &[u8]) -> String {
    bytes
        .chunks(16)
        .map(|line| {
            line.iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses [`hex_dump`] output. Whitespace is ignored and `#` starts a comment.
pub fn parse_hex_dump(text: &str) -> Result<Vec<u8>, hex::FromHexError> {
    let digits: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_frame() -> FtmFrame {
        FtmFrame {
            dialog_token: 3,
            follow_up_token: 2,
            tod_fs: 1_100_000,
            toa_fs: 2_000_000,
            tod_error_ps: 100,
            toa_error_ps: 40,
            elements: vec![
                MeasurementElement::Awv(AwvFeedback {
                    awv_id: 4,
                    quality_centi_db: 2_512,
                }),
                MeasurementElement::Angle(AngleReport::from_degrees(AngleKind::I2rAod, 30.0, 0.0)),
                MeasurementElement::Angle(AngleReport::from_degrees(AngleKind::R2iAod, -150.0, 0.0)),
                MeasurementElement::LosLikelihood(LosLikelihood {
                    probability_milli: 998,
                }),
            ],
        }
    }

    #[test]
    fn empty_frame_is_22_bytes() {
        let f = FtmFrame {
            dialog_token: 1,
            ..Default::default()
        };
        let bytes = encode_ftm_frame(&f);
        assert_eq!(bytes.len(), 22);
        assert_eq!(bytes[0], 0x01);
        assert!(bytes[1..].iter().all(|&b| b == 0));
    }

    #[test]
    fn zero_header_decodes_to_default() {
        assert_eq!(decode_ftm_frame(&[0u8; 22]).unwrap(), FtmFrame::default());
        assert_eq!(
            decode_ftm_frame(&[0u8; 21]),
            Err(FrameError::Truncated {
                needed: 22,
                available: 21
            })
        );
    }

    #[test]
    fn duplicate_los_likelihood_rejected() {
        let mut bytes = encode_ftm_frame(&FtmFrame::default());
        for _ in 0..2 {
            bytes.extend_from_slice(&[TAG_LOS_LIKELIHOOD, 2, 0, 0xf4, 0x01]);
        }
        assert_eq!(
            decode_ftm_frame(&bytes),
            Err(FrameError::DuplicateElement(ElementKind::LosLikelihood))
        );
    }

    #[test]
    fn both_angle_directions_may_coexist() {
        let f = sample_frame();
        f.validate().unwrap();
        assert_eq!(decode_ftm_frame(&encode_ftm_frame(&f)).unwrap(), f);
    }

    #[test]
    fn unknown_tags_are_skipped_with_warning() {
        let mut bytes = encode_ftm_frame(&sample_frame());
        bytes.extend_from_slice(&[0x7f, 3, 0, 1, 2, 3]);
        let (f, warnings) = decode_ftm_frame_with_warnings(&bytes).unwrap();
        assert_eq!(f, sample_frame());
        assert_eq!(warnings, vec![DecodeWarning::UnknownElementTag(0x7f)]);
    }

    #[test]
    fn element_length_overrun_is_truncation() {
        let mut bytes = encode_ftm_frame(&FtmFrame::default());
        bytes.extend_from_slice(&[TAG_AWV, 4, 0, 1]);
        assert!(matches!(
            decode_ftm_frame(&bytes),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn likelihood_above_1000_is_invalid() {
        let mut bytes = encode_ftm_frame(&FtmFrame::default());
        bytes.extend_from_slice(&[TAG_LOS_LIKELIHOOD, 2, 0]);
        bytes.extend_from_slice(&1001u16.to_le_bytes());
        assert!(matches!(
            decode_ftm_frame(&bytes),
            Err(FrameError::InvariantViolation(_))
        ));
    }

    #[test]
    fn unsorted_channel_taps_are_invalid() {
        let tap = |d| CmfTap {
            delay_index: d,
            i: 1,
            q: 0,
            snr_db: 10,
        };
        let f = FtmFrame {
            elements: vec![MeasurementElement::ChannelMeasurement(
                ChannelMeasurementFeedback {
                    taps: vec![tap(5), tap(5)],
                },
            )],
            ..Default::default()
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn angle_quantization_wraps() {
        let a = AngleReport::from_degrees(AngleKind::I2rAod, 190.0, 12.345);
        assert_eq!(a.azimuth_centideg, -17000);
        assert_eq!(a.elevation_centideg, 1235);
        let b = AngleReport::from_degrees(AngleKind::I2rAod, -180.0, 0.0);
        assert_eq!(b.azimuth_centideg, 18000);
    }

    #[test]
    fn iftmr_round_trip_and_reserved_bits() {
        let p = IftmrParams {
            burst_count: 2,
            session_duration_ms: 250,
            bandwidth: Bandwidth::Ghz6_48,
            secure: true,
            request_i2r_aod: false,
            request_r2i_aod: true,
            first_path: true,
        };
        assert_eq!(IftmrParams::decode(&p.encode()).unwrap(), p);
        let mut bad = p.encode();
        bad[7] |= 0x80;
        assert!(IftmrParams::decode(&bad).is_err());
        assert_eq!(Bandwidth::from_ghz(8.64), Some(Bandwidth::Ghz8_64));
        assert_eq!(Bandwidth::from_ghz(5.0), None);
    }

    fn ppdu(units: u16, p: u8, m: u8, entries: usize) -> EdmgPpdu {
        EdmgPpdu {
            trn: TrnConfig {
                num_units: units,
                p_subfields: p,
                m_subfields: m,
                awv_group_size: 2,
            },
            mac_body: encode_ftm_frame(&sample_frame()),
            trn_sequences: vec![TrnSequence::Golay { length: 128 }; entries],
        }
    }

    #[test]
    fn ppdu_sequence_count_must_match_config() {
        assert_eq!(
            encode_ppdu(&ppdu(2, 1, 2, 5)),
            Err(FrameError::TrnConfigMismatch {
                expected: 6,
                actual: 5
            })
        );
        let ok = ppdu(1, 0, 2, 2);
        assert_eq!(decode_ppdu(&encode_ppdu(&ok).unwrap()).unwrap(), ok);
    }

    #[test]
    fn trn_config_rules() {
        let mut t = ppdu(1, 0, 2, 2).trn;
        t.m_subfields = 1;
        assert!(t.validate().is_err());
        t.m_subfields = 4;
        t.awv_group_size = 3;
        assert!(t.validate().is_err());
        t.awv_group_size = 4;
        assert!(t.validate().is_ok());
        assert_eq!(t.sweep_subfields(), 4);
    }

    #[test]
    fn hex_dump_round_trip() {
        let bytes: Vec<u8> = (0..40).collect();
        let text = format!("# comment\n{}\n", hex_dump(&bytes));
        assert_eq!(parse_hex_dump(&text).unwrap(), bytes);
    }
}
