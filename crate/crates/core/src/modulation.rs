//! Bit-to-LED-schedule modulation.
//!
//! Four schemes over the three keyboard status LEDs (LED1 = Num Lock,
//! LED2 = Caps Lock, LED3 = Scroll Lock):
//!
//! * `ook`: on/off keying. A `1` holds a chosen LED mask on for `t_on_us`, a
//!   `0` holds all LEDs off for `t_off_us`.
//! * `bfsk`: duration keying. Every bit is an all-LEDs-on pulse, `t_on_us`
//!   long for `1` and `t_off_us` long for `0`, followed by an all-off gap of
//!   `t_d_us`.
//! * `ask3`: position keying. Each 3-bit group maps one bit per LED for
//!   `t_all_us`, followed by an all-off separator of `t_d_us`.
//! * `ask-amp`: amplitude keying. Each 2-bit group selects how many LEDs are
//!   lit (0..=3), held for `t_all_us`; separators are optional (`t_d_us` may
//!   be 0, so levels abut).
//!
//! All durations are integer microseconds. Adjacent schedule segments with
//! identical LED states are merged; demodulation recovers symbol boundaries
//! from timing, not from edges.

use crate::bits::BitString;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModulationError {
    #[error("OOK mask must light at least one LED")]
    EmptyMask,
    #[error("duration keying needs distinct pulse lengths, got t_on == t_off == {0} us")]
    EqualPulseDurations(u64),
    #[error("duration keying needs a nonzero inter-pulse gap")]
    ZeroGap,
    #[error("{name} must be positive")]
    NonPositiveDuration { name: &'static str },
    #[error("LED count must be 1..=3, got {0}")]
    BadLedCount(u8),
    #[error("frame rate must be positive, got {0}")]
    BadFps(f64),
    #[error("frames per bit must be at least 1, got {0}")]
    BadFramesPerBit(u32),
}

/// On/off state of the three status LEDs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LedState {
    pub num_lock: bool,
    pub caps_lock: bool,
    pub scroll_lock: bool,
}

impl LedState {
    pub const OFF: LedState = LedState { num_lock: false, caps_lock: false, scroll_lock: false };
    pub const ALL_ON: LedState = LedState { num_lock: true, caps_lock: true, scroll_lock: true };

    pub fn new(num_lock: bool, caps_lock: bool, scroll_lock: bool) -> Self {
        Self { num_lock, caps_lock, scroll_lock }
    }

    /// Number of lit LEDs, 0..=3.
    pub fn lit_count(&self) -> u8 {
        u8::from(self.num_lock) + u8::from(self.caps_lock) + u8::from(self.scroll_lock)
    }

    /// HID boot-keyboard LED bitfield: bit 0 Num, bit 1 Caps, bit 2 Scroll.
    pub fn to_bitfield(&self) -> u8 {
        u8::from(self.num_lock) | u8::from(self.caps_lock) << 1 | u8::from(self.scroll_lock) << 2
    }

    /// Inverse of [`to_bitfield`](Self::to_bitfield); bits 3..=7 must be zero.
    pub fn from_bitfield(byte: u8) -> Option<Self> {
        if byte & 0xF8 != 0 {
            return None;
        }
        Some(Self::new(byte & 1 != 0, byte & 2 != 0, byte & 4 != 0))
    }

    /// State with the first `count` LEDs lit, in LED1..LED3 order.
    pub fn with_lit_count(count: u8) -> Option<Self> {
        match count {
            0 => Some(Self::OFF),
            1 => Some(Self::new(true, false, false)),
            2 => Some(Self::new(true, true, false)),
            3 => Some(Self::ALL_ON),
            _ => None,
        }
    }

    pub fn led(&self, idx: usize) -> bool {
        match idx {
            0 => self.num_lock,
            1 => self.caps_lock,
            2 => self.scroll_lock,
            _ => panic!("LED index {idx} out of range"),
        }
    }
}

impl fmt::Display for LedState {
    /// Renders as three `0`/`1` digits in LED1 LED2 LED3 order, e.g. `101`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            u8::from(self.num_lock),
            u8::from(self.caps_lock),
            u8::from(self.scroll_lock)
        )
    }
}

impl FromStr for LedState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let b: Vec<char> = s.chars().collect();
        if b.len() != 3 || b.iter().any(|c| *c != '0' && *c != '1') {
            return Err(format!("LED state must be three 0/1 digits, got {s:?}"));
        }
        Ok(Self::new(b[0] == '1', b[1] == '1', b[2] == '1'))
    }
}

/// Modulation scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ook,
    Bfsk,
    Ask3,
    AskAmplitude,
}

impl Scheme {
    /// Payload bits carried by one modulation symbol.
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Scheme::Ook | Scheme::Bfsk => 1,
            Scheme::AskAmplitude => 2,
            Scheme::Ask3 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ook => "ook",
            Scheme::Bfsk => "bfsk",
            Scheme::Ask3 => "ask3",
            Scheme::AskAmplitude => "ask-amp",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ook" => Ok(Scheme::Ook),
            "bfsk" => Ok(Scheme::Bfsk),
            "ask3" => Ok(Scheme::Ask3),
            "ask-amp" => Ok(Scheme::AskAmplitude),
            other => Err(format!("unknown scheme {other:?} (expected ook|bfsk|ask3|ask-amp)")),
        }
    }
}

/// Per-scheme symbol durations, all in microseconds.
///
/// `t_d_us` (the inter-symbol gap) may be zero; it is rejected by
/// [`modulate_bfsk`], which cannot key durations without gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolTiming {
    pub t_on_us: u64,
    pub t_off_us: u64,
    pub t_d_us: u64,
    pub t_all_us: u64,
}

impl SymbolTiming {
    pub fn new(t_on_us: u64, t_off_us: u64, t_d_us: u64, t_all_us: u64) -> Result<Self, ModulationError> {
        for (name, v) in [("t_on_us", t_on_us), ("t_off_us", t_off_us), ("t_all_us", t_all_us)] {
            if v == 0 {
                return Err(ModulationError::NonPositiveDuration { name });
            }
        }
        Ok(Self { t_on_us, t_off_us, t_d_us, t_all_us })
    }

    /// Symmetric on/off keying: one duration for both symbols.
    pub fn ook(t_us: u64) -> Result<Self, ModulationError> {
        Self::new(t_us, t_us, t_us, t_us)
    }
}

/// One run of a constant LED state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub state: LedState,
    pub duration_us: u64,
}

/// A timed LED drive plan: consecutive constant-state segments.
///
/// Equal adjacent states are merged at construction. `symbol_count` and
/// `raw_segment_count` describe the pre-merge structure the modulator
/// produced; schedules loaded from files report their row count for both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedSchedule {
    segments: Vec<Segment>,
    symbol_count: usize,
    raw_segment_count: usize,
}

impl LedSchedule {
    /// Builds a schedule, merging equal adjacent states and dropping
    /// zero-duration entries.
    pub fn from_raw_segments(raw: Vec<Segment>, symbol_count: usize) -> Self {
        let raw_segment_count = raw.iter().filter(|s| s.duration_us > 0).count();
        let mut segments: Vec<Segment> = Vec::with_capacity(raw.len());
        for seg in raw {
            if seg.duration_us == 0 {
                continue;
            }
            match segments.last_mut() {
                Some(last) if last.state == seg.state => last.duration_us += seg.duration_us,
                _ => segments.push(seg),
            }
        }
        Self { segments, symbol_count, raw_segment_count }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Modulation symbols encoded, counting separators as part of their symbol.
    pub fn symbol_count(&self) -> usize {
        self.symbol_count
    }

    /// Segment count before merging (separators counted individually).
    pub fn raw_segment_count(&self) -> usize {
        self.raw_segment_count
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Sum of all segment durations.
    pub fn total_duration_us(&self) -> u64 {
        self.segments.iter().map(|s| s.duration_us).sum()
    }

    /// Shortest merged segment, if any.
    pub fn min_segment_us(&self) -> Option<u64> {
        self.segments.iter().map(|s| s.duration_us).min()
    }

    /// LED state at time `t_us`; the final state persists past the end.
    pub fn state_at(&self, t_us: u64) -> LedState {
        let mut start = 0u64;
        for seg in &self.segments {
            let end = start + seg.duration_us;
            if t_us < end {
                return seg.state;
            }
            start = end;
        }
        self.segments.last().map_or(LedState::OFF, |s| s.state)
    }

    /// Start-time/state pairs, one per merged segment.
    pub fn state_changes(&self) -> Vec<(u64, LedState)> {
        let mut out = Vec::with_capacity(self.segments.len());
        let mut t = 0u64;
        for seg in &self.segments {
            out.push((t, seg.state));
            t += seg.duration_us;
        }
        out
    }
}

/// On/off keying: `1` drives `mask` for `t_on_us`, `0` is dark for `t_off_us`.
pub fn modulate_ook(
    bits: &BitString,
    timing: &SymbolTiming,
    mask: LedState,
) -> Result<LedSchedule, ModulationError> {
    if mask.lit_count() == 0 {
        return Err(ModulationError::EmptyMask);
    }
    let mut raw = Vec::with_capacity(bits.len());
    for bit in bits.iter() {
        raw.push(if bit {
            Segment { state: mask, duration_us: timing.t_on_us }
        } else {
            Segment { state: LedState::OFF, duration_us: timing.t_off_us }
        });
    }
    Ok(LedSchedule::from_raw_segments(raw, bits.len()))
}

/// Duration keying: every bit is an all-LEDs pulse (`t_on_us` for `1`,
/// `t_off_us` for `0`) followed by a dark gap of `t_d_us`.
pub fn modulate_bfsk(bits: &BitString, timing: &SymbolTiming) -> Result<LedSchedule, ModulationError> {
    if timing.t_on_us == timing.t_off_us {
        return Err(ModulationError::EqualPulseDurations(timing.t_on_us));
    }
    if timing.t_d_us == 0 {
        return Err(ModulationError::ZeroGap);
    }
    let mut raw = Vec::with_capacity(bits.len() * 2);
    for bit in bits.iter() {
        let pulse = if bit { timing.t_on_us } else { timing.t_off_us };
        raw.push(Segment { state: LedState::ALL_ON, duration_us: pulse });
        raw.push(Segment { state: LedState::OFF, duration_us: timing.t_d_us });
    }
    Ok(LedSchedule::from_raw_segments(raw, bits.len()))
}

/// Position keying: 3-bit groups map one bit per LED, held for `t_all_us`,
/// separated by a dark gap of `t_d_us`. Input is zero-padded to a multiple
/// of 3 bits.
pub fn modulate_ask3(bits: &BitString, timing: &SymbolTiming) -> LedSchedule {
    let mut padded = bits.clone();
    padded.pad_to_multiple_of(3);
    let symbols = padded.len() / 3;
    let mut raw = Vec::with_capacity(symbols * 2);
    for group in padded.as_slice().chunks(3) {
        raw.push(Segment {
            state: LedState::new(group[0], group[1], group[2]),
            duration_us: timing.t_all_us,
        });
        raw.push(Segment { state: LedState::OFF, duration_us: timing.t_d_us });
    }
    LedSchedule::from_raw_segments(raw, symbols)
}

/// Amplitude keying: 2-bit groups select the number of lit LEDs (`00` -> 0
/// through `11` -> 3), held for `t_all_us`. With `t_d_us == 0` the levels
/// abut. Input is zero-padded to a multiple of 2 bits.
pub fn modulate_ask_amplitude(bits: &BitString, timing: &SymbolTiming) -> LedSchedule {
    let mut padded = bits.clone();
    padded.pad_to_multiple_of(2);
    let symbols = padded.len() / 2;
    let mut raw = Vec::with_capacity(symbols * 2);
    for pair in padded.as_slice().chunks(2) {
        let level = (u8::from(pair[0]) << 1) | u8::from(pair[1]);
        raw.push(Segment {
            state: LedState::with_lit_count(level).expect("level is 0..=3"),
            duration_us: timing.t_all_us,
        });
        raw.push(Segment { state: LedState::OFF, duration_us: timing.t_d_us });
    }
    LedSchedule::from_raw_segments(raw, symbols)
}

/// Dispatches to the scheme's modulator. `mask` is used by `ook` only.
pub fn modulate(
    scheme: Scheme,
    bits: &BitString,
    timing: &SymbolTiming,
    mask: LedState,
) -> Result<LedSchedule, ModulationError> {
    match scheme {
        Scheme::Ook => modulate_ook(bits, timing, mask),
        Scheme::Bfsk => modulate_bfsk(bits, timing),
        Scheme::Ask3 => Ok(modulate_ask3(bits, timing)),
        Scheme::AskAmplitude => Ok(modulate_ask_amplitude(bits, timing)),
    }
}

/// Camera-limited bit rate: `n_leds * fps / frames_per_bit` bits per second.
pub fn theoretical_bitrate_camera(
    n_leds: u8,
    fps: f64,
    frames_per_bit: u32,
) -> Result<f64, ModulationError> {
    if !(1..=3).contains(&n_leds) {
        return Err(ModulationError::BadLedCount(n_leds));
    }
    // Negated form so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(fps > 0.0) {
        return Err(ModulationError::BadFps(fps));
    }
    if frames_per_bit < 1 {
        return Err(ModulationError::BadFramesPerBit(frames_per_bit));
    }
    Ok(f64::from(n_leds) * fps / f64::from(frames_per_bit))
}

/// Conservative on/off-keying rate figure: one bit per full blink period
/// (one on phase plus one off phase).
pub fn ook_bitrate_from_blink_period_us(period_us: u64) -> f64 {
    1e6 / period_us as f64
}

/// Amplitude-keying symbol rate for a given level hold time.
pub fn ask_levels_per_sec(t_all_us: u64) -> f64 {
    1e6 / t_all_us as f64
}

/// Amplitude-keying bit rate: 2 bits per 4-level symbol.
pub fn ask_bits_per_sec(t_all_us: u64) -> f64 {
    2.0 * ask_levels_per_sec(t_all_us)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        BitString::from_01_str(s).unwrap()
    }

    fn seg(state: &str, dur: u64) -> Segment {
        Segment { state: state.parse().unwrap(), duration_us: dur }
    }

    #[test]
    fn led_state_bitfield_round_trip() {
        for byte in 0u8..8 {
            let state = LedState::from_bitfield(byte).unwrap();
            assert_eq!(state.to_bitfield(), byte);
        }
        assert_eq!(LedState::from_bitfield(0x08), None);
        assert_eq!("101".parse::<LedState>().unwrap().to_bitfield(), 0b101);
        assert_eq!(LedState::new(true, false, true).to_string(), "101");
    }

    #[test]
    fn ook_emits_one_segment_per_bit() {
        let t = SymbolTiming::ook(500).unwrap();
        let s = modulate_ook(&bits("10"), &t, "100".parse().unwrap()).unwrap();
        assert_eq!(s.segments(), &[seg("100", 500), seg("000", 500)]);
        assert_eq!(s.symbol_count(), 2);
        assert_eq!(s.total_duration_us(), 1000);
    }

    #[test]
    fn ook_merges_repeated_ones() {
        let t = SymbolTiming::ook(500).unwrap();
        let s = modulate_ook(&bits("1100"), &t, "100".parse().unwrap()).unwrap();
        assert_eq!(s.segments(), &[seg("100", 1000), seg("000", 1000)]);
        assert_eq!(s.symbol_count(), 4);
        assert_eq!(s.raw_segment_count(), 4);
    }

    #[test]
    fn ook_rejects_dark_mask() {
        let t = SymbolTiming::ook(500).unwrap();
        assert_eq!(
            modulate_ook(&bits("1"), &t, LedState::OFF),
            Err(ModulationError::EmptyMask)
        );
    }

    #[test]
    fn bfsk_keys_bit_value_into_pulse_length() {
        let t = SymbolTiming::new(800, 400, 400, 800).unwrap();
        let s = modulate_bfsk(&bits("01"), &t).unwrap();
        assert_eq!(
            s.segments(),
            &[seg("111", 400), seg("000", 400), seg("111", 800), seg("000", 400)]
        );
    }

    #[test]
    fn bfsk_rejects_degenerate_timing() {
        let equal = SymbolTiming::new(500, 500, 400, 500).unwrap();
        assert_eq!(
            modulate_bfsk(&bits("1"), &equal),
            Err(ModulationError::EqualPulseDurations(500))
        );
        let no_gap = SymbolTiming::new(800, 400, 0, 800).unwrap();
        assert_eq!(modulate_bfsk(&bits("1"), &no_gap), Err(ModulationError::ZeroGap));
    }

    #[test]
    fn ask3_maps_bit_positions_to_leds() {
        let t = SymbolTiming::new(500, 500, 400, 500).unwrap();
        let s = modulate_ask3(&bits("101"), &t);
        assert_eq!(s.segments(), &[seg("101", 500), seg("000", 400)]);
        assert_eq!(s.symbol_count(), 1);
        assert_eq!(s.raw_segment_count(), 2);
    }

    #[test]
    fn ask3_pads_short_group_with_zeros() {
        let t = SymbolTiming::new(500, 500, 400, 500).unwrap();
        let s = modulate_ask3(&bits("10"), &t);
        assert_eq!(s.segments(), &[seg("100", 500), seg("000", 400)]);
    }

    #[test]
    fn ask3_all_zero_symbol_merges_with_separator() {
        let t = SymbolTiming::new(500, 500, 400, 500).unwrap();
        let s = modulate_ask3(&bits("000"), &t);
        assert_eq!(s.segments(), &[seg("000", 900)]);
        assert_eq!(s.raw_segment_count(), 2);
    }

    #[test]
    fn ask_amplitude_level_ladder() {
        let t = SymbolTiming::new(500, 500, 0, 500).unwrap();
        let s = modulate_ask_amplitude(&bits("00011011"), &t);
        assert_eq!(
            s.segments(),
            &[seg("000", 500), seg("100", 500), seg("110", 500), seg("111", 500)]
        );
        assert_eq!(s.symbol_count(), 4);
    }

    #[test]
    fn ask_amplitude_constant_stream_merges_fully() {
        let t = SymbolTiming::new(500, 500, 0, 500).unwrap();
        let s = modulate_ask_amplitude(&bits("11111111"), &t);
        assert_eq!(s.segments(), &[seg("111", 2000)]);
        assert_eq!(s.symbol_count(), 4);
    }

    #[test]
    fn camera_bitrates_match_frame_arithmetic() {
        assert_eq!(theoretical_bitrate_camera(1, 30.0, 2).unwrap(), 15.0);
        assert_eq!(theoretical_bitrate_camera(3, 30.0, 2).unwrap(), 45.0);
        assert_eq!(theoretical_bitrate_camera(3, 120.0, 2).unwrap(), 180.0);
        assert!(theoretical_bitrate_camera(4, 30.0, 2).is_err());
        assert!(theoretical_bitrate_camera(3, 0.0, 2).is_err());
        assert!(theoretical_bitrate_camera(3, 30.0, 0).is_err());
    }

    #[test]
    fn rate_helpers() {
        assert!((ook_bitrate_from_blink_period_us(800) - 1250.0).abs() < 1e-9);
        let lvl = ask_levels_per_sec(350);
        assert!((lvl - 2857.14).abs() < 0.01);
        assert!((ask_bits_per_sec(350) - 2.0 * lvl).abs() < 1e-9);
    }

    #[test]
    fn state_at_walks_segments() {
        let t = SymbolTiming::ook(500).unwrap();
        let s = modulate_ook(&bits("10"), &t, "100".parse().unwrap()).unwrap();
        assert_eq!(s.state_at(0), "100".parse().unwrap());
        assert_eq!(s.state_at(499), "100".parse().unwrap());
        assert_eq!(s.state_at(500), LedState::OFF);
        assert_eq!(s.state_at(5000), LedState::OFF);
    }

    #[test]
    fn zero_duration_timing_rejected() {
        assert!(SymbolTiming::new(0, 500, 400, 500).is_err());
        assert!(SymbolTiming::new(500, 0, 400, 500).is_err());
        assert!(SymbolTiming::new(500, 500, 400, 0).is_err());
        assert!(SymbolTiming::new(500, 500, 0, 500).is_ok());
    }
}
