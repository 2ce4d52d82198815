//! Text file formats for schedules, traces, profiles, and link parameters.
//!
//! All formats are line-oriented ASCII:
//!
//! * Schedule: one `state_bits,duration_us` row per segment, e.g. `101,400`.
//! * Sensor trace: header `sample_rate_hz,<integer>`, then one milliwatt
//!   value per line.
//! * Camera trace: header `fps,<integer>`, then `frame,led1,led2,led3` rows
//!   where `frame` is the sequential frame index from 0.
//! * Profiles: INI-style `[profile-name]` sections of `name = value` keys.
//! * Link parameters: flat `name = value` keys, SI units (`theta` is radians).
//!
//! Blank lines and `#` comment lines are ignored everywhere.

use crate::channel::{CameraTrace, SensorTrace};
use crate::modulation::{LedSchedule, LedState, Segment};
use crate::profiles::{CalibrationRow, KeyboardProfile};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FileFormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing header line {expected:?}")]
    MissingHeader { expected: &'static str },
    #[error("profile {profile:?} is missing key {key:?}")]
    MissingKey { profile: String, key: &'static str },
    #[error("empty file")]
    Empty,
}

fn bad(line: usize, message: impl Into<String>) -> FileFormatError {
    FileFormatError::Malformed { line, message: message.into() }
}

/// Lines worth parsing: skips blanks and `#` comments, keeps 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn write_schedule(schedule: &LedSchedule) -> String {
    let mut out = String::new();
    for seg in schedule.segments() {
        writeln!(out, "{},{}", seg.state, seg.duration_us).unwrap();
    }
    out
}

pub fn read_schedule(text: &str) -> Result<LedSchedule, FileFormatError> {
    let mut raw = Vec::new();
    for (line, content) in content_lines(text) {
        let (state_s, dur_s) = content
            .split_once(',')
            .ok_or_else(|| bad(line, "expected state_bits,duration_us"))?;
        let state: LedState = state_s
            .trim()
            .parse()
            .map_err(|e: String| bad(line, e))?;
        let duration_us: u64 = dur_s
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("bad duration {dur_s:?}")))?;
        if duration_us == 0 {
            return Err(bad(line, "zero-duration segment"));
        }
        raw.push(Segment { state, duration_us });
    }
    if raw.is_empty() {
        return Err(FileFormatError::Empty);
    }
    let n = raw.len();
    Ok(LedSchedule::from_raw_segments(raw, n))
}

pub fn write_sensor_trace(trace: &SensorTrace) -> String {
    let mut out = format!("sample_rate_hz,{}\n", trace.sample_rate_hz);
    for v in &trace.samples_mw {
        writeln!(out, "{v:.9}").unwrap();
    }
    out
}

pub fn read_sensor_trace(text: &str) -> Result<SensorTrace, FileFormatError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(FileFormatError::Empty)?;
    let rate_s = header
        .strip_prefix("sample_rate_hz,")
        .ok_or(FileFormatError::MissingHeader { expected: "sample_rate_hz,<integer>" })?;
    let sample_rate_hz: u32 = rate_s
        .trim()
        .parse()
        .map_err(|_| bad(hline, format!("bad sample rate {rate_s:?}")))?;
    if sample_rate_hz == 0 {
        return Err(bad(hline, "sample rate must be positive"));
    }
    let mut samples_mw = Vec::new();
    for (line, content) in lines {
        let v: f64 = content
            .parse()
            .map_err(|_| bad(line, format!("bad sample {content:?}")))?;
        if !v.is_finite() {
            return Err(bad(line, "non-finite sample"));
        }
        samples_mw.push(v);
    }
    Ok(SensorTrace { sample_rate_hz, samples_mw })
}

pub fn write_camera_trace(trace: &CameraTrace) -> String {
    let mut out = format!("fps,{}\n", trace.fps);
    for (i, f) in trace.frames.iter().enumerate() {
        writeln!(out, "{i},{:.4},{:.4},{:.4}", f[0], f[1], f[2]).unwrap();
    }
    out
}

pub fn read_camera_trace(text: &str) -> Result<CameraTrace, FileFormatError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(FileFormatError::Empty)?;
    let fps_s = header
        .strip_prefix("fps,")
        .ok_or(FileFormatError::MissingHeader { expected: "fps,<integer>" })?;
    let fps: u32 = fps_s
        .trim()
        .parse()
        .map_err(|_| bad(hline, format!("bad fps {fps_s:?}")))?;
    if fps == 0 {
        return Err(bad(hline, "fps must be positive"));
    }
    let mut frames = Vec::new();
    for (line, content) in lines {
        let parts: Vec<&str> = content.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(line, "expected frame,led1,led2,led3"));
        }
        let idx: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("bad frame index {:?}", parts[0])))?;
        if idx != frames.len() {
            return Err(bad(line, format!("frame index {idx} out of order, expected {}", frames.len())));
        }
        let mut frame = [0.0f64; 3];
        for led in 0..3 {
            let v: f64 = parts[led + 1]
                .trim()
                .parse()
                .map_err(|_| bad(line, format!("bad intensity {:?}", parts[led + 1])))?;
            if !(0.0..=255.0).contains(&v) {
                return Err(bad(line, format!("intensity {v} outside 0..=255")));
            }
            frame[led] = v;
        }
        frames.push(frame);
    }
    Ok(CameraTrace { fps, frames })
}

/// Auto-detected trace kind, keyed off the header line.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTrace {
    Sensor(SensorTrace),
    Camera(CameraTrace),
}

pub fn read_any_trace(text: &str) -> Result<AnyTrace, FileFormatError> {
    let header = content_lines(text).next().map(|(_, l)| l).unwrap_or("");
    if header.starts_with("fps,") {
        read_camera_trace(text).map(AnyTrace::Camera)
    } else {
        read_sensor_trace(text).map(AnyTrace::Sensor)
    }
}

pub fn write_profiles(profiles: &[KeyboardProfile]) -> String {
    let mut out = String::from(
        "# Keyboard profiles: bench characterization plus simulator noise calibration.\n\
         #\n\
         # tx_power_mw is back-solved, not measured: the on/off received-power delta\n\
         # (p_on_mw - p_off_mw) is inverted through the far-field link budget at the\n\
         # assumed bench geometry (head-on, 0.12 m, 2.54 cm lens radius, loss 0.8),\n\
         # giving the LED optical power that would produce the measured delta.\n\
         # ook_sigma_mw / ask_sigma_mw reproduce the reference BERs under this\n\
         # crate's simulator at the stated bit rates; they are calibrations of the\n\
         # simulator, not predictions about the hardware.\n",
    );
    for p in profiles {
        writeln!(out, "\n[{}]", p.name).unwrap();
        writeln!(out, "min_switch_us = {}", p.min_switch_us).unwrap();
        writeln!(out, "min_blink_single_us = {}", p.min_blink_single_us).unwrap();
        writeln!(out, "min_blink_multi_us = {}", p.min_blink_multi_us).unwrap();
        writeln!(out, "ask_level_us = {}", p.ask_level_us).unwrap();
        writeln!(out, "p_on_mw = {}", p.p_on_mw).unwrap();
        writeln!(out, "p_off_mw = {}", p.p_off_mw).unwrap();
        writeln!(out, "per_led_mw = {}", p.per_led_mw).unwrap();
        writeln!(out, "rise_us = {}", p.rise_us).unwrap();
        writeln!(out, "tx_power_mw = {}", p.tx_power_mw).unwrap();
        if let Some(r) = p.reported_ask_levels_per_sec {
            writeln!(out, "reported_ask_levels_per_sec = {r}").unwrap();
        }
        writeln!(out, "ook_bitrate_bps = {}", p.ook_cal.bitrate_bps).unwrap();
        writeln!(out, "ook_reference_ber_pct = {}", p.ook_cal.reference_ber_pct).unwrap();
        writeln!(out, "ook_sigma_mw = {}", p.ook_cal.sigma_mw).unwrap();
        writeln!(out, "ask_bitrate_bps = {}", p.ask_cal.bitrate_bps).unwrap();
        writeln!(out, "ask_reference_ber_pct = {}", p.ask_cal.reference_ber_pct).unwrap();
        writeln!(out, "ask_sigma_mw = {}", p.ask_cal.sigma_mw).unwrap();
    }
    out
}

pub fn read_profiles(text: &str) -> Result<Vec<KeyboardProfile>, FileFormatError> {
    let mut sections: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (line, content) in content_lines(text) {
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad(line, "unterminated section header"))?;
            sections.push((name.trim().to_string(), BTreeMap::new()));
        } else {
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, "expected name = value"))?;
            let section = sections
                .last_mut()
                .ok_or_else(|| bad(line, "key before any [profile] section"))?;
            section.1.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    if sections.is_empty() {
        return Err(FileFormatError::Empty);
    }

    let mut profiles = Vec::with_capacity(sections.len());
    for (name, keys) in sections {
        let get_f64 = |key: &'static str| -> Result<f64, FileFormatError> {
            keys.get(key)
                .ok_or(FileFormatError::MissingKey { profile: name.clone(), key })?
                .parse()
                .map_err(|_| bad(0, format!("profile {name:?}: bad number for {key}")))
        };
        let get_u64 = |key: &'static str| -> Result<u64, FileFormatError> {
            keys.get(key)
                .ok_or(FileFormatError::MissingKey { profile: name.clone(), key })?
                .parse()
                .map_err(|_| bad(0, format!("profile {name:?}: bad integer for {key}")))
        };
        profiles.push(KeyboardProfile {
            name: name.clone(),
            min_switch_us: get_u64("min_switch_us")?,
            min_blink_single_us: get_u64("min_blink_single_us")?,
            min_blink_multi_us: get_u64("min_blink_multi_us")?,
            ask_level_us: get_u64("ask_level_us")?,
            p_on_mw: get_f64("p_on_mw")?,
            p_off_mw: get_f64("p_off_mw")?,
            per_led_mw: get_f64("per_led_mw")?,
            rise_us: get_u64("rise_us")?,
            tx_power_mw: get_f64("tx_power_mw")?,
            reported_ask_levels_per_sec: keys
                .get("reported_ask_levels_per_sec")
                .map(|v| {
                    v.parse().map_err(|_| {
                        bad(0, format!("profile {name:?}: bad number for reported_ask_levels_per_sec"))
                    })
                })
                .transpose()?,
            ook_cal: CalibrationRow {
                bitrate_bps: get_f64("ook_bitrate_bps")?,
                reference_ber_pct: get_f64("ook_reference_ber_pct")?,
                sigma_mw: get_f64("ook_sigma_mw")?,
            },
            ask_cal: CalibrationRow {
                bitrate_bps: get_f64("ask_bitrate_bps")?,
                reference_ber_pct: get_f64("ask_reference_ber_pct")?,
                sigma_mw: get_f64("ask_sigma_mw")?,
            },
        });
    }
    Ok(profiles)
}

/// Flat `name = value` map for the link-budget calculator.
pub fn read_key_values(text: &str) -> Result<BTreeMap<String, f64>, FileFormatError> {
    let mut out = BTreeMap::new();
    for (line, content) in content_lines(text) {
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| bad(line, "expected name = value"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad(line, format!("bad number {:?}", value.trim())))?;
        out.insert(key.trim().to_string(), v);
    }
    Ok(out)
}
