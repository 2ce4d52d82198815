//! Demodulation: traces back to bits, bits back to frames.
//!
//! The sensor path works on total-power samples: binarize against a temporal
//! mean (2-level schemes) or classify against 4-means amplitude cuts
//! (amplitude keying), after locating the frame start either blindly (edge
//! runs of the smoothed trace, verified against the alternating preamble) or
//! by caller assertion that the trace begins at the first symbol. Amplitude
//! classification assumes all four levels appear somewhere in the trace;
//! framed traffic delivers that in practice (the preamble holds level 2,
//! padding holds level 0, and random payload covers the rest).
//!
//! The camera path works per LED: each channel is thresholded on its own
//! temporal mean, dark channels are detected by their negligible spread and
//! decode as constant zeros, and symbols are sliced by frame-center voting.
//!
//! Position keying (`ask3`) cannot be decoded from a sensor trace at all:
//! the photodiode sums the LEDs, and states like `110`/`101`/`011` are
//! identical sums. [`decode_sensor`] reports this as an explicit error
//! rather than guessing.

use crate::bits::BitString;
use crate::channel::{CameraTrace, SensorTrace};
use crate::framing::{self, FrameError, FRAME_BITS};
use crate::modulation::{Scheme, SymbolTiming};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DemodError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace has no signal (flat within noise floor)")]
    NoSignal,
    #[error("no preamble found")]
    PreambleNotFound,
    #[error("{scheme} decode requires explicit symbol timing")]
    TimingRequired { scheme: Scheme },
    #[error("{scheme} cannot be decoded from a {receiver} trace: {reason}")]
    UnsupportedScheme { scheme: Scheme, receiver: &'static str, reason: &'static str },
    #[error("level count for {scheme} must be {expected}, got {got}")]
    BadLevelCount { scheme: Scheme, expected: u8, got: u8 },
}

/// How to interpret a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub scheme: Scheme,
    /// Symbol timing if known. Required for `ask3` and `ask-amp`; `ook` and
    /// `bfsk` calibrate it from the preamble when absent.
    pub timing: Option<SymbolTiming>,
    /// Amplitude classification levels: 2 for on/off schemes, 4 for `ask-amp`.
    pub levels: u8,
    /// Caller guarantees the trace starts exactly at the first symbol of the
    /// first frame (true for traces fresh out of the simulator). Skips blind
    /// sync, which keeps bit-error measurements free of sync slips.
    pub assume_aligned: bool,
}

impl DecodeConfig {
    pub fn new(scheme: Scheme) -> Self {
        let levels = if scheme == Scheme::AskAmplitude { 4 } else { 2 };
        Self { scheme, timing: None, levels, assume_aligned: false }
    }

    pub fn with_timing(mut self, timing: SymbolTiming) -> Self {
        self.timing = Some(timing);
        self
    }

    pub fn aligned(mut self) -> Self {
        self.assume_aligned = true;
        self
    }

    fn validate(&self) -> Result<(), DemodError> {
        let expected = if self.scheme == Scheme::AskAmplitude { 4 } else { 2 };
        if self.levels != expected {
            return Err(DemodError::BadLevelCount {
                scheme: self.scheme,
                expected,
                got: self.levels,
            });
        }
        Ok(())
    }
}

/// Binarization threshold with a degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    /// Set when the trace is flat: the threshold is the mean of noise and
    /// slicing against it is meaningless.
    pub no_signal: bool,
}

/// Temporal-mean threshold over the whole trace.
pub fn estimate_threshold(trace: &SensorTrace) -> Result<Threshold, DemodError> {
    if trace.is_empty() {
        return Err(DemodError::EmptyTrace);
    }
    let samples = &trace.samples_mw;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (min, max) = min_max(samples);
    let scale = min.abs().max(max.abs());
    let no_signal = (max - min) <= 1e-9 * scale;
    Ok(Threshold { value: mean, no_signal })
}

/// Three cut points separating four amplitude levels, from 1-D 4-means over
/// the raw samples seeded at the min / 1/3 / 2/3 / max quantiles. Cuts are
/// midpoints between adjacent converged cluster means.
pub fn estimate_level_cuts(trace: &SensorTrace) -> Result<[f64; 3], DemodError> {
    if trace.is_empty() {
        return Err(DemodError::EmptyTrace);
    }
    let (min, max) = min_max(&trace.samples_mw);
    if (max - min) <= 1e-9 * min.abs().max(max.abs()) {
        return Err(DemodError::NoSignal);
    }
    let centroids = kmeans_1d(&trace.samples_mw, 4);
    Ok([
        (centroids[0] + centroids[1]) / 2.0,
        (centroids[1] + centroids[2]) / 2.0,
        (centroids[2] + centroids[3]) / 2.0,
    ])
}

/// Blind preamble lock: where the first frame starts and the symbol timing
/// measured from its eight alternating bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreambleSync {
    /// Start of preamble bit 0, microseconds from trace start.
    pub frame_start_us: f64,
    /// Start of the first payload bit, microseconds from trace start.
    pub payload_start_us: f64,
    /// Calibrated (or confirmed) duration of a `1` symbol, microseconds.
    pub t_on_us: f64,
    /// Calibrated (or confirmed) duration of a `0` symbol, microseconds.
    pub t_off_us: f64,
}

/// Locates the on/off-keyed preamble in a sensor trace.
///
/// Scans rising edges of the smoothed, hysteresis-binarized trace for eight
/// alternating runs of consistent duration. With `cfg.timing` present the
/// runs must match it; otherwise durations are calibrated from the preamble
/// itself (this needs at least 8 samples per symbol).
pub fn sync_preamble(trace: &SensorTrace, cfg: &DecodeConfig) -> Result<PreambleSync, DemodError> {
    if trace.is_empty() {
        return Err(DemodError::EmptyTrace);
    }
    let pre = SensorPrep::new(trace, cfg.timing.as_ref().map(|t| t.t_on_us.min(t.t_off_us)))?;
    let known = cfg.timing.map(|t| {
        let per = trace.sample_rate_hz as f64 / 1e6;
        (t.t_on_us as f64 * per, t.t_off_us as f64 * per)
    });
    let lock = find_preamble_in_runs(&pre.runs, known, Some(&pre))?;
    let us_per_sample = 1e6 / trace.sample_rate_hz as f64;
    let preamble_span = 4.0 * (lock.t_on + lock.t_off);
    Ok(PreambleSync {
        frame_start_us: lock.start as f64 * us_per_sample,
        payload_start_us: (lock.start as f64 + preamble_span) * us_per_sample,
        t_on_us: lock.t_on * us_per_sample,
        t_off_us: lock.t_off * us_per_sample,
    })
}

/// Per-frame parse outcome, in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub crc_ok: bool,
    pub error: Option<FrameError>,
}

/// Everything a decode produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    /// Raw sliced bit stream, from the first preamble bit onward.
    pub bits: BitString,
    /// Concatenated payload bytes of every complete frame, including frames
    /// whose CRC failed (check `frames` before trusting them).
    pub payload: Vec<u8>,
    pub frames_ok: usize,
    pub frames_failed: usize,
    pub frames: Vec<FrameOutcome>,
    /// Binarization threshold, for 2-level decodes.
    pub threshold: Option<f64>,
    /// Amplitude cuts, for 4-level decodes.
    pub level_cuts: Option<[f64; 3]>,
    /// Symbol timing actually used, microseconds.
    pub t_on_us: f64,
    pub t_off_us: f64,
    /// Bit error rate against a caller-supplied reference; see
    /// [`DecodeReport::score_against`].
    pub ber: Option<f64>,
}

impl DecodeReport {
    /// Fills `ber` by comparing the sliced stream with what was sent.
    pub fn score_against(&mut self, sent: &BitString) {
        self.ber = Some(ber(sent, &self.bits));
    }

    /// Machine-readable `key,value` lines.
    pub fn to_kv_block(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "frames_ok,{}", self.frames_ok).unwrap();
        writeln!(out, "frames_failed,{}", self.frames_failed).unwrap();
        writeln!(out, "bits,{}", self.bits.len()).unwrap();
        writeln!(out, "payload_bytes,{}", self.payload.len()).unwrap();
        if let Some(t) = self.threshold {
            writeln!(out, "threshold,{t:.9}").unwrap();
        }
        if let Some(c) = self.level_cuts {
            writeln!(out, "level_cuts,{:.9},{:.9},{:.9}", c[0], c[1], c[2]).unwrap();
        }
        writeln!(out, "t_on_us,{:.3}", self.t_on_us).unwrap();
        writeln!(out, "t_off_us,{:.3}", self.t_off_us).unwrap();
        if let Some(b) = self.ber {
            writeln!(out, "ber,{b:.6}").unwrap();
        }
        for (i, f) in self.frames.iter().enumerate() {
            match &f.error {
                None => writeln!(out, "frame_{i},ok").unwrap(),
                Some(e) => writeln!(out, "frame_{i},failed: {e}").unwrap(),
            }
        }
        out
    }
}

/// Bit error rate between two streams: Hamming distance over the longer
/// length, with missing tail bits counted as errors.
pub fn ber(sent: &BitString, received: &BitString) -> f64 {
    let longer = sent.len().max(received.len());
    if longer == 0 {
        return 0.0;
    }
    let errors = sent.hamming_prefix(received) + (sent.len().abs_diff(received.len()));
    errors as f64 / longer as f64
}

/// Measured end-to-end bit error rate at one operating point.
///
/// Modulates `frames` frames of seeded random payload (on the Num LED for
/// on/off keying), runs the photodiode simulation with `sigma_mw` additive
/// noise, decodes with known timing and alignment, and averages the stream
/// BER over `instances` independent payload and noise draws. Decoding is
/// alignment-assisted, so the figure measures slicing errors, not sync
/// slips. Deterministic for a given `base_seed`.
#[allow(clippy::too_many_arguments)] // a sweep point is genuinely 8-dimensional
pub fn measure_ber(
    profile: &crate::profiles::KeyboardProfile,
    scheme: Scheme,
    timing: &SymbolTiming,
    sigma_mw: f64,
    sample_rate_hz: u32,
    frames: usize,
    instances: usize,
    base_seed: u64,
) -> Result<f64, DemodError> {
    use rand::{Rng, SeedableRng};
    let mask = crate::modulation::LedState::new(true, false, false);
    let mut total = 0.0;
    for i in 0..instances {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
        let mut payload = vec![0u8; frames * 32];
        rng.fill(&mut payload[..]);
        let mut sent =
            framing::serialize_frames(&framing::build_frames(&payload).expect("nonempty payload"));
        sent.pad_to_multiple_of(scheme.bits_per_symbol());
        let schedule =
            crate::modulation::modulate(scheme, &sent, timing, mask).expect("timing fits scheme");
        let noise = crate::channel::NoiseModel::new(
            sigma_mw,
            base_seed.wrapping_add(0x9E3779B9 + i as u64),
        );
        let trace = crate::channel::simulate_sensor(&schedule, profile, sample_rate_hz, &noise)
            .expect("sample rate clears the switching floor");
        let cfg = DecodeConfig::new(scheme).with_timing(*timing).aligned();
        let mut report = decode_sensor(&trace, &cfg)?;
        report.score_against(&sent);
        total += report.ber.expect("scored");
    }
    Ok(total / instances as f64)
}

/// Decodes a photodiode trace.
pub fn decode_sensor(trace: &SensorTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(DemodError::EmptyTrace);
    }
    match cfg.scheme {
        Scheme::Ook => decode_ook_sensor(trace, cfg),
        Scheme::Bfsk => decode_bfsk_sensor(trace, cfg),
        Scheme::AskAmplitude => decode_amp_sensor(trace, cfg),
        Scheme::Ask3 => Err(DemodError::UnsupportedScheme {
            scheme: Scheme::Ask3,
            receiver: "sensor",
            reason: "a summed-power receiver cannot tell LED positions apart",
        }),
    }
}

/// Decodes a camera trace.
pub fn decode_camera(trace: &CameraTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(DemodError::EmptyTrace);
    }
    match cfg.scheme {
        Scheme::Ook => decode_ook_camera(trace, cfg),
        Scheme::Bfsk => decode_bfsk_camera(trace, cfg),
        Scheme::Ask3 => decode_positional_camera(trace, cfg, false),
        Scheme::AskAmplitude => decode_positional_camera(trace, cfg, true),
    }
}

// ---------------------------------------------------------------------------
// Shared sensor-side machinery
// ---------------------------------------------------------------------------

/// Fraction of the half-amplitude used as the hysteresis band.
const HYST_FRACTION: f64 = 0.3;
/// Run-duration tolerance against nominal when verifying the preamble.
const RUN_TOLERANCE: f64 = 0.30;
/// Blind timing calibration refuses symbols shorter than this many samples.
const MIN_BLIND_SYMBOL_SAMPLES: f64 = 8.0;
/// A preamble candidate's on/off separation must clear this many noise
/// sigmas. Smoothed noise alone forms alternating runs of believable
/// lengths; amplitude contrast is what tells a preamble from that.
const SYNC_CONTRAST_SIGMAS: f64 = 3.5;

#[derive(Debug, Clone, Copy)]
struct Run {
    level: bool,
    start: usize,
    len: usize,
}

/// Smoothed samples, binarized runs, and prefix sums for one sensor trace.
struct SensorPrep {
    prefix: Vec<f64>,
    smoothed: Vec<f64>,
    /// Midpoint between the low and high signal levels of the smoothed trace.
    smid: f64,
    runs: Vec<Run>,
    mean: f64,
    /// Robust noise floor: median absolute successive difference, rescaled
    /// to a Gaussian sigma. Plateau-heavy signals leave it at the additive
    /// noise level; the signal's own steps are too rare to move a median.
    noise_floor: f64,
}

impl SensorPrep {
    /// `min_symbol_us`: shortest known symbol, to scale the smoothing window
    /// and glitch healing; `None` falls back to blind defaults.
    fn new(trace: &SensorTrace, min_symbol_us: Option<u64>) -> Result<Self, DemodError> {
        let samples = &trace.samples_mw;
        let per_us = trace.sample_rate_hz as f64 / 1e6;
        let (window, heal) = match min_symbol_us {
            Some(us) => {
                let t = us as f64 * per_us;
                ((t / 4.0).floor().max(1.0) as usize, (t / 8.0).floor().max(3.0) as usize)
            }
            None => (9, 3),
        };

        let prefix = prefix_sums(samples);
        let smoothed = moving_average(samples, &prefix, window);

        let mean = prefix[samples.len()] / samples.len() as f64;
        let (min, max) = min_max(samples);
        if (max - min) <= 1e-9 * min.abs().max(max.abs()) {
            return Err(DemodError::NoSignal);
        }
        let (q_lo, q_hi) = (quantile(&smoothed, 0.01), quantile(&smoothed, 0.99));
        let half_amp = (q_hi - q_lo) / 2.0;
        if half_amp <= 0.0 {
            return Err(DemodError::NoSignal);
        }
        let smid = (q_hi + q_lo) / 2.0;
        let margin = HYST_FRACTION * half_amp;

        let runs = heal_runs(hysteresis_runs(&smoothed, smid, margin), heal);

        let noise_floor = if samples.len() > 1 {
            let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            // median(|N(0,s) - N(0,s)|) = 0.9539 s
            quantile(&diffs, 0.5) / 0.9539
        } else {
            0.0
        };
        Ok(Self { prefix, smoothed, smid, runs, mean, noise_floor })
    }

    /// Sub-sample edge position: the interpolated crossing of the mid level
    /// nearest to a binarized run boundary.
    ///
    /// The hysteresis trigger flips at `mid ± margin`, where noise-assisted
    /// first crossings land early by different amounts for rising and falling
    /// ramps. That skews every run length by a fraction of a sample in the
    /// same direction, and a systematic skew survives averaging. The 50%
    /// crossing of the smoothed ramp is symmetric for both directions, so
    /// interpolating it removes the skew along with sample quantization.
    fn refine_edge(&self, boundary: usize, rising: bool) -> f64 {
        // The smoothing ramp spans the window width plus the LED transient.
        let reach = 12usize;
        let lo = boundary.saturating_sub(reach);
        let hi = (boundary + reach).min(self.smoothed.len() - 1);
        let mut best: Option<f64> = None;
        for j in lo..hi {
            let (a, b) = (self.smoothed[j], self.smoothed[j + 1]);
            let crosses = if rising { a < self.smid && b >= self.smid } else { a >= self.smid && b < self.smid };
            if !crosses {
                continue;
            }
            let x = j as f64 + (self.smid - a) / (b - a);
            if best.is_none_or(|p: f64| (p - boundary as f64).abs() > (x - boundary as f64).abs()) {
                best = Some(x);
            }
        }
        best.unwrap_or(boundary as f64)
    }

    /// Sub-sample boundary positions for every run: entry `i` opens run `i`,
    /// and the final entry closes the last run at the capture end.
    fn refined_bounds(&self) -> Vec<f64> {
        let mut bounds = Vec::with_capacity(self.runs.len() + 1);
        bounds.push(self.runs[0].start as f64);
        for r in self.runs.iter().skip(1) {
            let e = self.refine_edge(r.start, r.level);
            // Interpolation may not cross a neighboring edge.
            let prev = *bounds.last().unwrap();
            bounds.push(e.max(prev + f64::EPSILON * prev.max(1.0)));
        }
        bounds.push(self.len() as f64);
        bounds
    }

    /// Mean of samples in `[lo, hi)` (saturating to the trace bounds).
    fn window_mean(&self, lo: f64, hi: f64) -> f64 {
        let n = self.prefix.len() - 1;
        let a = (lo.ceil().max(0.0) as usize).min(n);
        let b = (hi.floor().max(0.0) as usize).min(n);
        if b <= a {
            return self.prefix[n] / n as f64;
        }
        (self.prefix[b] - self.prefix[a]) / (b - a) as f64
    }

    fn len(&self) -> usize {
        self.prefix.len() - 1
    }
}

fn prefix_sums(samples: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in samples {
        acc += s;
        prefix.push(acc);
    }
    prefix
}

fn moving_average(samples: &[f64], prefix: &[f64], window: usize) -> Vec<f64> {
    let n = samples.len();
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        out.push((prefix[hi] - prefix[lo]) / (hi - lo) as f64);
    }
    out
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &s in samples {
        min = min.min(s);
        max = max.max(s);
    }
    (min, max)
}

/// Order statistic without a full sort.
fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut copy = samples.to_vec();
    let idx = ((copy.len() - 1) as f64 * q).round() as usize;
    let (_, v, _) = copy.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
    *v
}

/// Schmitt-trigger binarization: flips high above `mid + margin`, low below
/// `mid - margin`.
fn hysteresis_runs(smoothed: &[f64], mid: f64, margin: f64) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    let mut level = smoothed[0] > mid;
    let mut start = 0usize;
    for (i, &v) in smoothed.iter().enumerate() {
        let flip = if level { v < mid - margin } else { v > mid + margin };
        if flip {
            runs.push(Run { level, start, len: i - start });
            level = !level;
            start = i;
        }
    }
    runs.push(Run { level, start, len: smoothed.len() - start });
    runs
}

/// Absorbs runs shorter than `min_len` into their neighbors until stable.
fn heal_runs(mut runs: Vec<Run>, min_len: usize) -> Vec<Run> {
    while let Some(idx) = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.len < min_len)
        .min_by_key(|(_, r)| r.len)
        .map(|(i, _)| i)
    {
        if runs.len() == 1 {
            break;
        }
        if idx == 0 {
            let merged = Run { level: runs[1].level, start: 0, len: runs[0].len + runs[1].len };
            runs.splice(0..2, [merged]);
        } else if idx == runs.len() - 1 {
            let prev = runs[idx - 1];
            let merged =
                Run { level: prev.level, start: prev.start, len: prev.len + runs[idx].len };
            runs.splice(idx - 1..=idx, [merged]);
        } else {
            let prev = runs[idx - 1];
            let next = runs[idx + 1];
            let merged = Run {
                level: prev.level,
                start: prev.start,
                len: prev.len + runs[idx].len + next.len,
            };
            runs.splice(idx - 1..=idx + 1, [merged]);
        }
    }
    runs
}

struct PreambleLock {
    /// Index of the first preamble run in the run list.
    idx: usize,
    start: usize,
    t_on: f64,
    t_off: f64,
}

/// Scans ON-run starts for eight alternating preamble runs.
///
/// `known`: (t_on, t_off) in samples when the caller supplied timing. The
/// final off-run may be longer than nominal (it merges with a leading `0`
/// payload bit), so it only gets a lower bound. `contrast`: the sensor prep
/// to measure on/off amplitude separation against the noise floor; `None`
/// skips that gate (camera frames are already integration-averaged).
fn find_preamble_in_runs(
    runs: &[Run],
    known: Option<(f64, f64)>,
    contrast: Option<&SensorPrep>,
) -> Result<PreambleLock, DemodError> {
    for idx in 0..runs.len() {
        if !runs[idx].level || idx + 7 >= runs.len() {
            continue;
        }
        let window = &runs[idx..idx + 8];
        let Some(lock) = verify_preamble_window(window, known) else {
            continue;
        };
        if let Some(prep) = contrast {
            if preamble_separation(window, prep) < SYNC_CONTRAST_SIGMAS * prep.noise_floor {
                continue;
            }
        }
        return Ok(PreambleLock { idx, start: runs[idx].start, t_on: lock.0, t_off: lock.1 });
    }
    Err(DemodError::PreambleNotFound)
}

/// Mean raw level of the four on-runs minus the four off-runs, each sampled
/// over its central half.
fn preamble_separation(window: &[Run], prep: &SensorPrep) -> f64 {
    let center = |r: &Run| {
        let (s, l) = (r.start as f64, r.len as f64);
        prep.window_mean(s + 0.25 * l, s + 0.75 * l)
    };
    let on: f64 = window.iter().step_by(2).map(center).sum::<f64>() / 4.0;
    let off: f64 = window.iter().skip(1).step_by(2).map(center).sum::<f64>() / 4.0;
    on - off
}

fn verify_preamble_window(window: &[Run], known: Option<(f64, f64)>) -> Option<(f64, f64)> {
    debug_assert_eq!(window.len(), 8);
    for (k, run) in window.iter().enumerate() {
        if run.level != (k % 2 == 0) {
            return None;
        }
    }
    let (nom_on, nom_off) = match known {
        Some(k) => k,
        None => {
            let t_on = window.iter().step_by(2).map(|r| r.len as f64).sum::<f64>() / 4.0;
            let t_off =
                window.iter().skip(1).step_by(2).take(3).map(|r| r.len as f64).sum::<f64>() / 3.0;
            if t_on < MIN_BLIND_SYMBOL_SAMPLES || t_off < MIN_BLIND_SYMBOL_SAMPLES {
                return None;
            }
            (t_on, t_off)
        }
    };
    for (k, run) in window.iter().enumerate() {
        let nominal = if k % 2 == 0 { nom_on } else { nom_off };
        let len = run.len as f64;
        if k == 7 {
            // Last preamble bit is a 0; a 0 payload bit extends this run.
            if len < nominal * (1.0 - RUN_TOLERANCE) {
                return None;
            }
        } else if (len - nominal).abs() > nominal * RUN_TOLERANCE {
            return None;
        }
    }
    Some((nom_on, nom_off))
}

/// Splits a sliced bit stream into frames.
///
/// Complete 280-bit chunks are parsed; a trailing partial chunk is a failed
/// frame unless it is all zeros (modulation padding or trailing dark).
fn assemble_frames(bits: &BitString) -> (Vec<u8>, usize, usize, Vec<FrameOutcome>) {
    let mut payload = Vec::new();
    let mut ok = 0;
    let mut failed = 0;
    let mut outcomes = Vec::new();
    let mut idx = 0;
    while idx < bits.len() {
        let end = (idx + FRAME_BITS).min(bits.len());
        let chunk = bits.slice(idx..end);
        if chunk.len() == FRAME_BITS {
            payload.extend(chunk.slice(8..8 + framing::PAYLOAD_BITS).to_bytes());
            match framing::parse_frame(&chunk) {
                Ok(_) => {
                    ok += 1;
                    outcomes.push(FrameOutcome { crc_ok: true, error: None });
                }
                Err(e) => {
                    failed += 1;
                    outcomes.push(FrameOutcome { crc_ok: false, error: Some(e) });
                }
            }
        } else if chunk.iter().any(|b| b) {
            failed += 1;
            outcomes.push(FrameOutcome {
                crc_ok: false,
                error: Some(FrameError::BadLength { expected: FRAME_BITS, got: chunk.len() }),
            });
        }
        idx = end;
    }
    (payload, ok, failed, outcomes)
}

fn build_report(
    bits: BitString,
    threshold: Option<f64>,
    level_cuts: Option<[f64; 3]>,
    t_on_us: f64,
    t_off_us: f64,
) -> DecodeReport {
    let (payload, frames_ok, frames_failed, frames) = assemble_frames(&bits);
    DecodeReport {
        bits,
        payload,
        frames_ok,
        frames_failed,
        frames,
        threshold,
        level_cuts,
        t_on_us,
        t_off_us,
        ber: None,
    }
}

// ---------------------------------------------------------------------------
// Sensor decoders
// ---------------------------------------------------------------------------

fn decode_ook_sensor(trace: &SensorTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    let per_us = trace.sample_rate_hz as f64 / 1e6;
    let pre = SensorPrep::new(trace, cfg.timing.as_ref().map(|t| t.t_on_us.min(t.t_off_us)))?;
    let threshold = pre.mean;

    let (start, t_on, t_off) = if cfg.assume_aligned {
        let t = cfg.timing.ok_or(DemodError::TimingRequired { scheme: Scheme::Ook })?;
        (0.0, t.t_on_us as f64 * per_us, t.t_off_us as f64 * per_us)
    } else {
        let known = cfg.timing.map(|t| (t.t_on_us as f64 * per_us, t.t_off_us as f64 * per_us));
        let lock = find_preamble_in_runs(&pre.runs, known, Some(&pre))?;
        if cfg.timing.is_none() {
            // No timing reference at all: decode run lengths against a
            // least-squares symbol lattice instead of walking symbol by
            // symbol on a noisy period estimate.
            let (bits, t_on, t_off) = decode_ook_blind_runs(&pre, &lock);
            return Ok(build_report(bits, Some(threshold), None, t_on / per_us, t_off / per_us));
        }
        (lock.start as f64, lock.t_on, lock.t_off)
    };

    let t_min = t_on.min(t_off);
    let mut bits = BitString::new();
    let mut pos = start;
    let n = pre.len() as f64;
    while pos + 0.75 * t_min <= n {
        let mean = pre.window_mean(pos + 0.25 * t_min, pos + 0.75 * t_min);
        let bit = mean > threshold;
        bits.push(bit);
        pos += if bit { t_on } else { t_off };
    }

    Ok(build_report(bits, Some(threshold), None, t_on / per_us, t_off / per_us))
}

/// Incremental least-squares fit of measured edge positions to the symbol
/// lattice `e = e0 + a*t_on + b*t_off`, where `(a, b)` count the 1- and
/// 0-bits preceding an edge.
///
/// The normal equations accumulate every accepted edge, so late parameter
/// estimates lever the full span of the capture: after a few dozen edges the
/// periods are known to millisamples, and even a multi-hundred-symbol
/// constant-bit span maps to an unambiguous bit count.
struct LatticeFit {
    m: [[f64; 3]; 3],
    v: [f64; 3],
    rows: usize,
    seed: (f64, f64, f64),
}

impl LatticeFit {
    fn new(e0: f64, t_on: f64, t_off: f64) -> Self {
        Self { m: [[0.0; 3]; 3], v: [0.0; 3], rows: 0, seed: (e0, t_on, t_off) }
    }

    fn push(&mut self, a: f64, b: f64, e: f64) {
        let row = [1.0, a, b];
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += row[i] * row[j];
            }
            self.v[i] += row[i] * e;
        }
        self.rows += 1;
    }

    /// Current `(e0, t_on, t_off)`; the seed until the system is well posed.
    fn solve(&self) -> (f64, f64, f64) {
        if self.rows < 4 {
            return self.seed;
        }
        let det3 = |get: &dyn Fn(usize, usize) -> f64| -> f64 {
            get(0, 0) * (get(1, 1) * get(2, 2) - get(1, 2) * get(2, 1))
                - get(0, 1) * (get(1, 0) * get(2, 2) - get(1, 2) * get(2, 0))
                + get(0, 2) * (get(1, 0) * get(2, 1) - get(1, 1) * get(2, 0))
        };
        let d = det3(&|i, j| self.m[i][j]);
        // Hadamard bound as the conditioning scale: a payload that never
        // exercises one period (all 1s or all 0s) leaves its column nearly
        // dependent, and the seeded preamble estimate is then the answer.
        let scale: f64 = (0..3)
            .map(|i| (0..3).map(|j| self.m[i][j] * self.m[i][j]).sum::<f64>().sqrt())
            .product();
        if !d.is_finite() || d.abs() < 1e-9 * scale.max(1.0) {
            return self.seed;
        }
        let mut x = [0.0; 3];
        for (k, slot) in x.iter_mut().enumerate() {
            // Cramer's rule: column k replaced by the target vector.
            let dk = det3(&|i, j| if j == k { self.v[i] } else { self.m[i][j] });
            *slot = dk / d;
        }
        (x[0], x[1], x[2])
    }
}

/// Blind OOK slicing: consume binarized runs whole, deciding each run's bit
/// count from the lattice fit of all edges so far.
///
/// A per-run period estimate cannot cross a long transition-free span (zero
/// padding spends hundreds of symbols dark) without the accumulated timing
/// error exceeding a symbol. Anchoring every decision on measured edges and
/// a globally fitted lattice keeps alignment exact at each boundary, whatever
/// the span length.
fn decode_ook_blind_runs(pre: &SensorPrep, lock: &PreambleLock) -> (BitString, f64, f64) {
    let bounds = pre.refined_bounds();
    let runs = &pre.runs;
    let first_run = lock.idx;
    let mut fit = LatticeFit::new(bounds[first_run], lock.t_on, lock.t_off);
    // The opening edge observes e0 directly.
    fit.push(0.0, 0.0, bounds[first_run]);

    let mut bits = BitString::new();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for j in first_run..runs.len() {
        let level = runs[j].level;
        let (e0, t_on, t_off) = fit.solve();
        let t_level = if level { t_on } else { t_off };
        let pred_open = e0 + a * t_on + b * t_off;
        let last = j + 1 == runs.len();
        let closing = bounds[j + 1];
        let k = if last {
            // No closing edge: grant the final symbol 3/4 of its period.
            (((closing - pred_open) / t_level) + 0.25).floor().max(0.0) as usize
        } else {
            (((closing - pred_open) / t_level).round()).max(1.0) as usize
        };
        for _ in 0..k {
            bits.push(level);
        }
        if level {
            a += k as f64;
        } else {
            b += k as f64;
        }
        if !last {
            let resid = closing - (pred_open + k as f64 * t_level);
            // An edge far off the lattice is noise; it still bounds the run
            // but must not steer the fit.
            if resid.abs() <= 0.35 * t_on.min(t_off) {
                fit.push(a, b, closing);
            }
        }
    }
    let (_, t_on, t_off) = fit.solve();
    (bits, t_on, t_off)
}

fn decode_bfsk_sensor(trace: &SensorTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    let per_us = trace.sample_rate_hz as f64 / 1e6;
    let pre = SensorPrep::new(trace, cfg.timing.as_ref().map(|t| t.t_on_us.min(t.t_off_us)))?;

    let pulses: Vec<&Run> = pre.runs.iter().filter(|r| r.level).collect();
    if pulses.is_empty() {
        return Err(DemodError::PreambleNotFound);
    }

    let (t_on, t_off) = match cfg.timing {
        Some(t) => (t.t_on_us as f64 * per_us, t.t_off_us as f64 * per_us),
        None => calibrate_bfsk_from_pulses(&pulses)?,
    };

    let mut bits = BitString::new();
    for p in &pulses {
        let len = p.len as f64;
        bits.push((len - t_on).abs() < (len - t_off).abs());
    }

    Ok(build_report(bits, Some(pre.mean), None, t_on / per_us, t_off / per_us))
}

/// Preamble pulses alternate 1,0,1,0,...: evens measure t_on, odds t_off.
fn calibrate_bfsk_from_pulses(pulses: &[&Run]) -> Result<(f64, f64), DemodError> {
    if pulses.len() < 8 {
        return Err(DemodError::PreambleNotFound);
    }
    let t_on = pulses.iter().take(8).step_by(2).map(|r| r.len as f64).sum::<f64>() / 4.0;
    let t_off = pulses.iter().take(8).skip(1).step_by(2).map(|r| r.len as f64).sum::<f64>() / 4.0;
    if t_on < MIN_BLIND_SYMBOL_SAMPLES || t_off < MIN_BLIND_SYMBOL_SAMPLES {
        return Err(DemodError::PreambleNotFound);
    }
    for (k, p) in pulses.iter().take(8).enumerate() {
        let nominal = if k % 2 == 0 { t_on } else { t_off };
        if ((p.len as f64) - nominal).abs() > nominal * RUN_TOLERANCE {
            return Err(DemodError::PreambleNotFound);
        }
    }
    if (t_on - t_off).abs() < 0.2 * t_on.max(t_off) {
        return Err(DemodError::PreambleNotFound);
    }
    Ok((t_on, t_off))
}

fn decode_amp_sensor(trace: &SensorTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    let timing = cfg.timing.ok_or(DemodError::TimingRequired { scheme: Scheme::AskAmplitude })?;
    let per_us = trace.sample_rate_hz as f64 / 1e6;
    let hold = timing.t_all_us as f64 * per_us;
    let period = (timing.t_all_us + timing.t_d_us) as f64 * per_us;
    let pre = SensorPrep::new(trace, Some(timing.t_all_us))?;

    let start = if cfg.assume_aligned {
        0.0
    } else {
        // The stream starts with the preamble's `10` pair: a level-2 hold.
        // First run above the hysteresis low state marks symbol 0.
        pre.runs
            .iter()
            .find(|r| r.level)
            .map(|r| r.start as f64)
            .ok_or(DemodError::PreambleNotFound)?
    };

    // Classify per-symbol window means, not raw samples: symbol averaging is
    // what gives amplitude keying its noise margin.
    let n = pre.len() as f64;
    let mut means = Vec::new();
    let mut pos = start;
    while pos + 0.75 * hold <= n {
        means.push(pre.window_mean(pos + 0.25 * hold, pos + 0.75 * hold));
        pos += period;
    }
    if means.is_empty() {
        return Err(DemodError::PreambleNotFound);
    }

    let centroids = kmeans_1d(&means, 4);
    let cuts = [
        (centroids[0] + centroids[1]) / 2.0,
        (centroids[1] + centroids[2]) / 2.0,
        (centroids[2] + centroids[3]) / 2.0,
    ];

    let mut bits = BitString::new();
    for m in means {
        let level = cuts.iter().filter(|c| m > **c).count() as u8;
        bits.push(level & 2 != 0);
        bits.push(level & 1 != 0);
    }

    let t_all = timing.t_all_us as f64;
    Ok(build_report(bits, None, Some(cuts), t_all, t_all))
}

/// 1-D k-means with centroids seeded evenly across the value range (value
/// spacing, not rank spacing: skewed level occupancy must not collapse two
/// seeds onto the majority level). Returns sorted cluster means. An emptied
/// cluster is reseeded at the value farthest from every surviving centroid.
fn kmeans_1d(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let spread = (sorted[n - 1] - sorted[0]).max(f64::MIN_POSITIVE);
    let mut centroids: Vec<f64> = (0..k)
        .map(|i| sorted[0] + spread * (i as f64 + 0.5) / k as f64)
        .collect();

    for _ in 0..100 {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for &v in &sorted {
            let c = nearest_centroid(&centroids, v);
            sums[c] += v;
            counts[c] += 1;
        }
        let mut next: Vec<f64> = (0..k)
            .map(|c| if counts[c] > 0 { sums[c] / counts[c] as f64 } else { f64::NAN })
            .collect();
        for c in 0..k {
            if next[c].is_nan() {
                let live: Vec<f64> = next.iter().copied().filter(|v| !v.is_nan()).collect();
                next[c] = *sorted
                    .iter()
                    .max_by(|a, b| {
                        let da = live.iter().map(|c| (*a - c).abs()).fold(f64::INFINITY, f64::min);
                        let db = live.iter().map(|c| (*b - c).abs()).fold(f64::INFINITY, f64::min);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
            }
        }
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        centroids = next;
        if moved <= 1e-12 * spread {
            break;
        }
    }
    centroids
}

fn nearest_centroid(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Camera decoders
// ---------------------------------------------------------------------------

/// Per-channel thresholds plus activity flags. A channel whose spread is
/// under a quarter of the busiest channel's spread never lit: its bits are
/// forced dark rather than sliced from noise.
struct CameraPrep {
    thresholds: [f64; 3],
    active: [bool; 3],
    /// frame-indexed, per-LED: signed intensity relative to the threshold.
    rel: Vec<[f64; 3]>,
}

impl CameraPrep {
    fn new(trace: &CameraTrace) -> Result<Self, DemodError> {
        let n = trace.frames.len() as f64;
        let mut thresholds = [0.0f64; 3];
        let mut spreads = [0.0f64; 3];
        for led in 0..3 {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for f in &trace.frames {
                sum += f[led];
                min = min.min(f[led]);
                max = max.max(f[led]);
            }
            thresholds[led] = sum / n;
            spreads[led] = max - min;
        }
        let max_spread = spreads.iter().fold(0.0f64, |a, &b| a.max(b));
        if max_spread <= 1e-9 * 255.0f64.max(max_spread) {
            return Err(DemodError::NoSignal);
        }
        let active = [
            spreads[0] >= 0.25 * max_spread,
            spreads[1] >= 0.25 * max_spread,
            spreads[2] >= 0.25 * max_spread,
        ];
        let rel = trace
            .frames
            .iter()
            .map(|f| {
                [f[0] - thresholds[0], f[1] - thresholds[1], f[2] - thresholds[2]]
            })
            .collect();
        Ok(Self { thresholds, active, rel })
    }

    /// True when any active LED is above threshold in this frame.
    fn any_on(&self, frame: usize) -> bool {
        (0..3).any(|led| self.active[led] && self.rel[frame][led] > 0.0)
    }

    /// Mean relative intensity of `led` over frames whose centers fall in
    /// `[lo, hi)` (frame units). Returns 0 for inactive LEDs and empty
    /// windows.
    fn window_vote(&self, led: usize, lo: f64, hi: f64) -> f64 {
        if !self.active[led] {
            return 0.0;
        }
        let first = (lo - 0.5).ceil().max(0.0) as usize;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut f = first;
        while (f as f64 + 0.5) < hi && f < self.rel.len() {
            sum += self.rel[f][led];
            count += 1;
            f += 1;
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Combined on-vote over all active LEDs in a frame-center window.
    fn window_vote_any(&self, lo: f64, hi: f64) -> f64 {
        (0..3).filter(|&led| self.active[led]).map(|led| self.window_vote(led, lo, hi)).sum()
    }

    fn first_on_frame(&self) -> Option<usize> {
        (0..self.rel.len()).find(|&f| self.any_on(f))
    }

    fn len(&self) -> usize {
        self.rel.len()
    }
}

/// Binarized any-LED-on runs, in whole frames.
fn camera_or_runs(prep: &CameraPrep) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for f in 0..prep.len() {
        let level = prep.any_on(f);
        match runs.last_mut() {
            Some(last) if last.level == level => last.len += 1,
            _ => runs.push(Run { level, start: f, len: 1 }),
        }
    }
    runs
}

fn decode_ook_camera(trace: &CameraTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    let per_frame_us = 1e6 / trace.fps as f64;
    let prep = CameraPrep::new(trace)?;

    let (start, t_on, t_off) = if cfg.assume_aligned {
        let t = cfg.timing.ok_or(DemodError::TimingRequired { scheme: Scheme::Ook })?;
        (0.0, t.t_on_us as f64 / per_frame_us, t.t_off_us as f64 / per_frame_us)
    } else {
        let runs = camera_or_runs(&prep);
        let known =
            cfg.timing.map(|t| (t.t_on_us as f64 / per_frame_us, t.t_off_us as f64 / per_frame_us));
        // Frame-grained runs are coarse; calibration needs >= 2 frames/bit,
        // so relax the blind minimum to that.
        let lock = match known {
            Some(k) => find_preamble_in_runs(&runs, Some(k), None)?,
            None => find_preamble_in_runs(&runs, None, None)
                .or_else(|_| find_preamble_in_runs_relaxed(&runs))?,
        };
        (lock.start as f64, lock.t_on, lock.t_off)
    };

    let t_min = t_on.min(t_off);
    let mut bits = BitString::new();
    let mut pos = start;
    let n = prep.len() as f64;
    while pos + t_min <= n + 0.25 * t_min {
        let vote = prep.window_vote_any(pos + 0.25 * t_min, pos + 0.75 * t_min);
        let bit = vote > 0.0;
        bits.push(bit);
        pos += if bit { t_on } else { t_off };
    }

    Ok(build_report(
        bits,
        Some(prep.thresholds[0]),
        None,
        t_on * per_frame_us,
        t_off * per_frame_us,
    ))
}

/// Blind camera sync at down to 2 frames per symbol.
fn find_preamble_in_runs_relaxed(runs: &[Run]) -> Result<PreambleLock, DemodError> {
    for idx in 0..runs.len() {
        if !runs[idx].level || idx + 7 >= runs.len() {
            continue;
        }
        let window = &runs[idx..idx + 8];
        if window.iter().enumerate().any(|(k, r)| r.level != (k % 2 == 0)) {
            continue;
        }
        let t_on = window.iter().step_by(2).map(|r| r.len as f64).sum::<f64>() / 4.0;
        let t_off =
            window.iter().skip(1).step_by(2).take(3).map(|r| r.len as f64).sum::<f64>() / 3.0;
        if t_on < 2.0 || t_off < 2.0 {
            continue;
        }
        let consistent = window.iter().enumerate().all(|(k, r)| {
            let nominal = if k % 2 == 0 { t_on } else { t_off };
            let len = r.len as f64;
            if k == 7 { len >= nominal * (1.0 - RUN_TOLERANCE) } else { (len - nominal).abs() <= nominal.max(1.0) * RUN_TOLERANCE + 0.51 }
        });
        if consistent {
            return Ok(PreambleLock { idx, start: runs[idx].start, t_on, t_off });
        }
    }
    Err(DemodError::PreambleNotFound)
}

fn decode_bfsk_camera(trace: &CameraTrace, cfg: &DecodeConfig) -> Result<DecodeReport, DemodError> {
    let per_frame_us = 1e6 / trace.fps as f64;
    let prep = CameraPrep::new(trace)?;
    let runs = camera_or_runs(&prep);
    let pulses: Vec<&Run> = runs.iter().filter(|r| r.level).collect();
    if pulses.is_empty() {
        return Err(DemodError::PreambleNotFound);
    }
    let (t_on, t_off) = match cfg.timing {
        Some(t) => (t.t_on_us as f64 / per_frame_us, t.t_off_us as f64 / per_frame_us),
        None => calibrate_bfsk_from_pulses(&pulses).map_err(|_| DemodError::PreambleNotFound)?,
    };
    let mut bits = BitString::new();
    for p in &pulses {
        let len = p.len as f64;
        bits.push((len - t_on).abs() < (len - t_off).abs());
    }
    Ok(build_report(
        bits,
        Some(prep.thresholds[0]),
        None,
        t_on * per_frame_us,
        t_off * per_frame_us,
    ))
}

/// Shared decoder for the two fixed-period camera schemes: `ask3` (one bit
/// per LED per symbol) and `ask-amp` (lit-LED count per symbol).
fn decode_positional_camera(
    trace: &CameraTrace,
    cfg: &DecodeConfig,
    amplitude: bool,
) -> Result<DecodeReport, DemodError> {
    let scheme = if amplitude { Scheme::AskAmplitude } else { Scheme::Ask3 };
    let timing = cfg.timing.ok_or(DemodError::TimingRequired { scheme })?;
    let per_frame_us = 1e6 / trace.fps as f64;
    let hold = timing.t_all_us as f64 / per_frame_us;
    let period = (timing.t_all_us + timing.t_d_us) as f64 / per_frame_us;
    let prep = CameraPrep::new(trace)?;

    let start = if cfg.assume_aligned {
        0.0
    } else {
        // Symbol 0 always lights something: the bit stream starts with the
        // preamble's leading 1.
        prep.first_on_frame().ok_or(DemodError::PreambleNotFound)? as f64
    };

    let mut bits = BitString::new();
    let n = prep.len() as f64;
    let mut pos = start;
    while pos + 0.75 * hold <= n {
        let led_bits: [bool; 3] = std::array::from_fn(|led| {
            prep.window_vote(led, pos + 0.25 * hold, pos + 0.75 * hold) > 0.0
        });
        if amplitude {
            let level = led_bits.iter().filter(|b| **b).count() as u8;
            bits.push(level & 2 != 0);
            bits.push(level & 1 != 0);
        } else {
            for b in led_bits {
                bits.push(b);
            }
        }
        pos += period;
    }

    let t_all = timing.t_all_us as f64;
    Ok(build_report(bits, Some(prep.thresholds[0]), None, t_all, t_all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_camera, simulate_sensor, NoiseModel};
    use crate::framing::build_frames;
    use crate::modulation::{modulate_ask3, modulate_ask_amplitude, modulate_bfsk, modulate_ook};
    use crate::profiles::builtin_profile;

    fn bits(s: &str) -> BitString {
        BitString::from_01_str(s).unwrap()
    }

    fn dell() -> crate::profiles::KeyboardProfile {
        builtin_profile("dell-kb212-b").unwrap()
    }

    fn frame_stream(data: &[u8]) -> BitString {
        framing::serialize_frames(&build_frames(data).unwrap())
    }

    #[test]
    fn threshold_splits_square_wave() {
        let trace = SensorTrace {
            sample_rate_hz: 1000,
            samples_mw: [0.37, 0.42].repeat(100).to_vec(),
        };
        let t = estimate_threshold(&trace).unwrap();
        assert!(!t.no_signal);
        assert!((t.value - 0.395).abs() < 1e-12);
    }

    #[test]
    fn threshold_flags_flat_trace() {
        let trace = SensorTrace { sample_rate_hz: 1000, samples_mw: vec![0.4; 500] };
        let t = estimate_threshold(&trace).unwrap();
        assert!(t.no_signal);
        assert!(estimate_threshold(&SensorTrace { sample_rate_hz: 1, samples_mw: vec![] }).is_err());
    }

    #[test]
    fn level_cuts_sit_between_equal_occupancy_levels() {
        let mut samples = Vec::new();
        for level in [0.37, 0.42, 0.47, 0.52] {
            samples.extend(std::iter::repeat_n(level, 250));
        }
        let trace = SensorTrace { sample_rate_hz: 1000, samples_mw: samples };
        let cuts = estimate_level_cuts(&trace).unwrap();
        let spacing = 0.05;
        for (i, expected) in [0.395, 0.445, 0.495].iter().enumerate() {
            assert!(
                (cuts[i] - expected).abs() < 0.05 * spacing,
                "cut {i} = {} expected {expected}",
                cuts[i]
            );
        }
    }

    #[test]
    fn kmeans_handles_noisy_clusters() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut values = Vec::new();
        for c in [1.0, 2.0, 3.0, 4.0] {
            for _ in 0..500 {
                values.push(c + 0.1 * (rng.gen::<f64>() - 0.5));
            }
        }
        let centroids = kmeans_1d(&values, 4);
        for (c, expected) in centroids.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((c - expected).abs() < 0.05, "centroid {c} vs {expected}");
        }
    }

    #[test]
    fn sync_finds_preamble_after_noise_prefix() {
        let stream = frame_stream(b"sync me");
        let t = SymbolTiming::ook(600).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 100_000, &NoiseModel::quiet()).unwrap();
        // 1000 samples of ambient noise in front.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut samples: Vec<f64> = (0..1000).map(|_| 0.37 + 0.01 * rng.gen::<f64>()).collect();
        samples.extend(trace.samples_mw.iter());
        let shifted = SensorTrace { sample_rate_hz: 100_000, samples_mw: samples };

        let cfg = DecodeConfig::new(Scheme::Ook);
        let sync = sync_preamble(&shifted, &cfg).unwrap();
        let true_start_us = 1000.0 * 10.0;
        assert!(
            (sync.frame_start_us - true_start_us).abs() <= 600.0,
            "sync at {} us, truth {} us",
            sync.frame_start_us,
            true_start_us
        );
        assert!((sync.t_on_us - 600.0).abs() < 90.0, "t_on {}", sync.t_on_us);
        assert!((sync.payload_start_us - (true_start_us + 8.0 * 600.0)).abs() <= 1200.0);
    }

    #[test]
    fn sync_rejects_pure_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..200_000).map(|_| 0.4 + 0.02 * (rng.gen::<f64>() - 0.5)).collect();
        let trace = SensorTrace { sample_rate_hz: 100_000, samples_mw: samples };
        let cfg = DecodeConfig::new(Scheme::Ook);
        assert_eq!(sync_preamble(&trace, &cfg).unwrap_err(), DemodError::PreambleNotFound);
    }

    #[test]
    fn sync_rejects_flat_trace_as_no_signal() {
        let trace = SensorTrace { sample_rate_hz: 100_000, samples_mw: vec![0.4; 10_000] };
        let cfg = DecodeConfig::new(Scheme::Ook);
        assert_eq!(sync_preamble(&trace, &cfg).unwrap_err(), DemodError::NoSignal);
    }

    #[test]
    fn ook_sensor_round_trip_noiseless() {
        let data = b"round trip payload".to_vec();
        let stream = frame_stream(&data);
        let t = SymbolTiming::ook(600).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();

        let cfg = DecodeConfig::new(Scheme::Ook);
        let report = decode_sensor(&trace, &cfg).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(report.frames_failed, 0);
        assert_eq!(&report.payload[..data.len()], &data[..]);
        assert_eq!(report.bits.len(), stream.len());
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn ook_sensor_asymmetric_timing_round_trip() {
        let stream = frame_stream(b"asymmetric");
        let t = SymbolTiming::new(900, 500, 500, 900).unwrap();
        let sched = modulate_ook(&stream, &t, "111".parse().unwrap()).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();

        let report =
            decode_sensor(&trace, &DecodeConfig::new(Scheme::Ook).with_timing(t)).unwrap();
        assert_eq!(report.frames_ok, 1);
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn two_back_to_back_frames_are_both_located() {
        let data = vec![0x5A; 40];
        let stream = frame_stream(&data);
        let t = SymbolTiming::ook(600).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();

        let report = decode_sensor(&trace, &DecodeConfig::new(Scheme::Ook)).unwrap();
        assert_eq!(report.frames_ok, 2, "kv:\n{}", report.to_kv_block());
        assert_eq!(&report.payload[..40], &data[..]);
    }

    #[test]
    fn truncated_trace_fails_last_frame_only() {
        let data = vec![0xC3; 40];
        let stream = frame_stream(&data);
        let t = SymbolTiming::ook(600).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let mut trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();
        trace.samples_mw.truncate(trace.samples_mw.len() * 3 / 4);

        let report = decode_sensor(&trace, &DecodeConfig::new(Scheme::Ook)).unwrap();
        assert_eq!(report.frames_ok, 1);
        assert_eq!(report.frames_failed, 1);
        assert!(matches!(
            report.frames[1].error,
            Some(FrameError::BadLength { .. }) | Some(FrameError::CrcMismatch { .. })
        ));
    }

    #[test]
    fn bfsk_sensor_round_trip_blind() {
        let stream = frame_stream(b"duration keyed");
        let t = SymbolTiming::new(800, 400, 400, 800).unwrap();
        let sched = modulate_bfsk(&stream, &t).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();

        let report = decode_sensor(&trace, &DecodeConfig::new(Scheme::Bfsk)).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn amp_sensor_round_trip() {
        let data = b"amplitude ladder payload".to_vec();
        let mut stream = frame_stream(&data);
        stream.pad_to_multiple_of(2);
        let t = SymbolTiming { t_on_us: 586, t_off_us: 586, t_d_us: 0, t_all_us: 586 };
        let sched = modulate_ask_amplitude(&stream, &t);
        let trace = simulate_sensor(&sched, &dell(), 500_000, &NoiseModel::quiet()).unwrap();

        let cfg = DecodeConfig::new(Scheme::AskAmplitude).with_timing(t);
        let report = decode_sensor(&trace, &cfg).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
        let cuts = report.level_cuts.unwrap();
        assert!(cuts[0] > 0.37 && cuts[2] < 0.52, "cuts {cuts:?}");
    }

    #[test]
    fn ask3_sensor_is_rejected() {
        let trace = SensorTrace { sample_rate_hz: 1000, samples_mw: vec![0.1, 0.9] };
        let err = decode_sensor(&trace, &DecodeConfig::new(Scheme::Ask3)).unwrap_err();
        assert!(matches!(err, DemodError::UnsupportedScheme { scheme: Scheme::Ask3, .. }));
    }

    #[test]
    fn amp_without_timing_is_an_error() {
        let trace = SensorTrace { sample_rate_hz: 1000, samples_mw: vec![0.1, 0.9] };
        let err = decode_sensor(&trace, &DecodeConfig::new(Scheme::AskAmplitude)).unwrap_err();
        assert_eq!(err, DemodError::TimingRequired { scheme: Scheme::AskAmplitude });
    }

    #[test]
    fn level_count_is_validated() {
        let trace = SensorTrace { sample_rate_hz: 1000, samples_mw: vec![0.1, 0.9] };
        let mut cfg = DecodeConfig::new(Scheme::Ook);
        cfg.levels = 4;
        assert!(matches!(
            decode_sensor(&trace, &cfg).unwrap_err(),
            DemodError::BadLevelCount { .. }
        ));
    }

    #[test]
    fn ook_camera_round_trip_at_two_frames_per_bit() {
        let stream = frame_stream(b"camera path");
        // 30 fps, 2 frames per bit.
        let t = SymbolTiming::ook(66_667).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let trace = simulate_camera(&sched, 30, 0.9, &NoiseModel::quiet()).unwrap();

        let report = decode_camera(&trace, &DecodeConfig::new(Scheme::Ook).with_timing(t)).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn ask3_camera_round_trip() {
        let data = b"three leds three bits".to_vec();
        let mut stream = frame_stream(&data);
        stream.pad_to_multiple_of(3);
        let t = SymbolTiming { t_on_us: 66_667, t_off_us: 66_667, t_d_us: 0, t_all_us: 66_667 };
        let sched = modulate_ask3(&stream, &t);
        let trace = simulate_camera(&sched, 30, 0.9, &NoiseModel::quiet()).unwrap();

        let cfg = DecodeConfig::new(Scheme::Ask3).with_timing(t);
        let report = decode_camera(&trace, &cfg).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
        assert_eq!(&report.payload[..data.len()], &data[..]);
    }

    #[test]
    fn amp_camera_round_trip() {
        let mut stream = frame_stream(b"counting leds");
        stream.pad_to_multiple_of(2);
        let t = SymbolTiming { t_on_us: 66_667, t_off_us: 66_667, t_d_us: 0, t_all_us: 66_667 };
        let sched = modulate_ask_amplitude(&stream, &t);
        let trace = simulate_camera(&sched, 30, 0.9, &NoiseModel::quiet()).unwrap();

        let cfg = DecodeConfig::new(Scheme::AskAmplitude).with_timing(t);
        let report = decode_camera(&trace, &cfg).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn bfsk_camera_round_trip() {
        let stream = frame_stream(b"fsk on frames");
        let t = SymbolTiming::new(800, 400, 400, 800).unwrap();
        let sched = modulate_bfsk(&stream, &t).unwrap();
        // 10000 fps: 4 vs 8 frames per pulse.
        let trace = simulate_camera(&sched, 10_000, 0.9, &NoiseModel::quiet()).unwrap();

        let report = decode_camera(&trace, &DecodeConfig::new(Scheme::Bfsk).with_timing(t)).unwrap();
        assert_eq!(report.frames_ok, 1, "kv:\n{}", report.to_kv_block());
        assert_eq!(ber(&stream, &report.bits), 0.0);
    }

    #[test]
    fn decode_is_scale_invariant() {
        let stream = frame_stream(b"scale free");
        let t = SymbolTiming::ook(600).unwrap();
        let sched = modulate_ook(&stream, &t, "100".parse().unwrap()).unwrap();
        let trace = simulate_sensor(&sched, &dell(), 100_000, &NoiseModel::new(0.004, 5)).unwrap();
        let base = decode_sensor(&trace, &DecodeConfig::new(Scheme::Ook)).unwrap();
        for scale in [0.01, 3.0, 1000.0] {
            let scaled = SensorTrace {
                sample_rate_hz: trace.sample_rate_hz,
                samples_mw: trace.samples_mw.iter().map(|v| v * scale).collect(),
            };
            let report = decode_sensor(&scaled, &DecodeConfig::new(Scheme::Ook)).unwrap();
            assert_eq!(report.bits, base.bits, "bits changed at scale {scale}");
        }
    }

    #[test]
    fn ber_counts_length_mismatch_as_errors() {
        let a = bits("10110");
        let b = bits("10010");
        assert!((ber(&a, &b) - 0.2).abs() < 1e-12);
        let short = bits("101");
        assert!((ber(&a, &short) - 0.4).abs() < 1e-12, "1 flip + 2 missing over 5");
        assert_eq!(ber(&bits(""), &bits("")), 0.0);
        assert_eq!(ber(&a, &a), 0.0);
    }
}

#[cfg(test)]
mod blind_timing_tests {
    use super::*;
    use crate::channel::{simulate_sensor, NoiseModel};
    use crate::framing::{build_frames, serialize_frames};
    use crate::modulation::modulate;
    use crate::profiles::builtin_profile;
    use crate::{LedState, SymbolTiming};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A frame's zero padding spends ~128 symbols dark with no edges to
    /// re-anchor on; decoding it blind must not slip even with sample noise
    /// jittering every measured edge.
    #[test]
    fn blind_ook_survives_long_constant_spans() {
        let profile = builtin_profile("dell-kb212-b").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut payload = vec![0u8; 16];
        rng.fill(&mut payload[..]);
        let stream = serialize_frames(&build_frames(&payload).unwrap());
        let timing = SymbolTiming::ook(400).unwrap();
        let mask = LedState::from_bitfield(0b100).unwrap();
        let sigma = 0.077 * profile.per_led_mw;
        let sched = modulate(Scheme::Ook, &stream, &timing, mask).unwrap();
        for seed in 0..20 {
            let trace =
                simulate_sensor(&sched, &profile, 50_000, &NoiseModel::new(sigma, seed)).unwrap();
            let report = decode_sensor(&trace, &DecodeConfig::new(Scheme::Ook)).unwrap();
            assert_eq!(report.bits, stream, "seed {seed}: blind decode slipped");
            assert!(
                (report.t_on_us - 400.0).abs() < 2.0 && (report.t_off_us - 400.0).abs() < 2.0,
                "seed {seed}: lattice period off: ({}, {})",
                report.t_on_us,
                report.t_off_us
            );
        }
    }
}
