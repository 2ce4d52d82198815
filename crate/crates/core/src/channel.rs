//! Radiometric channel simulation: renders an LED schedule into what a
//! receiver actually records.
//!
//! Two receiver models:
//!
//! * **Sensor** ([`simulate_sensor`]): a lensed photodiode sampling total
//!   received optical power. The three LEDs sum; per-LED identity is lost.
//!   The LED drive is low-pass filtered with a first-order response fitted to
//!   the profile's 10-90% rise time, then Gaussian sample noise is added.
//! * **Camera** ([`simulate_camera`]): per-frame, per-LED intensities on a
//!   0-255 scale, each frame integrating the LED's on-fraction over the
//!   exposure window. LEDs stay separate; this is what makes position-keyed
//!   modulation decodable.
//!
//! Both are deterministic for a fixed [`NoiseModel`] seed.

use crate::modulation::{LedSchedule, LedState, Segment};
use crate::profiles::KeyboardProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("cannot simulate an empty schedule")]
    EmptySchedule,
    #[error("sample rate {got_hz} Hz violates Nyquist for {min_switch_us} us switching (need >= {required_hz} Hz)")]
    NyquistViolation { got_hz: u32, required_hz: u32, min_switch_us: u64 },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("frame rate must be positive")]
    ZeroFps,
    #[error("exposure fraction must be in (0, 1], got {0}")]
    BadExposure(f64),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    BadSigma(f64),
}

/// Additive white Gaussian sample noise, in the receiving trace's units
/// (milliwatts for sensor traces, 0-255 intensity counts for camera traces).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }

    /// No noise at all; seed is irrelevant.
    pub fn quiet() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

impl Default for NoiseModel {
    /// sigma 0.01, seed 0.
    fn default() -> Self {
        Self { sigma: 0.01, seed: 0 }
    }
}

/// Photodiode recording: total received optical power over time.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub sample_rate_hz: u32,
    pub samples_mw: Vec<f64>,
}

impl SensorTrace {
    pub fn len(&self) -> usize {
        self.samples_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_mw.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_mw.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Microseconds per sample.
    pub fn dt_us(&self) -> f64 {
        1e6 / f64::from(self.sample_rate_hz)
    }
}

/// Camera recording: per-frame intensity of each LED, 0-255.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrace {
    pub fps: u32,
    pub frames: Vec<[f64; 3]>,
}

impl CameraTrace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / f64::from(self.fps)
    }
}

/// Segments of `schedule` shorter than the profile's minimum switching time.
///
/// The simulator renders these faithfully (the rise filter smears them), but
/// the real keyboard controller would not honor them; callers should surface
/// a warning when this is nonzero.
pub fn undersized_segments(schedule: &LedSchedule, profile: &KeyboardProfile) -> usize {
    schedule
        .segments()
        .iter()
        .filter(|s| s.duration_us < profile.min_switch_us)
        .count()
}

/// Renders `schedule` as a photodiode power trace.
///
/// The ideal level at time t is `p_off + lit_count * per_led` milliwatts,
/// filtered by a first-order low-pass with time constant `rise_us / 2.2`
/// (the 10-90% rise time of a first-order system is 2.2 time constants),
/// starting from the dark level. Gaussian noise is then added per sample.
///
/// Fails if `sample_rate_hz` cannot place two samples inside the profile's
/// minimum switching time.
pub fn simulate_sensor(
    schedule: &LedSchedule,
    profile: &KeyboardProfile,
    sample_rate_hz: u32,
    noise: &NoiseModel,
) -> Result<SensorTrace, ChannelError> {
    if schedule.is_empty() {
        return Err(ChannelError::EmptySchedule);
    }
    if sample_rate_hz == 0 {
        return Err(ChannelError::ZeroSampleRate);
    }
    let required_hz = (2e6 / profile.min_switch_us as f64).ceil() as u32;
    if sample_rate_hz < required_hz {
        return Err(ChannelError::NyquistViolation {
            got_hz: sample_rate_hz,
            required_hz,
            min_switch_us: profile.min_switch_us,
        });
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(ChannelError::BadSigma(noise.sigma));
    }

    let dt_us = 1e6 / f64::from(sample_rate_hz);
    let total_us = schedule.total_duration_us();
    let n_samples = (total_us as f64 / dt_us).ceil() as usize;
    let tau_us = profile.rise_us as f64 / 2.2;
    // alpha = 1 - exp(-dt/tau); rise_us == 0 means an instantaneous drive.
    let alpha = if profile.rise_us == 0 { 1.0 } else { 1.0 - (-dt_us / tau_us).exp() };

    let mut cursor = SegmentCursor::new(schedule.segments());
    let mut level = profile.p_off_mw;
    let mut samples = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let t_us = n as f64 * dt_us;
        let lit = cursor.state_at(t_us).lit_count();
        let ideal = profile.level_mw(lit);
        level += alpha * (ideal - level);
        samples.push(level);
    }

    if noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let gauss = Normal::new(0.0, noise.sigma).expect("validated sigma");
        for s in &mut samples {
            *s += gauss.sample(&mut rng);
        }
    }

    Ok(SensorTrace { sample_rate_hz, samples_mw: samples })
}

/// Renders `schedule` as a camera trace.
///
/// Frame n exposes over `[n/fps, (n + exposure_fraction)/fps)`. Each LED's
/// intensity is its on-fraction of the exposure window scaled to 255, plus
/// Gaussian noise, clamped to `[0, 255]`. Symbols shorter than two frame
/// periods are rendered but not reliably decodable; see
/// [`crate::modulation::theoretical_bitrate_camera`].
pub fn simulate_camera(
    schedule: &LedSchedule,
    fps: u32,
    exposure_fraction: f64,
    noise: &NoiseModel,
) -> Result<CameraTrace, ChannelError> {
    if schedule.is_empty() {
        return Err(ChannelError::EmptySchedule);
    }
    if fps == 0 {
        return Err(ChannelError::ZeroFps);
    }
    if !(exposure_fraction > 0.0 && exposure_fraction <= 1.0) {
        return Err(ChannelError::BadExposure(exposure_fraction));
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(ChannelError::BadSigma(noise.sigma));
    }

    let frame_us = 1e6 / f64::from(fps);
    let expose_us = exposure_fraction * frame_us;
    let total_us = schedule.total_duration_us() as f64;
    let n_frames = (total_us / frame_us).ceil() as usize;

    let segments = schedule.segments();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let gauss = if noise.sigma > 0.0 {
        Some(Normal::new(0.0, noise.sigma).expect("validated sigma"))
    } else {
        None
    };

    let mut frames = Vec::with_capacity(n_frames);
    let mut first_overlap = 0usize;
    for f in 0..n_frames {
        let win_start = f as f64 * frame_us;
        let win_end = win_start + expose_us;
        // Advance past segments that end before this window; windows move
        // forward monotonically, so this stays O(total segments) overall.
        let mut seg_start = segment_start_us(segments, first_overlap);
        while first_overlap < segments.len()
            && seg_start + segments[first_overlap].duration_us as f64 <= win_start
        {
            seg_start += segments[first_overlap].duration_us as f64;
            first_overlap += 1;
        }

        let mut on_us = [0.0f64; 3];
        let mut idx = first_overlap;
        let mut start = seg_start;
        while idx < segments.len() && start < win_end {
            let seg = &segments[idx];
            let end = start + seg.duration_us as f64;
            let overlap = end.min(win_end) - start.max(win_start);
            if overlap > 0.0 {
                for (led, acc) in on_us.iter_mut().enumerate() {
                    if seg.state.led(led) {
                        *acc += overlap;
                    }
                }
            }
            start = end;
            idx += 1;
        }

        let mut frame = [0.0f64; 3];
        for led in 0..3 {
            let mut v = 255.0 * on_us[led] / expose_us;
            if let Some(g) = &gauss {
                v += g.sample(&mut rng);
            }
            frame[led] = v.clamp(0.0, 255.0);
        }
        frames.push(frame);
    }

    Ok(CameraTrace { fps, frames })
}

fn segment_start_us(segments: &[Segment], idx: usize) -> f64 {
    segments[..idx].iter().map(|s| s.duration_us as f64).sum()
}

/// Models a protective LED driver that ignores state changes arriving within
/// `lock_ms` of the last change it accepted.
///
/// The first state of the schedule is always accepted (and starts the lock).
/// A dropped change simply never happens: the LEDs hold the last accepted
/// state until the next change that arrives after the lock expires. Total
/// duration is preserved. Applying the same lock twice is a no-op, since all
/// surviving changes are already at least `lock_ms` apart.
pub fn apply_led_rate_limit(schedule: &LedSchedule, lock_ms: u64) -> LedSchedule {
    if schedule.is_empty() {
        return schedule.clone();
    }
    let lock_us = lock_ms * 1000;
    let total_us = schedule.total_duration_us();
    let changes = schedule.state_changes();

    let mut accepted: Vec<(u64, LedState)> = vec![changes[0]];
    let mut last_accept_t = changes[0].0;
    for &(t, state) in &changes[1..] {
        let current = accepted.last().expect("nonempty").1;
        if state == current {
            continue;
        }
        if t - last_accept_t >= lock_us {
            accepted.push((t, state));
            last_accept_t = t;
        }
    }

    let mut raw = Vec::with_capacity(accepted.len());
    for (i, &(t, state)) in accepted.iter().enumerate() {
        let end = accepted.get(i + 1).map_or(total_us, |next| next.0);
        raw.push(Segment { state, duration_us: end - t });
    }
    let n = raw.len();
    LedSchedule::from_raw_segments(raw, n)
}

/// State changes per second of schedule time, not counting the initial state.
pub fn state_change_rate_per_sec(schedule: &LedSchedule) -> f64 {
    let transitions = schedule.segments().len().saturating_sub(1);
    let dur_s = schedule.total_duration_us() as f64 / 1e6;
    if dur_s == 0.0 {
        0.0
    } else {
        transitions as f64 / dur_s
    }
}

/// Walks a segment list with monotonically non-decreasing query times.
struct SegmentCursor<'a> {
    segments: &'a [Segment],
    idx: usize,
    seg_start_us: f64,
}

impl<'a> SegmentCursor<'a> {
    fn new(segments: &'a [Segment]) -> Self {
        Self { segments, idx: 0, seg_start_us: 0.0 }
    }

    /// State at `t_us`; the final state persists past the schedule end.
    fn state_at(&mut self, t_us: f64) -> LedState {
        while self.idx < self.segments.len() {
            let end = self.seg_start_us + self.segments[self.idx].duration_us as f64;
            if t_us < end {
                return self.segments[self.idx].state;
            }
            self.seg_start_us = end;
            self.idx += 1;
        }
        self.segments.last().map_or(LedState::OFF, |s| s.state)
    }
}
