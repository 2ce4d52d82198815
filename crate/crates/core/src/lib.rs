//! Optical covert channel over keyboard status LEDs, end to end and fully
//! offline.
//!
//! A compromised host can flash the Num/Caps/Scroll lock LEDs of a USB
//! keyboard fast enough that a photodiode or camera across the room can read
//! data out of an air-gapped machine. This crate models that whole link as
//! pure computation — no USB device is ever touched:
//!
//! * [`bits`] / [`framing`] — MSB-first bit streams, 280-bit frames
//!   (preamble, 256-bit payload, CRC-16).
//! * [`modulation`] — frames to timed LED schedules: on/off keying,
//!   duration keying, LED-position keying, lit-count amplitude keying.
//! * [`hid`] — schedules to the 9-byte SetReport control packets a host
//!   would send; built and parsed, never transmitted.
//! * [`profiles`] — measured per-keyboard limits: switching speed, optical
//!   power ladder, calibrated noise levels.
//! * [`channel`] — radiometric simulation producing photodiode sample
//!   traces and camera frame traces, plus an LED-update rate-limit model of
//!   the obvious countermeasure.
//! * [`optics`] — Lambertian link budget: received power, detection range,
//!   camera resolution limits.
//! * [`demod`] — traces back to bits and frames, with bit-error-rate
//!   accounting.
//! * [`files`] — plain-text trace/schedule/profile formats so every stage
//!   can be driven from the command line.

pub mod bits;
pub mod channel;
pub mod demod;
pub mod files;
pub mod framing;
pub mod hid;
pub mod modulation;
pub mod optics;
pub mod profiles;

pub use bits::BitString;
pub use channel::{CameraTrace, NoiseModel, SensorTrace};
pub use demod::{DecodeConfig, DecodeReport};
pub use framing::Frame;
pub use modulation::{LedState, LedSchedule, Scheme, SymbolTiming};
pub use profiles::KeyboardProfile;
