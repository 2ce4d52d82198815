//! Built-in keyboard characterizations.
//!
//! Each profile captures bench measurements of one keyboard model: how fast
//! its controller can switch the status LEDs, the received optical power with
//! LEDs on and off at the characterization geometry, and reference
//! bit-error-rate rows used to calibrate the channel simulator's noise.
//!
//! `tx_power_mw` is an estimate, not a measurement: it is the LED power that
//! reproduces the measured on/off received-power delta when inverted through
//! the far-field link budget at the assumed bench geometry (lens radius
//! 2.54 cm, head-on at 0.12 m, optical loss 0.8). The derivation ships in the
//! profile file comments written by the profile writer.

use crate::modulation::{Scheme, SymbolTiming};

/// One simulator noise calibration point: at `bitrate_bps`, Gaussian sample
/// noise of `sigma_mw` reproduces `reference_ber_pct` percent bit errors.
///
/// The reference BERs are measured figures for the real hardware; `sigma_mw`
/// is fitted once against this crate's simulator so that re-running the
/// simulation reproduces the measured figure. It is a calibration, not a
/// prediction. The fit is done by `examples/calibrate.rs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub bitrate_bps: f64,
    pub reference_ber_pct: f64,
    pub sigma_mw: f64,
}

/// Electro-optical characterization of one keyboard model.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyboardProfile {
    /// Profile id, kebab-case.
    pub name: String,
    /// Shortest LED-on (or off) hold the controller honors, microseconds.
    pub min_switch_us: u64,
    /// Shortest full single-LED blink period (on + off), microseconds.
    pub min_blink_single_us: u64,
    /// Shortest full blink period when driving all three LEDs, microseconds.
    pub min_blink_multi_us: u64,
    /// Shortest amplitude-level hold the controller honors, microseconds.
    pub ask_level_us: u64,
    /// Received power with one LED on at the bench geometry, milliwatts.
    pub p_on_mw: f64,
    /// Received power with LEDs off (ambient floor), milliwatts.
    pub p_off_mw: f64,
    /// Received-power step per additional lit LED, milliwatts.
    pub per_led_mw: f64,
    /// 10-90% optical rise time of the LED drive, microseconds.
    pub rise_us: u64,
    /// Estimated LED optical power (see module docs), milliwatts.
    pub tx_power_mw: f64,
    /// Vendor-measured amplitude level rate, if one was reported. The Dell
    /// figure (1730/s) is inconsistent with its own 700 us level duration
    /// (1e6/700 = 1429/s); rate math in this crate always uses the duration.
    pub reported_ask_levels_per_sec: Option<f64>,
    /// On/off-keying noise calibration.
    pub ook_cal: CalibrationRow,
    /// Amplitude-keying noise calibration.
    pub ask_cal: CalibrationRow,
}

impl KeyboardProfile {
    /// Received power with `count` LEDs lit, milliwatts.
    pub fn level_mw(&self, count: u8) -> f64 {
        self.p_off_mw + f64::from(count) * self.per_led_mw
    }

    /// Conservative single-LED on/off-keying rate at the minimum blink period.
    pub fn ook_min_bitrate_single(&self) -> f64 {
        crate::modulation::ook_bitrate_from_blink_period_us(self.min_blink_single_us)
    }

    /// Conservative three-LED on/off-keying rate at the minimum blink period.
    pub fn ook_min_bitrate_multi(&self) -> f64 {
        crate::modulation::ook_bitrate_from_blink_period_us(self.min_blink_multi_us)
    }

    /// Amplitude level rate at the fastest level hold this keyboard honors.
    pub fn ask_max_levels_per_sec(&self) -> f64 {
        crate::modulation::ask_levels_per_sec(self.ask_level_us)
    }

    /// Symmetric on/off-keying timing for a target bit rate (one bit per
    /// symbol duration).
    pub fn ook_timing_for_bitrate(&self, bitrate_bps: f64) -> SymbolTiming {
        let t = (1e6 / bitrate_bps).round().max(1.0) as u64;
        SymbolTiming::new(t, t, t, t).expect("positive duration")
    }

    /// Gap-free amplitude-keying timing for a target bit rate (two bits per
    /// level).
    pub fn ask_timing_for_bitrate(&self, bitrate_bps: f64) -> SymbolTiming {
        let t_all = (2e6 / bitrate_bps).round().max(1.0) as u64;
        SymbolTiming { t_on_us: t_all, t_off_us: t_all, t_d_us: 0, t_all_us: t_all }
    }

    /// Default symbol timing for a scheme, derived from this keyboard's
    /// switching limits.
    pub fn default_timing(&self, scheme: Scheme) -> SymbolTiming {
        let m = self.min_switch_us;
        match scheme {
            Scheme::Ook => SymbolTiming::new(m, m, m, m),
            Scheme::Bfsk => SymbolTiming::new(2 * m, m, m, m),
            Scheme::Ask3 => SymbolTiming::new(m, m, m, self.ask_level_us.max(m)),
            Scheme::AskAmplitude => {
                let t_all = self.ask_level_us.max(m);
                return SymbolTiming { t_on_us: t_all, t_off_us: t_all, t_d_us: 0, t_all_us: t_all };
            }
        }
        .expect("profile durations are positive")
    }
}

/// The four built-in profiles.
pub fn builtin_profiles() -> Vec<KeyboardProfile> {
    vec![
        KeyboardProfile {
            name: "dell-kb212-b".into(),
            min_switch_us: 600,
            min_blink_single_us: 800,
            min_blink_multi_us: 280,
            ask_level_us: 700,
            p_on_mw: 0.42,
            p_off_mw: 0.37,
            per_led_mw: 0.05,
            rise_us: 50,
            tx_power_mw: 1.395,
            reported_ask_levels_per_sec: Some(1730.0),
            ook_cal: CalibrationRow { bitrate_bps: 1666.0, reference_ber_pct: 3.00, sigma_mw: 0.164526 },
            ask_cal: CalibrationRow { bitrate_bps: 3411.0, reference_ber_pct: 2.40, sigma_mw: 0.152591 },
        },
        KeyboardProfile {
            name: "lenovo-sk-8825".into(),
            min_switch_us: 440,
            min_blink_single_us: 880,
            min_blink_multi_us: 500,
            ask_level_us: 500,
            p_on_mw: 1.8,
            p_off_mw: 1.6,
            per_led_mw: 0.2,
            rise_us: 50,
            tx_power_mw: 5.580,
            reported_ask_levels_per_sec: None,
            ook_cal: CalibrationRow { bitrate_bps: 2230.0, reference_ber_pct: 2.95, sigma_mw: 0.557252 },
            ask_cal: CalibrationRow { bitrate_bps: 4640.0, reference_ber_pct: 6.70, sigma_mw: 0.680150 },
        },
        KeyboardProfile {
            name: "logitech-k120".into(),
            min_switch_us: 400,
            min_blink_single_us: 800,
            min_blink_multi_us: 440,
            ask_level_us: 500,
            p_on_mw: 0.42,
            p_off_mw: 0.33,
            per_led_mw: 0.09,
            rise_us: 50,
            tx_power_mw: 2.511,
            reported_ask_levels_per_sec: None,
            ook_cal: CalibrationRow { bitrate_bps: 2170.0, reference_ber_pct: 3.50, sigma_mw: 0.265635 },
            ask_cal: CalibrationRow { bitrate_bps: 4296.0, reference_ber_pct: 1.20, sigma_mw: 0.210693 },
        },
        KeyboardProfile {
            name: "silverline-mm-kb2011".into(),
            min_switch_us: 400,
            min_blink_single_us: 800,
            min_blink_multi_us: 400,
            ask_level_us: 350,
            p_on_mw: 1.35,
            p_off_mw: 1.15,
            per_led_mw: 0.2,
            rise_us: 50,
            tx_power_mw: 5.580,
            reported_ask_levels_per_sec: None,
            ook_cal: CalibrationRow { bitrate_bps: 2697.0, reference_ber_pct: 8.00, sigma_mw: 0.685203 },
            ask_cal: CalibrationRow { bitrate_bps: 5155.0, reference_ber_pct: 3.10, sigma_mw: 0.529903 },
        },
    ]
}

/// Looks up a built-in profile by name.
pub fn builtin_profile(name: &str) -> Option<KeyboardProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}
