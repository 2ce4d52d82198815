//! Re-derives the calibration noise levels stored in the built-in keyboard
//! profiles.
//!
//! Each profile records two calibration rows (on/off keying and amplitude
//! keying), each pairing a bitrate with a reference bit error rate and the
//! additive-noise sigma at which this toolkit's simulator-plus-demodulator
//! reproduces that BER. The sigmas are frozen constants in the profile
//! table; this program is how they were obtained and how to refresh them if
//! the channel or demodulator math ever changes: for every row it bisects
//! sigma until the measured BER matches the reference.
//!
//! The measurement harness (seeds included) is mirrored by the acceptance
//! suite, which re-measures at the frozen sigma and requires agreement with
//! the reference BER within 1.5 percentage points.
//!
//! Run with: `cargo run --release -p ledchan --example calibrate`

use ledchan::demod::measure_ber;
use ledchan::profiles::{builtin_profiles, CalibrationRow};
use ledchan::Scheme;

const SAMPLE_RATE_HZ: u32 = 500_000;
const FRAMES: usize = 20;
const INSTANCES: usize = 6;
/// Base seed for row index 0; row `i` uses `CAL_SEED0 + i`. Keep in sync
/// with the acceptance suite.
const CAL_SEED0: u64 = 101;

fn main() {
    println!("profile,scheme,bitrate_bps,target_ber_pct,sigma_mw,check_ber_pct");
    let mut idx = 0u64;
    for profile in builtin_profiles() {
        let rows: [(Scheme, &CalibrationRow); 2] =
            [(Scheme::Ook, &profile.ook_cal), (Scheme::AskAmplitude, &profile.ask_cal)];
        for (scheme, row) in rows {
            let timing = match scheme {
                Scheme::Ook => profile.ook_timing_for_bitrate(row.bitrate_bps),
                _ => profile.ask_timing_for_bitrate(row.bitrate_bps),
            };
            let seed = CAL_SEED0 + idx;
            let target = row.reference_ber_pct / 100.0;
            let ber_at = |sigma: f64| {
                measure_ber(
                    &profile,
                    scheme,
                    &timing,
                    sigma,
                    SAMPLE_RATE_HZ,
                    FRAMES,
                    INSTANCES,
                    seed,
                )
                .expect("measurable operating point")
            };

            let mut lo = 0.0;
            let mut hi = 0.05;
            while ber_at(hi) < target {
                lo = hi;
                hi *= 2.0;
                assert!(hi < 1e3, "no sigma reaches {target} for {}", profile.name);
            }
            for _ in 0..28 {
                let mid = 0.5 * (lo + hi);
                if ber_at(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let sigma = 0.5 * (lo + hi);
            println!(
                "{},{},{:.0},{:.2},{:.6},{:.3}",
                profile.name,
                scheme.name(),
                row.bitrate_bps,
                row.reference_ber_pct,
                sigma,
                ber_at(sigma) * 100.0
            );
            idx += 1;
        }
    }
}
