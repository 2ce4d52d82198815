//! `ledchan`: drive the keyboard-LED optical channel from the shell.
//!
//! Everything is file-to-file: `encode` turns payload bytes into an LED
//! schedule (and optionally the HID SetReport packets that would realize
//! it), `simulate` runs a schedule through the radiometric channel model and
//! reports the measured bit error rate, `decode` recovers bytes from a
//! sensor or camera trace, `linkbudget` evaluates the optical power math,
//! and `hid-packet` prints a single control transfer.
//!
//! Exit codes: 0 on success, 2 for configuration and usage problems, 3 for
//! data problems (unreadable input, malformed traces, failed checksums).

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ledchan::channel::{
    apply_led_rate_limit, simulate_camera, simulate_sensor, state_change_rate_per_sec,
    undersized_segments, NoiseModel,
};
use ledchan::demod::{decode_camera, decode_sensor, DecodeConfig, DemodError};
use ledchan::files::{self, AnyTrace};
use ledchan::framing::{build_frames, serialize_frames};
use ledchan::hid::{schedule_to_reports, serialize_packet};
use ledchan::modulation::modulate;
use ledchan::optics::{
    diffraction_limit, effective_distance, lambertian_intensity, max_one_pixel_distance,
    min_tx_power_for_distance, pd_voltage, received_power, solid_angle, CameraParams, OpticalLink,
    PhotodiodeParams,
};
use ledchan::profiles::{builtin_profile, builtin_profiles, KeyboardProfile};
use ledchan::{BitString, LedSchedule, LedState, Scheme, SymbolTiming};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ledchan", version, about = "Keyboard-LED optical channel toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame payload bytes and modulate them into an LED schedule
    Encode(EncodeArgs),
    /// Modulate, run the channel simulator, decode, and report the bit error rate
    Simulate(SimulateArgs),
    /// Recover payload bytes from a trace file
    Decode(DecodeArgs),
    /// Evaluate the optical link budget
    Linkbudget(LinkbudgetArgs),
    /// Print one HID SetReport packet for an LED state
    HidPacket(HidPacketArgs),
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum SchemeArg {
    Ook,
    Bfsk,
    Ask3,
    AskAmp,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Ook => Scheme::Ook,
            SchemeArg::Bfsk => Scheme::Bfsk,
            SchemeArg::Ask3 => Scheme::Ask3,
            SchemeArg::AskAmp => Scheme::AskAmplitude,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ReceiverArg {
    Sensor,
    Camera,
}

/// Symbol timing overrides. Anything not given falls back to the profile's
/// defaults for the scheme.
#[derive(Args, Clone, Copy)]
struct TimingArgs {
    /// Duration of a 1 symbol, microseconds
    #[arg(long)]
    ton_us: Option<u64>,
    /// Duration of a 0 symbol, microseconds
    #[arg(long)]
    toff_us: Option<u64>,
    /// Inter-symbol dark gap, microseconds
    #[arg(long)]
    td_us: Option<u64>,
    /// Hold time of a multi-LED symbol, microseconds
    #[arg(long)]
    tall_us: Option<u64>,
}

impl TimingArgs {
    fn any(&self) -> bool {
        self.ton_us.is_some()
            || self.toff_us.is_some()
            || self.td_us.is_some()
            || self.tall_us.is_some()
    }

    fn resolve(&self, base: SymbolTiming) -> Result<SymbolTiming, Failure> {
        SymbolTiming::new(
            self.ton_us.unwrap_or(base.t_on_us),
            self.toff_us.unwrap_or(base.t_off_us),
            self.td_us.unwrap_or(base.t_d_us),
            self.tall_us.unwrap_or(base.t_all_us),
        )
        .map_err(|e| Failure::Config(e.into()))
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Keyboard profile providing timing defaults and switching limits
    #[arg(long, default_value = "dell-kb212-b")]
    profile: String,
    #[arg(long, value_enum, default_value_t = SchemeArg::Ook)]
    scheme: SchemeArg,
    #[command(flatten)]
    timing: TimingArgs,
    /// LEDs driven by on/off keying, as Num/Caps/Scroll binary digits
    #[arg(long, default_value = "111")]
    mask: String,
    /// Payload bytes to send
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Schedule file to write
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
    /// Also write the HID SetReport packet stream here
    #[arg(long, value_name = "FILE")]
    hid_out: Option<PathBuf>,
    /// USB interface index for HID packets
    #[arg(long, default_value_t = 0)]
    interface: u16,
    /// Model a firmware LED-update lock of this many milliseconds
    #[arg(long)]
    lock_ms: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "dell-kb212-b")]
    profile: String,
    #[arg(long, value_enum, default_value_t = SchemeArg::Ook)]
    scheme: SchemeArg,
    #[command(flatten)]
    timing: TimingArgs,
    #[arg(long, default_value = "111")]
    mask: String,
    /// Payload bytes to send
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Trace file to write
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReceiverArg::Sensor)]
    receiver: ReceiverArg,
    /// Photodiode sampling rate, hertz
    #[arg(long, default_value_t = 500_000)]
    sample_rate: u32,
    /// Camera frame rate, frames per second
    #[arg(long, default_value_t = 30)]
    fps: u32,
    /// Camera exposure as a fraction of the frame period
    #[arg(long, default_value_t = 0.9)]
    exposure: f64,
    /// Additive noise level, in trace units
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model a firmware LED-update lock of this many milliseconds
    #[arg(long)]
    lock_ms: Option<u64>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Trace file (sensor or camera; detected from the header)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[command(flatten)]
    timing: TimingArgs,
    /// Take timing defaults from this profile instead of decoding blind
    #[arg(long)]
    profile: Option<String>,
    /// Recovered payload bytes go here
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    /// Trust that the trace starts exactly at the first symbol
    #[arg(long)]
    aligned: bool,
}

#[derive(Args)]
struct LinkbudgetArgs {
    /// name=value parameter file; command-line flags override it
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// LED optical power, watts
    #[arg(long)]
    tx_power_w: Option<f64>,
    /// Angle off the LED normal, radians
    #[arg(long)]
    theta_rad: Option<f64>,
    /// LED-to-receiver distance, meters
    #[arg(long)]
    distance_m: Option<f64>,
    /// Receiver lens radius, meters
    #[arg(long)]
    lens_radius_m: Option<f64>,
    /// Lumped optical loss, 0 to 1
    #[arg(long)]
    loss: Option<f64>,
    /// Receiver detection threshold, watts
    #[arg(long)]
    threshold_w: Option<f64>,
}

#[derive(Args)]
struct HidPacketArgs {
    /// LED state as Num/Caps/Scroll binary digits, e.g. 101
    #[arg(long)]
    state: String,
    /// USB interface index
    #[arg(long, default_value_t = 0)]
    interface: u16,
}

enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
}

fn config<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.into()))
}

fn data<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Data(e.into()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Linkbudget(a) => cmd_linkbudget(a),
        Command::HidPacket(a) => cmd_hid_packet(a),
    }
}

fn lookup_profile(name: &str) -> Result<KeyboardProfile, Failure> {
    builtin_profile(name).ok_or_else(|| {
        let names: Vec<String> =
            builtin_profiles().iter().map(|p| p.name.clone()).collect();
        Failure::Config(anyhow!(
            "unknown profile '{name}'; available: {}",
            names.join(", ")
        ))
    })
}

fn parse_mask(mask: &str) -> Result<LedState, Failure> {
    mask.parse::<LedState>().map_err(|_| {
        Failure::Config(anyhow!(
            "mask must be three binary digits (Num/Caps/Scroll), e.g. 100, got '{mask}'"
        ))
    })
}

/// Frames the payload and renders the schedule shared by encode/simulate.
fn build_schedule(
    input: &Path,
    profile: &KeyboardProfile,
    scheme: Scheme,
    timing: &TimingArgs,
    mask: &str,
    lock_ms: Option<u64>,
) -> Result<(BitString, SymbolTiming, LedSchedule), Failure> {
    let mask = parse_mask(mask)?;
    let timing = timing.resolve(profile.default_timing(scheme))?;
    let bytes = data(
        std::fs::read(input).with_context(|| format!("reading {}", input.display())),
    )?;
    let frames = data(build_frames(&bytes))?;
    let mut stream = serialize_frames(&frames);
    stream.pad_to_multiple_of(scheme.bits_per_symbol());
    let mut schedule = config(modulate(scheme, &stream, &timing, mask))?;
    if let Some(ms) = lock_ms {
        schedule = apply_led_rate_limit(&schedule, ms);
    }
    let undersized = undersized_segments(&schedule, profile);
    if undersized > 0 {
        eprintln!(
            "warning: {undersized} segment(s) shorter than the {} us switching floor of {}; \
             a real keyboard would slur them",
            profile.min_switch_us, profile.name
        );
    }
    Ok((stream, timing, schedule))
}

fn cmd_encode(a: EncodeArgs) -> Result<ExitCode, Failure> {
    let profile = lookup_profile(&a.profile)?;
    let scheme = Scheme::from(a.scheme);
    let (stream, _, schedule) =
        build_schedule(&a.input, &profile, scheme, &a.timing, &a.mask, a.lock_ms)?;

    data(
        std::fs::write(&a.output, files::write_schedule(&schedule))
            .with_context(|| format!("writing {}", a.output.display())),
    )?;

    if let Some(hid_path) = &a.hid_out {
        let mut lines = String::new();
        for (t_us, req) in schedule_to_reports(&schedule, a.interface) {
            let bytes = data(serialize_packet(&req))?;
            let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
            lines.push_str(&format!("{t_us} {}\n", hex.join(" ")));
        }
        data(
            std::fs::write(hid_path, lines)
                .with_context(|| format!("writing {}", hid_path.display())),
        )?;
    }

    println!("bits,{}", stream.len());
    println!("symbols,{}", schedule.symbol_count());
    println!("segments,{}", schedule.segments().len());
    println!("duration_us,{}", schedule.total_duration_us());
    println!("state_changes_per_sec,{:.3}", state_change_rate_per_sec(&schedule));
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: SimulateArgs) -> Result<ExitCode, Failure> {
    let profile = lookup_profile(&a.profile)?;
    let scheme = Scheme::from(a.scheme);
    let (sent, timing, schedule) =
        build_schedule(&a.input, &profile, scheme, &a.timing, &a.mask, a.lock_ms)?;
    let noise = NoiseModel::new(a.sigma, a.seed);
    let cfg = DecodeConfig::new(scheme).with_timing(timing).aligned();

    let ber = match a.receiver {
        ReceiverArg::Sensor => {
            let trace = config(simulate_sensor(&schedule, &profile, a.sample_rate, &noise))?;
            if let Some(out) = &a.output {
                data(
                    std::fs::write(out, files::write_sensor_trace(&trace))
                        .with_context(|| format!("writing {}", out.display())),
                )?;
            }
            match decode_sensor(&trace, &cfg) {
                Ok(mut report) => {
                    report.score_against(&sent);
                    report.ber.unwrap_or(f64::NAN)
                }
                Err(_) => f64::NAN,
            }
        }
        ReceiverArg::Camera => {
            let trace = config(simulate_camera(&schedule, a.fps, a.exposure, &noise))?;
            if let Some(out) = &a.output {
                data(
                    std::fs::write(out, files::write_camera_trace(&trace))
                        .with_context(|| format!("writing {}", out.display())),
                )?;
            }
            match decode_camera(&trace, &cfg) {
                Ok(mut report) => {
                    report.score_against(&sent);
                    report.ber.unwrap_or(f64::NAN)
                }
                Err(_) => f64::NAN,
            }
        }
    };

    let bitrate = sent.len() as f64 / (schedule.total_duration_us() as f64 / 1e6);
    println!("{},{},{bitrate:.3},{},{ber:.6}", profile.name, scheme.name(), a.sigma);
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(a: DecodeArgs) -> Result<ExitCode, Failure> {
    let scheme = Scheme::from(a.scheme);
    let timing = if a.timing.any() || a.profile.is_some() {
        let base = match &a.profile {
            Some(name) => lookup_profile(name)?.default_timing(scheme),
            // Generic fallbacks when only some flags are given.
            None => SymbolTiming { t_on_us: 600, t_off_us: 600, t_d_us: 400, t_all_us: 600 },
        };
        Some(a.timing.resolve(base)?)
    } else {
        None
    };

    let mut cfg = DecodeConfig::new(scheme);
    if let Some(t) = timing {
        cfg = cfg.with_timing(t);
    }
    if a.aligned {
        cfg = cfg.aligned();
    }

    let text = data(
        std::fs::read_to_string(&a.input)
            .with_context(|| format!("reading {}", a.input.display())),
    )?;
    let report = match data(files::read_any_trace(&text))? {
        AnyTrace::Sensor(trace) => decode_sensor(&trace, &cfg),
        AnyTrace::Camera(trace) => decode_camera(&trace, &cfg),
    };
    let report = report.map_err(|e| match e {
        DemodError::TimingRequired { .. }
        | DemodError::UnsupportedScheme { .. }
        | DemodError::BadLevelCount { .. } => Failure::Config(e.into()),
        other => Failure::Data(other.into()),
    })?;

    print!("{}", report.to_kv_block());
    if let Some(out) = &a.output {
        data(
            std::fs::write(out, &report.payload)
                .with_context(|| format!("writing {}", out.display())),
        )?;
    }

    if report.frames_ok > 0 && report.frames_failed == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "error: {} of {} frame(s) failed integrity checks",
            report.frames_failed,
            report.frames_ok + report.frames_failed
        );
        Ok(ExitCode::from(3))
    }
}

/// Parameter names accepted in `--params` files, with their defaults: a
/// bright keyboard LED watched head-on-ish from 50 m through a 2-inch lens.
const LINK_DEFAULTS: [(&str, f64); 13] = [
    ("tx_power_w", 5.58e-3),
    ("theta_rad", 0.4363323129985824), // 25 degrees
    ("phi_rad", 0.0),
    ("distance_m", 50.0),
    ("lens_radius_m", 0.0254),
    ("loss", 0.8),
    ("threshold_w", 1e-9),
    ("responsivity_a_per_w", 0.32),
    ("gain_v_per_a", 4.75e5),
    ("wavelength_m", 525e-9),
    ("aperture_m", 5e-3),
    ("focal_m", 4e-3),
    ("pixel_m", 1.4e-6),
];
const LINK_LED_SIZE_KEY: (&str, f64) = ("led_size_m", 2e-3);

fn cmd_linkbudget(a: LinkbudgetArgs) -> Result<ExitCode, Failure> {
    let mut params: BTreeMap<String, f64> = LINK_DEFAULTS
        .iter()
        .chain(std::iter::once(&LINK_LED_SIZE_KEY))
        .map(|(k, v)| (k.to_string(), *v))
        .collect();

    if let Some(path) = &a.params {
        let text = data(
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())),
        )?;
        for (key, value) in data(files::read_key_values(&text))? {
            if !params.contains_key(&key) {
                return Err(Failure::Config(anyhow!(
                    "unknown link parameter '{key}'; known: {}",
                    params.keys().cloned().collect::<Vec<_>>().join(", ")
                )));
            }
            params.insert(key, value);
        }
    }
    for (key, flag) in [
        ("tx_power_w", a.tx_power_w),
        ("theta_rad", a.theta_rad),
        ("distance_m", a.distance_m),
        ("lens_radius_m", a.lens_radius_m),
        ("loss", a.loss),
        ("threshold_w", a.threshold_w),
    ] {
        if let Some(v) = flag {
            params.insert(key.to_string(), v);
        }
    }
    let p = |k: &str| params[k];

    let link = config(OpticalLink::new(
        p("theta_rad"),
        p("phi_rad"),
        p("distance_m"),
        p("lens_radius_m"),
        p("loss"),
        p("tx_power_w"),
    ))?;
    let pd = PhotodiodeParams {
        responsivity_a_per_w: p("responsivity_a_per_w"),
        gain_v_per_a: p("gain_v_per_a"),
        min_detectable_w: p("threshold_w"),
    };
    let cam = config(CameraParams::new(
        p("wavelength_m"),
        p("distance_m"),
        p("aperture_m"),
        p("focal_m"),
        p("pixel_m"),
        p("led_size_m"),
    ))?;

    let intensity = config(lambertian_intensity(link.theta_rad))?;
    let omega = config(solid_angle(link.lens_radius_m, link.distance_m))?;
    let p_r = config(received_power(&link))?;
    let d_eff = config(effective_distance(&link, &pd))?;
    let p_min = config(min_tx_power_for_distance(
        link.distance_m,
        link.theta_rad,
        link.lens_radius_m,
        link.loss,
        pd.min_detectable_w,
    ))?;

    println!("radiant_intensity_rel,{intensity:.9}");
    println!("solid_angle_sr,{omega:.9e}");
    println!("received_power_w,{p_r:.9e}");
    println!("received_voltage_v,{:.9e}", pd_voltage(p_r, &pd));
    println!("detectable,{}", p_r >= pd.min_detectable_w);
    println!("effective_distance_m,{d_eff:.3}");
    println!("min_tx_power_w,{p_min:.9e}");
    println!("one_pixel_distance_m,{:.3}", max_one_pixel_distance(&cam));
    println!("diffraction_limit_m,{:.6e}", diffraction_limit(&cam));
    Ok(ExitCode::SUCCESS)
}

fn cmd_hid_packet(a: HidPacketArgs) -> Result<ExitCode, Failure> {
    let state = parse_mask(&a.state)?;
    let req = ledchan::hid::build_set_report(state, a.interface);
    let bytes = config(serialize_packet(&req))?;
    let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    println!("{}", hex.join(" "));
    Ok(ExitCode::SUCCESS)
}
