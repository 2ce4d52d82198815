//! End-to-end tests of the `ledchan` binary: every subcommand exercised
//! file-to-file, plus the documented exit codes (0 success, 2 configuration
//! problems, 3 data problems).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn ledchan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledchan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (killed by signal?)")
}

/// Value of a `key,value` line in a kv block.
fn kv<'a>(block: &'a str, key: &str) -> &'a str {
    block
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(',')))
        .unwrap_or_else(|| panic!("no `{key},` line in:\n{block}"))
}

fn path_str(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn write_payload(dir: &TempDir, name: &str, bytes: &[u8]) -> String {
    let p = path_str(dir, name);
    fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn simulate_then_decode_round_trips_payload_bytes() {
    let dir = TempDir::new().unwrap();
    let payload: Vec<u8> = (0..64u8).collect(); // exactly two frames
    let input = write_payload(&dir, "payload.bin", &payload);
    let trace = path_str(&dir, "trace.txt");

    let sim = ledchan(&[
        "simulate",
        "--profile",
        "dell-kb212-b",
        "--scheme",
        "ook",
        "--sample-rate",
        "100000",
        "--in",
        &input,
        "--out",
        &trace,
    ]);
    assert_eq!(code(&sim), 0, "simulate failed: {}", String::from_utf8_lossy(&sim.stderr));
    // One CSV row: profile,scheme,bitrate,sigma,ber.
    let row = stdout_of(&sim);
    let fields: Vec<&str> = row.trim().split(',').collect();
    assert_eq!(fields.len(), 5, "unexpected simulate row: {row}");
    assert_eq!(fields[0], "dell-kb212-b");
    assert_eq!(fields[1], "ook");
    assert_eq!(fields[2], "1666.667", "560 bits over 600 us symbols");
    assert_eq!(fields[4], "0.000000", "noiseless run must be error-free");

    let written = fs::read_to_string(&trace).unwrap();
    assert!(written.starts_with("sample_rate_hz,100000\n"), "bad trace header");

    // Decode with known timing and alignment.
    let recovered = path_str(&dir, "recovered.bin");
    let dec = ledchan(&[
        "decode",
        "--in",
        &trace,
        "--scheme",
        "ook",
        "--profile",
        "dell-kb212-b",
        "--aligned",
        "--out",
        &recovered,
    ]);
    assert_eq!(code(&dec), 0, "decode failed: {}", String::from_utf8_lossy(&dec.stderr));
    let block = stdout_of(&dec);
    assert_eq!(kv(&block, "frames_ok"), "2");
    assert_eq!(kv(&block, "frames_failed"), "0");
    assert_eq!(kv(&block, "bits"), "560");
    assert_eq!(fs::read(&recovered).unwrap(), payload);

    // Decode blind: no profile, no timing, no alignment hint.
    let blind_out = path_str(&dir, "blind.bin");
    let blind = ledchan(&["decode", "--in", &trace, "--scheme", "ook", "--out", &blind_out]);
    assert_eq!(code(&blind), 0, "blind decode failed: {}", String::from_utf8_lossy(&blind.stderr));
    assert_eq!(fs::read(&blind_out).unwrap(), payload);
}

#[test]
fn camera_trace_round_trips_with_auto_detected_format() {
    let dir = TempDir::new().unwrap();
    let payload: Vec<u8> = (0..32u8).map(|i| i.wrapping_mul(37)).collect();
    let input = write_payload(&dir, "payload.bin", &payload);
    let trace = path_str(&dir, "camera.txt");

    let sim = ledchan(&[
        "simulate",
        "--scheme",
        "ask3",
        "--receiver",
        "camera",
        "--fps",
        "25000",
        "--exposure",
        "0.9",
        "--in",
        &input,
        "--out",
        &trace,
    ]);
    assert_eq!(code(&sim), 0, "simulate failed: {}", String::from_utf8_lossy(&sim.stderr));
    let row = stdout_of(&sim);
    assert!(row.trim().ends_with(",0.000000"), "noiseless camera run must be error-free: {row}");
    assert!(fs::read_to_string(&trace).unwrap().starts_with("fps,25000\n"), "bad camera header");

    // `decode` detects the camera format from the header line.
    let recovered = path_str(&dir, "recovered.bin");
    let dec = ledchan(&[
        "decode",
        "--in",
        &trace,
        "--scheme",
        "ask3",
        "--profile",
        "dell-kb212-b",
        "--aligned",
        "--out",
        &recovered,
    ]);
    assert_eq!(code(&dec), 0, "decode failed: {}", String::from_utf8_lossy(&dec.stderr));
    assert_eq!(fs::read(&recovered).unwrap(), payload);
}

#[test]
fn encode_writes_schedule_and_hid_packet_stream() {
    let dir = TempDir::new().unwrap();
    let input = write_payload(&dir, "payload.bin", &[0xAB; 32]);
    let sched = path_str(&dir, "sched.txt");
    let hid = path_str(&dir, "hid.txt");

    let enc = ledchan(&[
        "encode", "--scheme", "ook", "--mask", "100", "--in", &input, "--out", &sched,
        "--hid-out", &hid,
    ]);
    assert_eq!(code(&enc), 0, "encode failed: {}", String::from_utf8_lossy(&enc.stderr));
    let summary = stdout_of(&enc);
    assert_eq!(kv(&summary, "bits"), "280", "one frame is 280 bits");
    // Dell on/off defaults: 600 us per bit.
    assert_eq!(kv(&summary, "duration_us"), "168000");

    // Schedule rows are `state_bits,duration_us`; the stream starts with the
    // alternating preamble on the Num LED.
    let sched_text = fs::read_to_string(&sched).unwrap();
    let mut rows = sched_text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    assert_eq!(rows.next(), Some("100,600"));
    assert_eq!(rows.next(), Some("000,600"));

    // HID rows are `t_us` plus the 9-byte SetReport in hex.
    let hid_text = fs::read_to_string(&hid).unwrap();
    let mut hid_rows = hid_text.lines();
    assert_eq!(hid_rows.next(), Some("0 21 09 00 02 00 00 01 00 01"));
    assert_eq!(hid_rows.next(), Some("600 21 09 00 02 00 00 01 00 00"));
}

#[test]
fn hid_packet_prints_golden_bytes() {
    let all_on = ledchan(&["hid-packet", "--state", "111"]);
    assert_eq!(code(&all_on), 0);
    assert_eq!(stdout_of(&all_on).trim(), "21 09 00 02 00 00 01 00 07");

    let num_if1 = ledchan(&["hid-packet", "--state", "100", "--interface", "1"]);
    assert_eq!(code(&num_if1), 0);
    assert_eq!(stdout_of(&num_if1).trim(), "21 09 00 02 01 00 01 00 01");
}

#[test]
fn linkbudget_reports_the_documented_operating_point() {
    let out = ledchan(&["linkbudget"]);
    assert_eq!(code(&out), 0, "linkbudget failed: {}", String::from_utf8_lossy(&out.stderr));
    let block = stdout_of(&out);

    let close = |key: &str, want: f64, rel: f64| {
        let got: f64 = kv(&block, key).parse().unwrap();
        assert!(
            ((got - want) / want).abs() <= rel,
            "{key} = {got}, want {want} within {rel}"
        );
    };
    // Defaults: 5.58 mW LED seen 25 degrees off-axis from 50 m through a
    // 2.54 cm lens at 0.8 loss, 1 nW detection floor.
    close("radiant_intensity_rel", 0.2884867, 1e-5);
    close("effective_distance_m", 51.09, 1e-3);
    close("min_tx_power_w", 5.344e-3, 1e-3);
    close("one_pixel_distance_m", 5.714, 1e-3);
    assert_eq!(kv(&block, "detectable"), "true");

    // Pushing the receiver past the effective distance loses the signal.
    let far = ledchan(&["linkbudget", "--distance-m", "60"]);
    assert_eq!(code(&far), 0);
    assert_eq!(kv(&stdout_of(&far), "detectable"), "false");
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write_payload(&dir, "payload.bin", &[1, 2, 3]);
    let out = path_str(&dir, "out.txt");

    // Unknown profile.
    let bad_profile =
        ledchan(&["encode", "--profile", "nosuch-kb", "--in", &input, "--out", &out]);
    assert_eq!(code(&bad_profile), 2);
    assert!(String::from_utf8_lossy(&bad_profile.stderr).contains("unknown profile"));

    // Malformed LED mask.
    let bad_mask = ledchan(&["encode", "--mask", "2", "--in", &input, "--out", &out]);
    assert_eq!(code(&bad_mask), 2);

    // Amplitude keying cannot be decoded without timing.
    let trace = path_str(&dir, "trace.txt");
    let sim = ledchan(&["simulate", "--scheme", "ask-amp", "--in", &input, "--out", &trace]);
    assert_eq!(code(&sim), 0);
    let no_timing = ledchan(&["decode", "--in", &trace, "--scheme", "ask-amp"]);
    assert_eq!(code(&no_timing), 2);

    // Physically meaningless link parameter.
    let bad_loss = ledchan(&["linkbudget", "--loss", "1.5"]);
    assert_eq!(code(&bad_loss), 2);

    // Unknown flag (clap usage error).
    let bad_flag = ledchan(&["encode", "--bogus"]);
    assert_eq!(code(&bad_flag), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let out = path_str(&dir, "out.txt");

    // Unreadable payload.
    let missing = path_str(&dir, "does-not-exist.bin");
    let no_input = ledchan(&["encode", "--in", &missing, "--out", &out]);
    assert_eq!(code(&no_input), 3);

    // Empty payload cannot be framed.
    let empty = write_payload(&dir, "empty.bin", &[]);
    let no_bytes = ledchan(&["encode", "--in", &empty, "--out", &out]);
    assert_eq!(code(&no_bytes), 3);

    // Malformed trace file.
    let garbage = write_payload(&dir, "garbage.txt", b"not,a,trace\n1 2 3\n");
    let bad_trace = ledchan(&["decode", "--in", &garbage, "--scheme", "ook"]);
    assert_eq!(code(&bad_trace), 3);

    // A trace too noisy to pass integrity checks decodes to failed frames.
    let payload = write_payload(&dir, "payload.bin", &[0x5A; 32]);
    let trace = path_str(&dir, "noisy.txt");
    let sim = ledchan(&[
        "simulate", "--in", &payload, "--out", &trace, "--sigma", "5.0", "--seed", "7",
    ]);
    assert_eq!(code(&sim), 0);
    let dec = ledchan(&[
        "decode", "--in", &trace, "--scheme", "ook", "--profile", "dell-kb212-b", "--aligned",
    ]);
    assert_eq!(code(&dec), 3, "hopelessly noisy trace must fail frame checks");
    assert!(String::from_utf8_lossy(&dec.stderr).contains("failed integrity checks"));
}

#[test]
fn same_seed_reproduces_identical_output() {
    let dir = TempDir::new().unwrap();
    let input = write_payload(&dir, "payload.bin", &[9u8; 32]);
    let args = [
        "simulate", "--in", &input, "--sigma", "0.12", "--seed", "42", "--sample-rate", "100000",
    ];
    let first = ledchan(&args);
    let second = ledchan(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(stdout_of(&first), stdout_of(&second), "seeded runs must be byte-identical");
    let ber: f64 = stdout_of(&first).trim().rsplit(',').next().unwrap().parse().unwrap();
    assert!(ber.is_finite(), "bit error rate must be a number");
}

#[test]
fn rate_limited_encode_reports_capped_change_rate() {
    let dir = TempDir::new().unwrap();
    let input = write_payload(&dir, "payload.bin", &(0..128u8).collect::<Vec<_>>());
    let out = path_str(&dir, "sched.txt");

    let enc = ledchan(&["encode", "--in", &input, "--out", &out, "--lock-ms", "1000"]);
    assert_eq!(code(&enc), 0);
    let rate: f64 = kv(&stdout_of(&enc), "state_changes_per_sec").parse().unwrap();
    assert!(rate <= 1.0, "LED lock left {rate} changes/s");
}

/// The repository keeps no binary fixtures: every artifact these tests touch
/// is generated in a temp dir.
#[test]
fn no_stray_fixture_files() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    assert!(manifest.join("tests").join("cli.rs").exists());
    assert!(!manifest.join("tests").join("fixtures").exists());
}
