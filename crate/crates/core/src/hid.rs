//! USB HID SetReport synthesis for keyboard status LEDs.
//!
//! A boot-protocol keyboard's LEDs are driven by a class-specific control
//! transfer: `bmRequestType 0x21` (host-to-device, class, interface),
//! `bRequest 0x09` (SET_REPORT), `wValue 0x0200` (report type Output, report
//! ID 0), `wIndex` the keyboard interface, and a 1-byte output report whose
//! low three bits are Num/Caps/Scroll Lock.
//!
//! Packets are only ever constructed and serialized here; nothing in this
//! crate talks to a bus.

use crate::modulation::{LedSchedule, LedState};
use thiserror::Error;

/// Host-to-device, class request, interface recipient.
pub const BM_REQUEST_TYPE: u8 = 0x21;
/// HID SET_REPORT.
pub const B_REQUEST_SET_REPORT: u8 = 0x09;
/// Report type Output (0x02) in the high byte, report ID 0 in the low byte.
pub const W_VALUE_OUTPUT_REPORT0: u16 = 0x0200;
/// Serialized packet length: 8 setup bytes plus the 1-byte report.
pub const PACKET_LEN: usize = 9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HidError {
    #[error("reserved LED bitfield bits 3..=7 must be zero, got {0:#04x}")]
    ReservedBitsSet(u8),
    #[error("packet must be {PACKET_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("field {field} must be {expected:#06x}, got {got:#06x}")]
    BadField { field: &'static str, expected: u16, got: u16 },
}

/// One SET_REPORT control transfer: the 8-byte setup packet plus its 1-byte
/// LED output report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetReportRequest {
    pub bm_request_type: u8,
    pub b_request: u8,
    pub w_value: u16,
    pub w_index: u16,
    pub w_length: u16,
    pub data: u8,
}

impl SetReportRequest {
    /// LED state as stored in the report byte.
    pub fn led_state(&self) -> Option<LedState> {
        LedState::from_bitfield(self.data)
    }
}

/// Builds the SET_REPORT request that drives `state` on keyboard interface
/// `interface`.
pub fn build_set_report(state: LedState, interface: u16) -> SetReportRequest {
    SetReportRequest {
        bm_request_type: BM_REQUEST_TYPE,
        b_request: B_REQUEST_SET_REPORT,
        w_value: W_VALUE_OUTPUT_REPORT0,
        w_index: interface,
        w_length: 1,
        data: state.to_bitfield(),
    }
}

/// Serializes to 9 bytes: setup fields little-endian, then the report byte.
pub fn serialize_packet(req: &SetReportRequest) -> Result<[u8; PACKET_LEN], HidError> {
    if req.data & 0xF8 != 0 {
        return Err(HidError::ReservedBitsSet(req.data));
    }
    let mut out = [0u8; PACKET_LEN];
    out[0] = req.bm_request_type;
    out[1] = req.b_request;
    out[2..4].copy_from_slice(&req.w_value.to_le_bytes());
    out[4..6].copy_from_slice(&req.w_index.to_le_bytes());
    out[6..8].copy_from_slice(&req.w_length.to_le_bytes());
    out[8] = req.data;
    Ok(out)
}

/// Parses a 9-byte packet, validating every fixed field.
pub fn parse_packet(bytes: &[u8]) -> Result<SetReportRequest, HidError> {
    if bytes.len() != PACKET_LEN {
        return Err(HidError::BadLength(bytes.len()));
    }
    let check = |field, expected: u16, got: u16| {
        if got == expected {
            Ok(())
        } else {
            Err(HidError::BadField { field, expected, got })
        }
    };
    check("bmRequestType", BM_REQUEST_TYPE.into(), bytes[0].into())?;
    check("bRequest", B_REQUEST_SET_REPORT.into(), bytes[1].into())?;
    let w_value = u16::from_le_bytes([bytes[2], bytes[3]]);
    check("wValue", W_VALUE_OUTPUT_REPORT0, w_value)?;
    let w_length = u16::from_le_bytes([bytes[6], bytes[7]]);
    check("wLength", 1, w_length)?;
    if bytes[8] & 0xF8 != 0 {
        return Err(HidError::ReservedBitsSet(bytes[8]));
    }
    Ok(SetReportRequest {
        bm_request_type: bytes[0],
        b_request: bytes[1],
        w_value,
        w_index: u16::from_le_bytes([bytes[4], bytes[5]]),
        w_length,
        data: bytes[8],
    })
}

/// Converts a schedule into timestamped SET_REPORT requests, one per LED
/// state change. Timestamps are microseconds from schedule start; the first
/// report is always emitted at t = 0.
pub fn schedule_to_reports(
    schedule: &LedSchedule,
    interface: u16,
) -> Vec<(u64, SetReportRequest)> {
    let mut out = Vec::new();
    let mut last: Option<LedState> = None;
    for (t, state) in schedule.state_changes() {
        if last == Some(state) {
            continue;
        }
        out.push((t, build_set_report(state, interface)));
        last = Some(state);
    }
    out
}
