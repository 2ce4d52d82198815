//! Frame layer: fixed-size frames with an alternating preamble and a CRC-16
//! integrity check.
//!
//! Wire layout of one frame, MSB-first:
//!
//! ```text
//! | preamble 10101010 (8 bits) | payload (256 bits) | CRC-16 (16 bits) |
//! ```
//!
//! The payload of the final frame is zero-padded to 256 bits. There is no
//! length field: callers that need exact byte counts must carry the length
//! out of band (trailing zero bytes are otherwise indistinguishable from
//! padding).

use crate::bits::BitString;
use thiserror::Error;

/// Preamble pattern prepended to every frame: alternating `10101010`.
pub const PREAMBLE: [bool; 8] = [true, false, true, false, true, false, true, false];

/// Payload size of every frame, in bits.
pub const PAYLOAD_BITS: usize = 256;

/// Total serialized frame size in bits: preamble + payload + CRC.
pub const FRAME_BITS: usize = 8 + PAYLOAD_BITS + 16;

/// CRC-16/CCITT-FALSE generator polynomial (x^16 + x^12 + x^5 + 1).
pub const CRC_POLY: u16 = 0x1021;

/// CRC-16/CCITT-FALSE initial register value.
pub const CRC_INIT: u16 = 0xFFFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("cannot frame an empty byte slice")]
    EmptyData,
    #[error("frame must be {expected} bits, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("preamble mismatch in first 8 bits")]
    BadPreamble,
    #[error("CRC mismatch: computed {computed:#06x}, received {received:#06x}")]
    CrcMismatch { computed: u16, received: u16 },
}

/// One link-layer frame: a fixed preamble, 256 payload bits, and their CRC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    payload: BitString,
    crc: u16,
}

impl Frame {
    /// Builds a frame over exactly 256 payload bits, computing the CRC.
    pub fn new(payload: BitString) -> Result<Self, FrameError> {
        if payload.len() != PAYLOAD_BITS {
            return Err(FrameError::BadLength { expected: PAYLOAD_BITS, got: payload.len() });
        }
        let crc = crc16(&payload);
        Ok(Self { payload, crc })
    }

    pub fn payload(&self) -> &BitString {
        &self.payload
    }

    pub fn crc(&self) -> u16 {
        self.crc
    }

    /// Payload as 32 bytes.
    pub fn payload_bytes(&self) -> Vec<u8> {
        self.payload.to_bytes()
    }
}

/// CRC-16/CCITT-FALSE over a bit sequence, processed bit-serially MSB-first.
///
/// Parameters: poly `0x1021`, init `0xFFFF`, no input/output reflection, no
/// final XOR. Defined for any bit length; frames always feed it 256 bits.
pub fn crc16(bits: &BitString) -> u16 {
    let mut crc = CRC_INIT;
    for bit in bits.iter() {
        let top = (crc >> 15) & 1 == 1;
        crc <<= 1;
        if top != bit {
            crc ^= CRC_POLY;
        }
    }
    crc
}

/// Splits `data` into as many frames as needed, zero-padding the final
/// payload to 256 bits.
pub fn build_frames(data: &[u8]) -> Result<Vec<Frame>, FrameError> {
    if data.is_empty() {
        return Err(FrameError::EmptyData);
    }
    let bits = BitString::from_bytes(data);
    let mut frames = Vec::with_capacity(bits.len().div_ceil(PAYLOAD_BITS));
    let mut idx = 0;
    while idx < bits.len() {
        let end = (idx + PAYLOAD_BITS).min(bits.len());
        let mut payload = bits.slice(idx..end);
        while payload.len() < PAYLOAD_BITS {
            payload.push(false);
        }
        frames.push(Frame::new(payload)?);
        idx = end;
    }
    Ok(frames)
}

/// Serializes one frame to its 280-bit wire form.
pub fn serialize_frame(frame: &Frame) -> BitString {
    let mut out = BitString::new();
    for b in PREAMBLE {
        out.push(b);
    }
    out.extend_from(&frame.payload);
    for shift in (0..16).rev() {
        out.push((frame.crc >> shift) & 1 == 1);
    }
    out
}

/// Serializes a frame sequence to one contiguous bit stream.
pub fn serialize_frames(frames: &[Frame]) -> BitString {
    let mut out = BitString::new();
    for f in frames {
        out.extend_from(&serialize_frame(f));
    }
    out
}

/// Parses a 280-bit wire frame, checking length, preamble, and CRC in that
/// order.
pub fn parse_frame(bits: &BitString) -> Result<Frame, FrameError> {
    if bits.len() != FRAME_BITS {
        return Err(FrameError::BadLength { expected: FRAME_BITS, got: bits.len() });
    }
    for (i, expected) in PREAMBLE.iter().enumerate() {
        if bits[i] != *expected {
            return Err(FrameError::BadPreamble);
        }
    }
    let payload = bits.slice(8..8 + PAYLOAD_BITS);
    let mut received = 0u16;
    for i in 0..16 {
        received = (received << 1) | u16::from(bits[8 + PAYLOAD_BITS + i]);
    }
    let computed = crc16(&payload);
    if computed != received {
        return Err(FrameError::CrcMismatch { computed, received });
    }
    Ok(Frame { payload, crc: received })
}
