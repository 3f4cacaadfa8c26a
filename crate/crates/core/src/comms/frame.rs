//! Wire format.
//!
//! ```text
//! [0xAA][0x55][len: u8][payload: len bytes][crc_hi][crc_lo]
//! ```
//!
//! The CRC covers `len ‖ payload` and is sent big-endian. Payload fields are
//! little-endian.

use thiserror::Error;

use super::crc::crc16;
use crate::kinematics::wrap;

pub const SYNC: [u8; 2] = [0xAA, 0x55];
/// Bytes around the payload: sync, length, crc.
pub const FRAME_OVERHEAD: usize = 5;
pub const SENSOR_PAYLOAD_LEN: usize = 25;
pub const COMMAND_PAYLOAD_LEN: usize = 9;
/// IR value for "out of range".
pub const IR_NONE: u16 = 0xFFFF;
/// Gyro headings are sent in mrad within `(-3142, 3142]`.
pub const GYRO_LIMIT_MRAD: i16 = 3142;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad sync bytes")]
    BadSync,
    #[error("truncated frame: need {need} bytes, got {got}")]
    Truncated { need: usize, got: usize },
    #[error("bad length: {0}")]
    BadLength(String),
    #[error("crc mismatch: frame says {found:#06x}, computed {computed:#06x}")]
    CrcMismatch { found: u16, computed: u16 },
    #[error("invalid field {0}")]
    InvalidField(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("payload of {0} bytes does not fit a frame")]
pub struct PayloadTooLong(pub usize);

/// Frame arbitrary payload bytes.
pub fn encode_raw(payload: &[u8]) -> Result<Vec<u8>, PayloadTooLong> {
    let len = u8::try_from(payload.len()).map_err(|_| PayloadTooLong(payload.len()))?;
    let mut out = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    out.extend_from_slice(&SYNC);
    out.push(len);
    out.extend_from_slice(payload);
    let crc = crc16(&out[2..]);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Validate framing and return the payload slice.
pub fn decode_raw(bytes: &[u8]) -> Result<&[u8], DecodeError> {
    if bytes.len() < 3 {
        if bytes.len() == 2 && bytes != SYNC || bytes.len() == 1 && bytes[0] != SYNC[0] {
            return Err(DecodeError::BadSync);
        }
        return Err(DecodeError::Truncated {
            need: 3,
            got: bytes.len(),
        });
    }
    if bytes[..2] != SYNC {
        return Err(DecodeError::BadSync);
    }
    let need = bytes[2] as usize + FRAME_OVERHEAD;
    if bytes.len() < need {
        return Err(DecodeError::Truncated { need, got: bytes.len() });
    }
    if bytes.len() > need {
        return Err(DecodeError::BadLength(format!(
            "length byte implies {need} bytes, frame has {}",
            bytes.len()
        )));
    }
    let body = &bytes[2..need - 2];
    let found = u16::from_be_bytes([bytes[need - 2], bytes[need - 1]]);
    let computed = crc16(body);
    if found != computed {
        return Err(DecodeError::CrcMismatch { found, computed });
    }
    Ok(&body[1..])
}

/// Robot → server sensor report.
///
/// Tick and flow fields are free-running counters that wrap at the `i16`
/// range; receivers difference consecutive packets with wrapping arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SensorPacket {
    pub robot_id: u8,
    /// Sender clock at transmission (ms).
    pub t_sent: u32,
    pub ticks_l: i16,
    pub ticks_r: i16,
    /// Cumulative flow displacement in 0.1 mm units.
    pub flow_dx_l: i16,
    pub flow_dx_r: i16,
    /// Wrapped heading (mrad).
    pub gyro_heading: i16,
    /// mm, [`IR_NONE`] for out of range.
    pub ir: [u16; 5],
}

impl SensorPacket {
    pub fn gyro_rad(&self) -> f64 {
        self.gyro_heading as f64 * 1e-3
    }

    pub fn ir_mm(&self, i: usize) -> Option<f64> {
        (self.ir[i] != IR_NONE).then(|| self.ir[i] as f64)
    }

    pub fn payload(&self) -> [u8; SENSOR_PAYLOAD_LEN] {
        let mut p = [0u8; SENSOR_PAYLOAD_LEN];
        p[0] = self.robot_id;
        p[1..5].copy_from_slice(&self.t_sent.to_le_bytes());
        p[5..7].copy_from_slice(&self.ticks_l.to_le_bytes());
        p[7..9].copy_from_slice(&self.ticks_r.to_le_bytes());
        p[9..11].copy_from_slice(&self.flow_dx_l.to_le_bytes());
        p[11..13].copy_from_slice(&self.flow_dx_r.to_le_bytes());
        p[13..15].copy_from_slice(&self.gyro_heading.to_le_bytes());
        for (i, r) in self.ir.iter().enumerate() {
            p[15 + 2 * i..17 + 2 * i].copy_from_slice(&r.to_le_bytes());
        }
        p
    }

    pub fn from_payload(p: &[u8]) -> Result<Self, DecodeError> {
        if p.len() != SENSOR_PAYLOAD_LEN {
            return Err(DecodeError::BadLength(format!(
                "sensor payload must be {SENSOR_PAYLOAD_LEN} bytes, got {}",
                p.len()
            )));
        }
        let i16_at = |o: usize| i16::from_le_bytes([p[o], p[o + 1]]);
        let mut ir = [0u16; 5];
        for (i, r) in ir.iter_mut().enumerate() {
            *r = u16::from_le_bytes([p[15 + 2 * i], p[16 + 2 * i]]);
        }
        let pkt = SensorPacket {
            robot_id: p[0],
            t_sent: u32::from_le_bytes([p[1], p[2], p[3], p[4]]),
            ticks_l: i16_at(5),
            ticks_r: i16_at(7),
            flow_dx_l: i16_at(9),
            flow_dx_r: i16_at(11),
            gyro_heading: i16_at(13),
            ir,
        };
        if !pkt.gyro_valid() {
            return Err(DecodeError::InvalidField("gyro_heading"));
        }
        Ok(pkt)
    }

    pub fn gyro_valid(&self) -> bool {
        self.gyro_heading > -GYRO_LIMIT_MRAD && self.gyro_heading <= GYRO_LIMIT_MRAD
    }
}

/// Quantize a heading to wire mrad within `(-3142, 3142]`.
pub fn heading_to_mrad(theta: f64) -> i16 {
    let m = (wrap(theta) * 1000.0).round() as i16;
    if m <= -GYRO_LIMIT_MRAD {
        GYRO_LIMIT_MRAD
    } else {
        m
    }
}

pub fn encode_frame(p: &SensorPacket) -> Vec<u8> {
    encode_raw(&p.payload()).expect("sensor payload fits")
}

pub fn decode_frame(bytes: &[u8]) -> Result<SensorPacket, DecodeError> {
    SensorPacket::from_payload(decode_raw(bytes)?)
}

/// Server → robot heading command used by the consensus protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeadingCommand {
    pub robot_id: u8,
    pub t_sent: u32,
    /// Target heading in µrad.
    pub target_urad: i32,
}

impl HeadingCommand {
    pub fn new(robot_id: u8, t_sent: u32, target: f64) -> Self {
        HeadingCommand {
            robot_id,
            t_sent,
            target_urad: (target * 1e6).round() as i32,
        }
    }

    pub fn target(&self) -> f64 {
        self.target_urad as f64 * 1e-6
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut p = [0u8; COMMAND_PAYLOAD_LEN];
        p[0] = self.robot_id;
        p[1..5].copy_from_slice(&self.t_sent.to_le_bytes());
        p[5..9].copy_from_slice(&self.target_urad.to_le_bytes());
        encode_raw(&p).expect("command payload fits")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let p = decode_raw(bytes)?;
        if p.len() != COMMAND_PAYLOAD_LEN {
            return Err(DecodeError::BadLength(format!(
                "command payload must be {COMMAND_PAYLOAD_LEN} bytes, got {}",
                p.len()
            )));
        }
        Ok(HeadingCommand {
            robot_id: p[0],
            t_sent: u32::from_le_bytes([p[1], p[2], p[3], p[4]]),
            target_urad: i32::from_le_bytes([p[5], p[6], p[7], p[8]]),
        })
    }
}

/// Per-cause rejection counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct DecodeStats {
    pub ok: u64,
    pub bad_sync: u64,
    pub truncated: u64,
    pub bad_length: u64,
    pub crc_mismatch: u64,
    pub invalid_field: u64,
}

impl DecodeStats {
    pub fn record<T>(&mut self, r: &Result<T, DecodeError>) {
        match r {
            Ok(_) => self.ok += 1,
            Err(DecodeError::BadSync) => self.bad_sync += 1,
            Err(DecodeError::Truncated { .. }) => self.truncated += 1,
            Err(DecodeError::BadLength(_)) => self.bad_length += 1,
            Err(DecodeError::CrcMismatch { .. }) => self.crc_mismatch += 1,
            Err(DecodeError::InvalidField(_)) => self.invalid_field += 1,
        }
    }

    pub fn rejected(&self) -> u64 {
        self.bad_sync + self.truncated + self.bad_length + self.crc_mismatch + self.invalid_field
    }
}
