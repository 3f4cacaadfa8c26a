//! Packet framing with CRC-16, a lossy/jittery star-network channel, and the
//! server's per-robot freshness buffer.

mod buffer;
mod channel;
mod crc;
mod frame;

pub use buffer::{BufferEntry, FreshnessBuffer};
pub use channel::{channel_send, Channel, ChannelModel, ChannelStats, Delivered, DeliveryEvent, SendOutcome};
pub use crc::crc16;
pub use frame::{
    decode_frame, decode_raw, encode_frame, encode_raw, heading_to_mrad, DecodeError, DecodeStats, HeadingCommand,
    PayloadTooLong, SensorPacket, COMMAND_PAYLOAD_LEN, FRAME_OVERHEAD, GYRO_LIMIT_MRAD, IR_NONE, SENSOR_PAYLOAD_LEN,
    SYNC,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommsError {
    #[error("invalid channel model: {0}")]
    InvalidModel(String),
}
