use std::collections::BTreeMap;

use super::frame::SensorPacket;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferEntry {
    pub packet: SensorPacket,
    pub t_received_us: u64,
}

/// Server-side store of the newest packet per robot, by sender timestamp.
/// Late or reordered packets never replace a newer one.
#[derive(Debug, Clone, Default)]
pub struct FreshnessBuffer {
    entries: BTreeMap<u8, BufferEntry>,
    pub rejected_stale: u64,
}

impl FreshnessBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the packet became the latest for its robot.
    pub fn update(&mut self, packet: SensorPacket, t_received_us: u64) -> bool {
        match self.entries.get(&packet.robot_id) {
            Some(e) if e.packet.t_sent >= packet.t_sent => {
                self.rejected_stale += 1;
                false
            }
            _ => {
                self.entries
                    .insert(packet.robot_id, BufferEntry { packet, t_received_us });
                true
            }
        }
    }

    pub fn latest(&self, robot_id: u8) -> Option<&BufferEntry> {
        self.entries.get(&robot_id)
    }

    pub fn robots(&self) -> impl Iterator<Item = u8> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
