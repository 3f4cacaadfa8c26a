//! Discrete-event model of a lossy star-network link.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CommsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    pub latency_min_ms: f64,
    pub latency_max_ms: f64,
    pub loss_prob: f64,
    /// Independent per-bit flip probability.
    pub bit_flip_prob: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            latency_min_ms: 50.0,
            latency_max_ms: 100.0,
            loss_prob: 0.05,
            bit_flip_prob: 0.0,
        }
    }
}

impl ChannelModel {
    /// Zero latency, no loss, no corruption.
    pub fn ideal() -> Self {
        ChannelModel {
            latency_min_ms: 0.0,
            latency_max_ms: 0.0,
            loss_prob: 0.0,
            bit_flip_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), CommsError> {
        if !(self.latency_min_ms >= 0.0 && self.latency_min_ms <= self.latency_max_ms) {
            return Err(CommsError::InvalidModel(
                "need 0 <= latency_min_ms <= latency_max_ms".into(),
            ));
        }
        for (name, p) in [("loss_prob", self.loss_prob), ("bit_flip_prob", self.bit_flip_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CommsError::InvalidModel(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A frame in flight, possibly corrupted, due at `deliver_at_us`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryEvent {
    pub deliver_at_us: u64,
    pub sent_at_us: u64,
    pub bytes: Vec<u8>,
    pub flipped_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendOutcome {
    Delivered(DeliveryEvent),
    Dropped,
}

/// Push one frame through the channel: drop it, or corrupt bits and draw a
/// delivery time uniformly in the latency band.
pub fn channel_send<R: Rng + ?Sized>(frame: &[u8], t_now_us: u64, model: &ChannelModel, rng: &mut R) -> SendOutcome {
    if model.loss_prob > 0.0 && rng.random::<f64>() < model.loss_prob {
        return SendOutcome::Dropped;
    }
    let mut bytes = frame.to_vec();
    let mut flipped_bits = 0;
    if model.bit_flip_prob > 0.0 {
        for b in bytes.iter_mut() {
            for bit in 0..8 {
                if rng.random::<f64>() < model.bit_flip_prob {
                    *b ^= 1 << bit;
                    flipped_bits += 1;
                }
            }
        }
    }
    let lo = (model.latency_min_ms * 1000.0).round() as u64;
    let hi = (model.latency_max_ms * 1000.0).round() as u64;
    let latency = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    SendOutcome::Delivered(DeliveryEvent {
        deliver_at_us: t_now_us + latency,
        sent_at_us: t_now_us,
        bytes,
        flipped_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ChannelStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub corrupted: u64,
}

/// An event handed to the receiver, tagged with its sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered {
    pub from: u8,
    pub seq: u64,
    pub event: DeliveryEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    at: u64,
    from: u8,
    seq: u64,
}

/// Delivery queue ordered by (delivery time, sender id, send sequence).
/// Independent latency draws mean frames may overtake each other.
#[derive(Debug, Clone)]
pub struct Channel {
    pub model: ChannelModel,
    queue: BinaryHeap<Reverse<(QueueKey, DeliveryEventOrd)>>,
    next_seq: u64,
    pub stats: ChannelStats,
}

// BinaryHeap needs Ord on the payload; ordering is fully decided by the key
// (seq is unique), so payload comparison never matters.
#[derive(Debug, Clone, PartialEq, Eq)]
struct DeliveryEventOrd(DeliveryEvent);

impl PartialOrd for DeliveryEventOrd {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DeliveryEventOrd {
    fn cmp(&self, _other: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl Channel {
    pub fn new(model: ChannelModel) -> Self {
        Channel {
            model,
            queue: BinaryHeap::new(),
            next_seq: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn send<R: Rng + ?Sized>(&mut self, from: u8, frame: &[u8], t_now_us: u64, rng: &mut R) -> bool {
        self.stats.sent += 1;
        let seq = self.next_seq;
        self.next_seq += 1;
        match channel_send(frame, t_now_us, &self.model, rng) {
            SendOutcome::Dropped => {
                self.stats.dropped += 1;
                false
            }
            SendOutcome::Delivered(ev) => {
                if ev.flipped_bits > 0 {
                    self.stats.corrupted += 1;
                }
                let key = QueueKey {
                    at: ev.deliver_at_us,
                    from,
                    seq,
                };
                self.queue.push(Reverse((key, DeliveryEventOrd(ev))));
                true
            }
        }
    }

    /// Pop every event due at or before `t_us`, in delivery order.
    pub fn deliver_due(&mut self, t_us: u64) -> Vec<Delivered> {
        let mut out = Vec::new();
        while let Some(Reverse((key, _))) = self.queue.peek() {
            if key.at > t_us {
                break;
            }
            let Reverse((key, ev)) = self.queue.pop().expect("peeked");
            self.stats.delivered += 1;
            out.push(Delivered {
                from: key.from,
                seq: key.seq,
                event: ev.0,
            });
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{stream, StreamKind};

    #[test]
    fn total_loss_drops_everything() {
        let m = ChannelModel {
            loss_prob: 1.0,
            ..Default::default()
        };
        let mut rng = stream(3, 0, StreamKind::Uplink);
        for t in 0..1000 {
            assert_eq!(channel_send(&[1, 2, 3], t, &m, &mut rng), SendOutcome::Dropped);
        }
    }

    #[test]
    fn latency_band_and_mean() {
        let m = ChannelModel {
            loss_prob: 0.0,
            ..Default::default()
        };
        let mut rng = stream(3, 0, StreamKind::Uplink);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match channel_send(&[0u8; 30], 1_000_000, &m, &mut rng) {
                SendOutcome::Delivered(ev) => {
                    let d = (ev.deliver_at_us - 1_000_000) as f64 / 1000.0;
                    assert!((50.0..=100.0).contains(&d));
                    assert_eq!(ev.flipped_bits, 0);
                    sum += d;
                }
                SendOutcome::Dropped => panic!("no loss configured"),
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 75.0).abs() <= 2.0, "mean {mean}");
    }

    #[test]
    fn queue_orders_by_time_then_sender_then_seq() {
        let mut ch = Channel::new(ChannelModel::ideal());
        let mut rng = stream(1, 0, StreamKind::Uplink);
        ch.send(2, &[1], 100, &mut rng);
        ch.send(1, &[2], 100, &mut rng);
        ch.send(1, &[3], 50, &mut rng);
        ch.send(1, &[4], 100, &mut rng);
        assert!(ch.deliver_due(49).is_empty());
        let got: Vec<u8> = ch.deliver_due(100).iter().map(|d| d.event.bytes[0]).collect();
        assert_eq!(got, vec![3, 2, 4, 1]);
        assert_eq!(ch.in_flight(), 0);
        assert_eq!(ch.stats.delivered, 4);
    }

    #[test]
    fn model_validation() {
        ChannelModel::default().validate().unwrap();
        let bad = ChannelModel {
            latency_min_ms: 10.0,
            latency_max_ms: 5.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelModel {
            loss_prob: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
