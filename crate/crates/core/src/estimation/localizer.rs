use serde::{Deserialize, Serialize};

use super::ekf::{ekf_predict, ekf_update_heading, ekf_update_velocity, EkfBelief, EkfConfig, SlipDetector};
use super::measurement::measurement_from_packets;
use super::EstimationError;
use crate::comms::SensorPacket;
use crate::kinematics::{integrate_unicycle, Posture, RobotGeometry, Twist};

/// Where the filter takes its prediction step from. Velocities are always
/// converted over the sender-timestamp interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtSource {
    /// Difference of sender timestamps.
    SenderTimestamp,
    /// Difference of server receive times.
    ReceiveTime,
    /// A constant step (s), regardless of when packets were sent.
    Fixed(f64),
}

/// One filter output, stamped with the sender time of the packet it consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t_ms: u32,
    pub mean: [f64; 5],
    pub cov_diag: [f64; 5],
    pub slip: bool,
}

impl EstimateRecord {
    pub fn pose(&self) -> Posture {
        Posture::new(self.mean[0], self.mean[1], self.mean[2])
    }
}

/// Server-side filter for one robot, consuming packets in arrival order.
#[derive(Debug, Clone)]
pub struct Localizer {
    cfg: EkfConfig,
    geom: RobotGeometry,
    dt_source: DtSource,
    belief: EkfBelief,
    detector: SlipDetector,
    prev: Option<(SensorPacket, u64)>,
    /// Packets skipped for not advancing the clock.
    pub stale: u64,
}

impl Localizer {
    pub fn new(initial: Posture, cfg: EkfConfig, geom: RobotGeometry, dt_source: DtSource) -> Self {
        Localizer {
            belief: EkfBelief::new(initial, &cfg),
            detector: SlipDetector::new(&cfg),
            cfg,
            geom,
            dt_source,
            prev: None,
            stale: 0,
        }
    }

    pub fn belief(&self) -> &EkfBelief {
        &self.belief
    }

    /// Feed one decoded packet. Returns `None` for the first packet and for
    /// stale ones; an estimation fault is returned as an error.
    pub fn process(
        &mut self,
        pkt: &SensorPacket,
        t_received_us: u64,
    ) -> Result<Option<EstimateRecord>, EstimationError> {
        let Some((prev, prev_rx)) = self.prev else {
            self.prev = Some((*pkt, t_received_us));
            return Ok(None);
        };
        if pkt.t_sent <= prev.t_sent {
            self.stale += 1;
            return Ok(None);
        }
        let dt = match self.dt_source {
            DtSource::SenderTimestamp => (pkt.t_sent - prev.t_sent) as f64 * 1e-3,
            DtSource::ReceiveTime => t_received_us.saturating_sub(prev_rx) as f64 * 1e-6,
            DtSource::Fixed(dt) => dt,
        };
        if !(dt > 0.0) {
            self.stale += 1;
            return Ok(None);
        }
        let m = measurement_from_packets(&prev, pkt, &self.geom)?;
        let slip = self.detector.push(&m);
        // The velocities describe the interval just ended: fuse them into the
        // state at its start, carry the pose across, then fuse the heading
        // read at its end.
        let b = ekf_update_velocity(&self.belief, &m, slip, &self.cfg)?;
        let b = ekf_predict(&b, dt, &self.cfg)?;
        self.belief = ekf_update_heading(&b, m.theta_gyro, &self.cfg)?;
        self.prev = Some((*pkt, t_received_us));
        let mut cov_diag = [0.0; 5];
        for (i, c) in cov_diag.iter_mut().enumerate() {
            *c = self.belief.cov[(i, i)];
        }
        Ok(Some(EstimateRecord {
            t_ms: pkt.t_sent,
            mean: self.belief.mean.into(),
            cov_diag,
            slip,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    Encoders,
    Flow,
}

/// Open-loop pose trace from one velocity source. The first entry is the
/// initial pose at the first packet's timestamp.
pub fn dead_reckon(
    packets: &[SensorPacket],
    source: VelocitySource,
    geom: &RobotGeometry,
    initial: Posture,
) -> Result<Vec<(u32, Posture)>, EstimationError> {
    let Some(first) = packets.first() else {
        return Ok(Vec::new());
    };
    let mut out = vec![(first.t_sent, initial)];
    let mut pose = initial;
    for w in packets.windows(2) {
        let m = measurement_from_packets(&w[0], &w[1], geom)?;
        let twist = match source {
            VelocitySource::Encoders => Twist::new(m.v_enc, m.w_enc),
            VelocitySource::Flow => Twist::new(m.v_flow, m.w_flow),
        };
        pose = integrate_unicycle(pose, twist, m.dt).map_err(|_| EstimationError::BadDt(m.dt))?;
        out.push((w[1].t_sent, pose));
    }
    Ok(out)
}
