//! Heading consensus, as a synchronous iteration and over the simulated star
//! network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::{
    decode_frame, encode_frame, Channel, ChannelModel, ChannelStats, CommsError, DecodeStats, FreshnessBuffer,
    HeadingCommand,
};
use crate::control::{tracking_control, Gains};
use crate::kinematics::{wrap, Posture};
use crate::sim::{RobotConfig, SimError, SimRobot, World, TICK_US};
use crate::streams::{stream, StreamKind, StreamRng};

#[derive(Debug, Error)]
pub enum SwarmError {
    #[error("empty swarm")]
    Empty,
    #[error("invalid consensus config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Comms(#[from] CommsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusMode {
    Synchronous,
    Networked,
}

/// What the server puts in each robot's command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// The swarm mean; the robot applies the gain to its own current heading.
    Mean,
    /// The corrected heading `θ_i + K(θ_m − θ_i)`, computed from the
    /// robot's last report.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    pub k: f64,
    /// rad
    pub epsilon: f64,
    pub max_rounds: u64,
    pub mode: ConsensusMode,
    /// Consecutive in-tolerance rounds needed to declare convergence.
    pub hold_rounds: u64,
    pub round_ms: u64,
    /// Reports older than this are used but counted as stale.
    pub stale_after_ms: u64,
    pub command: CommandKind,
    /// Time constant of the on-board turn toward the commanded heading (s).
    pub turn_time: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            k: 0.2,
            epsilon: 0.01,
            max_rounds: 500,
            mode: ConsensusMode::Networked,
            hold_rounds: 10,
            round_ms: 70,
            stale_after_ms: 500,
            command: CommandKind::Mean,
            turn_time: 0.14,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |m: &str| Err(SwarmError::InvalidConfig(m.into()));
        if !(self.k > 0.0 && self.k < 2.0) {
            return bad("k must lie in (0, 2)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.max_rounds == 0 || self.hold_rounds == 0 || self.round_ms == 0 {
            return bad("max_rounds, hold_rounds and round_ms must be >= 1");
        }
        if !(self.turn_time > 0.0) {
            return bad("turn_time must be > 0");
        }
        Ok(())
    }
}

/// Headings are plain scalars here, not points on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub headings: Vec<f64>,
    pub round: u64,
}

impl SwarmState {
    pub fn new(headings: Vec<f64>) -> Self {
        SwarmState { headings, round: 0 }
    }
}

pub fn mean_heading(s: &SwarmState) -> Result<f64, SwarmError> {
    if s.headings.is_empty() {
        return Err(SwarmError::Empty);
    }
    // offset from the first heading: exact when all headings are equal
    let h0 = s.headings[0];
    Ok(h0 + s.headings.iter().map(|h| h - h0).sum::<f64>() / s.headings.len() as f64)
}

/// Largest pairwise difference.
pub fn spread(headings: &[f64]) -> f64 {
    let max = headings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = headings.iter().copied().fold(f64::INFINITY, f64::min);
    if headings.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// One simultaneous update of every heading against the pre-step mean.
pub fn consensus_step(s: &SwarmState, k: f64) -> SwarmState {
    let Ok(m) = mean_heading(s) else {
        return s.clone();
    };
    SwarmState {
        headings: s.headings.iter().map(|&h| h + k * (m - h)).collect(),
        round: s.round + 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t_s: f64,
    pub round: u64,
    pub headings: Vec<f64>,
    pub mean: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConsensusOutcome {
    pub trace: Vec<RoundRecord>,
    pub converged: bool,
    /// First round of the in-tolerance streak that confirmed convergence.
    pub converged_round: Option<u64>,
    /// Time of the round that completed the streak (s).
    pub confirmed_at_s: Option<f64>,
    pub final_spread: f64,
    pub staleness_warnings: u64,
    pub decode: DecodeStats,
    pub uplink: ChannelStats,
    pub downlink: ChannelStats,
}

struct Streak {
    hold: u64,
    start: Option<u64>,
    count: u64,
}

impl Streak {
    fn new(hold: u64) -> Self {
        Streak {
            hold,
            start: None,
            count: 0,
        }
    }

    /// Returns the streak's first round once it reaches `hold`.
    fn push(&mut self, round: u64, within: bool) -> Option<u64> {
        if within {
            self.start.get_or_insert(round);
            self.count += 1;
        } else {
            self.start = None;
            self.count = 0;
        }
        (self.count >= self.hold).then(|| self.start.expect("streak started"))
    }
}

/// Iterate the update rule directly, one round every `round_ms`.
pub fn run_synchronous(initial: &[f64], cfg: &ConsensusConfig) -> Result<ConsensusOutcome, SwarmError> {
    cfg.validate()?;
    let mut s = SwarmState::new(initial.to_vec());
    let mut out = ConsensusOutcome::default();
    let mut streak = Streak::new(cfg.hold_rounds);
    let round_s = cfg.round_ms as f64 * 1e-3;
    for round in 0..cfg.max_rounds {
        let mean = mean_heading(&s)?;
        let sp = spread(&s.headings);
        let t_s = round as f64 * round_s;
        out.trace.push(RoundRecord {
            t_s,
            round,
            headings: s.headings.clone(),
            mean,
            spread: sp,
        });
        out.final_spread = sp;
        if let Some(start) = streak.push(round, sp < cfg.epsilon) {
            out.converged = true;
            out.converged_round = Some(start);
            out.confirmed_at_s = Some(t_s);
            break;
        }
        s = consensus_step(&s, cfg.k);
    }
    Ok(out)
}

struct Agent {
    robot: SimRobot,
    home: Posture,
    goal: f64,
    up: StreamRng,
    down: StreamRng,
}

/// Star-network consensus: robots report at their own cadence, the server
/// runs a round every `round_ms` on the freshness buffer and sends each robot
/// a heading command. Robots turn in place with the tracking controller.
pub fn run_networked_consensus(
    robots: &[RobotConfig],
    world: &World,
    channel: &ChannelModel,
    cfg: &ConsensusConfig,
    seed: u64,
) -> Result<ConsensusOutcome, SwarmError> {
    cfg.validate()?;
    channel.validate()?;
    if robots.is_empty() {
        return Err(SwarmError::Empty);
    }
    let mut ids: Vec<u8> = robots.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != robots.len() {
        return Err(SwarmError::InvalidConfig("robot ids must be unique".into()));
    }
    let mut agents = robots
        .iter()
        .map(|c| {
            Ok(Agent {
                robot: SimRobot::new(c.clone(), seed)?,
                home: c.initial,
                goal: c.initial.theta,
                up: stream(seed, c.id, StreamKind::Uplink),
                down: stream(seed, c.id, StreamKind::Downlink),
            })
        })
        .collect::<Result<Vec<_>, SwarmError>>()?;

    let mut uplink = Channel::new(*channel);
    let mut downlink = Channel::new(*channel);
    let mut buffer = FreshnessBuffer::new();
    let mut out = ConsensusOutcome::default();
    let mut streak = Streak::new(cfg.hold_rounds);
    let gains = Gains::default();
    let round_us = cfg.round_ms * 1000;
    let ctrl_us = 70_000;
    let end_us = cfg.max_rounds * round_us;
    let mut t_us = 0;

    while t_us <= end_us {
        for d in uplink.deliver_due(t_us) {
            let r = decode_frame(&d.event.bytes);
            out.decode.record(&r);
            if let Ok(p) = r {
                buffer.update(p, t_us);
            }
        }
        for d in downlink.deliver_due(t_us) {
            let r = HeadingCommand::decode(&d.event.bytes);
            out.decode.record(&r);
            let Ok(cmd) = r else { continue };
            if let Some(a) = agents.iter_mut().find(|a| a.robot.id() == cmd.robot_id) {
                a.goal = match cfg.command {
                    CommandKind::Target => cmd.target(),
                    CommandKind::Mean => {
                        let th = a.robot.truth().theta;
                        th + cfg.k * (cmd.target() - th)
                    }
                };
            }
        }
        if t_us > 0 && t_us % round_us == 0 {
            let round = t_us / round_us;
            let latest: Vec<_> = agents.iter().filter_map(|a| buffer.latest(a.robot.id())).collect();
            if latest.len() == agents.len() {
                let headings: Vec<f64> = latest.iter().map(|e| e.packet.gyro_rad()).collect();
                out.staleness_warnings += latest
                    .iter()
                    .filter(|e| t_us - e.t_received_us > cfg.stale_after_ms * 1000)
                    .count() as u64;
                let s = SwarmState { headings, round };
                let mean = mean_heading(&s)?;
                let sp = spread(&s.headings);
                let t_s = t_us as f64 * 1e-6;
                for (a, &h) in agents.iter_mut().zip(&s.headings) {
                    let target = match cfg.command {
                        CommandKind::Target => h + cfg.k * (mean - h),
                        CommandKind::Mean => mean,
                    };
                    let cmd = HeadingCommand::new(a.robot.id(), (t_us / 1000) as u32, target);
                    downlink.send(a.robot.id(), &cmd.encode(), t_us, &mut a.down);
                }
                out.trace.push(RoundRecord {
                    t_s,
                    round,
                    headings: s.headings,
                    mean,
                    spread: sp,
                });
                out.final_spread = sp;
                if let Some(start) = streak.push(round, sp < cfg.epsilon) {
                    out.converged = true;
                    out.converged_round = Some(start);
                    out.confirmed_at_s = Some(t_s);
                    break;
                }
            }
        }
        if t_us % ctrl_us == 0 {
            for a in &mut agents {
                let p_c = a.robot.truth();
                let w_r = wrap(a.goal - p_c.theta) / cfg.turn_time;
                let p_r = Posture::new(a.home.x, a.home.y, p_c.theta);
                let u = tracking_control(&p_r, &p_c, 0.0, w_r, &gains, &a.robot.cfg.geometry);
                a.robot.set_command(u);
            }
        }
        for a in &mut agents {
            a.robot.tick(world)?;
            if a.robot.send_due() {
                let p = a.robot.take_packet();
                uplink.send(p.robot_id, &encode_frame(&p), a.robot.time_us(), &mut a.up);
            }
        }
        t_us += TICK_US;
    }
    out.uplink = uplink.stats;
    out.downlink = downlink.stats;
    Ok(out)
}
