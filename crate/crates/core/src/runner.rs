//! Scenario execution. Each application is one deterministic event loop on
//! the 0.5 ms simulation clock; outputs are returned in memory.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comms::{decode_frame, encode_frame, Channel, ChannelStats, DecodeStats, SensorPacket};
use crate::control::{lyapunov_value, reference_at, tracking_control};
use crate::estimation::{dead_reckon, DtSource, Localizer, VelocitySource};
use crate::kinematics::{error_posture, Posture, Twist, WheelSpeeds};
use crate::output::{fmt6, Table};
use crate::planning::{astar, inflate, median_filter, path_points, OccupancyGrid, PlanError};
use crate::scenario::{Application, Feedback, Scenario, ScenarioError, Variant};
use crate::sim::{Actuation, RobotConfig, SimRobot, TICK_US};
use crate::streams::{stream, StreamKind};
use crate::swarm::{run_networked_consensus, run_synchronous, ConsensusConfig, ConsensusMode, ConsensusOutcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("runtime fault: {0}")]
    Fault(String),
}

impl RunError {
    /// Process exit status: 2 for validation problems, 3 for runtime faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(_) => 2,
            RunError::Fault(_) => 3,
        }
    }
}

fn fault(e: impl std::fmt::Display) -> RunError {
    RunError::Fault(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: &str, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingMetrics {
    pub steps: usize,
    pub rmse_mm: f64,
    pub terminal_planar_mm: f64,
    pub terminal_theta_rad: f64,
    pub max_planar_after_settle_mm: f64,
    pub max_theta_after_settle_rad: f64,
    /// Largest step-to-step rise of V after the settle time.
    pub max_v_increase_after_settle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantMetrics {
    pub variant: String,
    pub estimates: usize,
    pub rmse_mm: f64,
    pub terminal_mm: f64,
    pub slip_flagged: usize,
    pub skipped_stale: u64,
    /// Digest of the packet stream this variant consumed.
    pub stream_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationMetrics {
    pub packets_sent: u64,
    pub packets_received: usize,
    pub decode: DecodeStats,
    pub uplink: ChannelStats,
    pub variants: Vec<VariantMetrics>,
}

impl EstimationMetrics {
    pub fn variant(&self, v: Variant) -> Option<&VariantMetrics> {
        self.variants.iter().find(|m| m.variant == v.name())
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["variant", "rmse_mm", "terminal_mm", "estimates", "slip_flagged"]);
        for v in &self.variants {
            t.push(vec![
                v.variant.clone(),
                fmt6(v.rmse_mm),
                fmt6(v.terminal_mm),
                v.estimates.to_string(),
                v.slip_flagged.to_string(),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusMetrics {
    pub robots: usize,
    pub rounds: usize,
    pub converged: bool,
    pub converged_round: Option<u64>,
    pub confirmed_at_s: Option<f64>,
    pub initial_spread: f64,
    pub final_spread: f64,
    pub staleness_warnings: u64,
    pub decode: DecodeStats,
    pub uplink: ChannelStats,
    pub downlink: ChannelStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanningMetrics {
    /// `found`, `no_path` or `invalid_endpoint`.
    pub outcome: String,
    pub cost_cells: Option<f64>,
    pub length_mm: Option<f64>,
    pub min_clearance_mm: Option<f64>,
    pub required_clearance_mm: f64,
    pub margin_mm: f64,
    pub occupied_cells: usize,
    pub free_cells: usize,
    pub unknown_cells: usize,
    pub skipped_readings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub application: Application,
    pub seed: u64,
    pub digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planning: Option<PlanningMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub artifacts: Vec<Artifact>,
}

/// Run the scenario's own application.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput, RunError> {
    run_application(s, s.application, None)
}

/// Run one application of a scenario. `variants` overrides the scenario's
/// estimator list for `Localize`.
pub fn run_application(s: &Scenario, app: Application, variants: Option<&[Variant]>) -> Result<RunOutput, RunError> {
    s.validate()?;
    let started = Instant::now();
    let mut summary = RunSummary {
        scenario: s.name.clone(),
        application: app,
        seed: s.seed,
        digest: s.digest(),
        tracking: None,
        estimation: None,
        consensus: None,
        planning: None,
        wall_clock_s: None,
    };
    let mut artifacts = match app {
        Application::Track => {
            let (m, a) = run_track(s)?;
            summary.tracking = Some(m);
            a
        }
        Application::Localize => {
            let list = variants.unwrap_or(&s.estimation.variants);
            let (m, a) = run_localize(s, list)?;
            summary.estimation = Some(m);
            a
        }
        Application::Consensus => {
            let (m, a) = run_consensus(s)?;
            summary.consensus = Some(m);
            a
        }
        Application::Plan => {
            let (m, a) = run_plan(s)?;
            summary.planning = Some(m);
            a
        }
    };
    let mut bytes = summary.to_json().into_bytes();
    bytes.push(b'\n');
    artifacts.push(Artifact::new("summary.json", bytes));
    summary.wall_clock_s = Some(started.elapsed().as_secs_f64());
    Ok(RunOutput { summary, artifacts })
}

fn end_us(s: &Scenario) -> u64 {
    (s.duration_s * 1e6).round() as u64
}

pub fn run_track(s: &Scenario) -> Result<(TrackingMetrics, Vec<Artifact>), RunError> {
    let cfg = s.robots[0].clone();
    let geom = cfg.geometry.clone();
    let mut robot = SimRobot::new(cfg.clone(), s.seed).map_err(fault)?;
    let traj = s.tracking.trajectory.build(s.duration_s).map_err(fault)?;
    let ctrl_us = s.tracking.control_period_ms * 1000;
    let use_estimate = s.tracking.feedback == Feedback::Estimate;
    let mut uplink = Channel::new(s.channel);
    let mut up_rng = stream(s.seed, cfg.id, StreamKind::Uplink);
    let mut loc = Localizer::new(cfg.initial, s.ekf_config(), geom.clone(), s.estimation.dt_source);

    let mut table = Table::new(&[
        "t", "x_r", "y_r", "theta_r", "x_c", "y_c", "theta_c", "x_e", "y_e", "theta_e", "v1", "v2", "V",
    ]);
    let mut rows: Vec<(f64, Posture, f64)> = Vec::new();
    let end = end_us(s);
    let mut t_us = 0;
    while t_us <= end {
        for d in uplink.deliver_due(t_us) {
            if let Ok(p) = decode_frame(&d.event.bytes) {
                loc.process(&p, t_us).map_err(fault)?;
            }
        }
        if t_us % ctrl_us == 0 {
            let t = t_us as f64 * 1e-6;
            let (p_r, v_r, w_r) = reference_at(&traj, t.min(traj.end())).map_err(fault)?;
            let truth = robot.truth();
            let p_c = if use_estimate { loc.belief().pose() } else { truth };
            let u = tracking_control(&p_r, &p_c, v_r, w_r, &s.gains, &geom);
            robot.set_command(u);
            let e = error_posture(&p_r, &truth);
            let v = lyapunov_value(&e);
            table.push_nums(&[
                t,
                p_r.x,
                p_r.y,
                p_r.theta,
                truth.x,
                truth.y,
                truth.theta,
                e.x,
                e.y,
                e.theta,
                u.v1,
                u.v2,
                v,
            ]);
            rows.push((t, e, v));
        }
        robot.tick(&s.world).map_err(fault)?;
        if robot.send_due() {
            let p = robot.take_packet();
            if use_estimate {
                uplink.send(p.robot_id, &encode_frame(&p), robot.time_us(), &mut up_rng);
            }
        }
        t_us += TICK_US;
    }

    let planar = |e: &Posture| e.x.hypot(e.y);
    let n = rows.len().max(1) as f64;
    let rmse = (rows.iter().map(|(_, e, _)| planar(e).powi(2)).sum::<f64>() / n).sqrt();
    let last = rows.last().map(|r| r.1).unwrap_or_default();
    let settled: Vec<_> = rows.iter().filter(|(t, _, _)| *t > s.tracking.settle_s).collect();
    let max_planar = settled.iter().map(|(_, e, _)| planar(e)).fold(0.0, f64::max);
    let max_theta = settled.iter().map(|(_, e, _)| e.theta.abs()).fold(0.0, f64::max);
    let max_rise = settled
        .windows(2)
        .map(|w| w[1].2 - w[0].2)
        .fold(f64::NEG_INFINITY, f64::max);
    let m = TrackingMetrics {
        steps: rows.len(),
        rmse_mm: rmse,
        terminal_planar_mm: planar(&last),
        terminal_theta_rad: last.theta,
        max_planar_after_settle_mm: max_planar,
        max_theta_after_settle_rad: max_theta,
        max_v_increase_after_settle: max_rise,
    };
    let mut out = Vec::new();
    if s.outputs.trajectory {
        out.push(Artifact::new("trajectory.csv", table.to_bytes()));
    }
    Ok((m, out))
}

/// Packets as the server received them, with the truth at each send time.
struct PacketLog {
    received: Vec<(SensorPacket, u64)>,
    truth: BTreeMap<u32, Posture>,
    sent: u64,
    decode: DecodeStats,
    uplink: ChannelStats,
}

/// Drive one robot along the scenario trajectory on truth feedback and log
/// what reaches the server. The robot stays put until its first report is
/// out, so that report marks the known starting pose.
fn collect_packets(s: &Scenario) -> Result<PacketLog, RunError> {
    let cfg = s.robots[0].clone();
    let geom = cfg.geometry.clone();
    let mut robot = SimRobot::new(cfg.clone(), s.seed).map_err(fault)?;
    let traj = s.tracking.trajectory.build(s.duration_s).map_err(fault)?;
    let ctrl_us = s.tracking.control_period_ms * 1000;
    let mut uplink = Channel::new(s.channel);
    let mut up_rng = stream(s.seed, cfg.id, StreamKind::Uplink);
    let mut log = PacketLog {
        received: Vec::new(),
        truth: BTreeMap::new(),
        sent: 0,
        decode: DecodeStats::default(),
        uplink: ChannelStats::default(),
    };
    let mut first_sent_us: Option<u64> = None;
    let end = end_us(s);
    let mut t_us = 0;
    while t_us <= end {
        for d in uplink.deliver_due(t_us) {
            let r = decode_frame(&d.event.bytes);
            log.decode.record(&r);
            if let Ok(p) = r {
                log.received.push((p, t_us));
            }
        }
        if t_us % ctrl_us == 0 {
            let u = match first_sent_us {
                Some(t0) => {
                    let t = ((t_us - t0) as f64 * 1e-6).min(traj.end());
                    let (p_r, v_r, w_r) = reference_at(&traj, t).map_err(fault)?;
                    tracking_control(&p_r, &robot.truth(), v_r, w_r, &s.gains, &geom)
                }
                None => WheelSpeeds::ZERO,
            };
            robot.set_command(u);
        }
        robot.tick(&s.world).map_err(fault)?;
        if robot.send_due() {
            let p = robot.take_packet();
            log.truth.insert(p.t_sent, robot.truth());
            first_sent_us.get_or_insert(robot.time_us());
            log.sent += 1;
            uplink.send(p.robot_id, &encode_frame(&p), robot.time_us(), &mut up_rng);
        }
        t_us += TICK_US;
    }
    log.uplink = uplink.stats;
    Ok(log)
}

struct EstimateRow {
    t_ms: u32,
    pose: Posture,
    vel: Option<([f64; 2], [f64; 5], bool)>,
}

fn run_variant(s: &Scenario, v: Variant, log: &PacketLog) -> Result<(Vec<EstimateRow>, String, usize, u64), RunError> {
    let cfg = &s.robots[0];
    let initial = cfg.initial;
    let mut hasher = Sha256::new();
    for (p, rx) in &log.received {
        hasher.update(p.payload());
        hasher.update(rx.to_le_bytes());
    }
    let digest = hex::encode(hasher.finalize());
    let ekf = s.ekf_config();
    let filter = match v {
        Variant::Adaptive => Some((ekf, s.estimation.dt_source)),
        Variant::NonAdaptive => Some((ekf.non_adaptive(), s.estimation.dt_source)),
        Variant::FixedDt => Some((ekf, DtSource::Fixed(s.estimation.fixed_dt_s))),
        Variant::ReceiveTime => Some((ekf, DtSource::ReceiveTime)),
        Variant::EncoderDr | Variant::FlowDr => None,
    };
    let mut rows = Vec::new();
    if let Some((ekf, dt)) = filter {
        let mut loc = Localizer::new(initial, ekf, cfg.geometry.clone(), dt);
        let mut slips = 0;
        for (p, rx) in &log.received {
            if let Some(r) = loc.process(p, *rx).map_err(fault)? {
                slips += r.slip as usize;
                rows.push(EstimateRow {
                    t_ms: r.t_ms,
                    pose: r.pose(),
                    vel: Some(([r.mean[3], r.mean[4]], r.cov_diag, r.slip)),
                });
            }
        }
        return Ok((rows, digest, slips, loc.stale));
    }
    // dead reckoning needs strictly increasing timestamps: drop late arrivals
    let mut fresh: Vec<SensorPacket> = Vec::new();
    let mut stale = 0;
    for (p, _) in &log.received {
        match fresh.last() {
            Some(last) if p.t_sent <= last.t_sent => stale += 1,
            _ => fresh.push(*p),
        }
    }
    let src = if v == Variant::EncoderDr {
        VelocitySource::Encoders
    } else {
        VelocitySource::Flow
    };
    let trace = dead_reckon(&fresh, src, &cfg.geometry, initial).map_err(fault)?;
    rows.extend(
        trace
            .into_iter()
            .skip(1)
            .map(|(t_ms, pose)| EstimateRow { t_ms, pose, vel: None }),
    );
    Ok((rows, digest, 0, stale))
}

pub fn run_localize(s: &Scenario, variants: &[Variant]) -> Result<(EstimationMetrics, Vec<Artifact>), RunError> {
    let log = collect_packets(s)?;
    let mut table = Table::new(&[
        "variant",
        "t",
        "x",
        "y",
        "theta",
        "v",
        "w",
        "var_x",
        "var_y",
        "var_theta",
        "var_v",
        "var_w",
        "slip",
        "x_true",
        "y_true",
        "theta_true",
        "err",
    ]);
    let mut metrics = Vec::new();
    for &v in variants {
        let (rows, digest, slips, stale) = run_variant(s, v, &log)?;
        let mut sq = 0.0;
        let mut terminal = f64::NAN;
        for r in &rows {
            let truth = log
                .truth
                .get(&r.t_ms)
                .copied()
                .ok_or_else(|| fault("estimate without a matching report"))?;
            let err = r.pose.distance_to(&truth);
            sq += err * err;
            terminal = err;
            let mut row = vec![v.name().to_string(), fmt6(r.t_ms as f64 * 1e-3)];
            row.extend([r.pose.x, r.pose.y, r.pose.theta].map(fmt6));
            match r.vel {
                Some((vw, cov, slip)) => {
                    row.extend(vw.map(fmt6));
                    row.extend(cov.map(fmt6));
                    row.push((slip as u8).to_string());
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("0".into());
                }
            }
            row.extend([truth.x, truth.y, truth.theta, err].map(fmt6));
            table.push(row);
        }
        metrics.push(VariantMetrics {
            variant: v.name().into(),
            estimates: rows.len(),
            rmse_mm: (sq / rows.len().max(1) as f64).sqrt(),
            terminal_mm: terminal,
            slip_flagged: slips,
            skipped_stale: stale,
            stream_digest: digest,
        });
    }
    let mut truth = Table::new(&["t", "x", "y", "theta"]);
    for (t, p) in &log.truth {
        truth.push_nums(&[*t as f64 * 1e-3, p.x, p.y, p.theta]);
    }
    let m = EstimationMetrics {
        packets_sent: log.sent,
        packets_received: log.received.len(),
        decode: log.decode,
        uplink: log.uplink,
        variants: metrics,
    };
    let mut out = Vec::new();
    if s.outputs.estimates {
        out.push(Artifact::new("estimates.csv", table.to_bytes()));
        out.push(Artifact::new("truth.csv", truth.to_bytes()));
    }
    Ok((m, out))
}

pub fn run_consensus(s: &Scenario) -> Result<(ConsensusMetrics, Vec<Artifact>), RunError> {
    let robots = s.robot_configs();
    let initial: Vec<f64> = robots.iter().map(|r| r.initial.theta).collect();
    let out: ConsensusOutcome = match s.consensus.mode {
        ConsensusMode::Synchronous => run_synchronous(&initial, &s.consensus).map_err(fault)?,
        ConsensusMode::Networked => {
            // the scenario duration bounds simulated time
            let rounds = (end_us(s) / (s.consensus.round_ms * 1000)).max(1);
            let cfg = ConsensusConfig {
                max_rounds: s.consensus.max_rounds.min(rounds),
                ..s.consensus.clone()
            };
            run_networked_consensus(&robots, &s.world, &s.channel, &cfg, s.seed).map_err(fault)?
        }
    };
    let mut header = vec!["t".to_string(), "round".to_string()];
    header.extend(robots.iter().map(|r| format!("theta_{}", r.id)));
    header.extend(["theta_m".to_string(), "spread".to_string()]);
    let mut table = Table::new(&header);
    for r in &out.trace {
        let mut row = vec![fmt6(r.t_s), r.round.to_string()];
        row.extend(r.headings.iter().map(|h| fmt6(*h)));
        row.extend([fmt6(r.mean), fmt6(r.spread)]);
        table.push(row);
    }
    let m = ConsensusMetrics {
        robots: robots.len(),
        rounds: out.trace.len(),
        converged: out.converged,
        converged_round: out.converged_round,
        confirmed_at_s: out.confirmed_at_s,
        initial_spread: crate::swarm::spread(&initial),
        final_spread: out.final_spread,
        staleness_warnings: out.staleness_warnings,
        decode: out.decode,
        uplink: out.uplink,
        downlink: out.downlink,
    };
    let mut arts = Vec::new();
    if s.outputs.consensus {
        arts.push(Artifact::new("consensus.csv", table.to_bytes()));
    }
    Ok((m, arts))
}

/// Map the world by spinning a robot in place at each survey point and
/// folding its IR scans into a grid, using the true pose.
pub fn survey_map(s: &Scenario) -> Result<OccupancyGrid, RunError> {
    let base = &s.robots[0];
    let p = &s.planning;
    let mut grid = OccupancyGrid::new(p.grid.clone()).map_err(fault)?;
    let spin = base.geometry.twist_to_wheels(Twist::new(0.0, p.spin_rate));
    let spin_us = (TAU / p.spin_rate * 1e6).ceil() as u64;
    let ir_period = base.rates.periods_us()[2];
    for (i, pt) in p.survey.iter().enumerate() {
        let cfg = RobotConfig {
            id: i as u8,
            initial: Posture::new(pt[0], pt[1], 0.0),
            actuation: Actuation::Ideal,
            ..base.clone()
        };
        let mut robot = SimRobot::new(cfg.clone(), s.seed).map_err(fault)?;
        robot.set_command(spin);
        let mut last_ir = 0;
        while robot.time_us() < spin_us {
            robot.tick(&s.world).map_err(fault)?;
            // same due test the robot uses for its IR sampling
            if robot.time_us() >= last_ir + ir_period {
                last_ir = robot.time_us();
                grid.ingest_ir_scan(&robot.truth(), &robot.latest_ir(), &cfg.geometry);
            }
        }
    }
    Ok(grid)
}

/// Smallest obstacle clearance along the polyline, sampled every tenth of a cell.
pub fn polyline_clearance(s: &Scenario, pts: &[(f64, f64)], step: f64) -> f64 {
    let mut min = f64::INFINITY;
    for w in pts
        .windows(2)
        .chain(std::iter::once(&pts[pts.len().saturating_sub(1)..]))
    {
        let a = w[0];
        let b = *w.last().expect("non-empty window");
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            let f = k as f64 / n as f64;
            min = min.min(s.world.clearance(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
        }
    }
    min
}

pub fn run_plan(s: &Scenario) -> Result<(PlanningMetrics, Vec<Artifact>), RunError> {
    let p = &s.planning;
    let geom = &s.robots[0].geometry;
    let margin = p.margin_mm.unwrap_or(geom.body_radius + 20.0);
    let raw = survey_map(s)?;
    let filtered = median_filter(&raw, p.median_window, p.median_shape).map_err(fault)?;
    let inflated = inflate(&filtered, margin).map_err(fault)?;
    let cell = |xy: [f64; 2]| {
        inflated
            .cell_of(xy[0], xy[1])
            .ok_or_else(|| RunError::Scenario(ScenarioError::Invalid(format!("planning point {xy:?} outside grid"))))
    };
    let (start, goal) = (cell(p.start)?, cell(p.goal)?);
    let rho = p.grid.resolution;
    let mut m = PlanningMetrics {
        outcome: String::new(),
        cost_cells: None,
        length_mm: None,
        min_clearance_mm: None,
        required_clearance_mm: geom.body_radius - rho,
        margin_mm: margin,
        occupied_cells: inflated.count(crate::planning::CellState::Occupied),
        free_cells: inflated.count(crate::planning::CellState::Free),
        unknown_cells: inflated.count(crate::planning::CellState::Unknown),
        skipped_readings: raw.skipped,
    };
    let mut path_table = Table::new(&["i", "cell_x", "cell_y", "x", "y", "clearance"]);
    match astar(&inflated, start, goal) {
        Ok(path) => {
            let pts = path_points(&inflated, &path);
            m.outcome = "found".into();
            m.cost_cells = Some(path.cost());
            m.length_mm = Some(path.cost() * rho);
            m.min_clearance_mm = Some(polyline_clearance(s, &pts, rho / 10.0));
            for (i, (c, xy)) in path.cells.iter().zip(&pts).enumerate() {
                path_table.push(vec![
                    i.to_string(),
                    c.0.to_string(),
                    c.1.to_string(),
                    fmt6(xy.0),
                    fmt6(xy.1),
                    fmt6(s.world.clearance(xy.0, xy.1)),
                ]);
            }
        }
        Err(PlanError::NoPath) => m.outcome = "no_path".into(),
        Err(PlanError::InvalidEndpoint(..)) => m.outcome = "invalid_endpoint".into(),
        Err(e) => return Err(fault(e)),
    }
    let mut out = Vec::new();
    if s.outputs.map {
        out.push(Artifact::new("map.pgm", filtered.to_pgm()));
        out.push(Artifact::new("map.txt", filtered.header().into_bytes()));
        out.push(Artifact::new("map_inflated.pgm", inflated.to_pgm()));
        out.push(Artifact::new("map_inflated.txt", inflated.header().into_bytes()));
    }
    if s.outputs.path {
        out.push(Artifact::new("path.csv", path_table.to_bytes()));
    }
    Ok((m, out))
}
