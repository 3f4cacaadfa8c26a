use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plant::{step_plant, wheel_pi_step, Actuation, PlantState, SlipSchedule};
use super::sensors::{
    sample_gyro_heading, sample_ir, sample_optical_flow, EncoderSampler, IrReading, SensorNoise, SensorRates,
};
use super::world::World;
use super::SimError;
use crate::comms::{heading_to_mrad, SensorPacket, IR_NONE};
use crate::kinematics::{Posture, RobotGeometry, WheelSpeeds};
use crate::streams::{stream, StreamKind, StreamRng};

/// Simulation clock tick (µs).
pub const TICK_US: u64 = 500;

/// Interval between sensor reports, drawn uniformly in whole ms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SendSchedule {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl Default for SendSchedule {
    fn default() -> Self {
        SendSchedule { min_ms: 70, max_ms: 70 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub id: u8,
    pub initial: Posture,
    pub geometry: RobotGeometry,
    pub noise: SensorNoise,
    pub rates: SensorRates,
    pub actuation: Actuation,
    pub slip: SlipSchedule,
    pub send: SendSchedule,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            id: 0,
            initial: Posture::default(),
            geometry: RobotGeometry::default(),
            noise: SensorNoise::default(),
            rates: SensorRates::default(),
            actuation: Actuation::default(),
            slip: SlipSchedule::none(),
            send: SendSchedule::default(),
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.geometry.validate()?;
        self.noise.validate()?;
        self.slip.validate()?;
        let r = &self.rates;
        for hz in [r.encoder_hz, r.flow_hz, r.ir_hz] {
            if !(hz > 0.0 && hz <= 2000.0) {
                return Err(SimError::InvalidRobot(format!("sensor rate {hz} Hz outside (0, 2000]")));
            }
        }
        if self.send.min_ms == 0 || self.send.min_ms > self.send.max_ms {
            return Err(SimError::InvalidRobot("need 0 < send.min_ms <= send.max_ms".into()));
        }
        if let Actuation::PiLoop(g) = self.actuation {
            if !(g.kp >= 0.0 && g.ki >= 0.0 && g.tau > 0.0) {
                return Err(SimError::InvalidRobot("PI gains must be >= 0 and tau > 0".into()));
            }
        }
        Ok(())
    }
}

/// One simulated robot: plant, sensor schedule and on-board counters.
#[derive(Debug, Clone)]
pub struct SimRobot {
    pub cfg: RobotConfig,
    plant: PlantState,
    encoder: EncoderSampler,
    enc_prev: PlantState,
    flow_prev: PlantState,
    ir_last_us: u64,
    periods_us: [u64; 3],
    ticks: (i64, i64),
    flow_mm: (f64, f64),
    ir: [IrReading; 5],
    next_send_us: u64,
    rng_enc: StreamRng,
    rng_flow: StreamRng,
    rng_gyro: StreamRng,
    rng_ir: StreamRng,
    rng_send: StreamRng,
}

impl SimRobot {
    pub fn new(cfg: RobotConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let plant = PlantState::at(cfg.initial);
        let id = cfg.id;
        let mut r = SimRobot {
            periods_us: cfg.rates.periods_us(),
            cfg,
            plant,
            encoder: EncoderSampler::new(),
            enc_prev: plant,
            flow_prev: plant,
            ir_last_us: 0,
            ticks: (0, 0),
            flow_mm: (0.0, 0.0),
            ir: [IrReading::OutOfRange; 5],
            next_send_us: 0,
            rng_enc: stream(seed, id, StreamKind::Encoder),
            rng_flow: stream(seed, id, StreamKind::Flow),
            rng_gyro: stream(seed, id, StreamKind::Gyro),
            rng_ir: stream(seed, id, StreamKind::Ir),
            rng_send: stream(seed, id, StreamKind::Send),
        };
        r.next_send_us = r.draw_send_interval();
        Ok(r)
    }

    pub fn id(&self) -> u8 {
        self.cfg.id
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn truth(&self) -> Posture {
        self.plant.truth
    }

    pub fn time_us(&self) -> u64 {
        self.plant.time_us
    }

    /// Cumulative (left, right) encoder ticks.
    pub fn ticks(&self) -> (i64, i64) {
        self.ticks
    }

    /// Wheel command, clamped per wheel to `±v_max`.
    pub fn set_command(&mut self, u: WheelSpeeds) {
        self.plant.wheel_command = u.clamped(self.cfg.geometry.v_max);
    }

    /// Advance by one [`TICK_US`], sampling any sensors that fall due.
    pub fn tick(&mut self, world: &World) -> Result<(), SimError> {
        let dt = TICK_US as f64 * 1e-6;
        let v_max = self.cfg.geometry.v_max;
        let mut s = match self.cfg.actuation {
            Actuation::Ideal => PlantState {
                wheel_actual: self.plant.wheel_command,
                ..self.plant
            },
            Actuation::PiLoop(g) => wheel_pi_step(&self.plant, &g, v_max, dt)?,
        };
        s = step_plant(&s, &self.cfg.slip, &self.cfg.geometry, dt)?;
        self.plant = s;
        let [enc_p, flow_p, ir_p] = self.periods_us;
        let now = s.time_us;
        if now >= self.enc_prev.time_us + enc_p {
            let t = self.encoder.sample(
                &self.enc_prev,
                &s,
                &self.cfg.geometry,
                self.cfg.noise.encoder_sigma,
                &mut self.rng_enc,
            );
            self.ticks.0 += t.left;
            self.ticks.1 += t.right;
            self.enc_prev = s;
        }
        if now >= self.flow_prev.time_us + flow_p {
            let f = sample_optical_flow(
                &self.flow_prev,
                &s,
                &self.cfg.geometry,
                &self.cfg.noise,
                &mut self.rng_flow,
            );
            self.flow_mm.0 += f.dx_left;
            self.flow_mm.1 += f.dx_right;
            self.flow_prev = s;
        }
        if now >= self.ir_last_us + ir_p {
            self.ir = sample_ir(&s.truth, world, &self.cfg.geometry, &self.cfg.noise, &mut self.rng_ir);
            self.ir_last_us = now;
        }
        Ok(())
    }

    pub fn send_due(&self) -> bool {
        self.plant.time_us >= self.next_send_us
    }

    fn draw_send_interval(&mut self) -> u64 {
        let s = self.cfg.send;
        let ms = if s.max_ms > s.min_ms {
            self.rng_send.random_range(s.min_ms..=s.max_ms)
        } else {
            s.min_ms
        };
        ms * 1000
    }

    /// Build the report for the current instant and schedule the next one.
    pub fn take_packet(&mut self) -> SensorPacket {
        self.next_send_us += self.draw_send_interval();
        let gyro = sample_gyro_heading(&self.plant, &self.cfg.noise, &mut self.rng_gyro);
        // counters wrap at the i16 range on the wire
        let ir = self.ir.map(|r| match r.range() {
            Some(d) => d.round().clamp(0.0, (IR_NONE - 1) as f64) as u16,
            None => IR_NONE,
        });
        SensorPacket {
            robot_id: self.cfg.id,
            t_sent: self.plant.time_ms() as u32,
            ticks_l: self.ticks.0 as i16,
            ticks_r: self.ticks.1 as i16,
            flow_dx_l: (self.flow_mm.0 * 10.0).round() as i64 as i16,
            flow_dx_r: (self.flow_mm.1 * 10.0).round() as i64 as i16,
            gyro_heading: heading_to_mrad(gyro),
            ir,
        }
    }

    pub fn latest_ir(&self) -> [IrReading; 5] {
        self.ir
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{integrate_unicycle, wheels_to_twist};
    use crate::sim::Rect;
    use approx::assert_abs_diff_eq;

    fn quiet(actuation: Actuation) -> RobotConfig {
        RobotConfig {
            noise: SensorNoise::noiseless(),
            actuation,
            ..Default::default()
        }
    }

    fn run(r: &mut SimRobot, world: &World, ms: u64) -> Vec<SensorPacket> {
        let mut out = Vec::new();
        for _ in 0..ms * 1000 / TICK_US {
            r.tick(world).unwrap();
            if r.send_due() {
                out.push(r.take_packet());
            }
        }
        out
    }

    #[test]
    fn ideal_drive_matches_closed_form() {
        let mut r = SimRobot::new(quiet(Actuation::Ideal), 1).unwrap();
        let u = WheelSpeeds::new(120.0, 80.0);
        r.set_command(u);
        run(&mut r, &World::default(), 2000);
        let g = RobotGeometry::default();
        let expect = integrate_unicycle(Posture::default(), wheels_to_twist(u, &g), 2.0).unwrap();
        assert_abs_diff_eq!(r.truth().x, expect.x, epsilon = 1e-6);
        assert_abs_diff_eq!(r.truth().y, expect.y, epsilon = 1e-6);
        assert_abs_diff_eq!(r.truth().theta, expect.theta, epsilon = 1e-9);
    }

    #[test]
    fn schedule_follows_default_rates() {
        let mut r = SimRobot::new(quiet(Actuation::Ideal), 1).unwrap();
        r.set_command(WheelSpeeds::new(100.0, 100.0));
        let mut enc_samples = 0;
        let mut last = r.enc_prev.time_us;
        for _ in 0..2000 {
            r.tick(&World::default()).unwrap();
            if r.enc_prev.time_us != last {
                enc_samples += 1;
                last = r.enc_prev.time_us;
            }
        }
        // one second at 400 Hz
        assert_eq!(enc_samples, 400);
        assert_eq!(r.periods_us, [2500, 1000, 40000]);
    }

    #[test]
    fn packets_every_70ms_with_counters() {
        let mut r = SimRobot::new(quiet(Actuation::Ideal), 1).unwrap();
        r.set_command(WheelSpeeds::new(100.0, 100.0));
        let pk = run(&mut r, &World::default(), 700);
        assert_eq!(pk.len(), 10);
        let times: Vec<u32> = pk.iter().map(|p| p.t_sent).collect();
        assert_eq!(times, (1..=10).map(|k| 70 * k).collect::<Vec<_>>());
        // 70 mm of travel: 140 ticks and 700 flow units per side
        assert!((pk[9].ticks_l as i32 - 140).abs() <= 1);
        assert!((pk[9].flow_dx_r as i32 - 700).abs() <= 1);
    }

    #[test]
    fn stuck_wheels_tick_but_flow_stays_put() {
        let mut cfg = quiet(Actuation::Ideal);
        cfg.slip = SlipSchedule::stuck(0, 10_000);
        let mut r = SimRobot::new(cfg, 1).unwrap();
        r.set_command(WheelSpeeds::new(100.0, 100.0));
        let pk = run(&mut r, &World::default(), 1000);
        let last = pk.last().unwrap();
        assert!(last.ticks_l > 100);
        assert_eq!(last.flow_dx_l, 0);
        assert_eq!(r.truth(), Posture::default());
    }

    #[test]
    fn dead_reckoning_reproduces_truth_without_noise() {
        let mut r = SimRobot::new(quiet(Actuation::default()), 3).unwrap();
        let g = RobotGeometry::default();
        let (mut enc, mut flow) = (Posture::default(), Posture::default());
        let (mut pt, mut pf) = ((0i64, 0i64), (0.0f64, 0.0f64));
        for k in 0..20_000 {
            // 10 s, slowly varying command
            let s = k as f64 * 5e-4;
            r.set_command(WheelSpeeds::new(
                100.0 + 60.0 * (0.7 * s).sin(),
                100.0 - 50.0 * (0.4 * s).cos(),
            ));
            r.tick(&World::default()).unwrap();
            if r.ticks != pt {
                let dl = (r.ticks.0 - pt.0) as f64 * g.mm_per_tick;
                let dr = (r.ticks.1 - pt.1) as f64 * g.mm_per_tick;
                enc = step_displacement(enc, dl, dr, g.wheel_base);
                pt = r.ticks;
            }
            if r.flow_mm != pf {
                let dl = r.flow_mm.0 - pf.0;
                let dr = r.flow_mm.1 - pf.1;
                flow = step_displacement(flow, dl, dr, g.flow_sensor_separation);
                pf = r.flow_mm;
            }
        }
        let t = r.truth();
        assert!(enc.distance_to(&t) < 0.5, "encoder drift {}", enc.distance_to(&t));
        assert!(flow.distance_to(&t) < 0.5, "flow drift {}", flow.distance_to(&t));
    }

    fn step_displacement(p: Posture, dl: f64, dr: f64, base: f64) -> Posture {
        let t = crate::kinematics::Twist::new(0.5 * (dl + dr), (dr - dl) / base);
        integrate_unicycle(p, t, 1.0).unwrap()
    }

    #[test]
    fn ir_sees_wall_at_25hz() {
        let world = World {
            bounds: Rect::new(-2000.0, -2000.0, 600.0, 2000.0),
            ..Default::default()
        };
        let mut r = SimRobot::new(quiet(Actuation::Ideal), 1).unwrap();
        let pk = run(&mut r, &world, 140);
        assert_eq!(pk[0].ir[2], 600);
        assert_eq!(pk[0].ir_mm(2), Some(600.0));
    }

    #[test]
    fn jittered_send_intervals_stay_in_band() {
        let mut cfg = quiet(Actuation::Ideal);
        cfg.send = SendSchedule {
            min_ms: 50,
            max_ms: 100,
        };
        let mut r = SimRobot::new(cfg, 9).unwrap();
        let pk = run(&mut r, &World::default(), 5000);
        let gaps: Vec<u32> = pk.windows(2).map(|w| w[1].t_sent - w[0].t_sent).collect();
        assert!(gaps.iter().all(|g| (50..=100).contains(g)));
        assert!(gaps.iter().any(|g| *g != gaps[0]));
    }

    #[test]
    fn same_seed_same_packets() {
        let cfg = RobotConfig::default();
        let mut a = SimRobot::new(cfg.clone(), 5).unwrap();
        let mut b = SimRobot::new(cfg, 5).unwrap();
        a.set_command(WheelSpeeds::new(150.0, 90.0));
        b.set_command(WheelSpeeds::new(150.0, 90.0));
        assert_eq!(
            run(&mut a, &World::default(), 1000),
            run(&mut b, &World::default(), 1000)
        );
    }
}
