use super::EstimationError;
use crate::comms::SensorPacket;
use crate::kinematics::RobotGeometry;

/// Body velocities implied by two consecutive reports.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityMeasurement {
    pub v_enc: f64,
    pub w_enc: f64,
    pub v_flow: f64,
    pub w_flow: f64,
    pub theta_gyro: f64,
    /// s
    pub dt: f64,
}

/// Convert counter deltas into velocities using the sender timestamps.
pub fn measurement_from_packets(
    prev: &SensorPacket,
    curr: &SensorPacket,
    geom: &RobotGeometry,
) -> Result<VelocityMeasurement, EstimationError> {
    if curr.t_sent <= prev.t_sent {
        return Err(EstimationError::StaleData {
            prev: prev.t_sent,
            curr: curr.t_sent,
        });
    }
    let dt = (curr.t_sent - prev.t_sent) as f64 * 1e-3;
    measurement_over(prev, curr, geom, dt)
}

/// Same conversion with an externally supplied interval.
pub fn measurement_over(
    prev: &SensorPacket,
    curr: &SensorPacket,
    geom: &RobotGeometry,
    dt: f64,
) -> Result<VelocityMeasurement, EstimationError> {
    if !(dt > 0.0) {
        return Err(EstimationError::BadDt(dt));
    }
    let dl = curr.ticks_l.wrapping_sub(prev.ticks_l) as f64 * geom.mm_per_tick;
    let dr = curr.ticks_r.wrapping_sub(prev.ticks_r) as f64 * geom.mm_per_tick;
    let fl = curr.flow_dx_l.wrapping_sub(prev.flow_dx_l) as f64 * 0.1;
    let fr = curr.flow_dx_r.wrapping_sub(prev.flow_dx_r) as f64 * 0.1;
    Ok(VelocityMeasurement {
        v_enc: (dl + dr) / (2.0 * dt),
        w_enc: (dr - dl) / (geom.wheel_base * dt),
        v_flow: (fl + fr) / (2.0 * dt),
        w_flow: (fr - fl) / (geom.flow_sensor_separation * dt),
        theta_gyro: curr.gyro_rad(),
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pkt(t: u32, ticks: (i16, i16), flow: (i16, i16)) -> SensorPacket {
        SensorPacket {
            t_sent: t,
            ticks_l: ticks.0,
            ticks_r: ticks.1,
            flow_dx_l: flow.0,
            flow_dx_r: flow.1,
            ..Default::default()
        }
    }

    #[test]
    fn examples() {
        let g = RobotGeometry::default();
        let m = measurement_from_packets(&pkt(0, (0, 0), (0, 0)), &pkt(70, (28, 28), (7, 7)), &g).unwrap();
        assert_abs_diff_eq!(m.v_enc, 200.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.w_enc, 0.0);
        assert_abs_diff_eq!(m.v_flow, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.w_flow, 0.0);
        assert_abs_diff_eq!(m.dt, 0.07);
        let same = measurement_from_packets(&pkt(70, (0, 0), (0, 0)), &pkt(70, (1, 1), (0, 0)), &g);
        assert_eq!(same, Err(EstimationError::StaleData { prev: 70, curr: 70 }));
    }

    #[test]
    fn rotation_and_counter_wrap() {
        let g = RobotGeometry::default();
        // right wheel crosses the i16 limit; left runs backwards
        let a = pkt(100, (-10, i16::MAX - 9), (-30, 30));
        let b = pkt(200, (-30, i16::MIN + 10), (-60, 60));
        let m = measurement_from_packets(&a, &b, &g).unwrap();
        // dl = -10 mm, dr = +10 mm over 0.1 s
        assert_abs_diff_eq!(m.v_enc, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.w_enc, 20.0 / (100.0 * 0.1), epsilon = 1e-9);
        assert_abs_diff_eq!(m.w_flow, 6.0 / (60.0 * 0.1), epsilon = 1e-9);
    }
}
