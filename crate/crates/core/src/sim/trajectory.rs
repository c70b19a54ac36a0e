use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{HoverConfig, MissionConfig};
use super::rng::{stream, Stream};
use crate::error::{Error, Result};
use crate::geom::{gravity_ned, wrap_pi, Mat3, Quaternion, Vec3};

/// One truth epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    /// s
    pub t: f64,
    /// NED, m
    pub p: Vec3,
    /// NED, m/s
    pub v: Vec3,
    /// body to NED
    pub q: Quaternion,
    /// body angular rate averaged over the interval ending at `t`, rad/s
    pub rate: Vec3,
    /// body specific force averaged over the interval ending at `t`, m/s^2
    pub specific_force: Vec3,
}

/// Uniformly sampled, kinematically consistent truth.
///
/// Positions are the trapezoidal integral of the sampled velocity, and the
/// interval-averaged rate and specific force reproduce the next attitude and
/// velocity exactly under the strapdown update, so a noise-free IMU replay
/// tracks the truth to rounding error.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrajectory {
    pub rate_hz: f64,
    pub samples: Vec<TruthSample>,
}

/// Velocity, acceleration and heading at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub v: Vec3,
    pub a: Vec3,
    pub yaw: f64,
}

/// Attitude of a multirotor whose thrust axis (body -z) carries the required
/// specific force, with the nose pointed at `yaw`.
pub fn thrust_aligned_attitude(accel: &Vec3, yaw: f64) -> Quaternion {
    let f = accel - gravity_ned();
    let z = -f.normalize();
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let y = z.cross(&heading).normalize();
    let x = y.cross(&z);
    Quaternion::from_rotation_matrix(&Mat3::from_columns(&[x, y, z]))
}

impl TruthTrajectory {
    /// Samples `profile` at `rate_hz` over `[0, duration]`, starting at `p0`.
    pub fn from_profile(
        rate_hz: f64,
        duration: f64,
        p0: Vec3,
        profile: impl Fn(f64) -> Kinematics,
    ) -> Self {
        let dt = 1.0 / rate_hz;
        let n = (duration * rate_hz + 1e-9).floor() as usize + 1;
        let mut samples: Vec<TruthSample> = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * dt;
            let kin = profile(t);
            let q = thrust_aligned_attitude(&kin.a, kin.yaw);
            let sample = match samples.last() {
                None => TruthSample {
                    t,
                    p: p0,
                    v: kin.v,
                    q,
                    rate: Vec3::zeros(),
                    specific_force: q.inverse_rotate(&(kin.a - gravity_ned())),
                },
                Some(prev) => {
                    let q = if prev.q.to_vector().dot(&q.to_vector()) < 0.0 {
                        Quaternion::from_vector(&-q.to_vector())
                    } else {
                        q
                    };
                    let dtheta = (prev.q.conjugate() * q).to_rotation_vector();
                    let dv = q.inverse_rotate(&(kin.v - prev.v - gravity_ned() * dt));
                    TruthSample {
                        t,
                        p: prev.p + (prev.v + kin.v) * (0.5 * dt),
                        v: kin.v,
                        q,
                        rate: dtheta / dt,
                        specific_force: dv / dt,
                    }
                }
            };
            samples.push(sample);
        }
        Self { rate_hz, samples }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Index of the sample at time `t` (nearest grid point).
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let last = self.duration();
        let half = 0.5 * self.dt();
        if !(t >= -half && t <= last + half) {
            return Err(Error::Range(format!(
                "time {t} s outside trajectory span [0, {last}] s"
            )));
        }
        Ok(((t * self.rate_hz).round() as usize).min(self.len() - 1))
    }

    pub fn at(&self, t: f64) -> Result<&TruthSample> {
        Ok(&self.samples[self.index_at(t)?])
    }
}

/// Smooth 0 -> 1 transition over `[t0, t0 + len]` with value, first and
/// second derivative.
fn smoothstep(t: f64, t0: f64, len: f64) -> (f64, f64, f64) {
    if len <= 0.0 {
        return if t >= t0 {
            (1.0, 0.0, 0.0)
        } else {
            (0.0, 0.0, 0.0)
        };
    }
    let u = (t - t0) / len;
    if u <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s = u * u * u * (u * (u * 6.0 - 15.0) + 10.0);
        let ds = 30.0 * u * u * (u - 1.0) * (u - 1.0) / len;
        let dds = 60.0 * u * (2.0 * u * u - 3.0 * u + 1.0) / (len * len);
        (s, ds, dds)
    }
}

/// Band-limited station-keeping error: a random sum of sinusoids per axis.
#[derive(Debug, Clone)]
struct Dither {
    /// per axis: (amplitude, angular frequency, phase)
    terms: [Vec<(f64, f64, f64)>; 3],
}

const DITHER_TERMS: usize = 12;

impl Dither {
    fn new(std_h: f64, bandwidth: f64, rng: &mut Stream) -> Self {
        let mut axis = |std: f64| {
            let amp = std * (2.0 / DITHER_TERMS as f64).sqrt();
            (0..DITHER_TERMS)
                .map(|_| {
                    let f = rng.random_range(0.1 * bandwidth..=bandwidth);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    (amp, 2.0 * PI * f, phase)
                })
                .collect::<Vec<_>>()
        };
        let n = axis(std_h);
        let e = axis(std_h);
        let d = axis(0.5 * std_h);
        Self { terms: [n, e, d] }
    }

    /// Offset, velocity and acceleration at `t`.
    fn eval(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let mut out = (Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
        for (i, terms) in self.terms.iter().enumerate() {
            for &(a, w, ph) in terms {
                let (s, c) = (w * t + ph).sin_cos();
                out.0[i] += a * s;
                out.1[i] += a * w * c;
                out.2[i] -= a * w * w * s;
            }
        }
        out
    }
}

/// Hover over `hold` with a smoothly ramped-in position dither.
pub fn hover_trajectory(
    duration: f64,
    hold: Vec3,
    config: &HoverConfig,
    rate_hz: f64,
    seed: u64,
) -> Result<TruthTrajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "hover duration must be positive, got {duration}"
        )));
    }
    let mut rng = stream(seed, "dither");
    let dither = Dither::new(config.dither_std, config.dither_bandwidth, &mut rng);
    let start = config.settle_time;
    let ramp = config.dither_ramp;
    // the dither is applied relative to its value at the start of the ramp so
    // the position stays continuous
    let (d0, _, _) = dither.eval(start);
    let enabled = config.dither_std > 0.0;
    Ok(TruthTrajectory::from_profile(
        rate_hz,
        duration,
        hold,
        |t| {
            if !enabled {
                return Kinematics {
                    v: Vec3::zeros(),
                    a: Vec3::zeros(),
                    yaw: 0.0,
                };
            }
            let (e, de, dde) = smoothstep(t, start, ramp);
            let (s, ds, dds) = dither.eval(t);
            let s = s - d0;
            Kinematics {
                v: s * de + ds * e,
                a: s * dde + ds * (2.0 * de) + dds * e,
                yaw: 0.0,
            }
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Hold {
        yaw: f64,
    },
    Line {
        dir: Vec3,
        speed: f64,
        ramp: f64,
        yaw: f64,
    },
    Turn {
        yaw0: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    start: f64,
    duration: f64,
    phase: Phase,
}

impl Span {
    fn eval(&self, t: f64) -> Kinematics {
        let tau = (t - self.start).clamp(0.0, self.duration);
        let still = |yaw| Kinematics {
            v: Vec3::zeros(),
            a: Vec3::zeros(),
            yaw,
        };
        match self.phase {
            Phase::Hold { yaw } => still(yaw),
            Phase::Line {
                dir,
                speed,
                ramp,
                yaw,
            } => {
                let w = PI / ramp;
                let (v, a) = if tau < ramp {
                    (
                        0.5 * speed * (1.0 - (w * tau).cos()),
                        0.5 * speed * w * (w * tau).sin(),
                    )
                } else if tau <= self.duration - ramp {
                    (speed, 0.0)
                } else {
                    let s = self.duration - tau;
                    (
                        0.5 * speed * (1.0 - (w * s).cos()),
                        -0.5 * speed * w * (w * s).sin(),
                    )
                };
                Kinematics {
                    v: dir * v,
                    a: dir * a,
                    yaw,
                }
            }
            Phase::Turn { yaw0, delta } => {
                let u = PI * tau / self.duration;
                still(wrap_pi(yaw0 + 0.5 * delta * (1.0 - u.cos())))
            }
        }
    }
}

/// Time to cover `distance` with cosine speed ramps of peak acceleration
/// `max_accel` and top speed `speed`: returns (duration, actual top speed,
/// ramp time). Equals `distance / speed + ramp` when the cruise phase exists.
pub fn segment_timing(distance: f64, speed: f64, max_accel: f64) -> (f64, f64, f64) {
    let ramp = PI * speed / (2.0 * max_accel);
    if distance >= speed * ramp {
        (distance / speed + ramp, speed, ramp)
    } else {
        let ramp = (PI * distance / (2.0 * max_accel)).sqrt();
        (2.0 * ramp, distance / ramp, ramp)
    }
}

/// Stop-and-go mission through `waypoints` (NED). Horizontal segments fly
/// nose-first; heading changes happen in place before a segment.
pub fn waypoint_trajectory(
    waypoints: &[Vec3],
    config: &MissionConfig,
    rate_hz: f64,
) -> Result<TruthTrajectory> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidMission(format!(
            "need at least 2 waypoints, got {}",
            waypoints.len()
        )));
    }
    if !(config.cruise_speed > 0.0) {
        return Err(Error::InvalidMission(format!(
            "cruise speed must be positive, got {}",
            config.cruise_speed
        )));
    }
    if let Some(i) = waypoints
        .iter()
        .position(|w| !w.iter().all(|v| v.is_finite()))
    {
        return Err(Error::InvalidMission(format!("waypoint {i} is not finite")));
    }
    for (i, pair) in waypoints.windows(2).enumerate() {
        if (pair[1] - pair[0]).norm() < 1e-6 {
            return Err(Error::InvalidMission(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
    }

    let horizontal = |d: &Vec3| d.x.hypot(d.y) > 1e-6;
    let mut yaw = waypoints
        .windows(2)
        .map(|p| p[1] - p[0])
        .find(horizontal)
        .map_or(0.0, |d| d.y.atan2(d.x));

    let mut spans = Vec::new();
    let mut t = 0.0;
    let push = |spans: &mut Vec<Span>, t: &mut f64, duration: f64, phase| {
        spans.push(Span {
            start: *t,
            duration,
            phase,
        });
        *t += duration;
    };
    if config.pre_roll > 0.0 {
        push(&mut spans, &mut t, config.pre_roll, Phase::Hold { yaw });
    }
    for pair in waypoints.windows(2) {
        let d = pair[1] - pair[0];
        let dist = d.norm();
        let dir = d / dist;
        let speed = if horizontal(&d) {
            let heading = d.y.atan2(d.x);
            let delta = wrap_pi(heading - yaw);
            if delta.abs() > 1e-9 {
                let duration = PI * delta.abs() / (2.0 * config.yaw_rate);
                push(
                    &mut spans,
                    &mut t,
                    duration,
                    Phase::Turn { yaw0: yaw, delta },
                );
                yaw = heading;
            }
            config.cruise_speed
        } else {
            config.climb_speed
        };
        let (duration, speed, ramp) = segment_timing(dist, speed, config.max_accel);
        push(
            &mut spans,
            &mut t,
            duration,
            Phase::Line {
                dir,
                speed,
                ramp,
                yaw,
            },
        );
    }
    push(&mut spans, &mut t, config.post_roll, Phase::Hold { yaw });

    let total = t;
    Ok(TruthTrajectory::from_profile(
        rate_hz,
        total,
        waypoints[0],
        |t| {
            let i = spans
                .partition_point(|s| s.start + s.duration < t)
                .min(spans.len() - 1);
            spans[i].eval(t)
        },
    ))
}

/// Horizontal reference polyline of a mission (consecutive duplicates in
/// the horizontal projection removed).
pub fn reference_path(waypoints: &[Vec3]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for w in waypoints {
        let p = [w.x, w.y];
        if out
            .last()
            .is_none_or(|q| (q[0] - p[0]).hypot(q[1] - p[1]) > 1e-9)
        {
            out.push(p);
        }
    }
    out
}
