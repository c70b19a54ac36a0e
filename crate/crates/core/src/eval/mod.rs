//! Accuracy metrics over estimated tracks: hover scatter, cross-track error
//! against a reference polyline, per-axis RMSE, attitude smoothness and
//! filter consistency (NEES).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fusion::NavRecord;
use crate::geom::{wrap_pi, EulerAngles, Vec3};
use crate::sim::TruthSample;

/// Time-stamped position, velocity and attitude; the common currency of
/// truth and estimate logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    /// NED, m
    pub p: Vec3,
    /// NED, m/s
    pub v: Vec3,
    pub att: EulerAngles,
}

impl From<&TruthSample> for TrackPoint {
    fn from(s: &TruthSample) -> Self {
        Self {
            t: s.t,
            p: s.p,
            v: s.v,
            att: s.q.euler(),
        }
    }
}

impl From<&NavRecord> for TrackPoint {
    fn from(r: &NavRecord) -> Self {
        Self {
            t: r.t,
            p: r.position(),
            v: r.velocity(),
            att: EulerAngles::new(r.output.roll, r.output.pitch, r.output.yaw),
        }
    }
}

fn lerp_point(a: &TrackPoint, b: &TrackPoint, t: f64) -> TrackPoint {
    let s = if b.t > a.t {
        (t - a.t) / (b.t - a.t)
    } else {
        0.0
    };
    let angle = |x: f64, y: f64| wrap_pi(x + s * wrap_pi(y - x));
    TrackPoint {
        t,
        p: a.p + (b.p - a.p) * s,
        v: a.v + (b.v - a.v) * s,
        att: EulerAngles::new(
            angle(a.att.roll, b.att.roll),
            angle(a.att.pitch, b.att.pitch),
            angle(a.att.yaw, b.att.yaw),
        ),
    }
}

/// Pairs every estimate inside the truth time span with linearly
/// interpolated truth. Fails when the spans do not overlap.
pub fn align(
    truth: &[TrackPoint],
    estimate: &[TrackPoint],
) -> Result<Vec<(TrackPoint, TrackPoint)>> {
    if truth.is_empty() || estimate.is_empty() {
        return Err(Error::InvalidInput("empty track".into()));
    }
    if truth.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidInput("truth timestamps must increase".into()));
    }
    let (t0, t1) = (truth[0].t, truth[truth.len() - 1].t);
    let tol = 1e-9;
    let mut out = Vec::new();
    let mut k = 0;
    for e in estimate {
        if e.t < t0 - tol || e.t > t1 + tol {
            continue;
        }
        while k + 1 < truth.len() && truth[k + 1].t <= e.t + tol {
            k += 1;
        }
        let reference = if (truth[k].t - e.t).abs() <= tol || k + 1 == truth.len() {
            truth[k]
        } else {
            lerp_point(&truth[k], &truth[k + 1], e.t)
        };
        out.push((reference, *e));
    }
    if out.is_empty() {
        return Err(Error::Range(format!(
            "time ranges do not overlap: truth [{t0}, {t1}] s, estimate [{}, {}] s",
            estimate[0].t,
            estimate[estimate.len() - 1].t
        )));
    }
    Ok(out)
}

/// Horizontal scatter: RMS horizontal distance from the mean position.
pub fn horizontal_scatter(points: &[TrackPoint]) -> f64 {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .map(|p| p.p.xy())
        .sum::<nalgebra::Vector2<f64>>()
        / n;
    (points
        .iter()
        .map(|p| (p.p.xy() - mean).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Largest per-axis horizontal deviation from the mean position.
pub fn box_half_width(points: &[TrackPoint]) -> f64 {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .map(|p| p.p.xy())
        .sum::<nalgebra::Vector2<f64>>()
        / n;
    points
        .iter()
        .map(|p| (p.p.xy() - mean).amax())
        .fold(0.0, f64::max)
}

/// Distance from `p` to the polyline `path` (a single vertex is a point).
pub fn cross_track_distance(p: [f64; 2], path: &[[f64; 2]]) -> f64 {
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    match path {
        [] => f64::NAN,
        [only] => dist(p, *only),
        _ => path
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let s = if len2 > 0.0 {
                    (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                dist(p, [a[0] + s * d[0], a[1] + s * d[1]])
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Cross-track distance of every point.
pub fn cross_track_series(points: &[TrackPoint], path: &[[f64; 2]]) -> Vec<f64> {
    points
        .iter()
        .map(|p| cross_track_distance([p.p.x, p.p.y], path))
        .collect()
}

/// Per-axis estimation errors (estimate minus truth) over aligned pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub north: Vec<f64>,
    pub east: Vec<f64>,
    pub down: Vec<f64>,
}

pub fn error_series(pairs: &[(TrackPoint, TrackPoint)]) -> ErrorSeries {
    let mut s = ErrorSeries::default();
    for (truth, est) in pairs {
        let e = est.p - truth.p;
        s.t.push(est.t);
        s.north.push(e.x);
        s.east.push(e.y);
        s.down.push(e.z);
    }
    s
}

pub fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Mean of the standard deviations of successive roll and pitch differences
/// over the points selected by `mask`; a pair counts when both ends are
/// selected.
pub fn attitude_jitter(points: &[TrackPoint], mask: &[bool]) -> f64 {
    let (mut roll, mut pitch) = (Vec::new(), Vec::new());
    for (k, w) in points.windows(2).enumerate() {
        if mask[k] && mask[k + 1] {
            roll.push(wrap_pi(w[1].att.roll - w[0].att.roll));
            pitch.push(wrap_pi(w[1].att.pitch - w[0].att.pitch));
        }
    }
    if roll.is_empty() {
        f64::NAN
    } else {
        0.5 * (std_dev(&roll) + std_dev(&pitch))
    }
}

/// Normalized estimation error squared of a position error.
pub fn position_nees(error: &Vec3, cov: &[[f64; 3]; 3]) -> Result<f64> {
    let p = nalgebra::Matrix3::from_fn(|i, j| cov[i][j]);
    let chol = p.cholesky().ok_or_else(|| {
        Error::InvalidInput("position covariance is not positive definite".into())
    })?;
    Ok(error.dot(&chol.solve(error)))
}

/// Two-sided acceptance interval of the run-averaged NEES for `dof`
/// degrees of freedom over `runs` independent runs.
pub fn nees_band(dof: usize, runs: usize, probability: f64) -> (f64, f64) {
    let n = (dof * runs) as f64;
    let chi = ChiSquared::new(n).expect("positive degrees of freedom");
    let tail = 0.5 * (1.0 - probability);
    (
        chi.inverse_cdf(tail) / runs as f64,
        chi.inverse_cdf(1.0 - tail) / runs as f64,
    )
}

/// Metrics of one estimated track against truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    pub seed: Option<u64>,
    pub samples: usize,
    /// m
    pub scatter_std: f64,
    /// m, largest per-axis deviation from the mean horizontal position
    pub box_half_width: f64,
    /// m
    pub max_cross_track: f64,
    /// m
    pub mean_cross_track: f64,
    pub rmse_north: f64,
    pub rmse_east: f64,
    pub rmse_down: f64,
    /// rad, frame-to-frame roll/pitch jitter while cruising
    pub cruise_jitter: Option<f64>,
    pub errors: ErrorSeries,
}

/// Which aligned samples enter the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// s; earlier estimates are ignored (filter convergence)
    pub from_time: f64,
    /// samples count only while truth altitude is at least this fraction of
    /// its maximum (excludes ground time, climb and descent)
    pub min_altitude_fraction: f64,
    /// attitude smoothness uses samples whose truth horizontal speed is at
    /// least this fraction of its maximum
    pub cruise_speed_fraction: f64,
    /// m/s; below this peak speed there is no cruise and no smoothness
    pub min_cruise_speed: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            from_time: 5.0,
            min_altitude_fraction: 0.95,
            cruise_speed_fraction: 0.8,
            min_cruise_speed: 1.0,
        }
    }
}

impl Window {
    /// Every sample counts.
    pub fn all() -> Self {
        Self {
            from_time: f64::NEG_INFINITY,
            min_altitude_fraction: f64::NEG_INFINITY,
            ..Self::default()
        }
    }
}

/// Evaluates `estimate` against `truth` over `window`.
pub fn evaluate(
    label: &str,
    seed: Option<u64>,
    truth: &[TrackPoint],
    estimate: &[TrackPoint],
    path: &[[f64; 2]],
    window: &Window,
) -> Result<RunMetrics> {
    let aligned = align(truth, estimate)?;
    let ceiling = aligned
        .iter()
        .map(|(t, _)| -t.p.z)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = if window.min_altitude_fraction.is_finite() {
        window.min_altitude_fraction * ceiling
    } else {
        f64::NEG_INFINITY
    };
    let pairs: Vec<_> = aligned
        .into_iter()
        .filter(|(t, e)| e.t >= window.from_time && -t.p.z >= floor)
        .collect();
    if pairs.is_empty() {
        return Err(Error::Range(format!(
            "no estimates inside the evaluation window (t >= {} s, altitude >= {floor} m)",
            window.from_time
        )));
    }
    let est: Vec<TrackPoint> = pairs.iter().map(|(_, e)| *e).collect();
    let xt = cross_track_series(&est, path);
    let errors = error_series(&pairs);
    let speed = |p: &TrackPoint| p.v.xy().norm();
    let top = pairs.iter().map(|(t, _)| speed(t)).fold(0.0, f64::max);
    let cruise_jitter = (top >= window.min_cruise_speed)
        .then(|| {
            let mask: Vec<bool> = pairs
                .iter()
                .map(|(t, _)| speed(t) >= window.cruise_speed_fraction * top)
                .collect();
            attitude_jitter(&est, &mask)
        })
        .filter(|j| j.is_finite());
    let metrics = RunMetrics {
        label: label.to_string(),
        seed,
        samples: pairs.len(),
        scatter_std: horizontal_scatter(&est),
        box_half_width: box_half_width(&est),
        max_cross_track: xt.iter().copied().fold(0.0, f64::max),
        mean_cross_track: xt.iter().sum::<f64>() / xt.len() as f64,
        rmse_north: rms(&errors.north),
        rmse_east: rms(&errors.east),
        rmse_down: rms(&errors.down),
        cruise_jitter,
        errors,
    };
    let finite = [
        metrics.scatter_std,
        metrics.box_half_width,
        metrics.max_cross_track,
        metrics.mean_cross_track,
        metrics.rmse_north,
        metrics.rmse_east,
        metrics.rmse_down,
    ];
    if !finite.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(format!("{label}: non-finite metric")));
    }
    Ok(metrics)
}

/// Same-seed comparison of a candidate against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seed: Option<u64>,
    pub baseline: String,
    pub candidate: String,
    pub scatter_ratio: f64,
    pub max_cross_track_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunMetrics>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    /// Builds the report, pairing runs that share a seed: the first run of
    /// each seed is the baseline for the others.
    pub fn new(scenario: &str, config_hash: &str, runs: Vec<RunMetrics>) -> Self {
        let mut seeds: Vec<u64> = runs.iter().filter_map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut comparisons = Vec::new();
        for (i, base) in runs.iter().enumerate() {
            if runs[..i].iter().any(|r| r.seed == base.seed) {
                continue;
            }
            for cand in runs[i + 1..].iter().filter(|r| r.seed == base.seed) {
                comparisons.push(Comparison {
                    seed: base.seed,
                    baseline: base.label.clone(),
                    candidate: cand.label.clone(),
                    scatter_ratio: cand.scatter_std / base.scatter_std,
                    max_cross_track_ratio: cand.max_cross_track / base.max_cross_track,
                });
            }
        }
        Self {
            scenario: scenario.to_string(),
            config_hash: config_hash.to_string(),
            seeds,
            runs,
            comparisons,
        }
    }
}
