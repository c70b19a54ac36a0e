//! The evaluation figures: horizontal plane, path projections, attitude and
//! velocity traces.

use flownav::eval::TrackPoint;
use flownav::io::{render_figure, Panel, Series};

/// Every `k`-th point, so long logs stay a manageable size.
fn thin(track: &[TrackPoint], max_points: usize) -> impl Iterator<Item = &TrackPoint> {
    let k = track.len().div_ceil(max_points.max(1)).max(1);
    track.iter().step_by(k)
}

const MAX_POINTS: usize = 4000;

fn series(
    truth: &[TrackPoint],
    runs: &[(&str, &[TrackPoint])],
    f: impl Fn(&TrackPoint) -> [f64; 2],
) -> Vec<Series> {
    let mut out = vec![Series::new(
        "truth",
        thin(truth, MAX_POINTS).map(&f).collect(),
    )];
    out.extend(
        runs.iter()
            .map(|(label, t)| Series::new(*label, thin(t, MAX_POINTS).map(&f).collect())),
    );
    out
}

fn panel(title: &str, x: &str, y: &str, series: Vec<Series>, equal_axes: bool) -> Panel {
    Panel {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        series,
        equal_axes,
    }
}

fn tagged(svg: String, hash: &str) -> String {
    svg.replacen("<svg", &format!("<!-- config_hash: {hash} -->\n<svg"), 1)
}

/// `(file name, svg)` for each figure. Series order is truth, then the runs
/// in the given order; the plane view ends with the reference path.
pub fn figures(
    truth: &[TrackPoint],
    runs: &[(&str, &[TrackPoint])],
    reference: &[[f64; 2]],
    hash: &str,
) -> Vec<(&'static str, String)> {
    let deg = 180.0 / std::f64::consts::PI;
    let mut plane = series(truth, runs, |p| [p.p.y, p.p.x]);
    plane.push(Series::new(
        "reference",
        reference.iter().map(|q| [q[1], q[0]]).collect(),
    ));
    let xy = render_figure(&[panel(
        "horizontal position",
        "east [m]",
        "north [m]",
        plane,
        true,
    )]);
    let paths = render_figure(&[
        panel(
            "plan",
            "east [m]",
            "north [m]",
            series(truth, runs, |p| [p.p.y, p.p.x]),
            true,
        ),
        panel(
            "north-altitude",
            "north [m]",
            "altitude [m]",
            series(truth, runs, |p| [p.p.x, -p.p.z]),
            false,
        ),
        panel(
            "east-altitude",
            "east [m]",
            "altitude [m]",
            series(truth, runs, |p| [p.p.y, -p.p.z]),
            false,
        ),
    ]);
    let attitude = render_figure(&[
        panel(
            "roll",
            "t [s]",
            "roll [deg]",
            series(truth, runs, |p| [p.t, p.att.roll * deg]),
            false,
        ),
        panel(
            "pitch",
            "t [s]",
            "pitch [deg]",
            series(truth, runs, |p| [p.t, p.att.pitch * deg]),
            false,
        ),
        panel(
            "yaw",
            "t [s]",
            "yaw [deg]",
            series(truth, runs, |p| [p.t, p.att.yaw * deg]),
            false,
        ),
    ]);
    let velocity = render_figure(&[
        panel(
            "north velocity",
            "t [s]",
            "vn [m/s]",
            series(truth, runs, |p| [p.t, p.v.x]),
            false,
        ),
        panel(
            "east velocity",
            "t [s]",
            "ve [m/s]",
            series(truth, runs, |p| [p.t, p.v.y]),
            false,
        ),
    ]);
    vec![
        ("xy.svg", tagged(xy, hash)),
        ("paths3d.svg", tagged(paths, hash)),
        ("attitude.svg", tagged(attitude, hash)),
        ("velocity.svg", tagged(velocity, hash)),
    ]
}
