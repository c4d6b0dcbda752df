//! CSV writers. All reals render as `{:.16e}` (17 significant digits) so a
//! parse-and-reformat round-trip is lossless.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use odekit::ode::Trajectory;

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Schema `t,y0,y1,...,y{d-1}`, one row per grid point.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.dim();
    let mut out = String::from("t");
    for c in 0..dim {
        let _ = write!(out, ",y{c}");
    }
    out.push('\n');
    for (i, state) in traj.states.iter().enumerate() {
        out.push_str(&format_real(traj.time(i)));
        for &x in state {
            out.push(',');
            out.push_str(&format_real(x));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> io::Result<()> {
    std::fs::write(path, trajectory_csv(traj))
}

/// Two-column series `header` + `index,value` rows, indices from 0.
pub fn series_csv(header: &str, values: &[f64]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (i, &v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", format_real(v));
    }
    out
}
