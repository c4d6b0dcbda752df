//! Binary PGM (P5) frame output for reaction-diffusion snapshots.

use std::io;
use std::path::Path;

use odekit::reaction_diffusion::Grid2D;

/// One byte per pixel, row-major, `width` columns by `height` rows.
pub fn write_pgm(path: &Path, width: usize, height: usize, bytes: &[u8]) -> io::Result<()> {
    assert_eq!(bytes.len(), width * height, "pixel count mismatch");
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(bytes);
    std::fs::write(path, buf)
}

/// Maps the V field to grayscale, scaled so the frame's own maximum hits 255.
/// An all-zero (or negative) frame renders black rather than dividing by zero.
pub fn v_frame_bytes(grid: &Grid2D) -> Vec<u8> {
    let max = grid.v.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return vec![0; grid.v.len()];
    }
    grid.v
        .iter()
        .map(|&v| {
            let scaled = (v.max(0.0) / max * 255.0).round();
            scaled.clamp(0.0, 255.0) as u8
        })
        .collect()
}
