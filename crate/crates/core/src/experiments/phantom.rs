//! Modified Shepp–Logan phantom.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `(intensity, semi-axis x, semi-axis y, centre x, centre y, rotation in degrees)`.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// `n × n` phantom on `[−1, 1]²` sampled at pixel centres, row 0 at the top, clipped to `[0, 1]`.
pub fn shepp_logan(n: usize) -> Result<DMatrix<f64>> {
    if n < 16 {
        return Err(Error::NotApplicable(format!("phantom size {n} is below 16")));
    }
    let coord = |i: usize| -1.0 + (2 * i + 1) as f64 / n as f64;
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let (x, y) = (coord(col), -coord(row));
        let v: f64 = ELLIPSES
            .iter()
            .filter(|&&(_, a, b, x0, y0, phi)| {
                let (s, c) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = (dx * c + dy * s) / a;
                let w = (-dx * s + dy * c) / b;
                u * u + w * w <= 1.0
            })
            .map(|e| e.0)
            .sum();
        v.clamp(0.0, 1.0)
    }))
}
