//! FFT plumbing for the periodic 1-D grid: transforms, wavenumbers and the
//! exact spectral masks used to split fields at a frequency cutoff.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::CutoffProfile;
use crate::pde::Field;

pub struct SpectralGrid {
    pub grid_points: usize,
    pub domain_length: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralGrid {
    pub fn new(grid_points: usize, domain_length: f64) -> Result<SpectralGrid> {
        if grid_points < 8 || !grid_points.is_power_of_two() {
            return Err(Error::validation(format!(
                "grid_points must be a power of two >= 8, got {grid_points}"
            )));
        }
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(Error::validation(format!(
                "domain_length must be positive, got {domain_length}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(SpectralGrid {
            grid_points,
            domain_length,
            fwd: planner.plan_fft_forward(grid_points),
            inv: planner.plan_fft_inverse(grid_points),
        })
    }

    /// Signed wavenumber of mode index `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let g = self.grid_points;
        let signed = if j <= g / 2 { j as isize } else { j as isize - g as isize };
        2.0 * std::f64::consts::PI * signed as f64 / self.domain_length
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.fwd.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inv.process(data);
        let scale = 1.0 / self.grid_points as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Split a two-component field at the cutoff `k_star`.
///
/// The low part carries the spectral factor `χ(|k|/k_star)` (support
/// `|k| ≤ 2 k_star`), and the high part is the pointwise remainder
/// `field - low`, so the two parts sum to the input exactly.
pub fn split_at_cutoff(
    field: &Field,
    k_star: f64,
    profile: &CutoffProfile,
) -> Result<(Field, Field)> {
    if field.n_components != 2 {
        return Err(Error::validation(
            "spectral splitting expects the 2-component complex form",
        ));
    }
    if !(k_star > 0.0) {
        return Err(Error::validation(format!("k_star must be positive, got {k_star}")));
    }
    let grid = SpectralGrid::new(field.grid_points, field.domain_length)?;
    let mut vhat = field.to_complex()?;
    grid.forward(&mut vhat);
    for (j, v) in vhat.iter_mut().enumerate() {
        *v *= profile.chi(grid.wavenumber(j).abs() / k_star);
    }
    grid.inverse(&mut vhat);
    let low = Field::from_complex(&vhat, field.domain_length, field.time);
    let mut high = field.clone();
    for (h, l) in high.data.iter_mut().zip(low.data.iter()) {
        *h -= l;
    }
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let grid = SpectralGrid::new(64, 5.0).unwrap();
        let mut data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        grid.forward(&mut data);
        grid.inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wavenumbers_are_symmetric() {
        let grid = SpectralGrid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        assert_eq!(grid.wavenumber(0), 0.0);
        assert!((grid.wavenumber(1) - 1.0).abs() < 1e-15);
        assert!((grid.wavenumber(15) + 1.0).abs() < 1e-15);
        assert!((grid.wavenumber(8) - 8.0).abs() < 1e-15);
    }

    #[test]
    fn split_parts_sum_exactly_and_masks_apply() {
        let g = 128;
        let l = 16.0;
        let grid = SpectralGrid::new(g, l).unwrap();
        // Two modes: one inside the cutoff, one outside.
        let k_lo = grid.wavenumber(2);
        let k_hi = grid.wavenumber(40);
        let mut field = Field::zeros(2, g, l);
        for i in 0..g {
            let x = i as f64 * l / g as f64;
            field.data[i] = (k_lo * x).cos() + 0.3 * (k_hi * x).cos();
            field.data[g + i] = 0.5 * (k_lo * x).sin();
        }
        let k_star = grid.wavenumber(8);
        let (low, high) = split_at_cutoff(&field, k_star, &CutoffProfile::SmoothExp).unwrap();
        for i in 0..2 * g {
            assert_eq!(low.data[i] + high.data[i], field.data[i]);
        }
        // Mode 2 < k_star stays in the low part; mode 40 > 2 k_star goes high.
        for i in 0..g {
            let x = i as f64 * l / g as f64;
            let want_low = (k_lo * x).cos();
            assert!((low.data[i] - want_low).abs() < 1e-11, "low part at {i}");
            assert!((high.data[i] - 0.3 * (k_hi * x).cos()).abs() < 1e-11);
        }
    }
}
