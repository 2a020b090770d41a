//! Semigroup convolution kernels by quadrature and the numerical
//! verification of their envelope bounds.
//!
//! The kernels are the matrix-valued oscillatory integrals
//! `(2π)^{-d} ∫ dk e^{ik·x} exp(-D|k|²τ) c(k)`, with `c` equal to one for the
//! full kernel, to a smooth low-pass cutoff `χ(|k|/k_star)` for the low
//! kernel and to `1 - χ` for the high kernel. The `(2π)^{-d}` normalization
//! makes the full kernel a mass-one heat semigroup, so the semigroup and
//! splitting identities are directly testable; envelope comparisons absorb
//! the normalization into the measured constants.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::quadrature::{bessel_j0, integrate_segments, integrate_segments_from};

/// Frequency cutoff profile: 1 on |s| ≤ 1, 0 on |s| ≥ 2, monotone between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutoffProfile {
    /// Quotient of `exp(-1/t)` bumps; smooth to all orders.
    SmoothExp,
    /// Quintic polynomial transition; twice continuously differentiable.
    PolyC2,
}

impl CutoffProfile {
    pub fn chi(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= 1.0 {
            return 1.0;
        }
        if a >= 2.0 {
            return 0.0;
        }
        let t = a - 1.0; // transition variable in (0, 1)
        match self {
            CutoffProfile::SmoothExp => {
                let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
                let up = f(1.0 - t);
                let down = f(t);
                up / (up + down)
            }
            CutoffProfile::PolyC2 => {
                // 1 - smootherstep(t): value and first two derivatives match
                // the constant pieces at both ends.
                1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
            }
        }
    }

    /// Guaranteed number of continuous derivatives; `None` means unlimited.
    pub fn smoothness_order(&self) -> Option<u32> {
        match self {
            CutoffProfile::SmoothExp => None,
            CutoffProfile::PolyC2 => Some(2),
        }
    }
}

/// Which part of the frequency decomposition a kernel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelVariant {
    Full,
    Low,
    High,
}

impl KernelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelVariant::Full => "full",
            KernelVariant::Low => "low",
            KernelVariant::High => "high",
        }
    }
}

/// One evaluated kernel value.
#[derive(Debug, Clone)]
pub struct KernelSample {
    pub tau: f64,
    pub x: Vec<f64>,
    pub value: Mat,
    pub variant: KernelVariant,
    pub k_star: Option<f64>,
    /// Magnitude of the final quadrature refinement step.
    pub achieved_tol: f64,
}

/// Absolute per-entry quadrature target.
pub const QUAD_TOL: f64 = 1e-10;

fn min_dissipation(d_matrix: &Mat) -> Result<f64> {
    let eigs = d_matrix.symmetric_part().sym_eigenvalues();
    let nu = eigs[0];
    if !(nu > 0.0) {
        return Err(Error::validation(format!(
            "diffusion matrix must have positive-definite symmetric part; \
             smallest eigenvalue {nu:.6e}"
        )));
    }
    Ok(nu)
}

/// One-parameter semigroup `s -> expm(-D s)`, specialized for the matrix
/// shapes that actually occur: diagonal, rotation form `a·I + b·J`, and a
/// stack-allocated scaling-and-squaring fallback.
enum Propagator {
    Diagonal(Vec<f64>),
    Rotation { a: f64, b: f64 },
    General { n: usize, entries: [f64; 16] },
}

impl Propagator {
    fn new(d_matrix: &Mat) -> Propagator {
        let n = d_matrix.dim();
        let mut diagonal = true;
        for i in 0..n {
            for j in 0..n {
                if i != j && d_matrix.get(i, j) != 0.0 {
                    diagonal = false;
                }
            }
        }
        if diagonal {
            return Propagator::Diagonal((0..n).map(|i| d_matrix.get(i, i)).collect());
        }
        if n == 2
            && d_matrix.get(0, 0) == d_matrix.get(1, 1)
            && d_matrix.get(0, 1) == -d_matrix.get(1, 0)
        {
            return Propagator::Rotation { a: d_matrix.get(0, 0), b: d_matrix.get(1, 0) };
        }
        let mut entries = [0.0; 16];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = d_matrix.get(i, j);
            }
        }
        Propagator::General { n, entries }
    }

    /// Write the row-major entries of `expm(-D s)` into `out`.
    fn eval_into(&self, s: f64, out: &mut [f64]) {
        match self {
            Propagator::Diagonal(diag) => {
                let n = diag.len();
                out[..n * n].fill(0.0);
                for (i, d) in diag.iter().enumerate() {
                    out[i * n + i] = (-d * s).exp();
                }
            }
            Propagator::Rotation { a, b } => {
                // expm(-(aI + bJ)s) = e^{-as}(cos(bs) I - sin(bs) J)
                let e = (-a * s).exp();
                let (sn, cs) = (b * s).sin_cos();
                out[0] = e * cs;
                out[1] = e * sn;
                out[2] = -e * sn;
                out[3] = e * cs;
            }
            Propagator::General { n, entries } => {
                let n = *n;
                // Scaling and squaring on stack buffers.
                let mut a = [0.0_f64; 16];
                for i in 0..n * n {
                    a[i] = -entries[i] * s;
                }
                let norm: f64 =
                    a[..n * n].iter().fold(0.0_f64, |m, v| m.max(v.abs())) * n as f64;
                let squarings = if norm > 0.5 {
                    (norm / 0.5).log2().ceil() as u32
                } else {
                    0
                };
                let scale = 0.5_f64.powi(squarings as i32);
                for v in a[..n * n].iter_mut() {
                    *v *= scale;
                }
                let mut result = [0.0_f64; 16];
                let mut term = [0.0_f64; 16];
                for i in 0..n {
                    result[i * n + i] = 1.0;
                    term[i * n + i] = 1.0;
                }
                let mut next = [0.0_f64; 16];
                for k in 1..=16u32 {
                    mat_mul(&term, &a, &mut next, n);
                    let inv = 1.0 / k as f64;
                    for i in 0..n * n {
                        term[i] = next[i] * inv;
                        result[i] += term[i];
                    }
                }
                for _ in 0..squarings {
                    mat_mul(&result, &result.clone(), &mut next, n);
                    result[..n * n].copy_from_slice(&next[..n * n]);
                }
                out[..n * n].copy_from_slice(&result[..n * n]);
            }
        }
    }
}

fn mat_mul(a: &[f64; 16], b: &[f64; 16], out: &mut [f64; 16], n: usize) {
    out[..n * n].fill(0.0);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
}

struct RadialSetup {
    segments: Vec<(f64, f64)>,
    k_star: Option<f64>,
}

fn radial_setup(
    variant: KernelVariant,
    k_star: Option<f64>,
    nu_star: f64,
    tau: f64,
) -> Result<RadialSetup> {
    let gaussian_reach = 10.0 / (nu_star * tau).sqrt();
    match variant {
        KernelVariant::Full => Ok(RadialSetup {
            segments: vec![(0.0, gaussian_reach)],
            k_star: None,
        }),
        KernelVariant::Low | KernelVariant::High => {
            let ks = k_star.ok_or_else(|| {
                Error::validation("k_star is required for low/high kernel variants")
            })?;
            if !(ks > 0.0) || !ks.is_finite() {
                return Err(Error::validation(format!(
                    "k_star must be positive and finite, got {ks}"
                )));
            }
            let mut segments = Vec::new();
            if variant == KernelVariant::Low {
                let upper = (2.0 * ks).min(gaussian_reach.max(1e-6));
                let mid = ks.min(upper);
                segments.push((0.0, mid));
                if upper > mid {
                    segments.push((mid, upper));
                }
            } else {
                let upper = (4.0 * ks).max(gaussian_reach);
                let mid = (2.0 * ks).min(upper);
                segments.push((ks, mid));
                if upper > mid {
                    segments.push((mid, upper));
                }
            }
            Ok(RadialSetup { segments, k_star: Some(ks) })
        }
    }
}

fn cutoff_factor(
    variant: KernelVariant,
    k: f64,
    k_star: Option<f64>,
    profile: &CutoffProfile,
) -> f64 {
    match variant {
        KernelVariant::Full => 1.0,
        KernelVariant::Low => profile.chi(k / k_star.unwrap()),
        KernelVariant::High => 1.0 - profile.chi(k / k_star.unwrap()),
    }
}

/// Evaluate the matrix kernel at position `x` (dimension = `x.len()`).
///
/// The quadrature runs over the radial frequency with the angular part
/// integrated in closed form, which is exact because `exp(-D|k|²τ)` and the
/// cutoff only depend on `|k|`.
pub fn eval_kernel(
    d_matrix: &Mat,
    tau: f64,
    x: &[f64],
    variant: KernelVariant,
    k_star: Option<f64>,
    profile: &CutoffProfile,
) -> Result<KernelSample> {
    eval_kernel_tol(d_matrix, tau, x, variant, k_star, profile, QUAD_TOL)
}

/// [`eval_kernel`] with an explicit quadrature tolerance; envelope sweeps
/// relax it, since ratio measurements only need a few digits.
pub fn eval_kernel_tol(
    d_matrix: &Mat,
    tau: f64,
    x: &[f64],
    variant: KernelVariant,
    k_star: Option<f64>,
    profile: &CutoffProfile,
    quad_tol: f64,
) -> Result<KernelSample> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::validation(format!(
            "kernel time must be positive and finite, got {tau}"
        )));
    }
    let dim = x.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::validation(format!(
            "kernel positions must have dimension 1..=3, got {dim}"
        )));
    }
    let nu_star = min_dissipation(d_matrix)?;
    let setup = radial_setup(variant, k_star, nu_star, tau)?;
    let n = d_matrix.dim();
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();

    let angular: Box<dyn Fn(f64) -> f64 + Sync> = match dim {
        // (2π)^{-1} ∫ dk e^{ikx} = (1/π) ∫_0^∞ cos(kr) dk on even integrands.
        1 => Box::new(move |k: f64| (k * r).cos() / std::f64::consts::PI),
        // (2π)^{-2} · 2π ∫_0^∞ k J0(kr) dk
        2 => Box::new(move |k: f64| k * bessel_j0(k * r) / (2.0 * std::f64::consts::PI)),
        // (2π)^{-3} · 4π ∫_0^∞ k² sin(kr)/(kr) dk
        _ => Box::new(move |k: f64| {
            let y = k * r;
            let sinc = if y.abs() < 1e-8 { 1.0 - y * y / 6.0 } else { y.sin() / y };
            k * k * sinc / (2.0 * std::f64::consts::PI * std::f64::consts::PI)
        }),
    };

    let propagator = Propagator::new(d_matrix);
    let span = setup.segments.iter().map(|(a, b)| b - a).fold(0.0_f64, f64::max);
    let min_panels = ((r * span / (2.0 * std::f64::consts::PI) / 5.0).ceil() as usize).max(1);
    let mut scratch = vec![0.0; n * n];
    let scratch = std::cell::RefCell::new(&mut scratch);
    let integral = integrate_segments_from(
        |k, out| {
            let mut e = scratch.borrow_mut();
            propagator.eval_into(k * k * tau, &mut e);
            let c = cutoff_factor(variant, k, setup.k_star, profile) * angular(k);
            for (o, v) in out.iter_mut().zip(e.iter()) {
                *o = c * v;
            }
        },
        &setup.segments,
        n * n,
        quad_tol,
        min_panels,
    )?;

    let mut value = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            value.set(i, j, integral.value[i * n + j]);
        }
    }
    Ok(KernelSample {
        tau,
        x: x.to_vec(),
        value,
        variant,
        k_star: setup.k_star,
        achieved_tol: integral.achieved,
    })
}

/// Low-pass kernel at a complex 1-D position `z = re + i·im`.
///
/// Used to probe the exponential-type bound of the low kernel: the integrand
/// extends analytically because the cutoff confines frequencies to
/// `|k| ≤ 2 k_star`. Returns the real and imaginary parts of the matrix.
pub fn eval_low_kernel_complex(
    d_matrix: &Mat,
    tau: f64,
    re: f64,
    im: f64,
    k_star: f64,
    profile: &CutoffProfile,
) -> Result<(Mat, Mat, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::validation(format!(
            "kernel time must be positive and finite, got {tau}"
        )));
    }
    let nu_star = min_dissipation(d_matrix)?;
    let setup = radial_setup(KernelVariant::Low, Some(k_star), nu_star, tau)?;
    let n = d_matrix.dim();
    let propagator = Propagator::new(d_matrix);
    let mut scratch = vec![0.0; n * n];
    let scratch = std::cell::RefCell::new(&mut scratch);
    let integral = integrate_segments(
        |k, out| {
            let mut e = scratch.borrow_mut();
            propagator.eval_into(k * k * tau, &mut e);
            let chi = profile.chi(k / k_star);
            // e^{ikz} + e^{-ikz} = 2 cos(k·re) cosh(k·im) - 2i sin(k·re) sinh(k·im)
            let cr = (k * re).cos() * (k * im).cosh() / std::f64::consts::PI;
            let ci = -(k * re).sin() * (k * im).sinh() / std::f64::consts::PI;
            for (idx, v) in e.iter().enumerate() {
                out[idx] = chi * cr * v;
                out[n * n + idx] = chi * ci * v;
            }
        },
        &setup.segments,
        2 * n * n,
        QUAD_TOL,
    )?;
    let mut re_m = Mat::zeros(n);
    let mut im_m = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            re_m.set(i, j, integral.value[i * n + j]);
            im_m.set(i, j, integral.value[n * n + i * n + j]);
        }
    }
    Ok((re_m, im_m, integral.achieved))
}

/// Branch of the high-kernel envelope, chosen by the sign of
/// `nu_star·tau - 1/k_star²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeRegime {
    /// Not a high-pass kernel; single-branch envelope.
    Single,
    /// Dissipation has acted for longer than the cutoff time scale.
    LargeNuTau,
    /// Early-time branch with the additional flat term.
    SmallNuTau,
}

impl EnvelopeRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvelopeRegime::Single => "-",
            EnvelopeRegime::LargeNuTau => "large_nu_tau",
            EnvelopeRegime::SmallNuTau => "small_nu_tau",
        }
    }
}

/// Claimed envelope with its constant set to one.
pub fn envelope_value(
    variant: KernelVariant,
    d: usize,
    p: u32,
    tau: f64,
    x_norm: f64,
    k_star: Option<f64>,
    nu_star: f64,
    d_star: f64,
) -> (f64, EnvelopeRegime) {
    let df = d as f64;
    let pf = p as f64;
    match variant {
        KernelVariant::Full => {
            let base = (nu_star * tau).powf(-df / 2.0)
                * (1.0 + x_norm * x_norm / (d_star * tau)).powf(-pf / 2.0);
            (base, EnvelopeRegime::Single)
        }
        KernelVariant::Low => {
            let ks = k_star.expect("low envelope needs k_star");
            let scale = ks.powi(-2) + nu_star * tau;
            let width = ks.powi(-2) + d_star * tau;
            let base = scale.powf(-df / 2.0)
                * (1.0 + x_norm * x_norm / width).powf(-pf / 2.0);
            (base, EnvelopeRegime::Single)
        }
        KernelVariant::High => {
            let ks = k_star.expect("high envelope needs k_star");
            let decay = (-nu_star * ks * ks * tau / 2.0).exp();
            let gauss = (nu_star * tau).powf(-df / 2.0)
                * (1.0 + x_norm * x_norm / (d_star * tau)).powf(-pf / 2.0);
            if nu_star * tau > ks.powi(-2) {
                (decay * gauss, EnvelopeRegime::LargeNuTau)
            } else {
                let flat = ks.powi(d as i32)
                    * (1.0 + ks * ks * x_norm * x_norm).powf(-pf / 2.0);
                (decay * (gauss + flat), EnvelopeRegime::SmallNuTau)
            }
        }
    }
}

/// One grid point of an envelope verification sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopePoint {
    pub tau: f64,
    pub x_norm: f64,
    pub k_star: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeRow {
    pub variant: KernelVariant,
    pub d: usize,
    pub p: u32,
    pub tau: f64,
    pub x_norm: f64,
    pub k_star: Option<f64>,
    pub kernel_norm: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub regime: EnvelopeRegime,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    /// Grid points that could not be scored, with reasons.
    pub rejected: Vec<(EnvelopePoint, String)>,
    /// Empirical constant: the largest kernel-to-envelope ratio observed.
    pub max_ratio: f64,
    pub max_row: Option<usize>,
}

/// Score kernel values against the claimed envelope over a grid.
///
/// The returned maximum ratio is the empirically measured constant of the
/// corresponding bound for this diffusion matrix and dimension.
pub fn verify_envelope(
    d_matrix: &Mat,
    d: usize,
    variant: KernelVariant,
    p: u32,
    grid: &[EnvelopePoint],
    profile: &CutoffProfile,
) -> Result<EnvelopeReport> {
    verify_envelope_tol(d_matrix, d, variant, p, grid, profile, QUAD_TOL)
}

/// [`verify_envelope`] with an explicit quadrature tolerance.
pub fn verify_envelope_tol(
    d_matrix: &Mat,
    d: usize,
    variant: KernelVariant,
    p: u32,
    grid: &[EnvelopePoint],
    profile: &CutoffProfile,
    quad_tol: f64,
) -> Result<EnvelopeReport> {
    if grid.is_empty() {
        return Err(Error::validation("envelope grid must be non-empty"));
    }
    let nu_star = min_dissipation(d_matrix)?;
    let d_star = d_matrix.operator_norm();

    let results: Vec<std::result::Result<EnvelopeRow, (EnvelopePoint, String)>> = grid
        .par_iter()
        .map(|pt| {
            let (env, regime) =
                envelope_value(variant, d, p, pt.tau, pt.x_norm, pt.k_star, nu_star, d_star);
            if !(env > 0.0) || !env.is_finite() {
                return Err((*pt, format!("envelope evaluates to {env}")));
            }
            let x = {
                let mut v = vec![0.0; d];
                v[0] = pt.x_norm;
                v
            };
            match eval_kernel_tol(d_matrix, pt.tau, &x, variant, pt.k_star, profile, quad_tol)
            {
                Ok(sample) => {
                    let kernel_norm = sample.value.operator_norm();
                    Ok(EnvelopeRow {
                        variant,
                        d,
                        p,
                        tau: pt.tau,
                        x_norm: pt.x_norm,
                        k_star: pt.k_star,
                        kernel_norm,
                        envelope: env,
                        ratio: kernel_norm / env,
                        regime,
                    })
                }
                Err(e) => Err((*pt, e.to_string())),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(rej) => rejected.push(rej),
        }
    }
    let mut max_ratio = 0.0;
    let mut max_row = None;
    for (i, row) in rows.iter().enumerate() {
        if row.ratio > max_ratio {
            max_ratio = row.ratio;
            max_row = Some(i);
        }
    }
    Ok(EnvelopeReport { rows, rejected, max_ratio, max_row })
}

/// Log-spaced sweep grid used by the verification runs: `n_tau` times in
/// `[tau_lo, tau_hi]`, `n_x` positions in `[0, x_max]`, the given cutoffs.
pub fn envelope_grid(
    tau_lo: f64,
    tau_hi: f64,
    n_tau: usize,
    x_max: f64,
    n_x: usize,
    k_stars: &[f64],
) -> Vec<EnvelopePoint> {
    let mut pts = Vec::new();
    let taus: Vec<f64> = (0..n_tau)
        .map(|i| {
            let t = i as f64 / (n_tau.max(2) - 1) as f64;
            tau_lo * (tau_hi / tau_lo).powf(t)
        })
        .collect();
    let xs: Vec<f64> = (0..n_x)
        .map(|i| x_max * i as f64 / (n_x.max(2) - 1) as f64)
        .collect();
    for &tau in &taus {
        for &x in &xs {
            if k_stars.is_empty() {
                pts.push(EnvelopePoint { tau, x_norm: x, k_star: None });
            } else {
                for &ks in k_stars {
                    pts.push(EnvelopePoint { tau, x_norm: x, k_star: Some(ks) });
                }
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn scalar(nu: f64) -> Mat {
        Mat::from_rows(&[vec![nu]]).unwrap()
    }

    fn cgl_diffusion(alpha: f64) -> Mat {
        Mat::from_rows(&[vec![1.0, -alpha], vec![alpha, 1.0]]).unwrap()
    }

    /// Mass-one heat kernel in d dimensions.
    fn gaussian_kernel(nu: f64, tau: f64, r: f64, d: usize) -> f64 {
        (4.0 * std::f64::consts::PI * nu * tau).powf(-(d as f64) / 2.0)
            * (-r * r / (4.0 * nu * tau)).exp()
    }

    #[test]
    fn cutoff_profiles_satisfy_support_invariants() {
        for profile in [CutoffProfile::SmoothExp, CutoffProfile::PolyC2] {
            assert_eq!(profile.chi(0.0), 1.0);
            assert_eq!(profile.chi(1.0), 1.0);
            assert_eq!(profile.chi(-0.7), 1.0);
            assert_eq!(profile.chi(2.0), 0.0);
            assert_eq!(profile.chi(5.3), 0.0);
            let mut prev = 1.0;
            for i in 0..=100 {
                let s = 1.0 + i as f64 / 100.0;
                let v = profile.chi(s);
                assert!((0.0..=1.0).contains(&v));
                assert!(v <= prev + 1e-12, "chi must be non-increasing on [1,2]");
                prev = v;
            }
        }
    }

    #[test]
    fn poly_c2_transition_matches_endpoint_derivatives() {
        let p = CutoffProfile::PolyC2;
        let h = 1e-5;
        // First and second finite differences vanish at both junctions.
        for s0 in [1.0, 2.0] {
            let d1 = (p.chi(s0 + h) - p.chi(s0 - h)) / (2.0 * h);
            let d2 = (p.chi(s0 + h) - 2.0 * p.chi(s0) + p.chi(s0 - h)) / (h * h);
            assert!(d1.abs() < 1e-8, "first derivative at {s0}: {d1}");
            assert!(d2.abs() < 1e-3, "second derivative at {s0}: {d2}");
        }
    }

    #[test]
    fn full_kernel_matches_analytic_gaussian_1d() {
        let profile = CutoffProfile::SmoothExp;
        let s = eval_kernel(&scalar(1.0), 1.0, &[0.0], KernelVariant::Full, None, &profile)
            .unwrap();
        let want = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        assert!((s.value.get(0, 0) - want).abs() < 1e-10, "{}", s.value.get(0, 0));

        let s = eval_kernel(&scalar(1.0), 1.0, &[2.0], KernelVariant::Full, None, &profile)
            .unwrap();
        let want = gaussian_kernel(1.0, 1.0, 2.0, 1);
        assert!((s.value.get(0, 0) - want).abs() < 1e-10);
    }

    #[test]
    fn full_kernel_matches_analytic_gaussian_2d_3d() {
        let profile = CutoffProfile::SmoothExp;
        for (d, tau, r) in [(2usize, 0.7, 0.9), (3usize, 0.45, 1.3), (2usize, 0.05, 0.0)] {
            let mut x = vec![0.0; d];
            x[0] = r;
            let s =
                eval_kernel(&scalar(1.0), tau, &x, KernelVariant::Full, None, &profile).unwrap();
            let want = gaussian_kernel(1.0, tau, r, d);
            assert!(
                (s.value.get(0, 0) - want).abs() < 1e-9,
                "d={d} got {} want {want}",
                s.value.get(0, 0)
            );
        }
    }

    #[test]
    fn full_kernel_matches_complex_closed_form_for_cgl_matrix() {
        // For D = I + αJ the kernel is the real 2x2 form of the complex
        // scalar (4π(1+iα)τ)^{-1/2} exp(-x²/(4(1+iα)τ)).
        let alpha = 2.0;
        let tau = 0.3;
        let x = 1.1;
        let profile = CutoffProfile::SmoothExp;
        let s = eval_kernel(&cgl_diffusion(alpha), tau, &[x], KernelVariant::Full, None, &profile)
            .unwrap();
        let z = Complex64::new(1.0, alpha);
        let g = (4.0 * std::f64::consts::PI * z * tau).sqrt().inv()
            * (-(x * x) / (4.0 * z * tau)).exp();
        assert!((s.value.get(0, 0) - g.re).abs() < 1e-10);
        assert!((s.value.get(1, 0) - g.im).abs() < 1e-10);
        assert!((s.value.get(0, 1) + g.im).abs() < 1e-10);
        assert!((s.value.get(1, 1) - g.re).abs() < 1e-10);
    }

    #[test]
    fn low_kernel_with_huge_cutoff_converges_to_full() {
        let profile = CutoffProfile::SmoothExp;
        let full = eval_kernel(&scalar(1.0), 1.0, &[0.0], KernelVariant::Full, None, &profile)
            .unwrap();
        let low = eval_kernel(
            &scalar(1.0),
            1.0,
            &[0.0],
            KernelVariant::Low,
            Some(1e3),
            &profile,
        )
        .unwrap();
        assert!((full.value.get(0, 0) - low.value.get(0, 0)).abs() < 1e-10);
    }

    #[test]
    fn low_plus_high_equals_full() {
        let profile = CutoffProfile::SmoothExp;
        for (d_matrix, tau, x, ks) in [
            (scalar(1.0), 0.3, 1.7, 3.0),
            (scalar(2.0), 0.05, 0.4, 6.0),
            (cgl_diffusion(1.5), 0.2, 0.9, 4.0),
        ] {
            let full =
                eval_kernel(&d_matrix, tau, &[x], KernelVariant::Full, None, &profile).unwrap();
            let low =
                eval_kernel(&d_matrix, tau, &[x], KernelVariant::Low, Some(ks), &profile).unwrap();
            let high =
                eval_kernel(&d_matrix, tau, &[x], KernelVariant::High, Some(ks), &profile)
                    .unwrap();
            let n = d_matrix.dim();
            for i in 0..n {
                for j in 0..n {
                    let sum = low.value.get(i, j) + high.value.get(i, j);
                    assert!(
                        (sum - full.value.get(i, j)).abs() < 2.0 * QUAD_TOL,
                        "splitting identity failed at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn kernel_mass_is_identity() {
        let profile = CutoffProfile::SmoothExp;
        for d_matrix in [scalar(1.0), cgl_diffusion(2.0)] {
            let tau = 0.5;
            let nu = d_matrix.symmetric_part().sym_eigenvalues()[0];
            let d_star = d_matrix.operator_norm();
            let reach = 12.0 * (d_star * tau).sqrt();
            let h = (nu * tau).sqrt() / 20.0;
            let steps = (2.0 * reach / h).ceil() as usize;
            let n = d_matrix.dim();
            let mut mass = Mat::zeros(n);
            for i in 0..=steps {
                let x = -reach + 2.0 * reach * i as f64 / steps as f64;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                let s =
                    eval_kernel(&d_matrix, tau, &[x], KernelVariant::Full, None, &profile)
                        .unwrap();
                mass = mass.add(&s.value.scale(w * 2.0 * reach / steps as f64));
            }
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (mass.get(i, j) - want).abs() < 1e-6,
                        "mass entry ({i},{j}) = {}",
                        mass.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn eval_kernel_rejects_bad_inputs() {
        let profile = CutoffProfile::SmoothExp;
        assert!(eval_kernel(&scalar(1.0), 0.0, &[0.0], KernelVariant::Full, None, &profile)
            .is_err());
        assert!(eval_kernel(&scalar(1.0), 1.0, &[0.0], KernelVariant::Low, None, &profile)
            .is_err());
        assert!(
            eval_kernel(&scalar(1.0), 1.0, &[0.0; 4], KernelVariant::Full, None, &profile)
                .is_err()
        );
    }

    #[test]
    fn envelope_full_p0_unit_point() {
        let profile = CutoffProfile::SmoothExp;
        let report = verify_envelope(
            &scalar(1.0),
            1,
            KernelVariant::Full,
            0,
            &[EnvelopePoint { tau: 1.0, x_norm: 0.0, k_star: None }],
            &profile,
        )
        .unwrap();
        // Envelope (nu tau)^{-1/2} = 1, kernel = (4π)^{-1/2}.
        let want = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        assert!((report.max_ratio - want).abs() < 1e-9);
    }

    #[test]
    fn envelope_ratio_vanishes_at_large_x_for_p2() {
        let profile = CutoffProfile::SmoothExp;
        let report = verify_envelope(
            &scalar(1.0),
            1,
            KernelVariant::Full,
            2,
            &[EnvelopePoint { tau: 1.0, x_norm: 40.0, k_star: None }],
            &profile,
        )
        .unwrap();
        assert!(report.max_ratio < 1e-12, "gaussian beats any polynomial envelope");
    }

    #[test]
    fn high_envelope_regime_switch() {
        let (_, regime) =
            envelope_value(KernelVariant::High, 1, 0, 1.0, 0.0, Some(2.0), 1.0, 1.0);
        assert_eq!(regime, EnvelopeRegime::LargeNuTau);
        let (_, regime) =
            envelope_value(KernelVariant::High, 1, 0, 0.1, 0.0, Some(2.0), 1.0, 1.0);
        assert_eq!(regime, EnvelopeRegime::SmallNuTau);
    }

    #[test]
    fn high_envelope_ratio_finite_on_grid() {
        let profile = CutoffProfile::SmoothExp;
        let grid = envelope_grid(1e-2, 2.0, 5, 4.0, 4, &[2.0]);
        let report =
            verify_envelope(&scalar(1.0), 1, KernelVariant::High, 0, &grid, &profile).unwrap();
        assert!(report.rejected.is_empty());
        assert!(report.max_ratio.is_finite());
        assert!(report.max_ratio > 0.0);
    }

    #[test]
    fn low_kernel_obeys_exponential_type_bound() {
        // Bernstein-class behaviour of the low kernel: on |Im z| <= 2/k*,
        // the modulus stays below the real-axis maximum times
        // exp(2 k* |Im z|), up to quadrature slack.
        let profile = CutoffProfile::SmoothExp;
        let d_matrix = scalar(1.0);
        let tau = 0.2;
        let ks = 3.0;
        let mut real_max = 0.0_f64;
        for i in 0..=40 {
            let x = -4.0 + 8.0 * i as f64 / 40.0;
            let s =
                eval_kernel(&d_matrix, tau, &[x], KernelVariant::Low, Some(ks), &profile).unwrap();
            real_max = real_max.max(s.value.get(0, 0).abs());
        }
        for i in 0..=8 {
            let x = -2.0 + 4.0 * i as f64 / 8.0;
            for j in 1..=4 {
                let y = 2.0 / ks * j as f64 / 4.0;
                let (re, im, _) =
                    eval_low_kernel_complex(&d_matrix, tau, x, y, ks, &profile).unwrap();
                let modulus = re.get(0, 0).hypot(im.get(0, 0));
                let bound = real_max * (2.0 * ks * y.abs()).exp() * 1.05;
                assert!(
                    modulus <= bound,
                    "exponential type violated at z = {x} + {y}i: {modulus} > {bound}"
                );
            }
        }
    }

    #[test]
    fn complex_eval_reduces_to_real_on_axis() {
        let profile = CutoffProfile::SmoothExp;
        let d_matrix = cgl_diffusion(0.7);
        let (re, im, _) =
            eval_low_kernel_complex(&d_matrix, 0.3, 1.2, 0.0, 2.0, &profile).unwrap();
        let s = eval_kernel(&d_matrix, 0.3, &[1.2], KernelVariant::Low, Some(2.0), &profile)
            .unwrap();
        assert!(im.max_abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert!((re.get(i, j) - s.value.get(i, j)).abs() < 1e-10);
            }
        }
    }
}
