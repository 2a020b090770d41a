//! Pseudo-spectral simulator for the complex Ginzburg-Landau equation on a
//! periodic 1-D grid.
//!
//! The linear part `(1+iα)∂ₓ² + 1` is integrated exactly in spectral space;
//! the cubic nonlinearity goes through a fourth-order exponential
//! Runge-Kutta tableau with 2/3 dealiasing. Twin trajectories share the
//! stepper, so their difference realizes the linearized difference flow
//! without a separate solver.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Nonlinearity, ScaleSet};
use crate::spectral::SpectralGrid;

/// One N-component snapshot on the periodic grid, component-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub n_components: usize,
    pub grid_points: usize,
    pub domain_length: f64,
    pub time: f64,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(n_components: usize, grid_points: usize, domain_length: f64) -> Field {
        Field {
            n_components,
            grid_points,
            domain_length,
            time: 0.0,
            data: vec![0.0; n_components * grid_points],
        }
    }

    pub fn grid_spacing(&self) -> f64 {
        self.domain_length / self.grid_points as f64
    }

    pub fn value(&self, component: usize, i: usize) -> f64 {
        self.data[component * self.grid_points + i]
    }

    /// Euclidean norm over components at one grid point.
    pub fn point_norm(&self, i: usize) -> f64 {
        (0..self.n_components)
            .map(|c| {
                let v = self.value(c, i);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid_points).fold(0.0_f64, |m, i| m.max(self.point_norm(i)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Complex view of a two-component field.
    pub fn to_complex(&self) -> Result<Vec<Complex64>> {
        if self.n_components != 2 {
            return Err(Error::validation(
                "complex view requires exactly 2 components",
            ));
        }
        let g = self.grid_points;
        Ok((0..g)
            .map(|i| Complex64::new(self.data[i], self.data[g + i]))
            .collect())
    }

    pub fn from_complex(values: &[Complex64], domain_length: f64, time: f64) -> Field {
        let g = values.len();
        let mut data = vec![0.0; 2 * g];
        for (i, v) in values.iter().enumerate() {
            data[i] = v.re;
            data[g + i] = v.im;
        }
        Field { n_components: 2, grid_points: g, domain_length, time, data }
    }

    /// Pointwise difference `self - other`; both fields must share the grid.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        if self.n_components != other.n_components
            || self.grid_points != other.grid_points
            || self.domain_length != other.domain_length
        {
            return Err(Error::validation("fields live on different grids"));
        }
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(other.data.iter()) {
            *o -= v;
        }
        Ok(out)
    }

    /// Sup over the centered window `|x| <= half_width` (periodic positions).
    pub fn windowed_sup(&self, half_width: f64) -> f64 {
        let g = self.grid_points;
        let h = self.grid_spacing();
        let mut m = 0.0_f64;
        for i in 0..g {
            let x = i as f64 * h;
            let signed = if x <= self.domain_length / 2.0 { x } else { x - self.domain_length };
            if signed.abs() <= half_width + 1e-12 {
                m = m.max(self.point_norm(i));
            }
        }
        m
    }
}

/// Which terms of the CGL right-hand side the stepper applies.
///
/// Disabling the linear gain leaves pure (complex) diffusion; disabling the
/// nonlinearity makes every spectral mode evolve by its exact exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepperOptions {
    pub include_linear_gain: bool,
    pub include_nonlinearity: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions { include_linear_gain: true, include_nonlinearity: true }
    }
}

impl StepperOptions {
    pub fn diffusion_only() -> Self {
        StepperOptions { include_linear_gain: false, include_nonlinearity: false }
    }

    pub fn linear_only() -> Self {
        StepperOptions { include_linear_gain: true, include_nonlinearity: false }
    }
}

/// Exponential Runge-Kutta coefficient `(e^{z/2} - 1)/z`.
fn phi_half(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        // sum_{n>=1} z^{n-1} / (2^n n!)
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for n in 2..=24 {
            term = term * z / (2.0 * n as f64);
            sum += term;
        }
        sum
    } else {
        ((z * 0.5).exp() - 1.0) / z
    }
}

/// The three quadrature weights of the fourth-order exponential tableau,
/// without the time-step factor.
fn etdrk4_weights(z: Complex64) -> (Complex64, Complex64, Complex64) {
    if z.norm() < 0.25 {
        // All three numerators vanish to second order at z = 0; the series
        // coefficients below come from expanding e^z against the polynomial
        // prefactors.
        let mut f1 = Complex64::new(0.0, 0.0);
        let mut f2 = Complex64::new(0.0, 0.0);
        let mut f3 = Complex64::new(0.0, 0.0);
        let mut zp = Complex64::new(1.0, 0.0); // z^{n-3}
        let mut nm2_fact = 1.0; // (n-2)! at n = 3
        let mut nm1_fact = 2.0; // (n-1)!
        let mut n_fact = 6.0; // n!
        for n in 3..=26u64 {
            f1 += zp * (4.0 / n_fact - 3.0 / nm1_fact + 1.0 / nm2_fact);
            f2 += zp * (-2.0 / n_fact + 1.0 / nm1_fact);
            f3 += zp * (4.0 / n_fact - 1.0 / nm1_fact);
            zp *= z;
            nm2_fact = nm1_fact;
            nm1_fact = n_fact;
            n_fact *= (n + 1) as f64;
        }
        (f1, f2, f3)
    } else {
        let ez = z.exp();
        let z3 = z * z * z;
        let f1 = (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
        let f2 = (2.0 + z + ez * (-2.0 + z)) / z3;
        let f3 = (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
        (f1, f2, f3)
    }
}

pub struct CglStepper {
    grid: SpectralGrid,
    pub dt: f64,
    beta: f64,
    options: StepperOptions,
    e_full: Vec<Complex64>,
    e_half: Vec<Complex64>,
    q: Vec<Complex64>,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
    w3: Vec<Complex64>,
    dealias: Vec<bool>,
    pub dt_limit: f64,
}

struct Workspace {
    nv: Vec<Complex64>,
    a: Vec<Complex64>,
    na: Vec<Complex64>,
    b: Vec<Complex64>,
    nb: Vec<Complex64>,
    c: Vec<Complex64>,
    nc: Vec<Complex64>,
    phys: Vec<Complex64>,
}

impl Workspace {
    fn new(g: usize) -> Workspace {
        let z = vec![Complex64::new(0.0, 0.0); g];
        Workspace {
            nv: z.clone(),
            a: z.clone(),
            na: z.clone(),
            b: z.clone(),
            nb: z.clone(),
            c: z.clone(),
            nc: z.clone(),
            phys: z,
        }
    }
}

impl CglStepper {
    pub fn new(
        model: &ModelSpec,
        scales: &ScaleSet,
        grid_points: usize,
        domain_length: f64,
        dt: f64,
        options: StepperOptions,
    ) -> Result<CglStepper> {
        model.validate()?;
        let Nonlinearity::Cgl { alpha, beta } = model.nonlinearity;
        let grid = SpectralGrid::new(grid_points, domain_length)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation(format!("dt must be positive, got {dt}")));
        }
        // Retained modes after 2/3 dealiasing set the accuracy limit of the
        // nonlinear sector; the exponential integrator handles stiffness.
        let j_keep = grid_points / 3;
        let k_ret = 2.0 * std::f64::consts::PI * j_keep as f64 / domain_length;
        let dt_limit = (0.2 / scales.m_star).min(1.0 / (scales.nu_star * k_ret * k_ret));
        if dt > dt_limit * (1.0 + 1e-12) {
            return Err(Error::validation(format!(
                "dt = {dt:.6e} exceeds the stability limit {dt_limit:.6e} \
                 (min of 0.2/m_star and 1/(nu_star·k_retained²))"
            )));
        }
        let g = grid_points;
        let gain = if options.include_linear_gain { 1.0 } else { 0.0 };
        let mut e_full = Vec::with_capacity(g);
        let mut e_half = Vec::with_capacity(g);
        let mut q = Vec::with_capacity(g);
        let mut w1 = Vec::with_capacity(g);
        let mut w2 = Vec::with_capacity(g);
        let mut w3 = Vec::with_capacity(g);
        let mut dealias = Vec::with_capacity(g);
        for j in 0..g {
            let k = grid.wavenumber(j);
            let l = Complex64::new(gain, 0.0) - Complex64::new(1.0, alpha) * k * k;
            let z = l * dt;
            e_full.push(z.exp());
            e_half.push((z * 0.5).exp());
            q.push(phi_half(z) * dt);
            let (f1, f2, f3) = etdrk4_weights(z);
            w1.push(f1 * dt);
            w2.push(f2 * dt);
            w3.push(f3 * dt);
            let signed = if j <= g / 2 { j as isize } else { j as isize - g as isize };
            dealias.push(signed.unsigned_abs() <= g / 3);
        }
        Ok(CglStepper {
            grid,
            dt,
            beta,
            options,
            e_full,
            e_half,
            q,
            w1,
            w2,
            w3,
            dealias,
            dt_limit,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.grid.grid_points
    }

    pub fn domain_length(&self) -> f64 {
        self.grid.domain_length
    }

    fn nonlinear(&self, vhat: &[Complex64], out: &mut [Complex64], phys: &mut [Complex64]) {
        phys.copy_from_slice(vhat);
        self.grid.inverse(phys);
        let coef = Complex64::new(1.0, self.beta);
        for (o, v) in out.iter_mut().zip(phys.iter()) {
            *o = -coef * v * v.norm_sqr();
        }
        self.grid.forward(out);
        for (o, keep) in out.iter_mut().zip(self.dealias.iter()) {
            if !keep {
                *o = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn step_spectral(&self, vhat: &mut [Complex64], ws: &mut Workspace) {
        if !self.options.include_nonlinearity {
            for (v, e) in vhat.iter_mut().zip(self.e_full.iter()) {
                *v *= e;
            }
            return;
        }
        let g = vhat.len();
        self.nonlinear(vhat, &mut ws.nv, &mut ws.phys);
        for j in 0..g {
            ws.a[j] = self.e_half[j] * vhat[j] + self.q[j] * ws.nv[j];
        }
        self.nonlinear(&ws.a, &mut ws.na, &mut ws.phys);
        for j in 0..g {
            ws.b[j] = self.e_half[j] * vhat[j] + self.q[j] * ws.na[j];
        }
        self.nonlinear(&ws.b, &mut ws.nb, &mut ws.phys);
        for j in 0..g {
            ws.c[j] = self.e_half[j] * ws.a[j] + self.q[j] * (2.0 * ws.nb[j] - ws.nv[j]);
        }
        self.nonlinear(&ws.c, &mut ws.nc, &mut ws.phys);
        for j in 0..g {
            vhat[j] = self.e_full[j] * vhat[j]
                + self.w1[j] * ws.nv[j]
                + 2.0 * self.w2[j] * (ws.na[j] + ws.nb[j])
                + self.w3[j] * ws.nc[j];
        }
    }
}

/// Driver pairing a stepper with its scratch buffers and divergence checks.
pub struct Evolver {
    stepper: CglStepper,
    ws: Workspace,
}

impl Evolver {
    pub fn new(stepper: CglStepper) -> Evolver {
        let g = stepper.grid_points();
        Evolver { stepper, ws: Workspace::new(g) }
    }

    pub fn stepper(&self) -> &CglStepper {
        &self.stepper
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    /// Advance a spectral state by one step, checking for divergence.
    pub fn step_state(&mut self, vhat: &mut [Complex64], time_after: f64) -> Result<()> {
        self.stepper.step_spectral(vhat, &mut self.ws);
        if !vhat.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::numerical(format!(
                "solution diverged (non-finite values) at t = {time_after:.6}"
            )));
        }
        Ok(())
    }

    /// One full time step on a field snapshot.
    pub fn step_field(&mut self, field: &Field) -> Result<Field> {
        let mut vhat = field.to_complex()?;
        self.stepper.grid.forward(&mut vhat);
        let t1 = field.time + self.stepper.dt;
        self.step_state(&mut vhat, t1)?;
        self.stepper.grid.inverse(&mut vhat);
        Ok(Field::from_complex(&vhat, field.domain_length, t1))
    }
}

/// Advance one time step of the CGL flow.
pub fn step(
    field: &Field,
    model: &ModelSpec,
    scales: &ScaleSet,
    dt: f64,
    options: StepperOptions,
) -> Result<Field> {
    if !field.is_finite() {
        return Err(Error::validation("input field contains non-finite values"));
    }
    let stepper = CglStepper::new(
        model,
        scales,
        field.grid_points,
        field.domain_length,
        dt,
        options,
    )?;
    Evolver::new(stepper).step_field(field)
}

fn steps_for(interval: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (interval / dt).round();
    if n < 0.0 || (interval - n * dt).abs() > 1e-6 * dt.max(interval.abs()) {
        return Err(Error::validation(format!(
            "{what} = {interval} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Deterministic trajectory with snapshots at the requested cadence.
///
/// The final state is always included, whether or not it falls on the
/// snapshot cadence.
pub fn evolve(
    field: &Field,
    model: &ModelSpec,
    scales: &ScaleSet,
    t_final: f64,
    dt: f64,
    snapshot_every: f64,
    options: StepperOptions,
) -> Result<Vec<Field>> {
    if t_final < field.time {
        return Err(Error::validation(format!(
            "t_final = {t_final} precedes the field time {}",
            field.time
        )));
    }
    if t_final == field.time {
        return Ok(vec![field.clone()]);
    }
    let total_steps = steps_for(t_final - field.time, dt, "evolution horizon")?;
    let snap_stride = if snapshot_every > 0.0 {
        steps_for(snapshot_every, dt, "snapshot_every")?.max(1)
    } else {
        total_steps
    };
    let stepper =
        CglStepper::new(model, scales, field.grid_points, field.domain_length, dt, options)?;
    let mut evolver = Evolver::new(stepper);
    let mut vhat = field.to_complex()?;
    evolver.stepper.grid.forward(&mut vhat);
    let t0 = field.time;
    let mut snapshots = vec![field.clone()];
    for step_idx in 1..=total_steps {
        let t = t0 + step_idx as f64 * dt;
        evolver.step_state(&mut vhat, t)?;
        if step_idx % snap_stride == 0 || step_idx == total_steps {
            let mut phys = vhat.clone();
            evolver.stepper.grid.inverse(&mut phys);
            snapshots.push(Field::from_complex(&phys, field.domain_length, t));
        }
    }
    Ok(snapshots)
}

/// Random initial data in the absorbing basin: uniform components smoothed
/// by one application of the diffusion semigroup over `tau_star`.
pub fn initial_field(
    model: &ModelSpec,
    scales: &ScaleSet,
    grid_points: usize,
    domain_length: f64,
    seed: u64,
) -> Result<Field> {
    model.validate()?;
    let Nonlinearity::Cgl { alpha, .. } = model.nonlinearity;
    let grid = SpectralGrid::new(grid_points, domain_length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vhat: Vec<Complex64> = (0..grid_points)
        .map(|_| Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
        .collect();
    grid.forward(&mut vhat);
    for (j, v) in vhat.iter_mut().enumerate() {
        let k = grid.wavenumber(j);
        *v *= (-Complex64::new(1.0, alpha) * k * k * scales.tau_star).exp();
    }
    grid.inverse(&mut vhat);
    Ok(Field::from_complex(&vhat, domain_length, 0.0))
}

/// Where a twin perturbation is allowed to live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PerturbationSupport {
    /// Vanishes exactly on the sampling lattice `{m·delta_star}`.
    LatticeOnly,
    Everywhere,
}

/// Separation record of a twin pair at one time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeparationSample {
    pub time: f64,
    /// Sup over all grid points of the pointwise difference norm.
    pub sup_grid: f64,
    /// Sup over the sampling lattice inside the window.
    pub sup_lattice: f64,
}

/// Two trajectories sharing a grid and stepper, plus their separation history.
#[derive(Debug, Clone)]
pub struct TwinPair {
    pub u: Field,
    pub v: Field,
    pub delta_star: f64,
    /// Grid points per lattice cell; `delta_star = stride · h` exactly.
    pub lattice_stride: usize,
    /// Half-width of the lattice window for the discrete norm.
    pub lambda: f64,
    pub history: Vec<SeparationSample>,
}

/// Integer grid stride for a length that must align with the grid.
pub fn grid_stride(length: f64, h: f64, what: &str) -> Result<usize> {
    let ratio = length / h;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::validation(format!(
            "{what} = {length} is not an integer multiple of the grid spacing {h} \
             (ratio {ratio})"
        )));
    }
    Ok(stride as usize)
}

impl TwinPair {
    pub fn separation(&self) -> Result<Field> {
        self.u.difference(&self.v)
    }

    /// Current grid and lattice sups of the separation.
    pub fn separation_sample(&self) -> Result<SeparationSample> {
        let w = self.separation()?;
        let sup_grid = w.sup_norm();
        let sup_lattice = lattice_sup(&w, self.lattice_stride, self.lambda);
        Ok(SeparationSample { time: self.u.time, sup_grid, sup_lattice })
    }
}

/// Sup of the pointwise norm over lattice points `n·stride·h` with
/// `|n·stride·h| <= lambda` (positions taken modulo the period).
pub fn lattice_sup(field: &Field, stride: usize, lambda: f64) -> f64 {
    let g = field.grid_points;
    let h = field.grid_spacing();
    let delta = stride as f64 * h;
    let n_max = (lambda / delta + 1e-9).floor() as i64;
    let mut m = 0.0_f64;
    for n in -n_max..=n_max {
        let idx = (n * stride as i64).rem_euclid(g as i64) as usize;
        m = m.max(field.point_norm(idx));
    }
    m
}

/// C² bump with compact support: `(1 - (r/radius)²)³` inside, zero outside.
fn bump(r: f64, radius: f64) -> f64 {
    if r.abs() >= radius {
        0.0
    } else {
        let s = 1.0 - (r / radius) * (r / radius);
        s * s * s
    }
}

/// Construct a perturbed twin of `field`.
///
/// With lattice-only support, the perturbation is a sum of narrow bumps
/// centered between lattice points, so the discrete norm vanishes exactly at
/// t = 0 while the sup norm equals `epsilon0`.
pub fn make_twin(
    field: &Field,
    model: &ModelSpec,
    scales: &ScaleSet,
    epsilon0: f64,
    support: PerturbationSupport,
    seed: u64,
    lambda: f64,
) -> Result<TwinPair> {
    if epsilon0 < 0.0 || !epsilon0.is_finite() {
        return Err(Error::validation(format!(
            "perturbation amplitude must be non-negative, got {epsilon0}"
        )));
    }
    if epsilon0 > model.q_star / 2.0 {
        return Err(Error::validation(format!(
            "perturbation amplitude {epsilon0} exceeds q_star/2 = {}; the \
             difference-flow bound no longer applies",
            model.q_star / 2.0
        )));
    }
    if lambda > field.domain_length / 4.0 + 1e-12 {
        return Err(Error::validation(format!(
            "window half-width {lambda} exceeds a quarter period {}",
            field.domain_length / 4.0
        )));
    }
    let h = field.grid_spacing();
    let stride = grid_stride(scales.delta_star, h, "delta_star")?;
    if field.grid_points % stride != 0 {
        return Err(Error::validation(format!(
            "lattice stride {stride} must divide the grid size {}",
            field.grid_points
        )));
    }
    let g = field.grid_points;
    let mut v = field.clone();
    if epsilon0 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = vec![0.0_f64; 2 * g];
        match support {
            PerturbationSupport::Everywhere => {
                // Smooth random field: white noise low-passed in spectral space.
                let grid = SpectralGrid::new(g, field.domain_length)?;
                let mut modes: Vec<Complex64> = (0..g)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                grid.forward(&mut modes);
                let k_c = 2.0 * std::f64::consts::PI * (g as f64 / 16.0)
                    / field.domain_length;
                for (j, m) in modes.iter_mut().enumerate() {
                    let k = grid.wavenumber(j);
                    *m *= (-(k / k_c) * (k / k_c)).exp();
                }
                grid.inverse(&mut modes);
                for i in 0..g {
                    rho[i] = modes[i].re;
                    rho[g + i] = modes[i].im;
                }
            }
            PerturbationSupport::LatticeOnly => {
                if stride % 2 != 0 {
                    return Err(Error::validation(format!(
                        "lattice-only perturbations need an even delta_star/h \
                         ratio so bump centers fall on grid points; got {stride}"
                    )));
                }
                let radius = scales.delta_star / 4.0;
                let cells = g / stride;
                for cell in 0..cells {
                    let center_idx = cell * stride + stride / 2;
                    let amp = rng.gen_range(0.5..1.0);
                    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                    let (dir_im, dir_re) = angle.sin_cos();
                    // Bump reaches radius/h grid points to each side.
                    let reach = (radius / h).ceil() as i64;
                    for off in -reach..=reach {
                        let idx = (center_idx as i64 + off).rem_euclid(g as i64) as usize;
                        let b = amp * bump(off as f64 * h, radius);
                        rho[idx] += b * dir_re;
                        rho[g + idx] += b * dir_im;
                    }
                }
            }
        }
        let max = (0..g)
            .map(|i| rho[i].hypot(rho[g + i]))
            .fold(0.0_f64, f64::max);
        if max == 0.0 {
            return Err(Error::numerical("perturbation construction produced zero field"));
        }
        let scale = epsilon0 / max;
        for (dst, r) in v.data.iter_mut().zip(rho.iter()) {
            *dst += r * scale;
        }
    }
    let mut pair = TwinPair {
        u: field.clone(),
        v,
        delta_star: scales.delta_star,
        lattice_stride: stride,
        lambda,
        history: Vec::new(),
    };
    let sample = pair.separation_sample()?;
    pair.history.push(sample);
    Ok(pair)
}

/// Evolve both members of a pair with the identical scheme, appending
/// separation samples at the recording cadence.
pub fn evolve_twin(
    pair: &TwinPair,
    model: &ModelSpec,
    scales: &ScaleSet,
    t_final: f64,
    dt: f64,
    record_every: f64,
    options: StepperOptions,
) -> Result<TwinPair> {
    if t_final < pair.u.time {
        return Err(Error::validation(format!(
            "t_final = {t_final} precedes the pair time {}",
            pair.u.time
        )));
    }
    let mut out = pair.clone();
    if t_final == pair.u.time {
        return Ok(out);
    }
    let total_steps = steps_for(t_final - pair.u.time, dt, "evolution horizon")?;
    let rec_stride = if record_every > 0.0 {
        steps_for(record_every, dt, "record_every")?.max(1)
    } else {
        total_steps
    };
    let stepper = CglStepper::new(
        model,
        scales,
        pair.u.grid_points,
        pair.u.domain_length,
        dt,
        options,
    )?;
    let mut evolver = Evolver::new(stepper);
    let mut uhat = pair.u.to_complex()?;
    let mut vvhat = pair.v.to_complex()?;
    evolver.stepper.grid.forward(&mut uhat);
    evolver.stepper.grid.forward(&mut vvhat);
    let t0 = pair.u.time;
    for step_idx in 1..=total_steps {
        let t = t0 + step_idx as f64 * dt;
        evolver.step_state(&mut uhat, t)?;
        evolver.step_state(&mut vvhat, t)?;
        if step_idx % rec_stride == 0 || step_idx == total_steps {
            let mut up = uhat.clone();
            let mut vp = vvhat.clone();
            evolver.stepper.grid.inverse(&mut up);
            evolver.stepper.grid.inverse(&mut vp);
            out.u = Field::from_complex(&up, pair.u.domain_length, t);
            out.v = Field::from_complex(&vp, pair.u.domain_length, t);
            let sample = out.separation_sample()?;
            out.history.push(sample);
        }
    }
    Ok(out)
}

/// Least-squares exponential growth rate of the separation history.
///
/// Only samples with `0 < sup <= cap` enter the fit; returns `None` when
/// fewer than three such samples exist.
pub fn fit_growth_rate(history: &[SeparationSample], cap: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .filter(|s| s.sup_grid > 0.0 && s.sup_grid <= cap)
        .map(|s| (s.time, s.sup_grid.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
