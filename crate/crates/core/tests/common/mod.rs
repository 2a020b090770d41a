//! Shared fixtures for the integration suites.

use entv_core::model::derive_scales;
use entv_core::pde::{evolve, initial_field, Field, StepperOptions};
use entv_core::{ModelSpec, ScaleSet};

/// Amplitude-turbulent CGL instance: alpha = 2, beta = -2, q_star = 2, so
/// m_star = 10, tau_star = 0.1 and delta_star = sqrt(sqrt(5)/10).
pub fn chaotic_model() -> (ModelSpec, ScaleSet) {
    let model = ModelSpec::cgl(2.0, -2.0, 2.0);
    let scales = derive_scales(&model, 4.0).unwrap();
    (model, scales)
}

/// Grid with delta_star/h = 16 on a domain of `cells` natural lengths.
pub fn chaotic_grid(scales: &ScaleSet, cells: usize) -> (usize, f64) {
    let grid_points = 16 * cells;
    let domain_length = cells as f64 * scales.delta_star;
    (grid_points, domain_length)
}

/// Standard time step: tau_star/512 sits inside the stability limit for the
/// grids used here.
pub fn chaotic_dt(scales: &ScaleSet) -> f64 {
    scales.tau_star / 512.0
}

/// Settled post-transient state of the chaotic instance.
pub fn settled_state(
    model: &ModelSpec,
    scales: &ScaleSet,
    grid_points: usize,
    domain_length: f64,
    seed: u64,
    transient: f64,
) -> Field {
    let f0 = initial_field(model, scales, grid_points, domain_length, seed).unwrap();
    evolve(
        &f0,
        model,
        scales,
        transient,
        chaotic_dt(scales),
        0.0,
        StepperOptions::default(),
    )
    .unwrap()
    .pop()
    .unwrap()
}

pub fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "{} — criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
