//! PDE instance descriptions and the derived physical scales.
//!
//! A `ModelSpec` describes one reaction-diffusion system `∂_t u = D Δu + F(u)`;
//! the derived `ScaleSet` carries the natural units in which every bound of
//! the rest of the crate is phrased: the slowest/strongest dissipation rates
//! `nu_star`/`d_star`, the expansion bound `m_star`, the time unit
//! `tau_star = 1/m_star`, the length unit `delta_star = sqrt(d_star·tau_star)`
//! and the dissipative frequency cutoff `k_star`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Reaction term of the system.
///
/// Only the cubic complex Ginzburg-Landau nonlinearity is built in; other
/// reaction terms must supply an explicit expansion bound via
/// `m_star_override`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Nonlinearity {
    Cgl { alpha: f64, beta: f64 },
}

/// One PDE instance: diffusion matrix, nonlinearity and absorbing radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n_components: usize,
    pub diffusion: Mat,
    pub nonlinearity: Nonlinearity,
    /// Absorbing radius in the sup norm: trajectories eventually stay below
    /// `q_star / 2`, and twin differences below `q_star`.
    pub q_star: f64,
    /// Explicit expansion bound replacing the built-in formula.
    pub m_star_override: Option<f64>,
}

impl ModelSpec {
    /// The two-component real form of the complex Ginzburg-Landau equation
    /// `∂_t v = (1+iα) v'' + v − (1+iβ) v|v|²`.
    pub fn cgl(alpha: f64, beta: f64, q_star: f64) -> ModelSpec {
        let diffusion =
            Mat::from_rows(&[vec![1.0, -alpha], vec![alpha, 1.0]]).expect("2x2 rows");
        ModelSpec {
            n_components: 2,
            diffusion,
            nonlinearity: Nonlinearity::Cgl { alpha, beta },
            q_star,
            m_star_override: None,
        }
    }

    pub fn with_m_star_override(mut self, m_star: f64) -> ModelSpec {
        self.m_star_override = Some(m_star);
        self
    }

    pub fn cgl_params(&self) -> (f64, f64) {
        match self.nonlinearity {
            Nonlinearity::Cgl { alpha, beta } => (alpha, beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 || self.n_components > 4 {
            return Err(Error::validation(format!(
                "n_components must be in 1..=4, got {}",
                self.n_components
            )));
        }
        if self.diffusion.dim() != self.n_components {
            return Err(Error::validation(format!(
                "diffusion matrix is {}x{} but the system has {} components",
                self.diffusion.dim(),
                self.diffusion.dim(),
                self.n_components
            )));
        }
        if !(self.q_star > 0.0) || !self.q_star.is_finite() {
            return Err(Error::validation(format!(
                "q_star must be a positive finite number, got {}",
                self.q_star
            )));
        }
        if let Some(m) = self.m_star_override {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::validation(format!(
                    "m_star_override must be positive and finite, got {m}"
                )));
            }
        }
        match self.nonlinearity {
            Nonlinearity::Cgl { .. } => {
                if self.n_components != 2 {
                    return Err(Error::validation(
                        "the CGL nonlinearity uses the 2-component real form; \
                         n_components must be 2",
                    ));
                }
            }
        }
        // Standing assumption: the symmetric part of D has spectrum in the
        // open right half-line.
        let eigs = self.diffusion.symmetric_part().sym_eigenvalues();
        if let Some(bad) = eigs.iter().find(|e| **e <= 0.0) {
            return Err(Error::validation(format!(
                "symmetric part of the diffusion matrix has a non-positive \
                 eigenvalue {bad:.6e}; all dissipation rates must be positive"
            )));
        }
        Ok(())
    }
}

/// Derived physical units of one model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    /// Smallest eigenvalue of the symmetrized diffusion matrix.
    pub nu_star: f64,
    /// Operator norm of the diffusion matrix.
    pub d_star: f64,
    /// Uniform bound on the local expansion rate of the difference flow.
    pub m_star: f64,
    /// Natural time unit, exactly `1 / m_star`.
    pub tau_star: f64,
    /// Natural length unit, exactly `sqrt(d_star · tau_star)`.
    pub delta_star: f64,
    /// Dissipative-range frequency cutoff `prefactor · sqrt(m_star / nu_star)`.
    pub k_star: f64,
    /// `d_star / nu_star`, compares strongest to weakest dissipation.
    pub condition_ratio: f64,
}

/// Smallest eigenvalue of `(D + Dᵀ)/2`, the minimal dissipation rate.
pub fn compute_nu_star(spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    let eigs = spec.diffusion.symmetric_part().sym_eigenvalues();
    Ok(eigs[0])
}

/// Operator norm of `D` as a map on l², the strongest dissipation rate.
pub fn compute_d_star(spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.diffusion.operator_norm())
}

/// Expansion bound `m_star`.
///
/// For the CGL nonlinearity this is `1 + 3 (1 + |β|) q_star² / 4`; any other
/// nonlinearity must carry an explicit override.
pub fn compute_m_star(spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    if let Some(m) = spec.m_star_override {
        return Ok(m);
    }
    match spec.nonlinearity {
        Nonlinearity::Cgl { beta, .. } => {
            Ok(1.0 + 3.0 * (1.0 + beta.abs()) * spec.q_star * spec.q_star / 4.0)
        }
    }
}

/// Derive the full scale set.
///
/// The prefactor multiplies `sqrt(m_star / nu_star)` to give `k_star`; the
/// hard constraint `k_star² ≥ 1/(nu_star · tau_star)` reduces to
/// `prefactor ≥ 1`, and violations report the minimum admissible value.
pub fn derive_scales(spec: &ModelSpec, k_star_prefactor: f64) -> Result<ScaleSet> {
    spec.validate()?;
    if !(k_star_prefactor > 0.0) || !k_star_prefactor.is_finite() {
        return Err(Error::validation(format!(
            "k_star_prefactor must be positive and finite, got {k_star_prefactor}"
        )));
    }
    let nu_star = compute_nu_star(spec)?;
    let d_star = compute_d_star(spec)?;
    let m_star = compute_m_star(spec)?;
    let tau_star = 1.0 / m_star;
    let delta_star = (d_star * tau_star).sqrt();
    let k_star = k_star_prefactor * (m_star / nu_star).sqrt();
    // k_star² · nu_star · tau_star = prefactor², so the constraint is on the
    // prefactor alone.
    if k_star * k_star * nu_star * tau_star < 1.0 - 1e-12 {
        return Err(Error::validation(format!(
            "k_star_prefactor {k_star_prefactor} violates the cutoff \
             constraint k_star² ≥ 1/(nu_star·tau_star); the minimum \
             admissible prefactor is 1.0"
        )));
    }
    Ok(ScaleSet {
        nu_star,
        d_star,
        m_star,
        tau_star,
        delta_star,
        k_star,
        condition_ratio: d_star / nu_star,
    })
}
