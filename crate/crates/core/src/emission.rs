//! Spontaneous-emission observables: decay constant, level shift, memory
//! kernel, and the Markov-limit amplitude.
//!
//! `decay_and_shift` reads the boundary matrix element
//! `r12 . G(R, R, w0 + i0) . r12` and splits it into a rate and a shift.
//! The memory kernel is the windowed Fourier transform of the same matrix
//! element taken one Laplace shift above the real axis, where the truncated
//! dyadic is smooth.

use alloc::vec::Vec;

use crate::cavity::{CavityGeometry, ModeBasisConfig};
use crate::coupling::MediumLayout;
use crate::dyadic::{g_dyadic, GreenConfig, TruncationMeta};
use crate::material::FreqArg;
use crate::math::{norm, quad_form, Real, Vec3, C64};
use crate::quad::gauss_legendre_on;
use crate::{CoreError, Result};

/// Exclusion-volume growth factor used for the sensitivity diagnostic.
const V0_SCALE: f64 = 2.0;

/// Two-level emitter: position, transition dipole, transition frequency,
/// and optional externally supplied vacuum rate and shift.
///
/// The vacuum terms are never computed here; they are carried through and
/// added to the medium contribution on request.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomConfig {
    pub position: Vec3,
    pub dipole: Vec3,
    pub omega0: f64,
    pub vacuum_rate: f64,
    pub vacuum_shift: f64,
}

impl AtomConfig {
    pub fn new(position: Vec3, dipole: Vec3, omega0: f64) -> Result<Self> {
        if !position.iter().all(|x| x.is_finite()) {
            return Err(CoreError::InvalidInput(alloc::format!(
                "atom position must be finite, got {position:?}"
            )));
        }
        let d = norm(dipole);
        if !(d > 0.0) || !d.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "transition dipole must be finite and nonzero, got {dipole:?}"
            )));
        }
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "transition frequency must be positive and finite, got {omega0}"
            )));
        }
        Ok(AtomConfig {
            position,
            dipole,
            omega0,
            vacuum_rate: 0.0,
            vacuum_shift: 0.0,
        })
    }

    /// Attach externally known vacuum decay and shift contributions.
    pub fn with_vacuum_terms(mut self, rate: f64, shift: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() || !shift.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "vacuum terms must be finite with rate >= 0, got ({rate}, {shift})"
            )));
        }
        self.vacuum_rate = rate;
        self.vacuum_shift = shift;
        Ok(self)
    }

    /// The atom must sit strictly inside the free exclusion box, away from
    /// every medium region.
    pub fn validate_in(&self, geom: &CavityGeometry, layout: &MediumLayout) -> Result<()> {
        if !geom.contains(self.position) {
            return Err(CoreError::OutsideCavity);
        }
        for region in layout.regions() {
            if region.bounds.contains(self.position) {
                return Err(CoreError::AtomInMedium);
            }
        }
        if !layout.exclusion().contains_interior(self.position) {
            return Err(CoreError::InvalidInput(alloc::format!(
                "atom at {:?} must sit strictly inside the exclusion box",
                self.position
            )));
        }
        Ok(())
    }
}

/// Knobs for the emission pipeline on top of the dyadic configuration.
#[derive(Debug, Clone)]
pub struct EmissionConfig {
    pub basis: ModeBasisConfig,
    pub green: GreenConfig,
    /// Coarse refinement rung as a fraction of `basis.n_max`.
    pub ladder_frac: f64,
    /// Relative change between rungs below which the sum counts as converged.
    pub convergence_tol: f64,
    /// Run the exclusion-volume sensitivity diagnostic.
    pub v0_check: bool,
}

impl EmissionConfig {
    pub fn new(basis: ModeBasisConfig, green: GreenConfig) -> Self {
        EmissionConfig {
            basis,
            green,
            ladder_frac: 2.0 / 3.0,
            convergence_tol: 0.05,
            v0_check: true,
        }
    }

    fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if !(self.ladder_frac > 0.0 && self.ladder_frac <= 1.0) {
            return Err(CoreError::InvalidInput(alloc::format!(
                "ladder fraction must lie in (0, 1], got {}",
                self.ladder_frac
            )));
        }
        if !(self.convergence_tol > 0.0) || !self.convergence_tol.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Truncation record plus the refinement evidence behind a rate/shift pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceDiagnostics {
    pub meta: TruncationMeta,
    /// `(omega_cut, gamma, delta)` per refinement rung, coarse first.
    pub ladder: Vec<(f64, f64, f64)>,
    /// Relative change between the last two rungs.
    pub relative_change: f64,
    pub converged: bool,
    /// Relative response of `(gamma, delta)` to doubling the exclusion box,
    /// when requested.
    pub v0_sensitivity: Option<f64>,
}

/// Medium-induced decay constant and level shift, with the vacuum terms
/// carried alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionResult {
    pub gamma: f64,
    pub delta: f64,
    pub vacuum_rate: f64,
    pub vacuum_shift: f64,
    pub diagnostics: ConvergenceDiagnostics,
}

impl EmissionResult {
    pub fn total_rate(&self) -> f64 {
        self.vacuum_rate + self.gamma
    }

    pub fn total_shift(&self) -> f64 {
        self.vacuum_shift + self.delta
    }
}

/// One boundary evaluation of the projected dyadic, split into rate and
/// shift: `gamma = -Im g / hbar`, `delta = Re g / hbar`.
fn rates_at(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
) -> Result<(f64, f64, TruncationMeta)> {
    let value = g_dyadic(
        geom,
        layout,
        atom.position,
        FreqArg::Boundary(atom.omega0),
        basis,
        green,
    )?;
    let g = quad_form(atom.dipole, &value.matrix, atom.dipole);
    let hbar = green.units.hbar;
    Ok((-g.im / hbar, g.re / hbar, value.meta))
}

/// Decay constant and level shift at the transition frequency, medium
/// contribution only.
///
/// Runs a two-rung refinement in the mode cutoff and, when enabled, a
/// sensitivity check against doubling the exclusion box. Non-convergence is
/// reported in the diagnostics, never silently absorbed.
pub fn decay_and_shift(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    cfg: &EmissionConfig,
) -> Result<EmissionResult> {
    cfg.validate()?;
    atom.validate_in(geom, layout)?;

    let full_n = cfg.basis.n_max;
    let coarse_n = (Real::round(full_n as f64 * cfg.ladder_frac) as u32).max(1);
    let (gamma, delta, meta) = rates_at(geom, layout, atom, &cfg.basis, &cfg.green)?;

    let mut ladder = Vec::new();
    let relative_change;
    if coarse_n < full_n {
        let mut coarse_basis = cfg.basis;
        coarse_basis.n_max = coarse_n;
        let (gc, dc, _) = rates_at(geom, layout, atom, &coarse_basis, &cfg.green)?;
        ladder.push((coarse_basis.omega_cut(geom), gc, dc));
        let diff = Real::hypot(gamma - gc, delta - dc);
        let scale = Real::hypot(gamma, delta).max_r(Real::hypot(gc, dc));
        relative_change = if diff == 0.0 { 0.0 } else { diff / scale };
    } else {
        relative_change = 0.0;
    }
    ladder.push((meta.omega_cut, gamma, delta));

    let v0_sensitivity = if cfg.v0_check {
        let grown = layout.with_scaled_exclusion(geom, V0_SCALE)?;
        // Clipping strictly removes medium volume, so equal volumes mean the
        // regions were untouched and the rates cannot move.
        if grown.medium_volume() == layout.medium_volume() {
            Some(0.0)
        } else {
            let (g2, d2, _) = rates_at(geom, &grown, atom, &cfg.basis, &cfg.green)?;
            let diff = Real::hypot(gamma - g2, delta - d2);
            let scale = Real::hypot(gamma, delta).max_r(f64::MIN_POSITIVE);
            Some(diff / scale)
        }
    } else {
        None
    };

    Ok(EmissionResult {
        gamma,
        delta,
        vacuum_rate: atom.vacuum_rate,
        vacuum_shift: atom.vacuum_shift,
        diagnostics: ConvergenceDiagnostics {
            meta,
            ladder,
            relative_change,
            converged: relative_change < cfg.convergence_tol,
            v0_sensitivity,
        },
    })
}

/// Excited-state amplitude in the Markov limit:
/// `c(t) = exp(-i w0 t - (rate + i shift) t)` with the vacuum terms included.
pub fn markov_amplitude(result: &EmissionResult, omega0: f64, t: f64) -> C64 {
    let rate = result.total_rate();
    let shift = result.total_shift();
    C64::new(-rate * t, -(omega0 + shift) * t).exp()
}

/// Sampled matrix element `g(w + i sigma)` on a Gauss-Legendre grid over
/// `[0, omega_cut]`, ready for kernel evaluation at any delay.
///
/// The shift `sigma` is the Laplace offset of the kernel's frequency
/// integral; it must clear the grid spacing or the quadrature cannot resolve
/// the near-axis structure.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    samples: Vec<C64>,
    sigma: f64,
}

impl MemoryKernel {
    pub fn build(
        geom: &CavityGeometry,
        layout: &MediumLayout,
        atom: &AtomConfig,
        cfg: &EmissionConfig,
        sigma: f64,
        points: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        atom.validate_in(geom, layout)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "Laplace shift must be positive, got {sigma}"
            )));
        }
        if points < 8 {
            return Err(CoreError::InvalidInput(alloc::format!(
                "kernel grid needs at least 8 points, got {points}"
            )));
        }
        let omega_cut = cfg.basis.omega_cut(geom);
        let (nodes, weights) = gauss_legendre_on(points, 0.0, omega_cut);
        let mut samples = Vec::with_capacity(points);
        for &w in &nodes {
            let value = g_dyadic(
                geom,
                layout,
                atom.position,
                FreqArg::Complex(C64::new(w, sigma)),
                &cfg.basis,
                &cfg.green,
            )?;
            samples.push(quad_form(atom.dipole, &value.matrix, atom.dipole));
        }
        Ok(MemoryKernel {
            nodes,
            weights,
            samples,
            sigma,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `K(tau) = (1/2 pi) int dw e^{-i w tau} g(w + i sigma)` over the band.
    pub fn eval(&self, tau: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.nodes.len() {
            let phase = C64::new(0.0, -self.nodes[i] * tau).exp();
            acc += phase * self.samples[i] * self.weights[i];
        }
        acc / (2.0 * crate::math::PI)
    }

    /// `int_0^{t_max} K(tau) e^{i w0 tau} d tau`, with the time integral done
    /// in closed form per frequency node.
    ///
    /// For `sigma * t_max >> 1` this approaches `g(w0 + i sigma)`, the
    /// resolvent form of the Markov coefficients. The frequency grid must
    /// still resolve the node-phase oscillation, which caps the usable
    /// horizon at roughly `t_max < 2 pi * points / omega_cut`.
    pub fn markov_integral(&self, omega0: f64, t_max: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.nodes.len() {
            let x = omega0 - self.nodes[i];
            acc += phase_ramp(x, t_max) * self.samples[i] * self.weights[i];
        }
        acc / (2.0 * crate::math::PI)
    }

    /// Amplitude-weighted mean delay of the kernel,
    /// `int tau |K| d tau / int |K| d tau` over `[0, tau_max]`.
    ///
    /// Robust against the interference dip the kernel shows at `tau = 0`,
    /// where each mode's bare and dressed pole contributions cancel. Zero
    /// for an identically zero kernel.
    pub fn correlation_time(&self, tau_max: f64, points: usize) -> f64 {
        let (taus, weights) = gauss_legendre_on(points.max(8), 0.0, tau_max);
        let mut mass = 0.0;
        let mut moment = 0.0;
        for i in 0..taus.len() {
            let a = self.eval(taus[i]).norm();
            mass += a * weights[i];
            moment += taus[i] * a * weights[i];
        }
        if mass == 0.0 {
            0.0
        } else {
            moment / mass
        }
    }
}

/// `int_0^t e^{i x s} ds`, stable through `x = 0` where it equals `t`.
fn phase_ramp(x: f64, t: f64) -> C64 {
    let xt = x * t;
    if Real::abs(xt) < 1e-6 {
        C64::new(t, 0.0) * C64::new(1.0, 0.5 * xt)
    } else {
        (C64::new(0.0, xt).exp() - 1.0) / C64::new(0.0, x)
    }
}

/// Memory kernel at a single delay, built with default grid settings
/// (`sigma = 0.05 w0`, 400 frequency points). Batch callers should build a
/// [`MemoryKernel`] once and reuse it.
pub fn memory_kernel(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    tau: f64,
    cfg: &EmissionConfig,
) -> Result<C64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "kernel delay must be finite and nonnegative, got {tau}"
        )));
    }
    let kernel = MemoryKernel::build(geom, layout, atom, cfg, 0.05 * atom.omega0, 400)?;
    Ok(kernel.eval(tau))
}
