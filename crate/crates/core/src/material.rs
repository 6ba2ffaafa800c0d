//! Lorentz-oscillator material response: time- and frequency-domain
//! susceptibilities, the coupling strengths they induce, and the half-line
//! Cauchy transforms Z(w) with their real-axis boundary values.

use crate::cavity::Units;
use crate::math::{Real, C64, PI};
use crate::quad::{integrate_adaptive, integrate_adaptive_c};
use crate::{CoreError, Result};
use alloc::vec::Vec;

/// Value of a susceptibility or Z-transform evaluation.
pub type ComplexResponse = C64;

/// Single Lorentz oscillator: chi(omega) = omega_p^2 / (omega_T^2 - omega^2 - i gamma omega).
///
/// gamma > 0 keeps the absorption strictly positive at all positive
/// frequencies, which the decay-rate positivity ultimately rests on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzModel {
    omega_p_sq: f64,
    omega_t: f64,
    gamma: f64,
}

impl LorentzModel {
    pub fn new(omega_p_sq: f64, omega_t: f64, gamma: f64) -> Result<Self> {
        if !(omega_p_sq >= 0.0) || !omega_p_sq.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "plasma strength must be nonnegative, got {omega_p_sq}"
            )));
        }
        if !(omega_t > 0.0) || !omega_t.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "resonance frequency must be positive, got {omega_t}"
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "damping must be positive, got {gamma}"
            )));
        }
        Ok(LorentzModel { omega_p_sq, omega_t, gamma })
    }

    #[inline]
    pub fn omega_p_sq(&self) -> f64 {
        self.omega_p_sq
    }

    #[inline]
    pub fn omega_t(&self) -> f64 {
        self.omega_t
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn chi_freq(&self, omega: f64) -> C64 {
        let denom = C64::new(
            self.omega_t * self.omega_t - omega * omega,
            -self.gamma * omega,
        );
        C64::new(self.omega_p_sq, 0.0) / denom
    }

    pub fn chi_imag(&self, omega: f64) -> f64 {
        let a = self.omega_t * self.omega_t - omega * omega;
        let b = self.gamma * omega;
        self.omega_p_sq * b / (a * a + b * b)
    }

    /// d(chi_imag)/d(omega), used to stabilize the subtracted PV integrand
    /// at nodes that fall pathologically close to the pole.
    fn chi_imag_deriv(&self, omega: f64) -> f64 {
        let a = self.omega_t * self.omega_t - omega * omega;
        let d = a * a + self.gamma * self.gamma * omega * omega;
        let dd = 2.0 * a * (-2.0 * omega) + 2.0 * self.gamma * self.gamma * omega;
        self.omega_p_sq * self.gamma * (d - omega * dd) / (d * d)
    }

    /// Causal time-domain response; zero for t <= 0. Underdamped oscillators
    /// follow the sine branch; gamma >= 2 omega_T continues through the
    /// critically damped and hyperbolic branches of the same analytic
    /// expression.
    pub fn chi_time(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let disc = self.omega_t * self.omega_t - 0.25 * self.gamma * self.gamma;
        let crit_tol = 1e-12 * self.omega_t * self.omega_t;
        if disc.abs() <= crit_tol {
            return self.omega_p_sq * t * (-0.5 * self.gamma * t).exp();
        }
        if disc > 0.0 {
            let om = disc.sqrt();
            self.omega_p_sq * (-0.5 * self.gamma * t).exp() * (om * t).sin() / om
        } else {
            // Expanded so the growing sinh factor never overflows: both
            // exponents are strictly negative.
            let om = (-disc).sqrt();
            self.omega_p_sq * ((om - 0.5 * self.gamma) * t).exp() / (2.0 * om)
                - self.omega_p_sq * (-(om + 0.5 * self.gamma) * t).exp() / (2.0 * om)
        }
    }
}

/// Sum of Lorentz terms; empty means vacuum (chi identically zero).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Susceptibility {
    terms: Vec<LorentzModel>,
}

impl Susceptibility {
    pub fn zero() -> Self {
        Susceptibility { terms: Vec::new() }
    }

    pub fn lorentz(omega_p_sq: f64, omega_t: f64, gamma: f64) -> Result<Self> {
        Ok(Susceptibility {
            terms: alloc::vec![LorentzModel::new(omega_p_sq, omega_t, gamma)?],
        })
    }

    pub fn from_terms(terms: Vec<LorentzModel>) -> Self {
        Susceptibility { terms }
    }

    pub fn terms(&self) -> &[LorentzModel] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.omega_p_sq == 0.0)
    }

    /// Static susceptibility chi(0) = sum omega_p^2 / omega_T^2.
    pub fn static_value(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.omega_p_sq / (t.omega_t * t.omega_t))
            .sum()
    }

    pub fn chi_freq(&self, omega: f64) -> C64 {
        self.terms
            .iter()
            .map(|t| t.chi_freq(omega))
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    }

    pub fn chi_imag(&self, omega: f64) -> f64 {
        self.terms.iter().map(|t| t.chi_imag(omega)).sum()
    }

    fn chi_imag_deriv(&self, omega: f64) -> f64 {
        self.terms.iter().map(|t| t.chi_imag_deriv(omega)).sum()
    }

    pub fn chi_time(&self, t: f64) -> f64 {
        self.terms.iter().map(|m| m.chi_time(t)).sum()
    }

    /// Largest frequency scale among the terms, used to size quadrature
    /// domains.
    fn scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.omega_t + t.gamma)
            .fold(1.0, f64::max)
    }

    /// Split points for integrating over [0, lambda]: a boundary near every
    /// resonance and every caller-supplied feature, so no adaptive panel can
    /// straddle (and alias away) a narrow structure.
    fn feature_panels(&self, extras: &[f64], lambda: f64) -> Vec<f64> {
        let mut pts = alloc::vec![0.0, lambda];
        {
            let mut push = |x: f64| {
                if x > 0.0 && x < lambda {
                    pts.push(x);
                }
            };
            for t in &self.terms {
                push(t.omega_t - 5.0 * t.gamma);
                push(t.omega_t);
                push(t.omega_t + 5.0 * t.gamma);
            }
            for &e in extras {
                push(0.5 * e);
                push(e);
                push(2.0 * e);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }

    fn panelled_adaptive<F: FnMut(f64) -> f64>(mut f: F, panels: &[f64], tol: f64) -> f64 {
        panels
            .windows(2)
            .map(|w| integrate_adaptive(&mut f, w[0], w[1], tol))
            .sum()
    }

    fn panelled_adaptive_c<F: FnMut(f64) -> C64>(mut f: F, panels: &[f64], tol: f64) -> C64 {
        panels
            .windows(2)
            .map(|w| integrate_adaptive_c(&mut f, w[0], w[1], tol))
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    }

    /// Closed-form tail of integral_L^inf chi_i(x)/(w - x) dx from the
    /// asymptotic expansion chi_i = wp^2 g / x^3 (1 + (2 wT^2 - g^2)/x^2 + ...),
    /// valid for |w| << L.
    fn cauchy_tail(&self, w: C64, lambda: f64) -> C64 {
        let l3 = lambda * lambda * lambda;
        let l4 = l3 * lambda;
        let l5 = l4 * lambda;
        let mut out = C64::new(0.0, 0.0);
        for t in &self.terms {
            let c = t.omega_p_sq * t.gamma;
            let corr = 2.0 * t.omega_t * t.omega_t - t.gamma * t.gamma;
            out -= (C64::new(1.0 / (3.0 * l3), 0.0)
                + w / (4.0 * l4)
                + (w * w + corr) / (5.0 * l5))
                * c;
        }
        out
    }

    /// Half-line Cauchy transform Z(w) = (1/2 pi) integral_0^inf
    /// chi_i(omega') / (w - omega') d omega'.
    ///
    /// Off the real axis this is direct adaptive quadrature plus the
    /// closed-form tail. On the positive real axis (requested through
    /// [`FreqArg::Boundary`]) the real part is the principal value, computed
    /// by singularity subtraction, and the imaginary part is exactly
    /// -chi_i(omega)/2.
    pub fn z_function(&self, arg: FreqArg) -> Result<C64> {
        arg.validate()?;
        if self.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        match arg {
            FreqArg::Complex(w) => {
                let lambda = 50.0 * self.scale().max_r(w.norm());
                let mut extras = alloc::vec![w.norm()];
                if w.re > 0.0 {
                    // Near-axis evaluations have a sharp feature at Re w.
                    extras.push(w.re);
                }
                let panels = self.feature_panels(&extras, lambda);
                let body = Self::panelled_adaptive_c(
                    |x| C64::new(self.chi_imag(x), 0.0) / (w - x),
                    &panels,
                    1e-12,
                );
                Ok((body + self.cauchy_tail(w, lambda)) / (2.0 * PI))
            }
            FreqArg::Boundary(omega) => {
                let lambda = 50.0 * self.scale().max_r(omega.abs());
                if omega <= 0.0 {
                    // Pole outside the integration range: plain quadrature.
                    let panels = self.feature_panels(&[], lambda);
                    let body = Self::panelled_adaptive(
                        |x| self.chi_imag(x) / (omega - x),
                        &panels,
                        1e-12,
                    );
                    let tail = self.cauchy_tail(C64::new(omega, 0.0), lambda).re;
                    return Ok(C64::new((body + tail) / (2.0 * PI), 0.0));
                }
                let alpha = self.pv_subtracted(omega, lambda) / (2.0 * PI);
                Ok(C64::new(alpha, -0.5 * self.chi_imag(omega)))
            }
        }
    }

    /// PV integral_0^inf chi_i(x)/(omega - x) dx by singularity subtraction:
    /// the difference quotient [chi_i(x) - chi_i(omega)]/(omega - x) is
    /// smooth, and the subtracted pole integrates to the exact log term
    /// chi_i(omega) * ln(omega / (lambda - omega)).
    fn pv_subtracted(&self, omega: f64, lambda: f64) -> f64 {
        let chi_at = self.chi_imag(omega);
        let guard = 1e-9 * omega.max_r(1.0);
        let panels = self.feature_panels(&[omega], lambda);
        let body = Self::panelled_adaptive(
            |x| {
                if (x - omega).abs() < guard {
                    -self.chi_imag_deriv(omega)
                } else {
                    (self.chi_imag(x) - chi_at) / (omega - x)
                }
            },
            &panels,
            1e-12,
        );
        let log_term = chi_at * (omega / (lambda - omega)).ln();
        let tail = self.cauchy_tail(C64::new(omega, 0.0), lambda).re;
        body + log_term + tail
    }

    /// Real part of chi reconstructed from the imaginary part through the
    /// dispersion relation
    /// Re chi(omega) = (2/pi) PV integral_0^inf omega' chi_i(omega') /
    /// (omega'^2 - omega^2) d omega', split into the resonant and
    /// anti-resonant halves.
    pub fn kk_real_part(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(CoreError::InvalidInput(
                "dispersion-relation reconstruction requires omega > 0".into(),
            ));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let lambda = 50.0 * self.scale().max_r(omega);
        // Resonant half: -(1/pi) PV integral chi_i/(omega - omega').
        let resonant = -self.pv_subtracted(omega, lambda) / PI;
        // Anti-resonant half is pole-free.
        let panels = self.feature_panels(&[], lambda);
        let body = Self::panelled_adaptive(|x| self.chi_imag(x) / (x + omega), &panels, 1e-12);
        // Same tail series with omega -> -omega and overall sign flipped,
        // since 1/(x + omega) = -1/((-omega) - x).
        let tail = -self.cauchy_tail(C64::new(-omega, 0.0), lambda).re;
        Ok(resonant + (body + tail) / PI)
    }
}

/// Electric and magnetic response of one homogeneous medium piece.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SusceptibilityPair {
    pub electric: Susceptibility,
    pub magnetic: Susceptibility,
}

impl SusceptibilityPair {
    pub fn new(electric: Susceptibility, magnetic: Susceptibility) -> Self {
        SusceptibilityPair { electric, magnetic }
    }

    pub fn vacuum() -> Self {
        SusceptibilityPair {
            electric: Susceptibility::zero(),
            magnetic: Susceptibility::zero(),
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.electric.is_zero() && self.magnetic.is_zero()
    }
}

/// Where a frequency-plane function is evaluated: a genuinely complex point,
/// or the limit onto the positive real axis from above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreqArg {
    Complex(C64),
    /// omega + i0+ limit; boundary formulas apply.
    Boundary(f64),
}

impl FreqArg {
    /// Rejects complex arguments that sit exactly on the positive real axis:
    /// those evaluations must go through [`FreqArg::Boundary`] so the
    /// limiting formulas are used rather than a divergent integral.
    pub fn validate(&self) -> Result<()> {
        match self {
            FreqArg::Complex(w) => {
                if w.im == 0.0 && w.re > 0.0 {
                    Err(CoreError::PositiveRealAxis)
                } else {
                    Ok(())
                }
            }
            FreqArg::Boundary(omega) => {
                if omega.is_finite() {
                    Ok(())
                } else {
                    Err(CoreError::InvalidInput("non-finite boundary frequency".into()))
                }
            }
        }
    }

    /// The complex evaluation point (boundary args map onto the axis).
    pub fn value(&self) -> C64 {
        match *self {
            FreqArg::Complex(w) => w,
            FreqArg::Boundary(omega) => C64::new(omega, 0.0),
        }
    }
}

/// Electric coupling strength |f(omega)|^2 = (hbar c^3 eps0 / 4 pi^2 omega^2)
/// Im chi_e(omega); zero at omega = 0 by the defining branch.
pub fn coupling_f_squared(chi_e: &Susceptibility, omega: f64, units: &Units) -> Result<f64> {
    if omega < 0.0 {
        return Err(CoreError::NegativeFrequency);
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let c3 = units.c * units.c * units.c;
    Ok(units.hbar * c3 * units.eps0 / (4.0 * PI * PI * omega * omega) * chi_e.chi_imag(omega))
}

/// Magnetic coupling strength |g(omega)|^2 = (hbar c^3 / 4 pi^2 mu0 omega^2)
/// Im chi_m(omega); zero at omega = 0.
pub fn coupling_g_squared(chi_m: &Susceptibility, omega: f64, units: &Units) -> Result<f64> {
    if omega < 0.0 {
        return Err(CoreError::NegativeFrequency);
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let c3 = units.c * units.c * units.c;
    Ok(units.hbar * c3 / (4.0 * PI * PI * units.mu0 * omega * omega) * chi_m.chi_imag(omega))
}
