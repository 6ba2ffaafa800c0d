//! Time-domain decay oracle: the one-excitation amplitude equations for an
//! excited atom coupled to the cavity photon modes and the medium quantum
//! fields, integrated with a discretized frequency continuum.
//!
//! The state carries one amplitude per basis ket: the excited atom `c`, one
//! photon amplitude per transverse mode `(n, lambda)`, and one amplitude per
//! (medium line, frequency bin). Medium lines are the per-component
//! trigonometric profiles of the polarization expansions; each line owns a
//! private copy of the discretized continuum. The coupled system is linear
//! with a Hermitian generator, so the total occupation is conserved and the
//! fitted decay of `|c|^2` is an oracle for the spectral rate that shares no
//! code path with the resolvent machinery.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cavity::{
    mode_function, CavityGeometry, ModeBasisConfig, ModeIndex, ModeKind, TruncationWindow, Units,
};
use crate::coupling::{field_overlap, Box3, FieldSpec, MediumLayout, TrigPattern};
use crate::emission::AtomConfig;
use crate::material::{coupling_f_squared, coupling_g_squared, SusceptibilityPair};
use crate::math::{dot, Real, C64, I};
use crate::quad::gauss_legendre_on;
use crate::{CoreError, Result};

/// Relative uptick of `|c|^2` between consecutive samples that `fit_decay`
/// still attributes to discretization ripple rather than a revival.
const REVIVAL_TOL: f64 = 0.05;

/// Hard cap on the state dimension accepted by `integrate`.
const MAX_STATE_DIM: usize = 4_000_000;

/// Hard cap on the dimension accepted by `assemble_dense`.
const MAX_DENSE_DIM: usize = 4096;

/// Gauss-Legendre discretization of the radial frequency continuum on
/// `[omega0 - bandwidth, omega0 + bandwidth]`.
///
/// `mu` folds the angular measure into each bin: a bin of weight `w_j` at
/// `omega_j` stands for a spherical shell of `(4 pi / c^3) omega_j^2 w_j`
/// continuum states. The per-bin medium coupling strengths of the model
/// medium are tabulated alongside for diagnostics; `integrate` re-derives
/// them per region medium so multi-medium layouts stay consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumDiscretization {
    omega0: f64,
    bandwidth: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mu: Vec<f64>,
    f_sq: Vec<f64>,
    g_sq: Vec<f64>,
}

impl ContinuumDiscretization {
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn band(&self) -> (f64, f64) {
        (self.omega0 - self.bandwidth, self.omega0 + self.bandwidth)
    }

    pub fn bins(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shell measure `(4 pi / c^3) omega_j^2 w_j` per bin.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Electric coupling strength `f^2(omega_j)` of the model medium.
    pub fn f_sq(&self) -> &[f64] {
        &self.f_sq
    }

    /// Magnetic coupling strength `g^2(omega_j)` of the model medium.
    pub fn g_sq(&self) -> &[f64] {
        &self.g_sq
    }

    /// `sum_j w_j omega_j^2 f^2(omega_j)`, the band total the quadrature
    /// assigns to the electric channel.
    pub fn electric_coupling_weight(&self) -> f64 {
        self.channel_weight(&self.f_sq)
    }

    /// Magnetic counterpart of `electric_coupling_weight`.
    pub fn magnetic_coupling_weight(&self) -> f64 {
        self.channel_weight(&self.g_sq)
    }

    fn channel_weight(&self, strength: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.nodes.len() {
            acc += self.weights[j] * self.nodes[j] * self.nodes[j] * strength[j];
        }
        acc
    }
}

/// Discretize the medium continuum of `model` around `omega0`.
///
/// The band must stay strictly positive: couplings vanish at zero frequency
/// and the radial measure is meaningless below it.
pub fn build_discretization(
    model: &SusceptibilityPair,
    units: &Units,
    omega0: f64,
    bandwidth: f64,
    bins: usize,
) -> Result<ContinuumDiscretization> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "continuum center must be positive and finite, got {omega0}"
        )));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    if bins < 2 {
        return Err(CoreError::InvalidInput(alloc::format!(
            "continuum needs at least 2 bins, got {bins}"
        )));
    }
    if omega0 - bandwidth <= 0.0 {
        return Err(CoreError::BandNotPositive);
    }
    let (nodes, weights) = gauss_legendre_on(bins, omega0 - bandwidth, omega0 + bandwidth);
    let c3 = units.c * units.c * units.c;
    let mut mu = Vec::with_capacity(bins);
    let mut f_sq = Vec::with_capacity(bins);
    let mut g_sq = Vec::with_capacity(bins);
    for j in 0..bins {
        mu.push(4.0 * crate::math::PI / c3 * nodes[j] * nodes[j] * weights[j]);
        f_sq.push(coupling_f_squared(&model.electric, nodes[j], units)?);
        g_sq.push(coupling_g_squared(&model.magnetic, nodes[j], units)?);
    }
    Ok(ContinuumDiscretization { omega0, bandwidth, nodes, weights, mu, f_sq, g_sq })
}

/// Knobs for the time-domain integration.
///
/// The photon basis is the truncated mode set restricted to the continuum
/// band; the medium line basis runs to `m_max` per cavity axis on axes the
/// medium only partially covers (full axes are pinned by orthogonality).
#[derive(Debug, Clone)]
pub struct DynamicsConfig {
    pub basis: ModeBasisConfig,
    pub units: Units,
    /// Squared coupling charge in the atom-photon vertex; matches the
    /// spectral side's `GreenConfig::coupling_e2`.
    pub coupling_e2: f64,
    /// Per-axis medium line cutoff on partially covered axes.
    pub m_max: u32,
    /// Couplings below this fraction of the natural overlap scale `V/8`
    /// are dropped, along with lines that keep no coupling.
    pub coupling_cutoff_rel: f64,
    /// Trajectory sampling interval in integration steps.
    pub sample_stride: u32,
    /// Abort threshold on `|N(t) - 1|`.
    pub norm_drift_abort: f64,
}

impl DynamicsConfig {
    pub fn new(basis: ModeBasisConfig) -> Self {
        DynamicsConfig {
            basis,
            units: Units::default(),
            coupling_e2: 1.0,
            m_max: 40,
            coupling_cutoff_rel: 1e-12,
            sample_stride: 10,
            norm_drift_abort: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.basis.window != TruncationWindow::Hard {
            return Err(CoreError::InvalidInput(
                "time-domain couplings carry no truncation window; use TruncationWindow::Hard"
                    .into(),
            ));
        }
        if !(self.coupling_e2 > 0.0) || !self.coupling_e2.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "coupling_e2 must be positive and finite, got {}",
                self.coupling_e2
            )));
        }
        if self.sample_stride == 0 {
            return Err(CoreError::InvalidInput("sample_stride must be at least 1".into()));
        }
        if !(self.norm_drift_abort > 0.0) {
            return Err(CoreError::InvalidInput(
                "norm_drift_abort must be positive".into(),
            ));
        }
        if !(self.coupling_cutoff_rel >= 0.0) {
            return Err(CoreError::InvalidInput(
                "coupling_cutoff_rel must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Which polarization expansion a medium line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineFamily {
    Electric,
    Magnetic,
}

/// One medium line: index triple, Cartesian component, and family. The
/// component-`axis` profile carries the family pattern (cosine on its own
/// axis for electric lines, sine for magnetic ones); zero indices are legal
/// on cosine factors and enter with closure weight `(1/2)^#zeros`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineLabel {
    pub m: [u32; 3],
    pub axis: usize,
    pub family: LineFamily,
}

/// Basis bookkeeping for a packed state vector: slot 0 is the atom, then
/// one slot per photon mode, then `bins` consecutive slots per line.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub modes: Vec<(ModeIndex, u8)>,
    pub lines: Vec<LineLabel>,
    pub bins: usize,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        1 + self.modes.len() + self.lines.len() * self.bins
    }
}

/// One-excitation wavefunction, unpacked by sector. `d` concatenates the
/// electric lines' bin blocks in layout order, `m` the magnetic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionState {
    pub c: C64,
    pub f: Vec<C64>,
    pub d: Vec<C64>,
    pub m: Vec<C64>,
}

impl WavefunctionState {
    /// Total occupation `|c|^2 + sum |F|^2 + sum |D|^2 + sum |M|^2`;
    /// conserved by the dynamics.
    pub fn norm(&self) -> f64 {
        let mut n = self.c.norm_sqr();
        for a in &self.f {
            n += a.norm_sqr();
        }
        for a in &self.d {
            n += a.norm_sqr();
        }
        for a in &self.m {
            n += a.norm_sqr();
        }
        n
    }
}

/// Sampled history of one integration. Per-sample data keep the atom
/// amplitude and sector occupations; the full state is retained only at the
/// final time (a dense history of every bin amplitude would dwarf the
/// integration itself in memory).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Atom amplitude in the lab frame (carries the `e^{-i omega0 t}` phase).
    pub c: Vec<C64>,
    /// `sum |F|^2` per sample.
    pub photon_occupation: Vec<f64>,
    /// `sum |D|^2 + sum |M|^2` per sample.
    pub medium_occupation: Vec<f64>,
    /// Total occupation per sample.
    pub norm: Vec<f64>,
    pub final_state: WavefunctionState,
    pub layout: StateLayout,
}

impl Trajectory {
    /// CSV export with columns `t, re_c, im_c, abs2_c, norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re_c,im_c,abs2_c,norm\n");
        for k in 0..self.times.len() {
            out.push_str(&alloc::format!(
                "{},{},{},{},{}\n",
                self.times[k],
                self.c[k].re,
                self.c[k].im,
                self.c[k].norm_sqr(),
                self.norm[k]
            ));
        }
        out
    }
}

/// Least-squares exponent extracted from `|c(t)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Amplitude decay rate: `|c|^2 ~ e^{-2 rate t}`.
    pub rate: f64,
    /// RMS deviation of `ln |c|^2` from the fitted line.
    pub rms_residual: f64,
    /// Set when `|c|^2` never fell below 0.5 in the window, in which case
    /// the rate only bounds the true one.
    pub upper_bound_only: bool,
}

struct GenMode {
    omega: f64,
    /// Atom-photon element `H_{F,c} / hbar`.
    atom: C64,
}

struct GenPart {
    /// Index into `Generator::phis`.
    phi: usize,
    /// `(mode slot, H_{F,line bin} / (hbar phi_j))` pairs.
    q: Vec<(usize, C64)>,
}

struct GenLine {
    parts: Vec<GenPart>,
}

/// Assembled coupling data. The line-bin element factorizes as
/// `H_{F, (l,j)} / hbar = q_{l,F} phi_j` per medium group, which the
/// right-hand side exploits: one pass accumulates `sum_j phi_j D_j` per
/// line and one pass broadcasts the photon feedback, so the cost is linear
/// in the state size rather than in couplings times bins.
struct Generator {
    omega0: f64,
    modes: Vec<GenMode>,
    lines: Vec<GenLine>,
    phis: Vec<Vec<f64>>,
    delta_bins: Vec<f64>,
    bins: usize,
    layout: StateLayout,
}

fn build_generator(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    disc: &ContinuumDiscretization,
    cfg: &DynamicsConfig,
) -> Result<Generator> {
    cfg.validate()?;
    atom.validate_in(geom, layout)?;
    if (geom.wave_speed() - cfg.units.c).abs() > 1e-12 * cfg.units.c {
        return Err(CoreError::InvalidInput(alloc::format!(
            "cavity wave speed {} must match Units::c {}",
            geom.wave_speed(),
            cfg.units.c
        )));
    }
    if (disc.omega0 - atom.omega0).abs() > 1e-9 * atom.omega0 {
        return Err(CoreError::InvalidInput(alloc::format!(
            "continuum center {} must match the transition frequency {}",
            disc.omega0,
            atom.omega0
        )));
    }
    if atom.vacuum_rate != 0.0 || atom.vacuum_shift != 0.0 {
        return Err(CoreError::InvalidInput(
            "the time-domain system covers only the cavity channel; vacuum terms must be zero"
                .into(),
        ));
    }

    let units = &cfg.units;
    let volume = geom.volume();
    let e = cfg.coupling_e2.sqrt();

    // Photon sector: truncated modes restricted to the continuum band.
    let mut mode_labels = Vec::new();
    let mut modes = Vec::new();
    let mut u_specs = Vec::new();
    let mut s_specs = Vec::new();
    for (idx, omega) in cfg.basis.modes_within_cutoff(geom) {
        if (omega - disc.omega0).abs() > disc.bandwidth {
            continue;
        }
        for branch in 1..=2u8 {
            let u = mode_function(geom, idx, branch, ModeKind::U, atom.position)?;
            let g = e * (4.0 * omega / (units.hbar * units.eps0 * volume)).sqrt()
                * dot(atom.dipole, u);
            mode_labels.push((idx, branch));
            modes.push(GenMode { omega, atom: I * g });
            u_specs.push(FieldSpec::photonic(geom, idx, ModeKind::U, branch, &cfg.basis)?);
            s_specs.push(FieldSpec::photonic(geom, idx, ModeKind::S, branch, &cfg.basis)?);
        }
    }

    // Medium groups: regions sharing one susceptibility pair act as a single
    // spatial domain with common per-bin coupling strengths.
    let mut groups: Vec<(&SusceptibilityPair, Vec<&Box3>)> = Vec::new();
    for region in layout.regions() {
        if region.bounds.volume() == 0.0 || region.medium.is_vacuum() {
            continue;
        }
        match groups.iter_mut().find(|(m, _)| **m == region.medium) {
            Some((_, boxes)) => boxes.push(&region.bounds),
            None => groups.push((&region.medium, alloc::vec![&region.bounds])),
        }
    }

    let mut phis: Vec<Vec<f64>> = Vec::new();
    let mut lines = Vec::new();
    let mut line_labels = Vec::new();
    let cutoff = cfg.coupling_cutoff_rel * volume / 8.0;

    for family in [LineFamily::Electric, LineFamily::Magnetic] {
        // Groups active in this family, with their per-bin factors
        // `sqrt(mu_j strength_j / hbar)`.
        let mut active: Vec<(usize, usize)> = Vec::new();
        for (gi, (medium, _)) in groups.iter().enumerate() {
            let chi = match family {
                LineFamily::Electric => &medium.electric,
                LineFamily::Magnetic => &medium.magnetic,
            };
            if chi.is_zero() {
                continue;
            }
            let mut phi = Vec::with_capacity(disc.bins());
            for j in 0..disc.bins() {
                let strength = match family {
                    LineFamily::Electric => coupling_f_squared(chi, disc.nodes[j], units)?,
                    LineFamily::Magnetic => coupling_g_squared(chi, disc.nodes[j], units)?,
                };
                phi.push((disc.mu[j] * strength / units.hbar).sqrt());
            }
            phis.push(phi);
            active.push((gi, phis.len() - 1));
        }
        if active.is_empty() || modes.is_empty() {
            continue;
        }

        let (pattern, specs): (TrigPattern, &[FieldSpec]) = match family {
            LineFamily::Electric => (TrigPattern::F, &u_specs),
            LineFamily::Magnetic => (TrigPattern::G, &s_specs),
        };

        // On axes every active box covers fully, orthogonality pins the line
        // index to the photon indices; elsewhere the index runs to m_max.
        let mut candidates: [Vec<u32>; 3] = Default::default();
        for i in 0..3 {
            let full = active.iter().all(|(gi, _)| {
                groups[*gi]
                    .1
                    .iter()
                    .all(|b| b.lo()[i] <= 1e-12 && b.hi()[i] >= geom.side(i) - 1e-12)
            });
            if full {
                let mut vals: Vec<u32> =
                    mode_labels.iter().map(|(idx, _)| idx.n[i]).collect();
                vals.sort_unstable();
                vals.dedup();
                candidates[i] = vals;
            } else {
                candidates[i] = (0..=cfg.m_max).collect();
            }
        }

        for &m1 in &candidates[0] {
            for &m2 in &candidates[1] {
                for &m3 in &candidates[2] {
                    let m = [m1, m2, m3];
                    let zeros = m.iter().filter(|&&v| v == 0).count() as i32;
                    let amp = 0.5f64.powi(zeros).sqrt();
                    for axis in 0..3 {
                        // Sine factors with index zero kill the profile.
                        let alive = match pattern {
                            TrigPattern::F => (0..3).all(|i| i == axis || m[i] >= 1),
                            TrigPattern::G => m[axis] >= 1,
                        };
                        if !alive {
                            continue;
                        }
                        let mut coeff = [0.0; 3];
                        coeff[axis] = 1.0;
                        let line_spec = FieldSpec { n: m, coeff, pattern };
                        let mut parts = Vec::new();
                        for &(gi, phi_idx) in &active {
                            let mut q = Vec::new();
                            for (slot, spec) in specs.iter().enumerate() {
                                let mut overlap = 0.0;
                                for b in &groups[gi].1 {
                                    overlap += field_overlap(geom, b, spec, &line_spec);
                                }
                                if overlap.abs() <= cutoff {
                                    continue;
                                }
                                let omega_n = modes[slot].omega;
                                let h = match family {
                                    LineFamily::Electric => {
                                        I * (32.0 * omega_n / (units.eps0 * volume * volume))
                                            .sqrt()
                                    }
                                    LineFamily::Magnetic => C64::new(
                                        -(32.0 * units.mu0 * omega_n / (volume * volume))
                                            .sqrt(),
                                        0.0,
                                    ),
                                };
                                q.push((1 + slot, h * (amp * overlap)));
                            }
                            if !q.is_empty() {
                                parts.push(GenPart { phi: phi_idx, q });
                            }
                        }
                        if !parts.is_empty() {
                            line_labels.push(LineLabel { m, axis, family });
                            lines.push(GenLine { parts });
                        }
                    }
                }
            }
        }
    }

    let state_layout = StateLayout { modes: mode_labels, lines: line_labels, bins: disc.bins() };
    if state_layout.dim() > MAX_STATE_DIM {
        return Err(CoreError::InvalidInput(alloc::format!(
            "state dimension {} exceeds the supported maximum; reduce m_max or bins",
            state_layout.dim()
        )));
    }
    let delta_bins = disc.nodes.iter().map(|x| x - disc.omega0).collect();
    Ok(Generator {
        omega0: disc.omega0,
        modes,
        lines,
        phis,
        delta_bins,
        bins: disc.bins(),
        layout: state_layout,
    })
}

impl Generator {
    /// `dy = -i (H/hbar - omega0) y`, the rotating-frame action. Every basis
    /// ket carries exactly one excitation, so the frame shift is a uniform
    /// `omega0` on the diagonal.
    fn rhs(&self, y: &[C64], dy: &mut [C64]) {
        let nm = self.modes.len();
        let mut cdot = C64::new(0.0, 0.0);
        for (k, md) in self.modes.iter().enumerate() {
            let f = y[1 + k];
            cdot -= I * md.atom.conj() * f;
            dy[1 + k] = -I * ((md.omega - self.omega0) * f + md.atom * y[0]);
        }
        dy[0] = cdot;

        let mut off = 1 + nm;
        for line in &self.lines {
            for j in 0..self.bins {
                let a = y[off + j];
                dy[off + j] = C64::new(
                    self.delta_bins[j] * a.im,
                    -self.delta_bins[j] * a.re,
                );
            }
            for part in &line.parts {
                let phi = &self.phis[part.phi];
                let mut s = C64::new(0.0, 0.0);
                for j in 0..self.bins {
                    s += phi[j] * y[off + j];
                }
                let mut t = C64::new(0.0, 0.0);
                for &(slot, q) in &part.q {
                    t += q.conj() * y[slot];
                }
                let feed = -I * s;
                for &(slot, q) in &part.q {
                    dy[slot] += q * feed;
                }
                let drive = -I * t;
                for j in 0..self.bins {
                    dy[off + j] += phi[j] * drive;
                }
            }
            off += self.bins;
        }
    }
}

fn norm_sqr(y: &[C64]) -> f64 {
    let mut n = 0.0;
    for a in y {
        n += a.norm_sqr();
    }
    n
}

/// Integrate the amplitude equations from `c(0) = 1` to `t_end`.
///
/// Classic fourth-order Runge-Kutta in the rotating frame; the step must
/// resolve the fastest lab-frame phase, `dt <= 0.1 / (omega0 + bandwidth)`.
/// The sampled norm is checked against `cfg.norm_drift_abort` and the run
/// aborts on drift, which indicates a step too coarse for the coupling
/// strength. Sampled atom amplitudes and the final state are reported in
/// the lab frame.
pub fn integrate(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    disc: &ContinuumDiscretization,
    cfg: &DynamicsConfig,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    let omega_max = disc.omega0 + disc.bandwidth;
    let dt_max = 0.1 / omega_max;
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(CoreError::TimeStepTooLarge { dt, max: dt_max });
    }
    let gen = build_generator(geom, layout, atom, disc, cfg)?;

    let steps = (t_end / dt).ceil().max_r(1.0) as usize;
    let h = t_end / steps as f64;
    let dim = gen.layout.dim();

    let mut y = alloc::vec![C64::new(0.0, 0.0); dim];
    y[0] = C64::new(1.0, 0.0);
    let mut k = alloc::vec![C64::new(0.0, 0.0); dim];
    let mut tmp = alloc::vec![C64::new(0.0, 0.0); dim];
    let mut acc = alloc::vec![C64::new(0.0, 0.0); dim];

    let nm = gen.modes.len();
    let mut times = Vec::new();
    let mut c_hist = Vec::new();
    let mut photon = Vec::new();
    let mut medium = Vec::new();
    let mut norms = Vec::new();

    let mut sample = |t: f64, y: &[C64]| -> Result<()> {
        let n = norm_sqr(y);
        let drift = (n - 1.0).abs();
        if drift > cfg.norm_drift_abort {
            return Err(CoreError::NormDrift { t, drift });
        }
        let phase = C64::new(0.0, -gen.omega0 * t).exp();
        times.push(t);
        c_hist.push(phase * y[0]);
        photon.push(norm_sqr(&y[1..1 + nm]));
        medium.push(norm_sqr(&y[1 + nm..]));
        norms.push(n);
        Ok(())
    };
    sample(0.0, &y)?;

    for step in 1..=steps {
        // k1
        gen.rhs(&y, &mut k);
        for i in 0..dim {
            acc[i] = y[i] + (h / 6.0) * k[i];
            tmp[i] = y[i] + (0.5 * h) * k[i];
        }
        // k2
        gen.rhs(&tmp, &mut k);
        for i in 0..dim {
            acc[i] += (h / 3.0) * k[i];
            tmp[i] = y[i] + (0.5 * h) * k[i];
        }
        // k3
        gen.rhs(&tmp, &mut k);
        for i in 0..dim {
            acc[i] += (h / 3.0) * k[i];
            tmp[i] = y[i] + h * k[i];
        }
        // k4
        gen.rhs(&tmp, &mut k);
        for i in 0..dim {
            y[i] = acc[i] + (h / 6.0) * k[i];
        }

        if step % cfg.sample_stride as usize == 0 || step == steps {
            sample(step as f64 * h, &y)?;
        }
    }

    let phase = C64::new(0.0, -gen.omega0 * t_end).exp();
    let mut f = Vec::with_capacity(nm);
    for slot in 0..nm {
        f.push(phase * y[1 + slot]);
    }
    let mut d = Vec::new();
    let mut m = Vec::new();
    for (li, line) in gen.layout.lines.iter().enumerate() {
        let off = 1 + nm + li * gen.bins;
        let sink = match line.family {
            LineFamily::Electric => &mut d,
            LineFamily::Magnetic => &mut m,
        };
        for j in 0..gen.bins {
            sink.push(phase * y[off + j]);
        }
    }
    let final_state = WavefunctionState { c: phase * y[0], f, d, m };

    Ok(Trajectory {
        times,
        c: c_hist,
        photon_occupation: photon,
        medium_occupation: medium,
        norm: norms,
        final_state,
        layout: gen.layout,
    })
}

/// Dense lab-frame generator `H / hbar` over the packed basis, for
/// small-truncation structure checks. The factorized integrator never forms
/// this matrix.
pub fn assemble_dense(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom: &AtomConfig,
    disc: &ContinuumDiscretization,
    cfg: &DynamicsConfig,
) -> Result<(Vec<Vec<C64>>, StateLayout)> {
    let gen = build_generator(geom, layout, atom, disc, cfg)?;
    let dim = gen.layout.dim();
    if dim > MAX_DENSE_DIM {
        return Err(CoreError::InvalidInput(alloc::format!(
            "dense assembly supports at most {MAX_DENSE_DIM} states, got {dim}"
        )));
    }
    let mut hm = alloc::vec![alloc::vec![C64::new(0.0, 0.0); dim]; dim];
    hm[0][0] = C64::new(gen.omega0, 0.0);
    for (k, md) in gen.modes.iter().enumerate() {
        hm[1 + k][1 + k] = C64::new(md.omega, 0.0);
        hm[1 + k][0] = md.atom;
        hm[0][1 + k] = md.atom.conj();
    }
    let nm = gen.modes.len();
    for (li, line) in gen.lines.iter().enumerate() {
        let off = 1 + nm + li * gen.bins;
        for j in 0..gen.bins {
            hm[off + j][off + j] = C64::new(disc.nodes[j], 0.0);
        }
        for part in &line.parts {
            let phi = &gen.phis[part.phi];
            for &(slot, q) in &part.q {
                for j in 0..gen.bins {
                    hm[slot][off + j] += q * phi[j];
                    hm[off + j][slot] += (q * phi[j]).conj();
                }
            }
        }
    }
    Ok((hm, gen.layout))
}

/// Fit `ln |c(t)|^2` over `window = (t_lo, t_hi)` by least squares.
///
/// Consecutive samples rising by more than a 5% relative tolerance are
/// treated as a revival and rejected as non-Markovian. When `|c|^2` never
/// reaches 0.5 the fitted rate only bounds the true one and the result says
/// so.
pub fn fit_decay(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(CoreError::InvalidInput(alloc::format!(
            "fit window must be finite with t_lo < t_hi, got ({lo}, {hi})"
        )));
    }
    let mut ts = Vec::new();
    let mut ps = Vec::new();
    for (k, &t) in traj.times.iter().enumerate() {
        if t >= lo && t <= hi {
            ts.push(t);
            ps.push(traj.c[k].norm_sqr());
        }
    }
    if ts.len() < 3 {
        return Err(CoreError::InvalidInput(alloc::format!(
            "fit window ({lo}, {hi}) holds {} samples; need at least 3",
            ts.len()
        )));
    }
    for k in 1..ps.len() {
        if ps[k] > ps[k - 1] * (1.0 + REVIVAL_TOL) + 1e-12 {
            return Err(CoreError::NonMarkovianRegime { t: ts[k] });
        }
    }
    let mut min_p = f64::INFINITY;
    for &p in &ps {
        if p < 1e-300 {
            return Err(CoreError::InvalidInput(
                "excited amplitude underflowed inside the fit window".into(),
            ));
        }
        min_p = min_p.min_r(p);
    }

    let n = ts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..ts.len() {
        let y = Real::ln(ps[k]);
        st += ts[k];
        sy += y;
        stt += ts[k] * ts[k];
        sty += ts[k] * y;
    }
    let denom = n * stt - st * st;
    if denom <= 0.0 {
        return Err(CoreError::InvalidInput(
            "fit window samples are degenerate in time".into(),
        ));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for k in 0..ts.len() {
        let r = Real::ln(ps[k]) - (intercept + slope * ts[k]);
        ss += r * r;
    }
    Ok(DecayFit {
        rate: -0.5 * slope,
        rms_residual: (ss / n).sqrt(),
        upper_bound_only: min_p > 0.5,
    })
}
