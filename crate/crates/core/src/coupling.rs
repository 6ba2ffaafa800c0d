//! Piecewise-homogeneous medium layouts and the overlap integrals they
//! induce: the mode-coupling matrix W, its volume-fraction reduction, and
//! the Q/L coefficients coupling photonic modes to the medium continua.
//!
//! All region integrals reduce to products of one-dimensional sine/cosine
//! integrals with closed forms, so overlaps are exact to roundoff for any
//! mode index; no quadrature error enters this module.

use crate::cavity::{
    mode_coefficients, mode_frequency, CavityGeometry, ModeBasisConfig, ModeIndex, ModeKind, Units,
};
use crate::material::{coupling_f_squared, coupling_g_squared, FreqArg, SusceptibilityPair};
use crate::math::{Real, Vec3, C64, I, PI};
use crate::{CoreError, Result};
use alloc::vec::Vec;

/// Closed axis-aligned box. Degenerate (zero-volume) boxes are legal; a
/// zero-thickness exclusion region is how "no exclusion" is spelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    lo: Vec3,
    hi: Vec3,
}

impl Box3 {
    pub fn new(lo: Vec3, hi: Vec3) -> Result<Self> {
        for i in 0..3 {
            if !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(CoreError::InvalidLayout(alloc::format!(
                    "box bounds must satisfy lo <= hi, got axis {i}: [{}, {}]",
                    lo[i],
                    hi[i]
                )));
            }
        }
        Ok(Box3 { lo, hi })
    }

    /// Cube of side `side` centered at `center`.
    pub fn cube(center: Vec3, side: f64) -> Result<Self> {
        if !(side >= 0.0) || !side.is_finite() {
            return Err(CoreError::InvalidLayout(alloc::format!(
                "cube side must be nonnegative, got {side}"
            )));
        }
        let h = 0.5 * side;
        Box3::new(
            [center[0] - h, center[1] - h, center[2] - h],
            [center[0] + h, center[1] + h, center[2] + h],
        )
    }

    /// Zero-volume box (an empty exclusion region).
    pub fn point(at: Vec3) -> Self {
        Box3 { lo: at, hi: at }
    }

    #[inline]
    pub fn lo(&self) -> Vec3 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> Vec3 {
        self.hi
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }

    /// True when `r` is in the closed box.
    pub fn contains(&self, r: Vec3) -> bool {
        (0..3).all(|i| r[i] >= self.lo[i] && r[i] <= self.hi[i])
    }

    /// True when `r` is strictly inside the box (never true for a degenerate
    /// box).
    pub fn contains_interior(&self, r: Vec3) -> bool {
        (0..3).all(|i| r[i] > self.lo[i] && r[i] < self.hi[i])
    }

    /// True when the two boxes share no interior volume (touching faces are
    /// fine; a degenerate box is disjoint from everything).
    pub fn interior_disjoint(&self, other: &Box3) -> bool {
        (0..3).any(|i| {
            self.hi[i] <= other.lo[i]
                || other.hi[i] <= self.lo[i]
                || self.hi[i] <= self.lo[i]
                || other.hi[i] <= other.lo[i]
        })
    }

    fn inside_cavity(&self, geom: &CavityGeometry) -> bool {
        (0..3).all(|i| self.lo[i] >= 0.0 && self.hi[i] <= geom.side(i))
    }

    /// Set difference `self \ hole` as at most six disjoint boxes.
    ///
    /// Pieces with zero volume are dropped; a hole that misses `self`
    /// returns `self` whole, one that covers it returns nothing.
    pub fn subtract(&self, hole: &Box3) -> Vec<Box3> {
        if self.interior_disjoint(hole) {
            return if self.volume() > 0.0 {
                alloc::vec![*self]
            } else {
                Vec::new()
            };
        }
        let mut out = Vec::new();
        let mut push = |lo: Vec3, hi: Vec3| {
            if (0..3).all(|i| hi[i] > lo[i]) {
                out.push(Box3 { lo, hi });
            }
        };
        // The hole clipped to this box; slabs are carved off axis by axis.
        let clip_lo = [
            self.lo[0].max_r(hole.lo[0]),
            self.lo[1].max_r(hole.lo[1]),
            self.lo[2].max_r(hole.lo[2]),
        ];
        let clip_hi = [
            self.hi[0].min_r(hole.hi[0]),
            self.hi[1].min_r(hole.hi[1]),
            self.hi[2].min_r(hole.hi[2]),
        ];
        push(self.lo, [clip_lo[0], self.hi[1], self.hi[2]]);
        push([clip_hi[0], self.lo[1], self.lo[2]], self.hi);
        push(
            [clip_lo[0], self.lo[1], self.lo[2]],
            [clip_hi[0], clip_lo[1], self.hi[2]],
        );
        push(
            [clip_lo[0], clip_hi[1], self.lo[2]],
            [clip_hi[0], self.hi[1], self.hi[2]],
        );
        push(
            [clip_lo[0], clip_lo[1], self.lo[2]],
            [clip_hi[0], clip_hi[1], clip_lo[2]],
        );
        push(
            [clip_lo[0], clip_lo[1], clip_hi[2]],
            [clip_hi[0], clip_hi[1], self.hi[2]],
        );
        out
    }
}

/// One homogeneous medium piece.
#[derive(Debug, Clone)]
pub struct Region {
    pub bounds: Box3,
    pub medium: SusceptibilityPair,
}

/// Piecewise-homogeneous medium filling: disjoint boxes, each with its own
/// susceptibility pair, plus the polarization-free exclusion box that will
/// house the atom.
#[derive(Debug, Clone)]
pub struct MediumLayout {
    regions: Vec<Region>,
    exclusion: Box3,
}

impl MediumLayout {
    /// Validates against the geometry: every region inside the cavity,
    /// regions pairwise interior-disjoint, exclusion disjoint from all of
    /// them.
    pub fn new(geom: &CavityGeometry, regions: Vec<Region>, exclusion: Box3) -> Result<Self> {
        if !exclusion.inside_cavity(geom) {
            return Err(CoreError::InvalidLayout(
                "exclusion region extends outside the cavity".into(),
            ));
        }
        for (i, r) in regions.iter().enumerate() {
            if !r.bounds.inside_cavity(geom) {
                return Err(CoreError::InvalidLayout(alloc::format!(
                    "medium region {i} extends outside the cavity"
                )));
            }
            if !r.bounds.interior_disjoint(&exclusion) {
                return Err(CoreError::InvalidLayout(alloc::format!(
                    "medium region {i} overlaps the exclusion region"
                )));
            }
            for (j, other) in regions.iter().enumerate().take(i) {
                if !r.bounds.interior_disjoint(&other.bounds) {
                    return Err(CoreError::InvalidLayout(alloc::format!(
                        "medium regions {j} and {i} overlap"
                    )));
                }
            }
        }
        Ok(MediumLayout { regions, exclusion })
    }

    /// No medium anywhere; exclusion degenerates to the cavity center.
    pub fn empty(geom: &CavityGeometry) -> Self {
        let l = geom.sides();
        MediumLayout {
            regions: Vec::new(),
            exclusion: Box3::point([0.5 * l[0], 0.5 * l[1], 0.5 * l[2]]),
        }
    }

    /// One homogeneous medium filling the whole cavity except the exclusion
    /// box: the carved complement becomes at most six disjoint regions.
    pub fn filled_except(
        geom: &CavityGeometry,
        medium: SusceptibilityPair,
        exclusion: Box3,
    ) -> Result<Self> {
        let full = Box3::new([0.0; 3], geom.sides())?;
        let regions = full
            .subtract(&exclusion)
            .into_iter()
            .map(|bounds| Region { bounds, medium: medium.clone() })
            .collect();
        MediumLayout::new(geom, regions, exclusion)
    }

    /// This layout with the exclusion box scaled about its center by
    /// `factor` per axis (clamped to the cavity) and every region clipped
    /// to keep clear of it. Probes how strongly results lean on the
    /// exclusion size.
    pub fn with_scaled_exclusion(&self, geom: &CavityGeometry, factor: f64) -> Result<Self> {
        let (lo, hi) = (self.exclusion.lo(), self.exclusion.hi());
        let mut new_lo = [0.0; 3];
        let mut new_hi = [0.0; 3];
        for i in 0..3 {
            let c = 0.5 * (lo[i] + hi[i]);
            let h = 0.5 * (hi[i] - lo[i]) * factor;
            new_lo[i] = (c - h).max_r(0.0);
            new_hi[i] = (c + h).min_r(geom.side(i));
        }
        let exclusion = Box3::new(new_lo, new_hi)?;
        let mut regions = Vec::new();
        for region in &self.regions {
            for bounds in region.bounds.subtract(&exclusion) {
                regions.push(Region { bounds, medium: region.medium.clone() });
            }
        }
        MediumLayout::new(geom, regions, exclusion)
    }

    #[inline]
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    #[inline]
    pub fn exclusion(&self) -> &Box3 {
        &self.exclusion
    }

    /// True when no medium region covers `r`.
    pub fn is_free(&self, r: Vec3) -> bool {
        self.regions.iter().all(|reg| !reg.bounds.contains(r))
    }

    pub fn medium_volume(&self) -> f64 {
        self.regions.iter().map(|r| r.bounds.volume()).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.regions.iter().all(|r| r.medium.is_vacuum())
    }
}

/// Default side of the atom's exclusion box.
pub fn default_exclusion_side(geom: &CavityGeometry) -> f64 {
    let l = geom.sides();
    l[0].min_r(l[1]).min_r(l[2]) / 50.0
}

/// Exclusion cube of the given side centered on the atom; must fit inside
/// the cavity.
pub fn exclusion_cube(geom: &CavityGeometry, center: Vec3, side: f64) -> Result<Box3> {
    let b = Box3::cube(center, side)?;
    if !b.inside_cavity(geom) {
        return Err(CoreError::InvalidLayout(
            "exclusion cube extends outside the cavity; move the atom inward or shrink it".into(),
        ));
    }
    Ok(b)
}

/// Which trigonometric product family a field component carries: `F` has the
/// cosine on the component's own axis (u/v family), `G` the sine (s family).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TrigPattern {
    F,
    G,
}

/// A cavity trig field: component `j` is `coeff[j]` times the pattern-`j`
/// product for index `n`. Index components of 0 are legal and simply make
/// sine factors vanish (cos(0) = 1).
#[derive(Debug, Clone, Copy)]
pub(crate) struct FieldSpec {
    pub n: [u32; 3],
    pub coeff: Vec3,
    pub pattern: TrigPattern,
}

impl FieldSpec {
    pub(crate) fn photonic(
        geom: &CavityGeometry,
        n: ModeIndex,
        kind: ModeKind,
        branch: u8,
        cfg: &ModeBasisConfig,
    ) -> Result<FieldSpec> {
        let (coeff, uses_g) = mode_coefficients(geom, n, kind, branch, cfg.convention)?;
        Ok(FieldSpec {
            n: n.n,
            coeff,
            pattern: if uses_g { TrigPattern::G } else { TrigPattern::F },
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trig {
    Sin,
    Cos,
}

pub(crate) fn component_trig(pattern: TrigPattern, component: usize, axis: usize) -> Trig {
    let own = component == axis;
    match pattern {
        TrigPattern::F => {
            if own {
                Trig::Cos
            } else {
                Trig::Sin
            }
        }
        TrigPattern::G => {
            if own {
                Trig::Sin
            } else {
                Trig::Cos
            }
        }
    }
}

/// Closed form of `int_{x0}^{x1} trig_a(na pi x / l) trig_b(nb pi x / l) dx`.
///
/// `ka - kb` is exactly zero when `na == nb` (identical float expressions),
/// so the constant-term branch is hit exactly on the diagonal.
pub(crate) fn axis_integral(ta: Trig, na: u32, tb: Trig, nb: u32, l: f64, x0: f64, x1: f64) -> f64 {
    let ka = na as f64 * PI / l;
    let kb = nb as f64 * PI / l;
    let int_cos = |k: f64| {
        if k == 0.0 {
            x1 - x0
        } else {
            ((k * x1).sin() - (k * x0).sin()) / k
        }
    };
    let int_sin = |k: f64| {
        if k == 0.0 {
            0.0
        } else {
            ((k * x0).cos() - (k * x1).cos()) / k
        }
    };
    match (ta, tb) {
        (Trig::Cos, Trig::Cos) => 0.5 * (int_cos(ka - kb) + int_cos(ka + kb)),
        (Trig::Sin, Trig::Sin) => 0.5 * (int_cos(ka - kb) - int_cos(ka + kb)),
        (Trig::Sin, Trig::Cos) => 0.5 * (int_sin(ka + kb) + int_sin(ka - kb)),
        (Trig::Cos, Trig::Sin) => 0.5 * (int_sin(ka + kb) - int_sin(ka - kb)),
    }
}

/// `int_box A . B` for two trig fields, as a product of per-axis closed
/// forms summed over vector components.
pub(crate) fn field_overlap(
    geom: &CavityGeometry,
    bounds: &Box3,
    a: &FieldSpec,
    b: &FieldSpec,
) -> f64 {
    let mut acc = 0.0;
    for j in 0..3 {
        let w = a.coeff[j] * b.coeff[j];
        if w == 0.0 {
            continue;
        }
        let mut term = w;
        for axis in 0..3 {
            term *= axis_integral(
                component_trig(a.pattern, j, axis),
                a.n[axis],
                component_trig(b.pattern, j, axis),
                b.n[axis],
                geom.side(axis),
                bounds.lo[axis],
                bounds.hi[axis],
            );
        }
        acc += term;
    }
    acc
}

fn check_branch(label: &str, branch: u8, max: u8) -> Result<()> {
    if branch == 0 || branch > max {
        return Err(CoreError::InvalidInput(alloc::format!(
            "{label} branch must lie in 1..={max}, got {branch}"
        )));
    }
    Ok(())
}

fn check_within_cutoff(geom: &CavityGeometry, n: ModeIndex, cfg: &ModeBasisConfig) -> Result<()> {
    if mode_frequency(geom, n) > cfg.omega_cut(geom) {
        return Err(CoreError::ModeIndexOutOfRange);
    }
    Ok(())
}

/// Single mode-coupling matrix element
/// `W = (8/V) sqrt(w_n' / w_n) sum_i [Z_e^i int u.u' + Z_m^i int s.s']`,
/// with the region integrals over each medium piece.
pub fn overlap_w(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    n: ModeIndex,
    lambda: u8,
    np: ModeIndex,
    lambdap: u8,
    w: FreqArg,
    cfg: &ModeBasisConfig,
) -> Result<C64> {
    cfg.validate()?;
    check_branch("photonic", lambda, 2)?;
    check_branch("photonic", lambdap, 2)?;
    check_within_cutoff(geom, n, cfg)?;
    check_within_cutoff(geom, np, cfg)?;
    w.validate()?;

    let u_n = FieldSpec::photonic(geom, n, ModeKind::U, lambda, cfg)?;
    let s_n = FieldSpec::photonic(geom, n, ModeKind::S, lambda, cfg)?;
    let u_np = FieldSpec::photonic(geom, np, ModeKind::U, lambdap, cfg)?;
    let s_np = FieldSpec::photonic(geom, np, ModeKind::S, lambdap, cfg)?;

    let mut acc = C64::new(0.0, 0.0);
    for region in layout.regions() {
        let z_e = region.medium.electric.z_function(w)?;
        let z_m = region.medium.magnetic.z_function(w)?;
        if z_e != C64::new(0.0, 0.0) {
            acc += z_e * field_overlap(geom, &region.bounds, &u_n, &u_np);
        }
        if z_m != C64::new(0.0, 0.0) {
            acc += z_m * field_overlap(geom, &region.bounds, &s_n, &s_np);
        }
    }
    let pref = 8.0 / geom.volume()
        * (mode_frequency(geom, np) / mode_frequency(geom, n)).sqrt();
    Ok(acc * pref)
}

/// Volume-fraction reduction `sum_i (|Omega_i| / V)(Z_e^i + Z_m^i)`, the
/// mode-independent diagonal used in the medium dyadic's denominator.
pub fn homogeneous_w(geom: &CavityGeometry, layout: &MediumLayout, w: FreqArg) -> Result<C64> {
    w.validate()?;
    let v = geom.volume();
    let mut acc = C64::new(0.0, 0.0);
    for region in layout.regions() {
        let frac = region.bounds.volume() / v;
        if frac == 0.0 {
            continue;
        }
        acc += (region.medium.electric.z_function(w)?
            + region.medium.magnetic.z_function(w)?)
            * frac;
    }
    Ok(acc)
}

/// Overlap coefficients coupling photonic mode `(n, lambda)` to the medium
/// continua labeled `(m, nu)` at continuum frequency `omega_k`:
///
/// `Q = i sqrt(32 hbar w_n / (eps0 V^2)) sum_i f_i(w_k) int u . v`
/// `L =   sqrt(32 hbar mu0 w_n / V^2)    sum_i g_i(w_k) int s . s`
///
/// The coupling amplitudes `f_i`, `g_i` are the positive square roots of the
/// per-region coupling strengths; they vanish identically for `omega_k <= 0`.
pub fn overlap_ql(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    units: &Units,
    n: ModeIndex,
    lambda: u8,
    m: ModeIndex,
    nu: u8,
    omega_k: f64,
    cfg: &ModeBasisConfig,
) -> Result<(C64, C64)> {
    cfg.validate()?;
    check_branch("photonic", lambda, 2)?;
    check_branch("medium", nu, 3)?;
    if omega_k <= 0.0 {
        return Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
    }

    let u_n = FieldSpec::photonic(geom, n, ModeKind::U, lambda, cfg)?;
    let s_n = FieldSpec::photonic(geom, n, ModeKind::S, lambda, cfg)?;
    let v_m = FieldSpec::photonic(geom, m, ModeKind::V, nu, cfg)?;
    let s_m = FieldSpec::photonic(geom, m, ModeKind::S, nu, cfg)?;

    let mut q_sum = 0.0;
    let mut l_sum = 0.0;
    for region in layout.regions() {
        let f = coupling_f_squared(&region.medium.electric, omega_k, units)?.sqrt();
        if f > 0.0 {
            q_sum += f * field_overlap(geom, &region.bounds, &u_n, &v_m);
        }
        let g = coupling_g_squared(&region.medium.magnetic, omega_k, units)?.sqrt();
        if g > 0.0 {
            l_sum += g * field_overlap(geom, &region.bounds, &s_n, &s_m);
        }
    }

    let omega_n = mode_frequency(geom, n);
    let v2 = geom.volume() * geom.volume();
    let q = I * (32.0 * units.hbar * omega_n / (units.eps0 * v2)).sqrt() * q_sum;
    let l = C64::new(
        (32.0 * units.hbar * units.mu0 * omega_n / v2).sqrt() * l_sum,
        0.0,
    );
    Ok((q, l))
}

/// The W matrix over the truncated photonic basis, with the Z transforms
/// hoisted out of the mode-pair loop.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    /// Row/column labels: (mode index, polarization branch), branch-major
    /// within each mode, modes ordered by frequency.
    pub modes: Vec<(ModeIndex, u8)>,
    /// Evaluation argument the Z transforms were taken at.
    pub arg: FreqArg,
    /// `entries[i][j]` couples row mode i to column mode j.
    pub entries: Vec<Vec<C64>>,
}

pub fn coupling_matrix(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    w: FreqArg,
    cfg: &ModeBasisConfig,
) -> Result<CouplingMatrix> {
    cfg.validate()?;
    w.validate()?;

    let mut modes = Vec::new();
    for (n, _omega) in cfg.modes_within_cutoff(geom) {
        for lambda in 1u8..=2 {
            modes.push((n, lambda));
        }
    }

    struct RegionZ {
        bounds: Box3,
        z_e: C64,
        z_m: C64,
    }
    let mut region_z = Vec::with_capacity(layout.regions().len());
    for region in layout.regions() {
        region_z.push(RegionZ {
            bounds: region.bounds,
            z_e: region.medium.electric.z_function(w)?,
            z_m: region.medium.magnetic.z_function(w)?,
        });
    }

    let mut specs = Vec::with_capacity(modes.len());
    let mut freqs = Vec::with_capacity(modes.len());
    for &(n, lambda) in &modes {
        specs.push((
            FieldSpec::photonic(geom, n, ModeKind::U, lambda, cfg)?,
            FieldSpec::photonic(geom, n, ModeKind::S, lambda, cfg)?,
        ));
        freqs.push(mode_frequency(geom, n));
    }

    let v = geom.volume();
    let zero = C64::new(0.0, 0.0);
    let mut entries = alloc::vec![alloc::vec![zero; modes.len()]; modes.len()];
    for i in 0..modes.len() {
        for j in 0..modes.len() {
            let mut acc = zero;
            for rz in &region_z {
                if rz.z_e != zero {
                    acc += rz.z_e * field_overlap(geom, &rz.bounds, &specs[i].0, &specs[j].0);
                }
                if rz.z_m != zero {
                    acc += rz.z_m * field_overlap(geom, &rz.bounds, &specs[i].1, &specs[j].1);
                }
            }
            entries[i][j] = acc * (8.0 / v * (freqs[j] / freqs[i]).sqrt());
        }
    }

    Ok(CouplingMatrix { modes, arg: w, entries })
}
