//! Rectangular-cavity eigenmodes: frequencies, polarization bases, the
//! u/v/s vector mode functions, the scalar Green function, and transverse
//! projection on a quadrature grid.

use crate::math::{cross, dot, norm, scale, unit, Real, Vec3, PI};
use crate::quad::gauss_legendre_on;
use crate::{CoreError, Result};
use alloc::vec::Vec;

/// Physical constants. Natural units by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub c: f64,
    pub eps0: f64,
    pub mu0: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units { hbar: 1.0, c: 1.0, eps0: 1.0, mu0: 1.0 }
    }
}

/// Axis-aligned box cavity `[0,L1] x [0,L2] x [0,L3]` with wave speed `c`.
///
/// `c` here must agree with `Units::c` wherever both are in play; the
/// scenario loader enforces that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    l: Vec3,
    c: f64,
}

impl CavityGeometry {
    pub fn new(l1: f64, l2: f64, l3: f64, c: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0 && l3 > 0.0) || !(l1 + l2 + l3).is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "cavity sides must be positive, got ({l1}, {l2}, {l3})"
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(CoreError::InvalidInput(alloc::format!(
                "wave speed must be positive, got {c}"
            )));
        }
        Ok(CavityGeometry { l: [l1, l2, l3], c })
    }

    /// Cube of side `l`.
    pub fn cube(l: f64, c: f64) -> Result<Self> {
        Self::new(l, l, l, c)
    }

    #[inline]
    pub fn sides(&self) -> Vec3 {
        self.l
    }

    #[inline]
    pub fn side(&self, axis: usize) -> f64 {
        self.l[axis]
    }

    #[inline]
    pub fn wave_speed(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.l[0] * self.l[1] * self.l[2]
    }

    /// Wave vector of the mode: components `n_i pi / L_i`.
    #[inline]
    pub fn wave_vector(&self, n: ModeIndex) -> Vec3 {
        [
            n.n[0] as f64 * PI / self.l[0],
            n.n[1] as f64 * PI / self.l[1],
            n.n[2] as f64 * PI / self.l[2],
        ]
    }

    /// True when `r` is in the closed box.
    pub fn contains(&self, r: Vec3) -> bool {
        (0..3).all(|i| r[i] >= 0.0 && r[i] <= self.l[i])
    }

    /// True when `r` is strictly interior.
    pub fn contains_interior(&self, r: Vec3) -> bool {
        (0..3).all(|i| r[i] > 0.0 && r[i] < self.l[i])
    }
}

/// Cavity mode triplet; all components start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub n: [u32; 3],
}

impl ModeIndex {
    pub fn new(n1: u32, n2: u32, n3: u32) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(CoreError::ModeIndexOutOfRange);
        }
        Ok(ModeIndex { n: [n1, n2, n3] })
    }
}

/// Eigenfrequency `omega_n = c |k_n|`.
pub fn mode_frequency(geom: &CavityGeometry, n: ModeIndex) -> f64 {
    let k = geom.wave_vector(n);
    geom.c * norm(k)
}

/// Deterministic polarization conventions. Physical outputs must not depend
/// on the choice; the rotated variant exists to test that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarizationConvention {
    /// `e1 = normalize(k_hat x z_hat)` (falling back to `k_hat x x_hat` for
    /// axial k), `e2 = k_hat x e1`.
    ZCross,
    /// ZCross pair rotated by `angle` radians about `k_hat`.
    Rotated { angle: f64 },
}

impl Default for PolarizationConvention {
    fn default() -> Self {
        PolarizationConvention::ZCross
    }
}

/// The two transverse unit vectors of a mode, orthogonal to its wave vector.
pub fn polarization_basis(geom: &CavityGeometry, n: ModeIndex) -> (Vec3, Vec3) {
    polarization_basis_with(geom, n, PolarizationConvention::ZCross)
}

pub fn polarization_basis_with(
    geom: &CavityGeometry,
    n: ModeIndex,
    convention: PolarizationConvention,
) -> (Vec3, Vec3) {
    let k_hat = unit(geom.wave_vector(n));
    let raw = cross(k_hat, [0.0, 0.0, 1.0]);
    let e1 = if norm(raw) > 1e-12 {
        unit(raw)
    } else {
        unit(cross(k_hat, [1.0, 0.0, 0.0]))
    };
    let e2 = cross(k_hat, e1);
    match convention {
        PolarizationConvention::ZCross => (e1, e2),
        PolarizationConvention::Rotated { angle } => {
            let (s, c) = (angle.sin(), angle.cos());
            (
                [
                    c * e1[0] + s * e2[0],
                    c * e1[1] + s * e2[1],
                    c * e1[2] + s * e2[2],
                ],
                [
                    c * e2[0] - s * e1[0],
                    c * e2[1] - s * e1[1],
                    c * e2[2] - s * e1[2],
                ],
            )
        }
    }
}

/// Which vector mode family to evaluate.
///
/// `U`: transverse photonic modes (branch 1..2).
/// `V`: electric-medium modes; branches 1..2 coincide with `U`, branch 3 is
/// the longitudinal partner built on the same trigonometric products.
/// `S`: curl-type modes (branches 1..2 are `curl u / |k|`), branch 3 the
/// longitudinal analog on the complementary trigonometric products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    U,
    V,
    S,
}

/// Per-axis cosine/sine split of the two product families.
///
/// `f_i` carries a cosine on its own axis and sines elsewhere; `g_i` is the
/// complementary pattern.
#[inline]
pub(crate) fn trig_products(geom: &CavityGeometry, n: ModeIndex, r: Vec3) -> ([f64; 3], [f64; 3]) {
    let mut c = [0.0; 3];
    let mut s = [0.0; 3];
    for i in 0..3 {
        let arg = n.n[i] as f64 * PI * r[i] / geom.l[i];
        c[i] = arg.cos();
        s[i] = arg.sin();
    }
    let f = [c[0] * s[1] * s[2], s[0] * c[1] * s[2], s[0] * s[1] * c[2]];
    let g = [s[0] * c[1] * c[2], c[0] * s[1] * c[2], c[0] * c[1] * s[2]];
    (f, g)
}

/// Component coefficients of a mode: the constant vector multiplying the
/// per-component trigonometric products, plus which product family applies.
pub(crate) fn mode_coefficients(
    geom: &CavityGeometry,
    n: ModeIndex,
    kind: ModeKind,
    branch: u8,
    convention: PolarizationConvention,
) -> Result<(Vec3, bool)> {
    let k_hat = unit(geom.wave_vector(n));
    let (e1, e2) = polarization_basis_with(geom, n, convention);
    let coeff = match (kind, branch) {
        (ModeKind::U, 1) => e1,
        (ModeKind::U, 2) => e2,
        (ModeKind::V, 1) => e1,
        (ModeKind::V, 2) => e2,
        (ModeKind::V, 3) => k_hat,
        (ModeKind::S, 1) => cross(k_hat, e1),
        (ModeKind::S, 2) => cross(k_hat, e2),
        (ModeKind::S, 3) => k_hat,
        _ => {
            return Err(CoreError::InvalidInput(alloc::format!(
                "branch {branch} invalid for mode kind {kind:?}"
            )))
        }
    };
    // U and V share the f products; S lives on the complementary g products.
    let uses_g = matches!(kind, ModeKind::S);
    Ok((coeff, uses_g))
}

/// Vector mode function at `r`.
pub fn mode_function(
    geom: &CavityGeometry,
    n: ModeIndex,
    branch: u8,
    kind: ModeKind,
    r: Vec3,
) -> Result<Vec3> {
    mode_function_with(geom, n, branch, kind, r, PolarizationConvention::ZCross)
}

pub fn mode_function_with(
    geom: &CavityGeometry,
    n: ModeIndex,
    branch: u8,
    kind: ModeKind,
    r: Vec3,
    convention: PolarizationConvention,
) -> Result<Vec3> {
    if !geom.contains(r) {
        return Err(CoreError::OutsideCavity);
    }
    let (coeff, uses_g) = mode_coefficients(geom, n, kind, branch, convention)?;
    let (f, g) = trig_products(geom, n, r);
    let p = if uses_g { g } else { f };
    Ok([coeff[0] * p[0], coeff[1] * p[1], coeff[2] * p[2]])
}

/// Divergence of a photonic mode, evaluated as the explicit sum of the three
/// derivative terms. Vanishes identically because the polarization is
/// orthogonal to the wave vector; returned unreduced so tests can verify the
/// cancellation rather than assume it.
pub fn mode_divergence_u(geom: &CavityGeometry, n: ModeIndex, branch: u8, r: Vec3) -> Result<f64> {
    if !geom.contains(r) {
        return Err(CoreError::OutsideCavity);
    }
    let (coeff, _) = mode_coefficients(geom, n, ModeKind::U, branch, Default::default())?;
    let k = geom.wave_vector(n);
    let mut c = [0.0; 3];
    let mut s = [0.0; 3];
    for i in 0..3 {
        let arg = n.n[i] as f64 * PI * r[i] / geom.l[i];
        c[i] = arg.cos();
        s[i] = arg.sin();
    }
    // d/dx f_1 = -k_1 sin sin sin, and cyclically for the other axes.
    let sinsinsin = s[0] * s[1] * s[2];
    let mut div = 0.0;
    for i in 0..3 {
        div += coeff[i] * (-k[i]) * sinsinsin;
    }
    Ok(div)
}

/// How a mode sum is faded out near its frequency cutoff.
///
/// The medium dyadic's mode sums converge only conditionally under a hard
/// cutoff (partial sums oscillate with the truncation radius); a smooth
/// taper restores stable convergence. Hard truncation stays available for
/// oracle comparisons where both sides share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationWindow {
    Hard,
    /// Weight 1 below `start_frac * omega_cut`, then a smooth cosine-squared
    /// fade to 0 at `omega_cut`.
    CosineTaper { start_frac: f64 },
    /// `exp(-(omega / (sigma_frac * omega_cut))^2 / 2)`, truncated at the cutoff.
    Gaussian { sigma_frac: f64 },
    /// Weight 1 below `start_frac * omega_cut`, then a Planck-style
    /// `1 / (1 + exp(1/(1-t) - 1/t))` fade whose derivatives all vanish at
    /// both edges. The flat top leaves low modes untouched while the smooth
    /// roll-off gives superalgebraic convergence of conditionally convergent
    /// mode sums under cutoff refinement.
    SmoothTaper { start_frac: f64 },
}

impl TruncationWindow {
    pub fn weight(&self, omega: f64, omega_cut: f64) -> f64 {
        if omega > omega_cut {
            return 0.0;
        }
        match *self {
            TruncationWindow::Hard => 1.0,
            TruncationWindow::CosineTaper { start_frac } => {
                let start = start_frac * omega_cut;
                if omega <= start {
                    1.0
                } else {
                    let x = (omega - start) / (omega_cut - start);
                    let c = (0.5 * PI * x).cos();
                    c * c
                }
            }
            TruncationWindow::Gaussian { sigma_frac } => {
                let s = sigma_frac * omega_cut;
                (-0.5 * (omega / s) * (omega / s)).exp()
            }
            TruncationWindow::SmoothTaper { start_frac } => {
                let start = start_frac * omega_cut;
                if omega <= start {
                    1.0
                } else {
                    let t = (omega - start) / (omega_cut - start);
                    let z = 1.0 / (1.0 - t) - 1.0 / t;
                    // Clamp before exponentiating; the weight saturates
                    // far below f64 resolution past |z| = 40.
                    if z > 40.0 {
                        0.0
                    } else if z < -40.0 {
                        1.0
                    } else {
                        1.0 / (1.0 + z.exp())
                    }
                }
            }
        }
    }
}

impl Default for TruncationWindow {
    fn default() -> Self {
        TruncationWindow::CosineTaper { start_frac: 0.7 }
    }
}

/// Truncation and quadrature settings shared across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBasisConfig {
    /// Per-axis index bound; also fixes the frequency cutoff (see
    /// [`ModeBasisConfig::omega_cut`]).
    pub n_max: u32,
    /// Gauss-Legendre points per axis for volume integrals.
    pub quadrature_points: usize,
    pub window: TruncationWindow,
    pub convention: PolarizationConvention,
}

impl Default for ModeBasisConfig {
    fn default() -> Self {
        ModeBasisConfig {
            n_max: 8,
            quadrature_points: 32,
            window: TruncationWindow::default(),
            convention: PolarizationConvention::ZCross,
        }
    }
}

impl ModeBasisConfig {
    pub fn new(n_max: u32, quadrature_points: usize) -> Result<Self> {
        let cfg = ModeBasisConfig { n_max, quadrature_points, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(CoreError::InvalidInput("n_max must be at least 1".into()));
        }
        if self.quadrature_points < 2 {
            return Err(CoreError::InvalidInput(
                "quadrature_points must be at least 2".into(),
            ));
        }
        if let TruncationWindow::CosineTaper { start_frac }
        | TruncationWindow::SmoothTaper { start_frac } = self.window
        {
            if !(0.0..1.0).contains(&start_frac) {
                return Err(CoreError::InvalidInput(
                    "taper start fraction must lie in [0, 1)".into(),
                ));
            }
        }
        if let TruncationWindow::Gaussian { sigma_frac } = self.window {
            if !(sigma_frac > 0.0) {
                return Err(CoreError::InvalidInput(
                    "gaussian window width must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Frequency cutoff implied by `n_max`: the largest frequency ball that
    /// the index box `n_i <= n_max` is guaranteed to contain, so mode sets
    /// truncate isotropically even in anisotropic boxes.
    pub fn omega_cut(&self, geom: &CavityGeometry) -> f64 {
        let lmax = geom.l[0].max_r(geom.l[1]).max_r(geom.l[2]);
        geom.c * PI * self.n_max as f64 / lmax
    }

    /// All modes with `omega_n <= omega_cut`, sorted by frequency (index
    /// triplet breaking ties) for a deterministic summation order.
    pub fn modes_within_cutoff(&self, geom: &CavityGeometry) -> Vec<(ModeIndex, f64)> {
        let cut = self.omega_cut(geom);
        let mut out = Vec::new();
        for n1 in 1..=self.n_max {
            for n2 in 1..=self.n_max {
                for n3 in 1..=self.n_max {
                    let idx = ModeIndex { n: [n1, n2, n3] };
                    let w = mode_frequency(geom, idx);
                    if w <= cut {
                        out.push((idx, w));
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        out
    }
}

/// Scalar Green function of the box with Dirichlet walls, truncated at
/// `n_max` per axis.
pub fn scalar_green(
    geom: &CavityGeometry,
    r: Vec3,
    rp: Vec3,
    cfg: &ModeBasisConfig,
) -> Result<f64> {
    if !geom.contains(r) || !geom.contains(rp) {
        return Err(CoreError::OutsideCavity);
    }
    if r == rp {
        return Err(CoreError::CoincidentPoints);
    }
    let v = geom.volume();
    let mut sum = 0.0;
    for n1 in 1..=cfg.n_max {
        for n2 in 1..=cfg.n_max {
            for n3 in 1..=cfg.n_max {
                let idx = ModeIndex { n: [n1, n2, n3] };
                let k = geom.wave_vector(idx);
                let k2 = dot(k, k);
                let mut term = 1.0 / k2;
                for i in 0..3 {
                    let kif = idx.n[i] as f64 * PI / geom.l[i];
                    term *= (kif * r[i]).sin() * (kif * rp[i]).sin();
                }
                sum += term;
            }
        }
    }
    Ok(8.0 / v * sum)
}

/// Gradient with respect to `r` of [`scalar_green`]; a purely longitudinal
/// field used to exercise the transverse projector.
pub fn scalar_green_gradient(
    geom: &CavityGeometry,
    r: Vec3,
    rp: Vec3,
    cfg: &ModeBasisConfig,
) -> Result<Vec3> {
    if !geom.contains(r) || !geom.contains(rp) {
        return Err(CoreError::OutsideCavity);
    }
    if r == rp {
        return Err(CoreError::CoincidentPoints);
    }
    let v = geom.volume();
    let mut grad = [0.0; 3];
    for n1 in 1..=cfg.n_max {
        for n2 in 1..=cfg.n_max {
            for n3 in 1..=cfg.n_max {
                let idx = ModeIndex { n: [n1, n2, n3] };
                let k = geom.wave_vector(idx);
                let k2 = dot(k, k);
                let sines: Vec3 = [
                    (k[0] * r[0]).sin(),
                    (k[1] * r[1]).sin(),
                    (k[2] * r[2]).sin(),
                ];
                let cosines: Vec3 = [
                    (k[0] * r[0]).cos(),
                    (k[1] * r[1]).cos(),
                    (k[2] * r[2]).cos(),
                ];
                let mut src = 1.0;
                for i in 0..3 {
                    src *= (k[i] * rp[i]).sin();
                }
                let base = 8.0 / (v * k2) * src;
                grad[0] += base * k[0] * cosines[0] * sines[1] * sines[2];
                grad[1] += base * k[1] * sines[0] * cosines[1] * sines[2];
                grad[2] += base * k[2] * sines[0] * sines[1] * cosines[2];
            }
        }
    }
    Ok(grad)
}

/// The tensor product Gauss-Legendre grid covering the cavity.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    pub points_per_axis: usize,
    /// Per-axis nodes mapped to `[0, L_i]`.
    pub nodes: [Vec<f64>; 3],
    /// Per-axis weights (already scaled by the interval).
    pub weights: [Vec<f64>; 3],
}

impl QuadGrid {
    pub fn new(geom: &CavityGeometry, points_per_axis: usize) -> Self {
        let build = |l: f64| gauss_legendre_on(points_per_axis, 0.0, l);
        let (n0, w0) = build(geom.l[0]);
        let (n1, w1) = build(geom.l[1]);
        let (n2, w2) = build(geom.l[2]);
        QuadGrid {
            points_per_axis,
            nodes: [n0, n1, n2],
            weights: [w0, w1, w2],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_axis * self.points_per_axis * self.points_per_axis
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points_per_axis == 0
    }

    /// Grid point for flat index `q` (x-major ordering).
    #[inline]
    pub fn point(&self, q: usize) -> Vec3 {
        let np = self.points_per_axis;
        let iz = q % np;
        let iy = (q / np) % np;
        let ix = q / (np * np);
        [self.nodes[0][ix], self.nodes[1][iy], self.nodes[2][iz]]
    }

    /// Quadrature weight for flat index `q`.
    #[inline]
    pub fn weight(&self, q: usize) -> f64 {
        let np = self.points_per_axis;
        let iz = q % np;
        let iy = (q / np) % np;
        let ix = q / (np * np);
        self.weights[0][ix] * self.weights[1][iy] * self.weights[2][iz]
    }
}

/// A vector field sampled on a [`QuadGrid`] (x-major flat ordering).
#[derive(Debug, Clone)]
pub struct GridField {
    pub points_per_axis: usize,
    pub values: Vec<Vec3>,
}

impl GridField {
    /// Samples `f` on the grid.
    pub fn sample<F: FnMut(Vec3) -> Vec3>(grid: &QuadGrid, mut f: F) -> Self {
        let values = (0..grid.len()).map(|q| f(grid.point(q))).collect();
        GridField { points_per_axis: grid.points_per_axis, values }
    }
}

/// Projects a sampled field onto the span of the transverse photonic modes
/// with indices up to `n_max`: coefficients `(8/V) * sum_q w_q u . F`, then
/// resynthesis. Idempotent on that span; annihilates gradients in the limit
/// of large `n_max`.
pub fn transverse_project(
    field: &GridField,
    geom: &CavityGeometry,
    cfg: &ModeBasisConfig,
) -> Result<GridField> {
    let grid = QuadGrid::new(geom, cfg.quadrature_points);
    if field.points_per_axis != cfg.quadrature_points || field.values.len() != grid.len() {
        return Err(CoreError::GridMismatch {
            expected: cfg.quadrature_points,
            got: field.points_per_axis,
        });
    }
    let v = geom.volume();
    let mut out = alloc::vec![[0.0; 3]; grid.len()];

    let mut mode_values: Vec<Vec3> = alloc::vec![[0.0; 3]; grid.len()];
    for n1 in 1..=cfg.n_max {
        for n2 in 1..=cfg.n_max {
            for n3 in 1..=cfg.n_max {
                let idx = ModeIndex { n: [n1, n2, n3] };
                for branch in 1..=2u8 {
                    let (coeff, _) =
                        mode_coefficients(geom, idx, ModeKind::U, branch, cfg.convention)?;
                    let mut a = 0.0;
                    for (q, val) in mode_values.iter_mut().enumerate() {
                        let (f, _) = trig_products(geom, idx, grid.point(q));
                        *val = [coeff[0] * f[0], coeff[1] * f[1], coeff[2] * f[2]];
                        a += grid.weight(q) * dot(*val, field.values[q]);
                    }
                    a *= 8.0 / v;
                    for (o, val) in out.iter_mut().zip(&mode_values) {
                        *o = crate::math::add(*o, scale(*val, a));
                    }
                }
            }
        }
    }
    Ok(GridField { points_per_axis: field.points_per_axis, values: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sub;
    use approx::assert_abs_diff_eq;

    fn cube_pi() -> CavityGeometry {
        CavityGeometry::cube(PI, 1.0).unwrap()
    }

    #[test]
    fn frequency_matches_closed_form() {
        let g = cube_pi();
        let n = ModeIndex::new(1, 1, 1).unwrap();
        assert_abs_diff_eq!(mode_frequency(&g, n), 3.0f64.sqrt(), epsilon = 1e-12);

        let g2 = CavityGeometry::new(1.0, 2.0, 3.0, 1.0).unwrap();
        // sqrt(pi^2 + pi^2/4 + pi^2/9) = pi sqrt(49/36) = 7 pi / 6
        assert_abs_diff_eq!(
            mode_frequency(&g2, n),
            PI * 7.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_index_rejected() {
        assert_eq!(
            ModeIndex::new(0, 1, 1).unwrap_err(),
            CoreError::ModeIndexOutOfRange
        );
    }

    #[test]
    fn polarization_vectors_are_orthonormal_and_transverse() {
        for geom in [cube_pi(), CavityGeometry::new(1.0, 2.0, 3.0, 2.0).unwrap()] {
            for n in [[1, 1, 1], [3, 1, 2], [2, 2, 2]] {
                let idx = ModeIndex { n };
                let (e1, e2) = polarization_basis(&geom, idx);
                let k = geom.wave_vector(idx);
                assert_abs_diff_eq!(dot(e1, e1), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(dot(e2, e2), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(dot(e1, e2), 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(dot(e1, k), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(dot(e2, k), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn polarization_is_deterministic() {
        let g = cube_pi();
        let n = ModeIndex::new(2, 1, 3).unwrap();
        let (a1, a2) = polarization_basis(&g, n);
        let (b1, b2) = polarization_basis(&g, n);
        assert_eq!(a1, b1);
        assert_eq!(a2, b2);
    }

    #[test]
    fn rotated_convention_still_orthonormal() {
        let g = cube_pi();
        let n = ModeIndex::new(1, 2, 1).unwrap();
        let (e1, e2) =
            polarization_basis_with(&g, n, PolarizationConvention::Rotated { angle: 0.7 });
        let k = g.wave_vector(n);
        assert_abs_diff_eq!(dot(e1, e1), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dot(e2, e2), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dot(e1, e2), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dot(e1, k), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn u_mode_at_face_center_reduces_to_first_component() {
        // At x = 0, y = L/2, z = L/2 with n = (1,1,1): f1 = 1, f2 = f3 = 0.
        let g = cube_pi();
        let n = ModeIndex::new(1, 1, 1).unwrap();
        for branch in [1u8, 2] {
            let u = mode_function(&g, n, branch, ModeKind::U, [0.0, PI / 2.0, PI / 2.0]).unwrap();
            let (e1, e2) = polarization_basis(&g, n);
            let e = if branch == 1 { e1 } else { e2 };
            assert_abs_diff_eq!(u[0], e[0], epsilon = 1e-14);
            assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(u[2], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn u_mode_vanishes_at_corners() {
        let g = CavityGeometry::new(1.0, 2.0, 0.5, 1.0).unwrap();
        let n = ModeIndex::new(2, 3, 1).unwrap();
        for cx in [0.0, 1.0] {
            for cy in [0.0, 2.0] {
                for cz in [0.0, 0.5] {
                    let u = mode_function(&g, n, 1, ModeKind::U, [cx, cy, cz]).unwrap();
                    assert!(norm(u) < 1e-13, "corner ({cx},{cy},{cz}) gave {u:?}");
                }
            }
        }
    }

    #[test]
    fn mode_function_rejects_outside_point() {
        let g = cube_pi();
        let n = ModeIndex::new(1, 1, 1).unwrap();
        let err = mode_function(&g, n, 1, ModeKind::U, [4.0, 1.0, 1.0]).unwrap_err();
        assert_eq!(err, CoreError::OutsideCavity);
    }

    #[test]
    fn s_mode_equals_curl_of_u_over_k() {
        // Numerical curl via central differences against the closed form.
        let g = CavityGeometry::new(1.3, 0.9, 1.7, 1.0).unwrap();
        let n = ModeIndex::new(2, 1, 3).unwrap();
        let k = norm(g.wave_vector(n));
        let r = [0.4, 0.33, 0.8];
        let h = 1e-5;
        for branch in [1u8, 2] {
            let u = |p: Vec3| mode_function(&g, n, branch, ModeKind::U, p).unwrap();
            let mut curl = [0.0; 3];
            for i in 0..3 {
                let (j, l) = ((i + 1) % 3, (i + 2) % 3);
                let mut rp = r;
                let mut rm = r;
                rp[j] += h;
                rm[j] -= h;
                let dj = (u(rp)[l] - u(rm)[l]) / (2.0 * h);
                let mut rp = r;
                let mut rm = r;
                rp[l] += h;
                rm[l] -= h;
                let dl = (u(rp)[j] - u(rm)[j]) / (2.0 * h);
                curl[i] = dj - dl;
            }
            let s = mode_function(&g, n, branch, ModeKind::S, r).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(s[i], curl[i] / k, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn divergence_terms_cancel_at_random_points() {
        let g = CavityGeometry::new(1.0, 2.0, 3.0, 1.0).unwrap();
        // Fixed pseudo-random interior points.
        let pts = [
            [0.21, 1.13, 2.71],
            [0.77, 0.45, 0.09],
            [0.5, 1.99, 1.5],
            [0.93, 0.03, 2.93],
        ];
        for n in [[1, 1, 1], [2, 3, 1], [3, 3, 3]] {
            let idx = ModeIndex { n };
            for branch in [1u8, 2] {
                for r in pts {
                    let div = mode_divergence_u(&g, idx, branch, r).unwrap();
                    assert!(div.abs() <= 1e-12, "div={div} at {r:?} n={n:?}");
                }
            }
        }
    }

    fn quad_overlap(
        geom: &CavityGeometry,
        kind: ModeKind,
        a: (ModeIndex, u8),
        b: (ModeIndex, u8),
        qp: usize,
    ) -> f64 {
        let grid = QuadGrid::new(geom, qp);
        let mut acc = 0.0;
        for q in 0..grid.len() {
            let r = grid.point(q);
            let fa = mode_function(geom, a.0, a.1, kind, r).unwrap();
            let fb = mode_function(geom, b.0, b.1, kind, r).unwrap();
            acc += grid.weight(q) * dot(fa, fb);
        }
        acc
    }

    #[test]
    fn u_orthonormality_spot_checks() {
        // Full sweep over all index pairs <= 3 lives in the acceptance suite;
        // here a few representative pairs guard the quadrature plumbing.
        let g = CavityGeometry::new(1.0, 1.3, 0.8, 1.0).unwrap();
        let v = g.volume();
        let n111 = ModeIndex::new(1, 1, 1).unwrap();
        let n211 = ModeIndex::new(2, 1, 1).unwrap();
        let same = 8.0 / v * quad_overlap(&g, ModeKind::U, (n111, 1), (n111, 1), 24);
        assert_abs_diff_eq!(same, 1.0, epsilon = 1e-10);
        let cross_pol = 8.0 / v * quad_overlap(&g, ModeKind::U, (n111, 1), (n111, 2), 24);
        assert_abs_diff_eq!(cross_pol, 0.0, epsilon = 1e-10);
        let cross_idx = 8.0 / v * quad_overlap(&g, ModeKind::U, (n111, 1), (n211, 2), 24);
        assert_abs_diff_eq!(cross_idx, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn v3_is_orthogonal_to_transverse_u() {
        // The longitudinal medium branch shares the f products but points
        // along k, so it is orthogonal to both photonic branches mode by mode.
        let g = cube_pi();
        let n = ModeIndex::new(1, 2, 2).unwrap();
        let grid = QuadGrid::new(&g, 24);
        for branch in [1u8, 2] {
            let mut acc = 0.0;
            for q in 0..grid.len() {
                let r = grid.point(q);
                let u = mode_function(&g, n, branch, ModeKind::U, r).unwrap();
                let v3 = mode_function(&g, n, 3, ModeKind::V, r).unwrap();
                acc += grid.weight(q) * dot(u, v3);
            }
            assert_abs_diff_eq!(acc, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn transverse_delta_forms_agree_per_mode() {
        // Eigenfunction sum over branches vs the projector form
        // (delta_lj - khat_l khat_j) f_l f_j, mode by mode.
        let g = CavityGeometry::new(1.1, 0.7, 1.9, 1.0).unwrap();
        let r = [0.3, 0.5, 0.22];
        let rp = [0.9, 0.1, 1.4];
        for n in [[1, 1, 1], [2, 1, 3], [3, 2, 2]] {
            let idx = ModeIndex { n };
            let k_hat = unit(g.wave_vector(idx));
            let (fr, _) = trig_products(&g, idx, r);
            let (frp, _) = trig_products(&g, idx, rp);
            for l in 0..3 {
                for j in 0..3 {
                    let mut lhs = 0.0;
                    for branch in [1u8, 2] {
                        let ur = mode_function(&g, idx, branch, ModeKind::U, r).unwrap();
                        let urp = mode_function(&g, idx, branch, ModeKind::U, rp).unwrap();
                        lhs += ur[l] * urp[j];
                    }
                    let delta = if l == j { 1.0 } else { 0.0 };
                    let rhs = (delta - k_hat[l] * k_hat[j]) * fr[l] * frp[j];
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn scalar_green_is_symmetric_and_vanishes_on_walls() {
        let g = CavityGeometry::new(1.0, 1.5, 2.0, 1.0).unwrap();
        let cfg = ModeBasisConfig::new(6, 8).unwrap();
        let pairs = [
            ([0.2, 0.4, 1.0], [0.7, 1.1, 0.3]),
            ([0.5, 0.2, 0.2], [0.9, 1.4, 1.9]),
        ];
        for (r, rp) in pairs {
            let a = scalar_green(&g, r, rp, &cfg).unwrap();
            let b = scalar_green(&g, rp, r, &cfg).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let on_wall = scalar_green(&g, [0.0, 0.4, 1.0], [0.7, 1.1, 0.3], &cfg).unwrap();
        assert_abs_diff_eq!(on_wall, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_green_rejects_coincident_points() {
        let g = cube_pi();
        let cfg = ModeBasisConfig::new(3, 8).unwrap();
        let err = scalar_green(&g, [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], &cfg).unwrap_err();
        assert_eq!(err, CoreError::CoincidentPoints);
    }

    #[test]
    fn scalar_green_solves_poisson_weakly() {
        // For phi built from box eigenfunctions, int G (-lap phi) = phi exactly
        // once the truncation covers the combination; a generic smooth phi
        // must converge with n_max.
        let g = cube_pi();
        let qp = 24;
        let grid = QuadGrid::new(&g, qp);
        // phi = sin x sin y sin z + 0.3 sin 2x sin y sin z, -lap phi known.
        let phi = |r: Vec3| {
            r[0].sin() * r[1].sin() * r[2].sin()
                + 0.3 * (2.0 * r[0]).sin() * r[1].sin() * r[2].sin()
        };
        let neg_lap_phi = |r: Vec3| {
            3.0 * r[0].sin() * r[1].sin() * r[2].sin()
                + 0.3 * 6.0 * (2.0 * r[0]).sin() * r[1].sin() * r[2].sin()
        };
        let cfg = ModeBasisConfig::new(3, qp).unwrap();
        let r0 = [1.1, 2.0, 0.7];
        let mut acc = 0.0;
        for q in 0..grid.len() {
            let rp = grid.point(q);
            if rp == r0 {
                continue;
            }
            acc += grid.weight(q) * scalar_green(&g, r0, rp, &cfg).unwrap() * neg_lap_phi(rp);
        }
        assert_abs_diff_eq!(acc, phi(r0), epsilon = 1e-8);
    }

    /// Per-component medium-line profile: cosine on the component's own
    /// cosine axes, sine elsewhere, with zero indices permitted on the
    /// cosine axes (where the line degenerates to the axis mean).
    fn line_profile(geom: &CavityGeometry, m: [u32; 3], a: usize, uses_g: bool, r: Vec3) -> f64 {
        let mut p = 1.0;
        for i in 0..3 {
            let arg = m[i] as f64 * PI * r[i] / geom.l[i];
            // f_a: cos on axis a, sin elsewhere; g_a: the complement.
            let is_cos = (i == a) != uses_g;
            p *= if is_cos { arg.cos() } else { arg.sin() };
        }
        p
    }

    /// Closure weight for a line: 1/2 per zero index (those cosine lines
    /// carry only half the usual normalization, since cos(0) integrates to L
    /// rather than L/2 when squared).
    fn line_weight(m: [u32; 3]) -> f64 {
        let zeros = m.iter().filter(|&&c| c == 0).count() as i32;
        0.5f64.powi(zeros)
    }

    #[test]
    fn medium_closure_reproduces_inner_products() {
        // The coupling derivations collapse medium sums through
        // sum_lines w [int A.line][int B.line] = (V/8) int A.B. Checked here
        // in the per-component line decomposition (unit coordinate
        // coefficient, per-component trig profile) that the dynamics uses,
        // for both the electric (f-type) and magnetic (g-type) families.
        let g = cube_pi();
        let qp = 20;
        let grid = QuadGrid::new(&g, qp);
        let v = g.volume();
        let half = v / 8.0;

        let closure = |field_a: &dyn Fn(Vec3) -> Vec3,
                       field_b: &dyn Fn(Vec3) -> Vec3,
                       uses_g: bool,
                       allow_zero: bool| {
            let lo = if allow_zero { 0 } else { 1 };
            let mut acc = 0.0;
            for m1 in lo..=3u32 {
                for m2 in lo..=3u32 {
                    for m3 in lo..=3u32 {
                        let m = [m1, m2, m3];
                        for a in 0..3 {
                            // Skip identically-zero lines (a sine factor with
                            // zero index).
                            let zero_ok = (0..3).all(|i| {
                                m[i] >= 1 || ((i == a) != uses_g)
                            });
                            if !zero_ok {
                                continue;
                            }
                            let mut ia = 0.0;
                            let mut ib = 0.0;
                            for q in 0..grid.len() {
                                let r = grid.point(q);
                                let p = line_profile(&g, m, a, uses_g, r);
                                let w = grid.weight(q);
                                ia += w * field_a(r)[a] * p;
                                ib += w * field_b(r)[a] * p;
                            }
                            acc += line_weight(m) * ia * ib;
                        }
                    }
                }
            }
            acc
        };

        // Electric family against photonic modes: diagonal gives (V/8)^2,
        // off-diagonal (other branch or other index) vanishes.
        let n = ModeIndex::new(2, 1, 1).unwrap();
        let np = ModeIndex::new(1, 1, 2).unwrap();
        let u11 = |r: Vec3| mode_function(&g, n, 1, ModeKind::U, r).unwrap();
        let u12 = |r: Vec3| mode_function(&g, n, 2, ModeKind::U, r).unwrap();
        let u21 = |r: Vec3| mode_function(&g, np, 1, ModeKind::U, r).unwrap();
        assert_abs_diff_eq!(closure(&u11, &u11, false, true), half * half, epsilon = 1e-8);
        assert_abs_diff_eq!(closure(&u11, &u12, false, true), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(closure(&u11, &u21, false, true), 0.0, epsilon = 1e-8);

        // Magnetic family against curl-type modes.
        let s11 = |r: Vec3| mode_function(&g, n, 1, ModeKind::S, r).unwrap();
        let s12 = |r: Vec3| mode_function(&g, n, 2, ModeKind::S, r).unwrap();
        assert_abs_diff_eq!(closure(&s11, &s11, true, true), half * half, epsilon = 1e-8);
        assert_abs_diff_eq!(closure(&s11, &s12, true, true), 0.0, epsilon = 1e-8);

        // A field constant along z is invisible to the all-positive family
        // but fully resolved once the weighted zero-index line is included:
        // the half-weight is exactly what restores (V/8) int |A|^2.
        let flat = |r: Vec3| [0.0, 0.0, r[0].sin() * r[1].sin()];
        let target = half * (PI / 2.0) * (PI / 2.0) * PI;
        assert_abs_diff_eq!(closure(&flat, &flat, false, false), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(closure(&flat, &flat, false, true), target, epsilon = 1e-8);
    }

    #[test]
    fn projection_fixes_mode_combinations() {
        let g = cube_pi();
        let cfg = ModeBasisConfig::new(3, 16).unwrap();
        let grid = QuadGrid::new(&g, cfg.quadrature_points);
        let n_a = ModeIndex::new(1, 1, 1).unwrap();
        let n_b = ModeIndex::new(2, 1, 3).unwrap();
        let field = GridField::sample(&grid, |r| {
            let ua = mode_function(&g, n_a, 1, ModeKind::U, r).unwrap();
            let ub = mode_function(&g, n_b, 2, ModeKind::U, r).unwrap();
            crate::math::add(scale(ua, 0.7), scale(ub, -1.3))
        });
        let projected = transverse_project(&field, &g, &cfg).unwrap();
        let mut worst = 0.0f64;
        for q in 0..grid.len() {
            worst = worst.max(norm(sub(projected.values[q], field.values[q])));
        }
        assert!(worst < 1e-10, "worst deviation {worst}");
    }

    #[test]
    fn projection_is_idempotent() {
        let g = CavityGeometry::new(1.0, 1.2, 0.9, 1.0).unwrap();
        let cfg = ModeBasisConfig::new(3, 20).unwrap();
        let grid = QuadGrid::new(&g, cfg.quadrature_points);
        // Arbitrary smooth field, not in the span.
        let field = GridField::sample(&grid, |r| {
            [
                (r[0] * 2.0).sin() * r[1],
                r[2] * r[0],
                (r[1] * 3.0).cos(),
            ]
        });
        let once = transverse_project(&field, &g, &cfg).unwrap();
        let twice = transverse_project(&once, &g, &cfg).unwrap();
        let mut worst = 0.0f64;
        for q in 0..grid.len() {
            worst = worst.max(norm(sub(once.values[q], twice.values[q])));
        }
        // Idempotence holds to the accuracy of the discrete Gram matrix,
        // which is quadrature-limited, not exact.
        assert!(worst < 1e-10, "projection drifted by {worst}");
    }

    #[test]
    fn projection_kills_gradients() {
        let g = cube_pi();
        let cfg = ModeBasisConfig::new(4, 14).unwrap();
        let grid = QuadGrid::new(&g, cfg.quadrature_points);
        let src = [1.9, 1.1, 2.4];
        let field = GridField::sample(&grid, |r| {
            if r == src {
                [0.0, 0.0, 0.0]
            } else {
                scalar_green_gradient(&g, r, src, &cfg).unwrap()
            }
        });
        let projected = transverse_project(&field, &g, &cfg).unwrap();
        let scale_ref = field
            .values
            .iter()
            .map(|v| norm(*v))
            .fold(0.0f64, |a, b| a.max(b));
        let worst = projected
            .values
            .iter()
            .map(|v| norm(*v))
            .fold(0.0f64, |a, b| a.max(b));
        assert!(
            worst < 1e-8 * scale_ref.max(1.0),
            "gradient survived projection: {worst} vs field scale {scale_ref}"
        );
    }

    #[test]
    fn projection_rejects_mismatched_grid() {
        let g = cube_pi();
        let cfg = ModeBasisConfig::new(2, 10).unwrap();
        let bad = GridField { points_per_axis: 8, values: alloc::vec![[0.0;3]; 512] };
        let err = transverse_project(&bad, &g, &cfg).unwrap_err();
        assert!(matches!(err, CoreError::GridMismatch { .. }));
    }

    #[test]
    fn mode_enumeration_is_sorted_and_respects_cutoff() {
        let g = CavityGeometry::new(1.0, 2.0, 3.0, 1.0).unwrap();
        let cfg = ModeBasisConfig::new(6, 8).unwrap();
        let cut = cfg.omega_cut(&g);
        let modes = cfg.modes_within_cutoff(&g);
        assert!(!modes.is_empty());
        for win in modes.windows(2) {
            assert!(win[0].1 <= win[1].1);
        }
        for (idx, w) in &modes {
            assert!(*w <= cut);
            assert!(idx.n.iter().all(|&c| c >= 1 && c <= cfg.n_max));
        }
        // The cutoff equals c pi n_max / max(L); the longest side admits
        // exactly n_max wavelengths along it.
        assert_abs_diff_eq!(cut, PI * 6.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn window_weights_are_sane() {
        let taper = TruncationWindow::CosineTaper { start_frac: 0.5 };
        assert_eq!(taper.weight(0.2, 1.0), 1.0);
        assert_abs_diff_eq!(taper.weight(0.75, 1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(taper.weight(1.0, 1.0), 0.0, epsilon = 1e-12);
        assert_eq!(taper.weight(1.1, 1.0), 0.0);
        let hard = TruncationWindow::Hard;
        assert_eq!(hard.weight(0.999, 1.0), 1.0);
        assert_eq!(hard.weight(1.001, 1.0), 0.0);

        let smooth = TruncationWindow::SmoothTaper { start_frac: 0.5 };
        assert_eq!(smooth.weight(0.4, 1.0), 1.0);
        assert_abs_diff_eq!(smooth.weight(0.75, 1.0), 0.5, epsilon = 1e-12);
        assert_eq!(smooth.weight(1.0, 1.0), 0.0);
        assert_eq!(smooth.weight(1.2, 1.0), 0.0);
        let mut prev = 1.0;
        for k in 1..200 {
            let w = smooth.weight(0.5 + 0.5 * k as f64 / 200.0, 1.0);
            assert!(w <= prev && (0.0..=1.0).contains(&w));
            prev = w;
        }
    }
}
