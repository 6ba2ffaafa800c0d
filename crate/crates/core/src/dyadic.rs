//! Dyadic Green functions at the atom's position: the vacuum pole sum and
//! the medium dyadic assembled from factorized single-mode tensor sums with
//! exact region integrals. A brute-force double-sum reference implementation
//! serves as the anti-bug oracle for the factorized assembly.

use crate::cavity::{
    trig_products, CavityGeometry, ModeBasisConfig, ModeIndex, ModeKind, Units,
};
use crate::coupling::{axis_integral, homogeneous_w, overlap_w, MediumLayout, Trig};
use crate::material::{FreqArg, Susceptibility};
use crate::math::{unit, Mat3, Real, Vec3, C64, ZERO_MAT3};
use crate::{CoreError, Result};
use alloc::vec::Vec;

/// Which denominator enters the resummed mode propagator of the medium
/// dyadic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorMode {
    /// Volume-fraction W, mode independent. The production choice.
    Homogeneous,
    /// Exact diagonal coupling matrix element, averaged over the two
    /// polarization branches (the factorized tensor form requires a
    /// branch-independent denominator). Exists to quantify the error of the
    /// homogeneous approximation.
    ModeDiagonal,
}

/// Assembly options shared by the dyadic evaluations.
#[derive(Debug, Clone, Copy)]
pub struct GreenConfig {
    pub units: Units,
    /// Squared atomic coupling charge multiplying both dyadics. Natural
    /// units keep it at 1.
    pub coupling_e2: f64,
    pub denominator: DenominatorMode,
    /// Minimum allowed distance between the evaluation argument and any
    /// mode-propagator pole.
    pub pole_tol: f64,
    /// Optional frequency band restricting which modes enter the sums
    /// (used by band-limited diagnostics); `None` means every mode within
    /// the truncation cutoff.
    pub band: Option<(f64, f64)>,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            units: Units::default(),
            coupling_e2: 1.0,
            denominator: DenominatorMode::Homogeneous,
            pole_tol: 1e-6,
            band: None,
        }
    }
}

/// Truncation provenance attached to every dyadic result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationMeta {
    pub omega_cut: f64,
    pub modes_used: usize,
    pub band: Option<(f64, f64)>,
}

/// A 3x3 complex dyadic along with how it was truncated.
#[derive(Debug, Clone)]
pub struct DyadicValue {
    pub matrix: Mat3,
    pub meta: TruncationMeta,
}

struct WindowedMode {
    n: ModeIndex,
    omega: f64,
    win: f64,
}

fn windowed_modes(
    geom: &CavityGeometry,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
) -> Vec<WindowedMode> {
    let cut = basis.omega_cut(geom);
    basis
        .modes_within_cutoff(geom)
        .into_iter()
        .filter(|(_, omega)| match green.band {
            Some((lo, hi)) => *omega >= lo && *omega <= hi,
            None => true,
        })
        .map(|(n, omega)| WindowedMode { n, omega, win: basis.window.weight(omega, cut) })
        .filter(|m| m.win > 0.0)
        .collect()
}

/// Vacuum dyadic: the windowed sum of mode poles
/// `(4 e^2 / eps0 V) sum_{n,lambda} w_n u(R) (x) u(R) / (w - w_n)`.
///
/// Defined off the real axis only; in a lossless closed cavity the real-axis
/// limit is a sum of poles and is not taken here.
pub fn g0_dyadic(
    geom: &CavityGeometry,
    atom_r: Vec3,
    w: C64,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
) -> Result<DyadicValue> {
    basis.validate()?;
    if !geom.contains(atom_r) {
        return Err(CoreError::OutsideCavity);
    }
    if w.im == 0.0 {
        return Err(CoreError::InvalidInput(
            "vacuum dyadic requires an argument off the real axis".into(),
        ));
    }
    let modes = windowed_modes(geom, basis, green);
    let pref = 4.0 * green.coupling_e2 / (green.units.eps0 * geom.volume());
    let mut acc = ZERO_MAT3;
    for m in &modes {
        if (w - m.omega).norm() < green.pole_tol {
            return Err(CoreError::PoleProximity { omega: m.omega });
        }
        let scalar = C64::new(pref * m.win * m.omega, 0.0) / (w - m.omega);
        let (k_hat, f_r) = mode_geometry(geom, m.n, atom_r);
        for a in 0..3 {
            for b in 0..3 {
                let proj = krondelta(a, b) - k_hat[a] * k_hat[b];
                acc[a][b] += scalar * (proj * f_r[a] * f_r[b]);
            }
        }
    }
    Ok(DyadicValue {
        matrix: acc,
        meta: TruncationMeta {
            omega_cut: basis.omega_cut(geom),
            modes_used: modes.len(),
            band: green.band,
        },
    })
}

#[inline]
fn krondelta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn mode_geometry(geom: &CavityGeometry, n: ModeIndex, r: Vec3) -> (Vec3, [f64; 3]) {
    let k_hat = unit(geom.wave_vector(n));
    let (f, _) = trig_products(geom, n, r);
    (k_hat, f)
}

/// Electric-family numerator coefficients `(delta - k k)_{a g} f_a(n, R)`.
fn electric_coeffs(k_hat: Vec3, f_r: [f64; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for g in 0..3 {
            out[a][g] = (krondelta(a, g) - k_hat[a] * k_hat[g]) * f_r[a];
        }
    }
    out
}

/// Magnetic-family numerator coefficients
/// `sum_mu eps_{g mu a} k_mu f_a(n, R)`.
fn magnetic_coeffs(k_hat: Vec3, f_r: [f64; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for g in 0..3 {
            let mut e = 0.0;
            for mu in 0..3 {
                e += levi_civita(g, mu, a) * k_hat[mu];
            }
            out[a][g] = e * f_r[a];
        }
    }
    out
}

/// Resummed and bare mode propagator factors `win w_n / (w - w_n (1 + W))`
/// and `win w_n / (w - w_n)`, with pole guards.
///
/// `precomputed_homog` short-circuits the homogeneous correction when the
/// caller already holds the per-region Z values.
fn propagators(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    arg: FreqArg,
    modes: &[WindowedMode],
    basis: &ModeBasisConfig,
    green: &GreenConfig,
    precomputed_homog: Option<C64>,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let w = arg.value();
    let mut eta = Vec::with_capacity(modes.len());
    let mut zeta = Vec::with_capacity(modes.len());
    let homog = match green.denominator {
        DenominatorMode::Homogeneous => Some(match precomputed_homog {
            Some(h) => h,
            None => homogeneous_w(geom, layout, arg)?,
        }),
        DenominatorMode::ModeDiagonal => None,
    };
    for m in modes {
        let w_corr = match homog {
            Some(h) => h,
            None => {
                (overlap_w(geom, layout, m.n, 1, m.n, 1, arg, basis)?
                    + overlap_w(geom, layout, m.n, 2, m.n, 2, arg, basis)?)
                    * 0.5
            }
        };
        let den_eta = w - m.omega * (C64::new(1.0, 0.0) + w_corr);
        let den_zeta = w - m.omega;
        if den_eta.norm() < green.pole_tol || den_zeta.norm() < green.pole_tol {
            return Err(CoreError::PoleProximity { omega: m.omega });
        }
        eta.push(C64::new(m.win * m.omega, 0.0) / den_eta);
        zeta.push(C64::new(m.win * m.omega, 0.0) / den_zeta);
    }
    Ok((eta, zeta))
}

/// Which tensor family `eta_zeta` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Electric,
    Magnetic,
}

/// The factorized single-mode tensor sums at a pair of points: the resummed
/// `eta` (medium-corrected denominator) and bare `zeta` 3x3 tensors.
pub fn eta_zeta(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom_r: Vec3,
    r: Vec3,
    arg: FreqArg,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
    kind: TensorKind,
) -> Result<(Mat3, Mat3)> {
    basis.validate()?;
    arg.validate()?;
    if !geom.contains(atom_r) || !geom.contains(r) {
        return Err(CoreError::OutsideCavity);
    }
    if atom_r == r {
        return Err(CoreError::CoincidentPoints);
    }
    let modes = windowed_modes(geom, basis, green);
    let (eta_prop, zeta_prop) = propagators(geom, layout, arg, &modes, basis, green, None)?;

    let pref = 4.0 / geom.volume();
    let mut eta_mat = ZERO_MAT3;
    let mut zeta_mat = ZERO_MAT3;
    for (i, m) in modes.iter().enumerate() {
        let (k_hat, f_big) = mode_geometry(geom, m.n, atom_r);
        let coeffs = match kind {
            TensorKind::Electric => electric_coeffs(k_hat, f_big),
            TensorKind::Magnetic => magnetic_coeffs(k_hat, f_big),
        };
        let (f_small, g_small) = trig_products(geom, m.n, r);
        let profile = match kind {
            TensorKind::Electric => f_small,
            TensorKind::Magnetic => g_small,
        };
        for a in 0..3 {
            for g in 0..3 {
                let shape = pref * coeffs[a][g] * profile[g];
                eta_mat[a][g] += eta_prop[i] * shape;
                zeta_mat[a][g] += zeta_prop[i] * shape;
            }
        }
    }
    Ok((eta_mat, zeta_mat))
}

/// Per-axis closed-form region integrals of cosine-cosine and sine-sine
/// products for every photonic index pair, cached per region.
struct AxisTables {
    /// `cc[axis][na-1][nb-1]`, indices 1..=n_max.
    cc: [Vec<Vec<f64>>; 3],
    ss: [Vec<Vec<f64>>; 3],
    n_max: usize,
}

impl AxisTables {
    fn build(geom: &CavityGeometry, lo: Vec3, hi: Vec3, n_max: usize) -> AxisTables {
        let mut cc: [Vec<Vec<f64>>; 3] = Default::default();
        let mut ss: [Vec<Vec<f64>>; 3] = Default::default();
        for axis in 0..3 {
            let l = geom.side(axis);
            let mut cc_ax = Vec::with_capacity(n_max);
            let mut ss_ax = Vec::with_capacity(n_max);
            for na in 1..=n_max {
                let mut cc_row = Vec::with_capacity(n_max);
                let mut ss_row = Vec::with_capacity(n_max);
                for nb in 1..=n_max {
                    cc_row.push(axis_integral(
                        Trig::Cos,
                        na as u32,
                        Trig::Cos,
                        nb as u32,
                        l,
                        lo[axis],
                        hi[axis],
                    ));
                    ss_row.push(axis_integral(
                        Trig::Sin,
                        na as u32,
                        Trig::Sin,
                        nb as u32,
                        l,
                        lo[axis],
                        hi[axis],
                    ));
                }
                cc_ax.push(cc_row);
                ss_ax.push(ss_row);
            }
            cc[axis] = cc_ax;
            ss[axis] = ss_ax;
        }
        AxisTables { cc, ss, n_max }
    }

    /// `int_region f_g(n_a, r) f_g(n_b, r)`: cosine on the component's own
    /// axis, sines elsewhere.
    #[inline]
    fn f_product(&self, na: [u32; 3], nb: [u32; 3], g: usize) -> f64 {
        debug_assert!(na.iter().chain(&nb).all(|&x| x >= 1 && x as usize <= self.n_max));
        let mut p = 1.0;
        for axis in 0..3 {
            let (ia, ib) = (na[axis] as usize - 1, nb[axis] as usize - 1);
            p *= if axis == g { self.cc[axis][ia][ib] } else { self.ss[axis][ia][ib] };
        }
        p
    }

    /// `int_region g_g(n_a, r) g_g(n_b, r)`: the complementary pattern.
    #[inline]
    fn g_product(&self, na: [u32; 3], nb: [u32; 3], g: usize) -> f64 {
        let mut p = 1.0;
        for axis in 0..3 {
            let (ia, ib) = (na[axis] as usize - 1, nb[axis] as usize - 1);
            p *= if axis == g { self.ss[axis][ia][ib] } else { self.cc[axis][ia][ib] };
        }
        p
    }
}

/// Medium dyadic via the factorized tensor assembly: region integrals of
/// `sum_g [Z_e eta^e zeta^e + Z_m eta^m zeta^m]` collapse to products of
/// exact per-axis trig integrals, never touching the raw double sum.
pub fn g_dyadic(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom_r: Vec3,
    arg: FreqArg,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
) -> Result<DyadicValue> {
    basis.validate()?;
    arg.validate()?;
    if !geom.contains(atom_r) {
        return Err(CoreError::OutsideCavity);
    }
    let modes = windowed_modes(geom, basis, green);
    let meta = TruncationMeta {
        omega_cut: basis.omega_cut(geom),
        modes_used: modes.len(),
        band: green.band,
    };
    if layout.is_vacuum() || modes.is_empty() {
        return Ok(DyadicValue { matrix: ZERO_MAT3, meta });
    }
    let v = geom.volume();

    // One Z evaluation per distinct susceptibility; layouts carved from a
    // single medium share the result across regions. The volume-weighted
    // total doubles as the homogeneous denominator correction.
    let mut region_z = Vec::with_capacity(layout.regions().len());
    let mut homog = C64::new(0.0, 0.0);
    {
        let mut cache: Vec<(&Susceptibility, C64)> = Vec::new();
        for region in layout.regions() {
            let mut pair = [C64::new(0.0, 0.0); 2];
            for (slot, s) in [&region.medium.electric, &region.medium.magnetic]
                .into_iter()
                .enumerate()
            {
                pair[slot] = match cache.iter().find(|(k, _)| *k == s) {
                    Some((_, value)) => *value,
                    None => {
                        let value = s.z_function(arg)?;
                        cache.push((s, value));
                        value
                    }
                };
            }
            homog += (pair[0] + pair[1]) * (region.bounds.volume() / v);
            region_z.push((pair[0], pair[1]));
        }
    }
    let (eta_prop, zeta_prop) =
        propagators(geom, layout, arg, &modes, basis, green, Some(homog))?;

    // Mode-shape coefficients at the atom, shared by every region.
    let mut e_coeffs = Vec::with_capacity(modes.len());
    let mut m_coeffs = Vec::with_capacity(modes.len());
    for m in &modes {
        let (k_hat, f_big) = mode_geometry(geom, m.n, atom_r);
        e_coeffs.push(electric_coeffs(k_hat, f_big));
        m_coeffs.push(magnetic_coeffs(k_hat, f_big));
    }

    let pref = 32.0 * green.coupling_e2 / (green.units.eps0 * v * v);
    let zero = C64::new(0.0, 0.0);
    let mut acc = ZERO_MAT3;
    for (region, &(z_e, z_m)) in layout.regions().iter().zip(&region_z) {
        if z_e == zero && z_m == zero {
            continue;
        }
        let tables = AxisTables::build(
            geom,
            region.bounds.lo(),
            region.bounds.hi(),
            basis.n_max as usize,
        );
        let mut region_sum = ZERO_MAT3;
        for i in 0..modes.len() {
            for j in 0..modes.len() {
                let pp = eta_prop[i] * zeta_prop[j];
                for g in 0..3 {
                    let mut weight = zero;
                    if z_e != zero {
                        weight += z_e * tables.f_product(modes[i].n.n, modes[j].n.n, g);
                    }
                    if z_m != zero {
                        let mg = tables.g_product(modes[i].n.n, modes[j].n.n, g);
                        // Shared scalar below multiplies the electric
                        // coefficient pair; fold the family ratio in here.
                        if mg != 0.0 {
                            for a in 0..3 {
                                for b in 0..3 {
                                    region_sum[a][b] += pp
                                        * (z_m
                                            * (mg
                                                * m_coeffs[i][a][g]
                                                * m_coeffs[j][b][g]));
                                }
                            }
                        }
                    }
                    if weight != zero {
                        for a in 0..3 {
                            for b in 0..3 {
                                region_sum[a][b] += pp
                                    * weight
                                    * (e_coeffs[i][a][g] * e_coeffs[j][b][g]);
                            }
                        }
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                acc[a][b] += region_sum[a][b] * pref;
            }
        }
    }
    Ok(DyadicValue { matrix: acc, meta })
}

/// Literal double-sum assembly of the medium dyadic: every photonic mode
/// pair weighted by its exact coupling matrix element. Quadratically more
/// expensive in matrix elements than `g_dyadic`; exists as its oracle.
pub fn g_dyadic_reference(
    geom: &CavityGeometry,
    layout: &MediumLayout,
    atom_r: Vec3,
    arg: FreqArg,
    basis: &ModeBasisConfig,
    green: &GreenConfig,
) -> Result<DyadicValue> {
    use crate::cavity::mode_function_with;

    basis.validate()?;
    arg.validate()?;
    if !geom.contains(atom_r) {
        return Err(CoreError::OutsideCavity);
    }
    let modes = windowed_modes(geom, basis, green);
    let meta = TruncationMeta {
        omega_cut: basis.omega_cut(geom),
        modes_used: modes.len(),
        band: green.band,
    };
    if layout.is_vacuum() || modes.is_empty() {
        return Ok(DyadicValue { matrix: ZERO_MAT3, meta });
    }
    let (eta_prop, zeta_prop) = propagators(geom, layout, arg, &modes, basis, green, None)?;

    let mut acc = ZERO_MAT3;
    let pref = 4.0 * green.coupling_e2 / (green.units.eps0 * geom.volume());
    for (i, mi) in modes.iter().enumerate() {
        for (j, mj) in modes.iter().enumerate() {
            // The cached factors carry win*omega over each denominator, so
            // dividing them back out leaves the bare reciprocals.
            let omega_fac = Real::sqrt(mi.omega * mi.omega * mi.omega * mj.omega);
            for li in 1u8..=2 {
                for lj in 1u8..=2 {
                    let w_ij = overlap_w(geom, layout, mi.n, li, mj.n, lj, arg, basis)?;
                    if w_ij == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let ui = mode_function_with(geom, mi.n, li, ModeKind::U, atom_r, basis.convention)?;
                    let uj = mode_function_with(geom, mj.n, lj, ModeKind::U, atom_r, basis.convention)?;
                    let scalar = w_ij
                        * omega_fac
                        * (mi.win * mj.win)
                        * (eta_prop[i] / (mi.win * mi.omega))
                        * (zeta_prop[j] / (mj.win * mj.omega))
                        * pref;
                    for a in 0..3 {
                        for b in 0..3 {
                            acc[a][b] += scalar * (ui[a] * uj[b]);
                        }
                    }
                }
            }
        }
    }
    Ok(DyadicValue { matrix: acc, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::{mode_frequency, PolarizationConvention, TruncationWindow};
    use crate::coupling::{Box3, Region};
    use crate::material::{Susceptibility, SusceptibilityPair};
    use crate::math::{mat3_max_abs, mat3_max_diff, I, PI};
    use approx::assert_abs_diff_eq;

    fn cube() -> CavityGeometry {
        CavityGeometry::cube(PI, 1.0).unwrap()
    }

    fn hard_cfg(n_max: u32) -> ModeBasisConfig {
        let mut cfg = ModeBasisConfig::new(n_max, 16).unwrap();
        cfg.window = TruncationWindow::Hard;
        cfg
    }

    fn half_box_layout(g: &CavityGeometry, pair: SusceptibilityPair) -> MediumLayout {
        let mut hi = g.sides();
        hi[2] *= 0.5;
        MediumLayout::new(
            g,
            alloc::vec![Region { bounds: Box3::new([0.0; 3], hi).unwrap(), medium: pair }],
            Box3::point([0.3, 0.3, 0.8 * g.side(2)]),
        )
        .unwrap()
    }

    fn lossy_pair() -> SusceptibilityPair {
        SusceptibilityPair::new(
            Susceptibility::lorentz(0.8, 2.0, 0.4).unwrap(),
            Susceptibility::lorentz(0.5, 2.5, 0.6).unwrap(),
        )
    }

    #[test]
    fn g0_is_symmetric_and_metadata_populated() {
        let g = cube();
        let cfg = ModeBasisConfig::new(5, 12).unwrap();
        let out = g0_dyadic(&g, [1.1, 0.8, 2.0], C64::new(1.3, 0.9), &cfg, &GreenConfig::default())
            .unwrap();
        let mut max_asym = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                max_asym = max_asym.max((out.matrix[a][b] - out.matrix[b][a]).norm());
            }
        }
        assert!(max_asym <= 1e-12, "asymmetry {max_asym}");
        assert!(out.meta.modes_used > 0);
        assert_abs_diff_eq!(out.meta.omega_cut, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn g0_decays_on_the_imaginary_axis() {
        let g = cube();
        let cfg = ModeBasisConfig::new(4, 12).unwrap();
        let r = [1.0, 1.2, 0.9];
        let hi = g0_dyadic(&g, r, C64::new(0.0, 1.0e3), &cfg, &GreenConfig::default()).unwrap();
        let hi2 = g0_dyadic(&g, r, C64::new(0.0, 2.0e3), &cfg, &GreenConfig::default()).unwrap();
        let ratio = mat3_max_abs(&hi.matrix) / mat3_max_abs(&hi2.matrix);
        assert!((ratio - 2.0).abs() < 0.05, "1/eta decay violated, ratio {ratio}");
    }

    #[test]
    fn g0_residue_matches_pole_weight() {
        let g = cube();
        let cfg = hard_cfg(4);
        let green = GreenConfig::default();
        let r = [0.9, 1.3, 1.7];
        let n = ModeIndex::new(1, 1, 1).unwrap();
        let omega = mode_frequency(&g, n); // sqrt(3), isolated from sqrt(6)

        // Trapezoid contour integral (1/2 pi i) oint G dw around the pole.
        let n_pts = 64;
        let radius = 0.25;
        let mut res = ZERO_MAT3;
        for k in 0..n_pts {
            // Half-step offset keeps every node off the real axis.
            let th = 2.0 * PI * (k as f64 + 0.5) / n_pts as f64;
            let w = C64::new(omega + radius * th.cos(), radius * th.sin());
            let gm = g0_dyadic(&g, r, w, &cfg, &green).unwrap().matrix;
            // dw = i radius e^{i th} d th; the 1/(2 pi i) cancels the i.
            let fac = C64::new(th.cos(), th.sin()) * (radius / n_pts as f64);
            for a in 0..3 {
                for b in 0..3 {
                    res[a][b] += gm[a][b] * fac;
                }
            }
        }

        // Independent residue: the pole weight of the lone sqrt(3) mode.
        let mut expected = ZERO_MAT3;
        let pref = 4.0 / (g.volume()) * omega;
        let (k_hat, f_r) = mode_geometry(&g, n, r);
        for a in 0..3 {
            for b in 0..3 {
                expected[a][b] =
                    C64::new(pref * (krondelta(a, b) - k_hat[a] * k_hat[b]) * f_r[a] * f_r[b], 0.0);
            }
        }
        assert!(
            mat3_max_diff(&res, &expected) <= 1e-8,
            "residue mismatch {}",
            mat3_max_diff(&res, &expected)
        );
    }

    #[test]
    fn g0_rejects_real_axis_and_pole_grazing() {
        let g = cube();
        let cfg = ModeBasisConfig::new(4, 12).unwrap();
        let green = GreenConfig::default();
        let r = [1.0, 1.0, 1.0];
        assert!(matches!(
            g0_dyadic(&g, r, C64::new(1.5, 0.0), &cfg, &green),
            Err(CoreError::InvalidInput(_))
        ));
        let omega = mode_frequency(&g, ModeIndex::new(1, 1, 1).unwrap());
        assert!(matches!(
            g0_dyadic(&g, r, C64::new(omega, 1e-9), &cfg, &green),
            Err(CoreError::PoleProximity { .. })
        ));
    }

    #[test]
    fn lambda_sums_collapse_to_tensor_coefficients() {
        use crate::cavity::mode_function;
        let g = CavityGeometry::new(PI, 1.2 * PI, 0.9 * PI, 1.0).unwrap();
        let big_r = [0.7, 1.9, 1.1];
        let r = [2.1, 0.5, 2.0];
        for n in [[1u32, 1, 1], [2, 1, 3], [1, 3, 2]] {
            let idx = ModeIndex { n };
            let k_hat = unit(g.wave_vector(idx));
            let (f_big, _) = trig_products(&g, idx, big_r);
            let (f_sm, g_sm) = trig_products(&g, idx, r);

            let u1_r = mode_function(&g, idx, 1, ModeKind::U, big_r).unwrap();
            let u2_r = mode_function(&g, idx, 2, ModeKind::U, big_r).unwrap();
            let u1_s = mode_function(&g, idx, 1, ModeKind::U, r).unwrap();
            let u2_s = mode_function(&g, idx, 2, ModeKind::U, r).unwrap();
            let s1 = mode_function(&g, idx, 1, ModeKind::S, r).unwrap();
            let s2 = mode_function(&g, idx, 2, ModeKind::S, r).unwrap();

            for i in 0..3 {
                for j in 0..3 {
                    let lhs_e = u1_r[i] * u1_s[j] + u2_r[i] * u2_s[j];
                    let rhs_e = (krondelta(i, j) - k_hat[i] * k_hat[j]) * f_big[i] * f_sm[j];
                    assert_abs_diff_eq!(lhs_e, rhs_e, epsilon = 1e-12);

                    let lhs_m = u1_r[i] * s1[j] + u2_r[i] * s2[j];
                    let mut rhs_m = 0.0;
                    for mu in 0..3 {
                        rhs_m += levi_civita(j, mu, i) * k_hat[mu];
                    }
                    rhs_m *= f_big[i] * g_sm[j];
                    assert_abs_diff_eq!(lhs_m, rhs_m, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn eta_equals_zeta_without_medium() {
        let g = cube();
        let layout = MediumLayout::empty(&g);
        let cfg = ModeBasisConfig::new(4, 12).unwrap();
        let (eta, zeta) = eta_zeta(
            &g,
            &layout,
            [1.0, 1.5, 2.0],
            [2.0, 0.7, 1.0],
            FreqArg::Complex(C64::new(1.0, 0.8)),
            &cfg,
            &GreenConfig::default(),
            TensorKind::Electric,
        )
        .unwrap();
        assert_abs_diff_eq!(mat3_max_diff(&eta, &zeta), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eta_zeta_refinement_converges() {
        let g = cube();
        let layout = half_box_layout(&g, lossy_pair());
        let big_r = [0.45, 2.6, 0.8];
        let r = [2.75, 0.55, 2.6]; // |R - r| well above min(L)/10
        let arg = FreqArg::Complex(C64::new(1.2, 0.9));
        let green = GreenConfig::default();

        // These sums converge only as fast as the window is smooth; the
        // flat-top C-infinity taper is the configuration that makes the
        // refinement contract meaningful.
        let sized = |n_max| {
            let mut cfg = ModeBasisConfig::new(n_max, 12).unwrap();
            cfg.window = TruncationWindow::SmoothTaper { start_frac: 0.2 };
            cfg
        };
        let coarse = sized(24);
        let fine = sized(36); // omega_cut grows 1.5x
        for kind in [TensorKind::Electric, TensorKind::Magnetic] {
            let (ec, zc) = eta_zeta(&g, &layout, big_r, r, arg, &coarse, &green, kind).unwrap();
            let (ef, zf) = eta_zeta(&g, &layout, big_r, r, arg, &fine, &green, kind).unwrap();
            let d_eta = mat3_max_diff(&ec, &ef);
            let d_zeta = mat3_max_diff(&zc, &zf);
            assert!(d_eta < 1e-4, "eta refinement delta {d_eta} for {kind:?}");
            assert!(d_zeta < 1e-4, "zeta refinement delta {d_zeta} for {kind:?}");
        }
    }

    #[test]
    fn eta_zeta_rejects_coincident_points() {
        let g = cube();
        let layout = MediumLayout::empty(&g);
        let cfg = ModeBasisConfig::new(3, 8).unwrap();
        let p = [1.0, 1.0, 1.0];
        assert!(matches!(
            eta_zeta(
                &g,
                &layout,
                p,
                p,
                FreqArg::Complex(C64::new(1.0, 1.0)),
                &cfg,
                &GreenConfig::default(),
                TensorKind::Electric,
            ),
            Err(CoreError::CoincidentPoints)
        ));
    }

    #[test]
    fn zero_susceptibility_gives_zero_dyadic() {
        let g = cube();
        let layout = half_box_layout(&g, SusceptibilityPair::vacuum());
        let cfg = ModeBasisConfig::new(4, 12).unwrap();
        let out = g_dyadic(
            &g,
            &layout,
            [1.0, 1.5, 2.2],
            FreqArg::Complex(C64::new(1.1, 0.7)),
            &cfg,
            &GreenConfig::default(),
        )
        .unwrap();
        assert_eq!(mat3_max_abs(&out.matrix), 0.0);
    }

    #[test]
    fn factorized_matches_double_sum_oracle() {
        let g = cube();
        let layout = half_box_layout(&g, lossy_pair());
        let cfg = hard_cfg(3); // 8 modes within the cutoff ball
        let green = GreenConfig::default();
        let atom = [1.1, 1.7, 2.3];

        for arg in [
            FreqArg::Complex(C64::new(1.4, 0.8)),
            FreqArg::Complex(C64::new(0.9, -0.6)),
            FreqArg::Boundary(2.1),
        ] {
            let fast = g_dyadic(&g, &layout, atom, arg, &cfg, &green).unwrap();
            let slow = g_dyadic_reference(&g, &layout, atom, arg, &cfg, &green).unwrap();
            let scale = mat3_max_abs(&slow.matrix).max(1e-30);
            let diff = mat3_max_diff(&fast.matrix, &slow.matrix) / scale;
            assert!(diff <= 1e-6, "factorized vs double sum relative diff {diff}");
            assert!(fast.meta.modes_used <= 20);
        }
    }

    #[test]
    fn factorized_matches_double_sum_with_mode_diagonal_denominator() {
        let g = cube();
        let layout = half_box_layout(&g, lossy_pair());
        let cfg = hard_cfg(3);
        let green = GreenConfig { denominator: DenominatorMode::ModeDiagonal, ..Default::default() };
        let atom = [1.1, 1.7, 2.3];
        let arg = FreqArg::Complex(C64::new(1.4, 0.8));
        let fast = g_dyadic(&g, &layout, atom, arg, &cfg, &green).unwrap();
        let slow = g_dyadic_reference(&g, &layout, atom, arg, &cfg, &green).unwrap();
        let scale = mat3_max_abs(&slow.matrix).max(1e-30);
        assert!(mat3_max_diff(&fast.matrix, &slow.matrix) / scale <= 1e-6);

        // For the half box the homogeneous and exact diagonals coincide, so
        // the two denominator modes agree there.
        let hom = g_dyadic(&g, &layout, atom, arg, &cfg, &GreenConfig::default()).unwrap();
        assert!(mat3_max_diff(&fast.matrix, &hom.matrix) / scale <= 1e-10);
    }

    #[test]
    fn dyadic_is_analytic_in_the_laplace_half_plane() {
        let g = cube();
        let layout = half_box_layout(&g, lossy_pair());
        let cfg = hard_cfg(3);
        let green = GreenConfig::default();
        let atom = [1.1, 1.7, 2.3];

        // Mean-value check on a rho-circle: w = i rho, rho = 2.5 + 1.5 e^{i th}.
        let center = C64::new(2.5, 0.0);
        let radius = 1.5;
        let n_pts = 48;
        let mut avg = ZERO_MAT3;
        for k in 0..n_pts {
            let th = 2.0 * PI * k as f64 / n_pts as f64;
            let rho = center + radius * C64::new(th.cos(), th.sin());
            let w = I * rho;
            let gm = g_dyadic(&g, &layout, atom, FreqArg::Complex(w), &cfg, &green)
                .unwrap()
                .matrix;
            for a in 0..3 {
                for b in 0..3 {
                    avg[a][b] += gm[a][b] / n_pts as f64;
                }
            }
        }
        let at_center = g_dyadic(&g, &layout, atom, FreqArg::Complex(I * center), &cfg, &green)
            .unwrap()
            .matrix;
        let diff = mat3_max_diff(&avg, &at_center);
        assert!(diff <= 1e-6, "contour mean deviates from center value by {diff}");
    }

    #[test]
    fn weak_medium_scales_linearly_in_oscillator_strength() {
        let g = cube();
        let cfg = ModeBasisConfig::new(4, 12).unwrap();
        let green = GreenConfig::default();
        let atom = [1.3, 1.1, 2.4];
        let arg = FreqArg::Complex(C64::new(1.5, 0.4));
        let make = |wp2: f64| {
            half_box_layout(
                &g,
                SusceptibilityPair::new(
                    Susceptibility::lorentz(wp2, 2.0, 0.4).unwrap(),
                    Susceptibility::zero(),
                ),
            )
        };
        // Peak |chi| = wp2 / (gamma omega_t) = 1e-3 at the base strength.
        let base = g_dyadic(&g, &make(8e-4), atom, arg, &cfg, &green).unwrap();
        let twice = g_dyadic(&g, &make(1.6e-3), atom, arg, &cfg, &green).unwrap();
        let floor = 1e-6 * mat3_max_abs(&base.matrix);
        for a in 0..3 {
            for b in 0..3 {
                let x = base.matrix[a][b];
                if x.norm() < floor {
                    continue;
                }
                let ratio = (twice.matrix[a][b] / x).re;
                assert!((ratio - 2.0).abs() < 0.005, "entry ({a},{b}) ratio {ratio}");
            }
        }
    }

    #[test]
    fn polarization_convention_leaves_dyadics_unchanged() {
        let g = cube();
        let layout = half_box_layout(&g, lossy_pair());
        let green = GreenConfig::default();
        let atom = [1.3, 1.1, 2.4];
        let arg = FreqArg::Complex(C64::new(1.5, 0.7));

        let mut plain = ModeBasisConfig::new(4, 12).unwrap();
        plain.window = TruncationWindow::Hard;
        let mut rotated = plain;
        rotated.convention = PolarizationConvention::Rotated { angle: 0.7 };

        let a = g_dyadic(&g, &layout, atom, arg, &plain, &green).unwrap();
        let b = g_dyadic(&g, &layout, atom, arg, &rotated, &green).unwrap();
        assert!(mat3_max_diff(&a.matrix, &b.matrix) <= 1e-8);

        let a0 = g0_dyadic(&g, atom, C64::new(1.5, 0.7), &plain, &green).unwrap();
        let b0 = g0_dyadic(&g, atom, C64::new(1.5, 0.7), &rotated, &green).unwrap();
        assert!(mat3_max_diff(&a0.matrix, &b0.matrix) <= 1e-8);
    }

    #[test]
    fn band_restriction_selects_modes() {
        let g = cube();
        let cfg = hard_cfg(4);
        let mut green = GreenConfig::default();
        // A band holding no cavity eigenfrequency leaves nothing to sum.
        green.band = Some((0.1, 0.5));
        let out = g0_dyadic(&g, [1.0, 1.3, 0.9], C64::new(0.3, 0.2), &cfg, &green).unwrap();
        assert_eq!(out.meta.modes_used, 0);
        assert_eq!(mat3_max_abs(&out.matrix), 0.0);

        // Widening the band to include sqrt(3) picks up exactly one mode.
        green.band = Some((1.6, 1.8));
        let out = g0_dyadic(&g, [1.0, 1.3, 0.9], C64::new(0.3, 0.2), &cfg, &green).unwrap();
        assert_eq!(out.meta.modes_used, 1);
    }
}
