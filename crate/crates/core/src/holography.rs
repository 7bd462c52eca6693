//! Bulk geometry side: warped metrics, the massive scalar's radial equation,
//! geodesic lengths and the propagator built from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::flow::{log_derivative, FlowCurve};
use crate::{Error, Result};

/// Planar AdS₃ or the static BTZ black hole, `ds² = (dx² + dz²/f(z))/z²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Geometry {
    PureAds,
    Btz { zstar: f64 },
}

impl Geometry {
    pub fn btz(zstar: f64) -> Result<Self> {
        if !(zstar > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {zstar}")));
        }
        Ok(if zstar.is_infinite() { Geometry::PureAds } else { Geometry::Btz { zstar } })
    }

    /// Horizon position; infinite for pure AdS.
    pub fn zstar(&self) -> f64 {
        match *self {
            Geometry::PureAds => f64::INFINITY,
            Geometry::Btz { zstar } => zstar,
        }
    }

    /// Temperature, taken as `1/z*`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.zstar()
    }

    /// `ds²` for the displacement `(dx, dz)` at `(x, z)`.
    pub fn line_element(&self, _x: f64, z: f64, dx: f64, dz: f64) -> f64 {
        (dx * dx + dz * dz / emblackening(self, z)) / (z * z)
    }
}

/// `a(z) = 1/z`.
pub fn warp_factor(_geometry: &Geometry, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("warp factor needs z > 0, got {z}")));
    }
    Ok(1.0 / z)
}

/// `f(z) = 1 − (z/z*)²`, identically 1 for pure AdS.
pub fn emblackening(geometry: &Geometry, z: f64) -> f64 {
    match *geometry {
        Geometry::PureAds => 1.0,
        Geometry::Btz { zstar } => 1.0 - (z / zstar).powi(2),
    }
}

/// Largest relative mismatch of `ds²` under `(x, z, dx, dz) → e^u (x, z, dx, dz)`
/// over the given sample points.
pub fn rescaling_defect(geometry: &Geometry, points: &[(f64, f64, f64, f64)], u: f64) -> f64 {
    let s = u.exp();
    points
        .iter()
        .map(|&(x, z, dx, dz)| {
            let a = geometry.line_element(x, z, dx, dz);
            let b = geometry.line_element(x * s, z * s, dx * s, dz * s);
            ((a - b) / a).abs()
        })
        .fold(0.0, f64::max)
}

/// Scalar of mass² m² on the warped background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkField {
    pub mass_squared: f64,
    pub dimension: f64,
}

/// Lowest mass² with real dimensions.
pub const STABILITY_BOUND: f64 = -0.25;

/// Both roots `(Δ₊, Δ₋)` of `Δ(Δ+1) = m²`, the indicial equation of
/// `−z²Φ'' + m²Φ = 0` for `Φ = z^{−Δ}`.
pub fn dimension_from_mass(m2: f64) -> Result<(f64, f64)> {
    if !m2.is_finite() {
        return Err(Error::NonFinite("mass squared"));
    }
    if m2 < STABILITY_BOUND {
        return Err(Error::StabilityBound(m2));
    }
    let root = (1.0 + 4.0 * m2).sqrt();
    Ok(((root - 1.0) / 2.0, (-root - 1.0) / 2.0))
}

impl BulkField {
    /// Field with the larger root.
    pub fn new(m2: f64) -> Result<Self> {
        Ok(Self { mass_squared: m2, dimension: dimension_from_mass(m2)?.0 })
    }
}

/// `n` points from `z0` to `z1` with constant ratio.
pub fn geometric_grid(z0: f64, z1: f64, n: usize) -> Vec<f64> {
    let q = (z1 / z0).ln() / (n.max(2) - 1) as f64;
    (0..n).map(|k| z0 * (q * k as f64).exp()).collect()
}

/// `max_k |(−z²∂_z² + m²) z^{−Δ}| / z^{−Δ}` at interior grid points, using the
/// three-point second difference on the (possibly nonuniform) grid.
/// Neighbour differences are formed as `Φ_k · expm1(−Δ ln1p((z_j − z_k)/z_k))`,
/// the same difference free of cancellation.
pub fn radial_ode_residual(m2: f64, delta: f64, grid: &[f64]) -> Result<f64> {
    if grid.len() < 5 {
        return Err(Error::InsufficientData(format!("radial grid has {} points, need 5", grid.len())));
    }
    if grid.iter().any(|z| !(*z > 0.0)) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("radial grid must be positive and increasing".into()));
    }
    let mut worst = 0.0f64;
    for k in 1..grid.len() - 1 {
        let (zm, z, zp) = (grid[k - 1], grid[k], grid[k + 1]);
        let (hm, hp) = (z - zm, zp - z);
        // relative differences (Φ_{k±1} − Φ_k)/Φ_k
        let dp = (-delta * (hp / z).ln_1p()).exp_m1();
        let dm = (-delta * (-hm / z).ln_1p()).exp_m1();
        let second = 2.0 * (dp / hp + dm / hm) / (hp + hm);
        let r = (-z * z * second + m2).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `log[z* sinh(z/z*)]`; `log z` for infinite z*.
pub fn geodesic_closed_form(z: f64, zstar: f64) -> f64 {
    if zstar.is_infinite() {
        return z.ln();
    }
    log_sinh_scale(z, zstar)
}

fn log_sinh_scale(z: f64, zstar: f64) -> f64 {
    let t = z / zstar;
    // ln sinh t = t + ln((1 − e^{−2t})/2)
    zstar.ln() + t + (-(-2.0 * t).exp_m1() / 2.0).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeodesicRegime {
    /// Turning-point quadrature of the length.
    Direct,
    /// Turning point within 10% of the horizon: horizontal run along the
    /// horizon plus two regularised radial drops.
    NearHorizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicResult {
    pub separation: f64,
    pub cutoff: f64,
    /// Length of the geodesic segment with `z ≥ ε`.
    pub length: f64,
    pub turning_point: f64,
    pub regime: GeodesicRegime,
    /// Largest quadrature error estimate among the integrals used.
    pub error_estimate: f64,
}

const QUAD_TOL: f64 = 1e-14;

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let out = quadrature::integrate(f, a, b, QUAD_TOL);
    (out.integral, out.error_estimate)
}

/// Boundary separation of the geodesic turning at `zt`:
/// `2 z_t ∫₀^{π/2} sinθ dθ / √f(z_t sinθ)`.
fn separation_of(geometry: &Geometry, zt: f64) -> (f64, f64) {
    let (v, e) = integrate(|th| th.sin() / emblackening(geometry, zt * th.sin()).sqrt(), 0.0, std::f64::consts::FRAC_PI_2);
    (2.0 * zt * v, 2.0 * zt * e)
}

/// Boundary-anchored geodesic length at separation `z`, cut off at `ε`, from
/// the conserved momentum of x-translations. The turning point is found by
/// bisection on the quadrature separation.
pub fn geodesic_numeric(z: f64, geometry: &Geometry, eps: f64) -> Result<GeodesicResult> {
    if !(z > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("need separation > 0 and cutoff > 0, got {z}, {eps}")));
    }
    let zstar = geometry.zstar();
    // Parametrise the turning point so bisection resolves it near the horizon.
    let zt_of = |p: f64| if zstar.is_finite() { zstar * (1.0 - (-p).exp()) } else { p.exp() };
    let (mut lo, mut hi) = if zstar.is_finite() { (1e-12, 60.0) } else { ((z * 1e-3).ln(), z.ln()) };
    if separation_of(geometry, zt_of(hi)).0 < z {
        return Err(Error::InvalidArgument(format!("separation {z} beyond the resolvable range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if separation_of(geometry, zt_of(mid)).0 < z {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let zt = zt_of(0.5 * (lo + hi));
    if eps >= zt {
        return Err(Error::InvalidArgument(format!("cutoff {eps} not below the turning point {zt}")));
    }
    let (_, sep_err) = separation_of(geometry, zt);
    let k = zt / zstar;
    let th_eps = (eps / zt).asin();
    // ∫_{θε}^{π/2} dθ / sinθ
    let log_part = -(th_eps / 2.0).tan().ln();
    let near = zstar.is_finite() && k > 0.9;
    let (length, err) = if near {
        // L − z/z* = 2∫ (z_t z* − z²)/(z z* √f √(z_t² − z²)) dz
        let g = |th: f64| {
            let s = th.sin();
            ((1.0 - k * s * s) / (1.0 - k * k * s * s).sqrt() - 1.0) / s
        };
        let (v, e) = integrate(g, th_eps, std::f64::consts::FRAC_PI_2);
        (z / zstar + 2.0 * (v + log_part), 2.0 * e)
    } else {
        let h = |th: f64| {
            let s = th.sin();
            (1.0 / emblackening(geometry, zt * s).sqrt() - 1.0) / s
        };
        let (v, e) = if zstar.is_finite() { integrate(h, th_eps, std::f64::consts::FRAC_PI_2) } else { (0.0, 0.0) };
        (2.0 * (v + log_part), 2.0 * e)
    };
    if !length.is_finite() {
        return Err(Error::NonFinite("geodesic length"));
    }
    Ok(GeodesicResult {
        separation: z,
        cutoff: eps,
        length,
        turning_point: zt,
        regime: if near { GeodesicRegime::NearHorizon } else { GeodesicRegime::Direct },
        error_estimate: err.max(sep_err),
    })
}

/// `[z* sinh(z/z*)]^{−η}`; `z^{−η}` for infinite z*.
pub fn holo_propagator(z: f64, zstar: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return 1.0;
    }
    (-eta * geodesic_closed_form(z, zstar)).exp()
}

/// Relative residual of `(z∂_z − z∂_zΦ ∂_Φ)C` at interior samples for the
/// ansatz `Φ = z^{−Δ}`, `C ∼ Φ²`. Both derivatives are central differences in
/// `ln z`, so `∂_Φ C = 2C/Φ` turns the second term into `2ΔC`.
pub fn holographic_cs_residual(curve: &FlowCurve, delta: f64) -> Result<Vec<f64>> {
    let dc = log_derivative(curve)?;
    let s = &curve.samples;
    Ok((1..s.len() - 1)
        .zip(dc)
        .map(|(i, d)| {
            let (zm, zp) = (s[i - 1].0, s[i + 1].0);
            // z∂_zΦ / Φ for Φ = z^{−Δ}
            let dphi = (-delta * zp.ln() - -delta * zm.ln()) / (zp.ln() - zm.ln());
            d - 2.0 * dphi
        })
        .collect())
}

/// One row of a propagator or geodesic table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloRow {
    pub z: f64,
    pub zstar: f64,
    pub value: f64,
    pub regime: GeodesicRegime,
}

/// CSV with header `z,zstar,value,regime`.
pub fn holo_table_csv(rows: &[HoloRow]) -> String {
    let mut out = String::from("z,zstar,value,regime\n");
    for r in rows {
        let regime = match r.regime {
            GeodesicRegime::Direct => "direct",
            GeodesicRegime::NearHorizon => "near-horizon",
        };
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{regime}", r.z, r.zstar, r.value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_annihilate_power() {
        let grid = geometric_grid(1.0, 1.0 + 199e-4, 200);
        for m2 in [0.0, 1.0, 2.0] {
            let (p, q) = dimension_from_mass(m2).unwrap();
            assert!(radial_ode_residual(m2, p, &grid).unwrap() < 1e-8);
            assert!(radial_ode_residual(m2, q, &grid).unwrap() < 1e-8);
            assert!(radial_ode_residual(m2, p + 0.1, &grid).unwrap() > 1e-3);
        }
        assert_eq!(radial_ode_residual(0.0, 0.0, &grid).unwrap(), 0.0);
        assert!(matches!(dimension_from_mass(-0.3), Err(Error::StabilityBound(_))));
        let (a, b) = dimension_from_mass(-0.25).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn ads_geodesic_is_logarithmic() {
        let g = Geometry::PureAds;
        let a = geodesic_numeric(2.0, &g, 1e-4).unwrap();
        let b = geodesic_numeric(20.0, &g, 1e-4).unwrap();
        // chord length 2 ln(z/ε) + O(ε²)
        assert!((b.length - a.length - 2.0 * 10f64.ln()).abs() < 1e-6);
        assert!((a.turning_point - 1.0).abs() < 1e-12);
    }

    #[test]
    fn btz_geodesic_matches_chord_formula() {
        let g = Geometry::btz(3.0).unwrap();
        for z in [0.3, 3.0, 12.0, 30.0] {
            let r = geodesic_numeric(z, &g, 1e-5).unwrap();
            let exact = 2.0 * (2.0 * 3.0 / 1e-5 * (z / 6.0).sinh()).ln();
            assert!((r.length - exact).abs() < 1e-6, "{z}: {} vs {exact}", r.length);
            assert!(r.turning_point < 3.0);
        }
    }

    #[test]
    fn propagator_limits() {
        assert!((holo_propagator(0.5, 100.0, 0.3) / 0.5f64.powf(-0.3) - 1.0).abs() < 1e-4);
        let far = holo_propagator(800.0, 100.0, 0.3);
        let asym = 100f64.powf(-0.3) * (-0.3 * 8.0f64).exp() * 2f64.powf(0.3);
        assert!((far / asym - 1.0).abs() < 1e-6);
        assert_eq!(holo_propagator(3.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn metric_is_scale_invariant() {
        let pts = [(0.3, 0.7, 0.01, -0.02), (-2.0, 5.0, 1.0, 0.5)];
        assert!(rescaling_defect(&Geometry::PureAds, &pts, 0.8) < 1e-12);
    }
}
