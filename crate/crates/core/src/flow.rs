//! Two-point correlators measured on networks, their predicted flow, and
//! discrete residuals of the scale flow equations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fit::{fit_line, fit_linear_model, LineFit};
use crate::mera::{ascend_one_site, descend_two_site, CapState, FiniteRangeMera, PairType, ScaleInvariantMera};
use crate::optimizer::DensityProfile;
use crate::tensor::{Tensor, C64};
use crate::{Error, Result};

/// Correlator (or entropy) samples against scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowCurve {
    /// `(z, value)` with strictly increasing z.
    pub samples: Vec<(f64, f64)>,
    pub alpha: usize,
    pub beta: usize,
    pub eta: f64,
    pub network_id: String,
}

impl FlowCurve {
    pub fn new(samples: Vec<(f64, f64)>, alpha: usize, beta: usize, eta: f64, network_id: impl Into<String>) -> Result<Self> {
        if samples.iter().any(|(z, v)| !z.is_finite() || !v.is_finite()) {
            return Err(Error::NonFinite("flow curve sample"));
        }
        if samples.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::InvalidArgument("flow curve scales must increase strictly".into()));
        }
        Ok(Self { samples, alpha, beta, eta, network_id: network_id.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    /// CSV with header `z,value,eta,alpha,beta,network_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,value,eta,alpha,beta,network_id\n");
        for (z, v) in &self.samples {
            let _ = writeln!(out, "{z:.16e},{v:.16e},{:.16e},{},{},{}", self.eta, self.alpha, self.beta, self.network_id);
        }
        out
    }
}

/// A network state against which correlators are evaluated.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    /// Scale-invariant network with its fixed-point densities.
    ScaleInvariant { mera: &'a ScaleInvariantMera, profile: &'a DensityProfile },
    FiniteRange(&'a FiniteRangeMera),
}

impl StateRef<'_> {
    fn b(&self) -> usize {
        match self {
            StateRef::ScaleInvariant { mera, .. } => mera.b(),
            StateRef::FiniteRange(fr) => fr.b(),
        }
    }
}

/// `q` with `r = b^q`, if any.
pub fn exponent_of(r: u64, b: usize) -> Option<u32> {
    let b = b as u64;
    let mut q = 0;
    let mut p = 1u64;
    while p < r {
        p = p.checked_mul(b)?;
        q += 1;
    }
    (p == r).then_some(q)
}

/// The aligned pair of sites at separation `b^q` used for exact channel
/// evaluation: `x = (b^q − 1)/2`, `y = x + b^q`. Both are block centres at
/// every level below `q`, so one-site operators stay one-site on the way up.
pub fn aligned_sites(q: u32) -> (i64, i64) {
    let r = 3i64.pow(q);
    ((r - 1) / 2, (r - 1) / 2 + r)
}

fn check_op(op: &Tensor, d: usize) -> Result<()> {
    if op.shape() != [d, d] {
        return Err(Error::Shape(format!("operator {:?} on sites of dimension {d}", op.shape())));
    }
    Ok(())
}

/// `⟨φ_α(x) φ_β(y)⟩` at `x, y` from [`aligned_sites`], separation `r = b^q`
/// (real part).
pub fn correlator_direct(state: StateRef<'_>, a: &Tensor, b: &Tensor, r: u64) -> Result<f64> {
    Ok(correlator_direct_complex(state, a, b, r)?.re)
}

pub fn correlator_direct_complex(state: StateRef<'_>, a: &Tensor, b: &Tensor, r: u64) -> Result<C64> {
    if state.b() != 3 {
        return Err(Error::Unsupported("exact correlators need b = 3".into()));
    }
    let q = exponent_of(r, state.b())
        .ok_or_else(|| Error::Unsupported(format!("separation {r} is not a power of {}", state.b())))?;
    match state {
        StateRef::ScaleInvariant { mera, profile } => {
            check_op(a, mera.physical_dim())?;
            check_op(b, mera.physical_dim())?;
            let (mut oa, mut ob) = (a.clone(), b.clone());
            for n in 0..q as usize {
                oa = ascend_one_site(&oa, mera.layer_at(n))?;
                ob = ascend_one_site(&ob, mera.layer_at(n))?;
            }
            let n = q as usize;
            let top = &profile.pairs[(n + 1).min(profile.pairs.len() - 1)];
            let d = top.shape()[0];
            let rho = descend_two_site(&top.clone().reshape(&[d * d, d * d])?, mera.layer_at(n), PairType::L)?;
            Ok(rho.matmul(&oa.kron(&ob)).trace())
        }
        StateRef::FiniteRange(fr) => {
            check_op(a, fr.physical_dim())?;
            check_op(b, fr.physical_dim())?;
            let m = (q as usize).min(fr.wstar());
            let (mut oa, mut ob) = (a.clone(), b.clone());
            for n in 0..m {
                oa = ascend_one_site(&oa, &fr.layers()[n])?;
                ob = ascend_one_site(&ob, &fr.layers()[n])?;
            }
            if m == fr.wstar() && (q as usize) > m {
                // distinct cap sites
                return Ok(cap_expectation(fr.cap(), &oa) * cap_expectation(fr.cap(), &ob));
            }
            let p = fr.window(m, 0, 1)?;
            p.expectation(&[(0, &oa), (1, &ob)])
        }
    }
}

fn cap_expectation(cap: &CapState, op: &Tensor) -> C64 {
    match cap {
        CapState::Product(v) => {
            let n = v.len();
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += v[i].conj() * op.get(&[i, j]) * v[j];
                }
            }
            s
        }
        CapState::MaximallyMixed => op.trace() / op.rows() as f64,
    }
}

/// `⟨φ(x)⟩` at a physical site of a finite-range network.
pub fn one_point(fr: &FiniteRangeMera, op: &Tensor, x: i64) -> Result<f64> {
    check_op(op, fr.physical_dim())?;
    Ok(fr.window(0, x, x)?.expectation(&[(x, op)])?.re)
}

/// Connected correlator at the aligned sites of separation `b^q`.
pub fn connected_correlator(fr: &FiniteRangeMera, a: &Tensor, b: &Tensor, r: u64) -> Result<f64> {
    let q = exponent_of(r, fr.b()).ok_or_else(|| Error::Unsupported(format!("separation {r} is not a power of {}", fr.b())))?;
    let (x, y) = aligned_sites(q);
    let full = correlator_direct(StateRef::FiniteRange(fr), a, b, r)?;
    Ok(full - one_point(fr, a, x)? * one_point(fr, b, y)?)
}

/// `(λ_α λ_β)^w C⁰`.
pub fn correlator_predicted(lambda_a: f64, lambda_b: f64, w: u32, c0: f64) -> f64 {
    (lambda_a * lambda_b).powi(w as i32) * c0
}

/// `z^{−η} C₁`.
pub fn power_law(z: f64, eta: f64, c1: f64) -> f64 {
    z.powf(-eta) * c1
}

fn require(curve: &FlowCurve, n: usize) -> Result<()> {
    if curve.len() < n {
        return Err(Error::InsufficientData(format!("{} samples, need at least {n}", curve.len())));
    }
    Ok(())
}

/// Central difference of `ln|C|` against `ln z` at interior samples.
pub(crate) fn log_derivative(curve: &FlowCurve) -> Result<Vec<f64>> {
    require(curve, 3)?;
    let s = &curve.samples;
    Ok((1..s.len() - 1)
        .map(|i| (s[i + 1].1.abs().ln() - s[i - 1].1.abs().ln()) / (s[i + 1].0.ln() - s[i - 1].0.ln()))
        .collect())
}

/// Relative residual `(z∂_z C + ηC)/C` at interior samples, from ratio-spaced
/// central differences of `ln|C|` in `ln z`; exact for pure powers.
pub fn cs_residual(curve: &FlowCurve, eta: f64) -> Result<Vec<f64>> {
    Ok(log_derivative(curve)?.into_iter().map(|d| d + eta).collect())
}

/// Relative residual `(z∂_z C + η(z/z*)C)/C` at interior samples. The
/// derivative of `ln|C|` is differenced in z, which is exact on the
/// exponential family `A e^{−ηz/z*}`.
pub fn truncated_cs_residual(curve: &FlowCurve, eta: f64, zstar: f64) -> Result<Vec<f64>> {
    require(curve, 3)?;
    let s = &curve.samples;
    Ok((1..s.len() - 1)
        .map(|i| {
            let z = s[i].0;
            let d = (s[i + 1].1.abs().ln() - s[i - 1].1.abs().ln()) / (s[i + 1].0 - s[i - 1].0);
            z * d + eta * z / zstar
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariancePair {
    pub z: f64,
    pub z_scaled: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub u: f64,
    pub pairs: Vec<CovariancePair>,
    pub max_relative_error: f64,
}

/// Check `C(z e^u) = e^{−ηu} C(z)` on all sample pairs at ratio `e^u`.
pub fn rescale_covariance(curve: &FlowCurve, u: f64) -> Result<CovarianceReport> {
    let ratio = u.exp();
    let s = &curve.samples;
    let mut pairs = Vec::new();
    for i in 0..s.len() {
        for j in 0..s.len() {
            if ((s[j].0 / s[i].0) / ratio - 1.0).abs() < 1e-9 {
                let want = (-curve.eta * u).exp() * s[i].1;
                let relative_error = (s[j].1 - want).abs() / want.abs().max(f64::MIN_POSITIVE);
                pairs.push(CovariancePair { z: s[i].0, z_scaled: s[j].0, relative_error });
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientData(format!("no sample pairs at ratio e^{u}")));
    }
    let max_relative_error = pairs.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    Ok(CovarianceReport { u, pairs, max_relative_error })
}

/// Straight-line fit restricted to a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub lo: f64,
    pub hi: f64,
    pub line: LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverFit {
    pub zstar: f64,
    /// `ln|C|` against `ln z` on `z ≤ z*/3`.
    pub power: WindowFit,
    pub exponent: f64,
    /// `ln|C|` against `z` on `z ≥ 3z*`, absent when fewer than two samples
    /// there lie above the numerical floor.
    pub exponential: Option<WindowFit>,
    pub rate: Option<f64>,
    /// Where the local power-law slope meets the fitted rate, `η / rate`.
    pub crossover_scale: Option<f64>,
    /// The exponential window is straight within `R² > 0.999`.
    pub exponential_conditioned: bool,
    /// Samples in the exponential window discarded as numerical zeros.
    pub floor_dropped: usize,
    /// `ln|C| = c − η ln z − κ z` on both windows together, as
    /// `(η, κ, c)`; absent when the exponential window is empty.
    pub joint: Option<(f64, f64, f64)>,
}

/// Magnitudes below this fraction of the largest sample are numerical zeros.
pub const FLOOR: f64 = 1e-13;

/// Power-law fit on `z ≤ z*/3` and exponential fit on `z ≥ 3z*`.
pub fn crossover_fit(curve: &FlowCurve, zstar: f64) -> Result<CrossoverFit> {
    let scale = curve.samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let (lo_max, hi_min) = (zstar / 3.0, 3.0 * zstar);
    let small: Vec<(f64, f64)> = curve.samples.iter().copied().filter(|s| s.0 <= lo_max).collect();
    let large: Vec<(f64, f64)> = curve.samples.iter().copied().filter(|s| s.0 >= hi_min).collect();
    if small.len() < 2 || large.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need samples on both sides: {} with z <= {lo_max}, {} with z >= {hi_min}",
            small.len(),
            large.len()
        )));
    }
    let x: Vec<f64> = small.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = small.iter().map(|s| s.1.abs().ln()).collect();
    let line = fit_line(&x, &y)?;
    let power = WindowFit { lo: small[0].0, hi: small.last().unwrap().0, line };
    let exponent = -line.slope;
    let kept: Vec<(f64, f64)> = large.iter().copied().filter(|s| s.1.abs() > FLOOR * scale).collect();
    let floor_dropped = large.len() - kept.len();
    let exponential = if kept.len() >= 2 {
        let x: Vec<f64> = kept.iter().map(|s| s.0).collect();
        let y: Vec<f64> = kept.iter().map(|s| s.1.abs().ln()).collect();
        Some(WindowFit { lo: kept[0].0, hi: kept.last().unwrap().0, line: fit_line(&x, &y)? })
    } else {
        None
    };
    let rate = exponential.as_ref().map(|f| -f.line.slope);
    let crossover_scale = rate.filter(|r| *r > 0.0).map(|r| exponent / r);
    let exponential_conditioned = exponential.as_ref().is_some_and(|f| f.line.r2 > 0.999);
    let joint = if kept.is_empty() {
        None
    } else {
        let pts: Vec<(f64, f64)> = small.iter().chain(kept.iter()).copied().collect();
        let design: Vec<Vec<f64>> = pts.iter().map(|s| vec![-s.0.ln(), -s.0, 1.0]).collect();
        let y: Vec<f64> = pts.iter().map(|s| s.1.abs().ln()).collect();
        fit_linear_model(&design, &y).ok().map(|f| (f.coefficients[0], f.coefficients[1], f.coefficients[2]))
    };
    Ok(CrossoverFit { zstar, power, exponent, exponential, rate, crossover_scale, exponential_conditioned, floor_dropped, joint })
}

/// `C^z / C¹`.
pub fn holographic_ratio(curve: &FlowCurve, c1: f64) -> Result<FlowCurve> {
    if c1 == 0.0 || !c1.is_finite() {
        return Err(Error::InvalidArgument("normalising value must be finite and nonzero".into()));
    }
    let samples = curve.samples.iter().map(|&(z, v)| (z, v / c1)).collect();
    FlowCurve::new(samples, curve.alpha, curve.beta, curve.eta, curve.network_id.clone())
}

/// Samples of `z^{−η} C₁`.
pub fn power_law_curve(scales: &[f64], eta: f64, c1: f64) -> Result<FlowCurve> {
    FlowCurve::new(scales.iter().map(|&z| (z, power_law(z, eta, c1))).collect(), 0, 0, eta, "power-law")
}

/// Samples of `A z^{−η} e^{−ηz/z*}`.
pub fn crossover_curve(scales: &[f64], eta: f64, zstar: f64, amplitude: f64) -> Result<FlowCurve> {
    FlowCurve::new(
        scales.iter().map(|&z| (z, amplitude * z.powf(-eta) * (-eta * z / zstar).exp())).collect(),
        0,
        0,
        eta,
        "crossover",
    )
}

/// Samples of `A e^{−ηz/z*}`.
pub fn truncated_curve(scales: &[f64], eta: f64, zstar: f64, amplitude: f64) -> Result<FlowCurve> {
    FlowCurve::new(scales.iter().map(|&z| (z, amplitude * (-eta * z / zstar).exp())).collect(), 0, 0, eta, "truncated")
}

/// `z₀ ρ^k`, `k = 0..n`.
pub fn geometric_scales(z0: f64, ratio: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| z0 * ratio.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_laws_have_zero_residual() {
        let c = power_law_curve(&geometric_scales(1.0, 3.0, 6), 0.37, 2.0).unwrap();
        assert!(cs_residual(&c, 0.37).unwrap().iter().all(|r| r.abs() < 1e-12));
        let flat = power_law_curve(&[1.0, 2.0, 5.0], 0.0, 1.5).unwrap();
        assert!(cs_residual(&flat, 0.0).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn exponentials_solve_truncated_flow() {
        let c = truncated_curve(&geometric_scales(10.0, 1.01, 50), 0.5, 20.0, 3.0).unwrap();
        assert!(truncated_cs_residual(&c, 0.5, 20.0).unwrap().iter().all(|r| r.abs() < 1e-6));
        let p = power_law_curve(&geometric_scales(1.0, 2.0, 8), 0.5, 1.0).unwrap();
        let r = truncated_cs_residual(&p, 0.5, 20.0).unwrap();
        assert!(r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn crossover_recovers_parameters() {
        let zs = geometric_scales(1.0, 1.1, 120);
        let c = crossover_curve(&zs, 0.25, 81.0, 1.0).unwrap();
        let f = crossover_fit(&c, 81.0).unwrap();
        let (eta, kappa, _) = f.joint.unwrap();
        assert!((eta / 0.25 - 1.0).abs() < 0.01);
        assert!((kappa / (0.25 / 81.0) - 1.0).abs() < 0.01);
        assert!(f.exponential_conditioned);
        let p = power_law_curve(&zs, 0.25, 1.0).unwrap();
        assert!(!crossover_fit(&p, 81.0).unwrap().exponential_conditioned);
    }

    #[test]
    fn covariance_on_power_law() {
        let c = power_law_curve(&geometric_scales(1.0, 3.0, 5), 0.8, 1.0).unwrap();
        assert!(rescale_covariance(&c, 3f64.ln()).unwrap().max_relative_error < 1e-13);
        assert!(rescale_covariance(&c, 0.0).unwrap().max_relative_error == 0.0);
        assert!(rescale_covariance(&c, 0.1).is_err());
    }
}
