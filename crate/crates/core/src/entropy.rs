//! Block entanglement entropy of network states, cone cut bounds and the
//! scaling fits for logarithmic and extensive growth.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fit::fit_linear_model;
use crate::linalg::entropy_of_spectrum;
use crate::mera::{ascend_interval, CapState, FiniteRangeMera, Purified, ScaleInvariantMera};
use crate::mps::{column_origin, purified_mps, Environments, Mps};
use crate::optimizer::fixed_point_triple;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Eigenvalues below this are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-14;
/// Largest block handled through dense window densities.
pub const DENSE_SITES: usize = 12;
/// Largest complement dimension `D_l · A · D_r` on the MPS route.
pub const COMPLEMENT_BUDGET: usize = 4096;

/// Entropies (nats) against block size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub samples: Vec<(usize, f64)>,
    pub network_id: String,
    pub cap: String,
}

impl EntropyCurve {
    pub fn new(samples: Vec<(usize, f64)>, network_id: impl Into<String>, cap: impl Into<String>) -> Result<Self> {
        for &(l, s) in &samples {
            if !s.is_finite() {
                return Err(Error::NonFinite("block entropy"));
            }
            if s < -1e-12 || (l == 0 && s.abs() > 1e-12) {
                return Err(Error::InvalidArgument(format!("entropy {s} at block size {l}")));
            }
        }
        Ok(Self { samples, network_id: network_id.into(), cap: cap.into() })
    }

    /// CSV with header `l,S,cap,network_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,S,cap,network_id\n");
        for (l, s) in &self.samples {
            let _ = writeln!(out, "{l},{s:.16e},{},{}", self.cap, self.network_id);
        }
        out
    }
}

/// Blocks of a scale-invariant network, seeded by the translation-averaged
/// three-site fixed point of the repeated layer.
#[derive(Clone, Debug)]
pub struct ScaleInvariantBlocks<'a> {
    mera: &'a ScaleInvariantMera,
    triple: Tensor,
}

impl<'a> ScaleInvariantBlocks<'a> {
    pub fn new(mera: &'a ScaleInvariantMera) -> Result<Self> {
        Ok(Self { mera, triple: fixed_point_triple(mera, 1e-12, 20_000)? })
    }

    /// Entropy of sites `x..x+len`.
    pub fn entropy_at(&self, x: i64, len: usize) -> Result<f64> {
        if len == 0 {
            return Ok(0.0);
        }
        if len > DENSE_SITES {
            return Err(Error::Budget(format!("block of {len} sites exceeds {DENSE_SITES}")));
        }
        let b = self.mera.b();
        let t = self.mera.transitional().len();
        let mut tower = vec![(x, x + len as i64 - 1)];
        loop {
            let (a, c) = *tower.last().unwrap();
            if tower.len() > t && c - a < 3 {
                break;
            }
            tower.push(ascend_interval(a, c, b));
        }
        let n = tower.len() - 1;
        let chi = self.mera.chi();
        let (a, c) = tower[n];
        let mut p = Purified::from_density(a, &[chi; 3], &self.triple)?.reduce(a, c)?;
        for j in (0..n).rev() {
            p = p.descend(self.mera.layer_at(j), tower[j].0, tower[j].1)?;
        }
        Ok(entropy_of_spectrum(&p.spectrum(), EIGEN_FLOOR))
    }

    /// Entropy averaged over the three block offsets modulo b.
    pub fn entropy(&self, len: usize) -> Result<f64> {
        let offsets = [0i64, 1, 2];
        let s = crate::par::try_map(&offsets, |&x| self.entropy_at(x, len))?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }
}

/// Blocks of a finite-range network through its (purified) cell MPS. Blocks
/// start at a column boundary.
#[derive(Clone, Debug)]
pub struct FiniteRangeBlocks {
    mps: Mps,
    env: Environments,
    cap: &'static str,
}

impl FiniteRangeBlocks {
    pub fn new(fr: &FiniteRangeMera) -> Result<Self> {
        let mps = purified_mps(fr)?.rotated(column_origin(fr.wstar()));
        let env = mps.environments()?;
        Ok(Self { mps, env, cap: fr.cap().kind() })
    }

    /// First site of every block.
    pub fn origin(&self) -> i64 {
        self.mps.origin()
    }

    pub fn cap(&self) -> &'static str {
        self.cap
    }

    pub fn mps(&self) -> &Mps {
        &self.mps
    }

    pub fn entropy(&self, len: usize) -> Result<f64> {
        let spec = self.mps.block_spectrum(&self.env, self.origin(), len, COMPLEMENT_BUDGET)?;
        Ok(entropy_of_spectrum(&spec, EIGEN_FLOOR))
    }
}

/// Either kind of network, ready for block entropies.
#[derive(Clone, Debug)]
pub enum EntropySource<'a> {
    ScaleInvariant(ScaleInvariantBlocks<'a>),
    FiniteRange(FiniteRangeBlocks),
}

/// Von Neumann entropy (nats) of a block of `len` sites.
pub fn block_entropy(source: &EntropySource<'_>, len: usize) -> Result<f64> {
    match source {
        EntropySource::ScaleInvariant(s) => s.entropy(len),
        EntropySource::FiniteRange(f) => f.entropy(len),
    }
}

/// Entropies for several block sizes, computed in parallel.
pub fn entropy_curve(source: &EntropySource<'_>, sizes: &[usize], network_id: &str) -> Result<EntropyCurve> {
    let cap = match source {
        EntropySource::ScaleInvariant(_) => "none",
        EntropySource::FiniteRange(f) => f.cap(),
    };
    let values = crate::par::try_map(sizes, |&l| block_entropy(source, l))?;
    EntropyCurve::new(sizes.iter().copied().zip(values).collect(), network_id, cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalingModel {
    /// `S = a log ℓ + c`.
    Log,
    /// `S = a ℓ/z* + b log z* + c`. At fixed z* the last two terms are one
    /// constant, reported as the intercept.
    LinearPlusLog { zstar: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyFit {
    pub model: ScalingModel,
    /// `a` of the chosen model.
    pub coefficient: f64,
    pub coefficient_std_error: f64,
    /// `dS/dℓ`, i.e. `a/z*` (linear model only).
    pub extensive: Option<f64>,
    pub extensive_std_error: Option<f64>,
    pub intercept: f64,
    pub r2: f64,
    pub rms: f64,
    pub bic: f64,
    pub n: usize,
}

pub fn entropy_scaling_fit(curve: &EntropyCurve, model: ScalingModel) -> Result<EntropyFit> {
    if curve.samples.len() < 4 {
        return Err(Error::InsufficientData(format!("{} entropy samples, need 4", curve.samples.len())));
    }
    let zstar = match model {
        ScalingModel::Log => None,
        ScalingModel::LinearPlusLog { zstar } if zstar > 0.0 && zstar.is_finite() => Some(zstar),
        ScalingModel::LinearPlusLog { zstar } => {
            return Err(Error::InvalidArgument(format!("z* must be positive and finite, got {zstar}")))
        }
    };
    if zstar.is_none() && curve.samples.iter().any(|s| s.0 == 0) {
        return Err(Error::InvalidArgument("log model needs block sizes >= 1".into()));
    }
    let design: Vec<Vec<f64>> = curve
        .samples
        .iter()
        .map(|&(l, _)| match zstar {
            None => vec![(l as f64).ln(), 1.0],
            Some(z) => vec![l as f64 / z, 1.0],
        })
        .collect();
    let y: Vec<f64> = curve.samples.iter().map(|s| s.1).collect();
    let f = fit_linear_model(&design, &y)?;
    let (a, da) = (f.coefficients[0], f.std_errors[0]);
    Ok(EntropyFit {
        model,
        coefficient: a,
        coefficient_std_error: da,
        extensive: zstar.map(|z| a / z),
        extensive_std_error: zstar.map(|z| da / z),
        intercept: f.coefficients[1],
        r2: f.r2,
        rms: f.rms,
        bic: f.bic,
        n: f.n,
    })
}

/// Site dimensions per level and the top boundary condition, all a cut
/// count needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub b: usize,
    /// Site dimension at level m, for `m < level_dims.len()`; higher levels
    /// reuse the last entry.
    pub level_dims: Vec<usize>,
    /// Number of layers below the cap; `None` for a scale-invariant network.
    pub depth: Option<usize>,
    /// Weight per cap site: `ln χ` for a maximally mixed cap, 0 for a product.
    pub cap_site_weight: f64,
}

impl NetworkShape {
    fn dim(&self, m: usize) -> usize {
        *self.level_dims.get(m).or(self.level_dims.last()).unwrap()
    }
}

impl From<&ScaleInvariantMera> for NetworkShape {
    fn from(m: &ScaleInvariantMera) -> Self {
        let mut dims: Vec<usize> = m.transitional().iter().map(|l| l.chi_in()).collect();
        dims.push(m.chi());
        Self { b: m.b(), level_dims: dims, depth: None, cap_site_weight: 0.0 }
    }
}

impl From<&FiniteRangeMera> for NetworkShape {
    fn from(fr: &FiniteRangeMera) -> Self {
        let mut dims: Vec<usize> = fr.layers().iter().map(|l| l.chi_in()).collect();
        dims.push(fr.chi());
        let cap_site_weight = match fr.cap() {
            CapState::Product(_) => 0.0,
            CapState::MaximallyMixed => (fr.chi() as f64).ln(),
        };
        Self { b: fr.b(), level_dims: dims, depth: Some(fr.wstar()), cap_site_weight }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutLevel {
    pub level: usize,
    /// Cone support `[lo, hi]` at this level.
    pub support: (i64, i64),
    /// Legs leaving the cone between this level and the next.
    pub side_legs: usize,
    /// Weight of stopping the cut here: side legs below plus the cone's
    /// top boundary at this level.
    pub weight: f64,
}

/// Minimal weight over cuts that follow the block's causal cone up to some
/// level and close across it there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub block: (i64, i64),
    pub levels: Vec<CutLevel>,
    pub best_level: usize,
    pub weight: f64,
}

pub fn cut_length(shape: &NetworkShape, lo: i64, hi: i64) -> Result<CutReport> {
    if hi < lo {
        return Err(Error::InvalidArgument("empty block".into()));
    }
    let mut supports = vec![(lo, hi)];
    // Scale-invariant cones: a couple of levels past the point where the
    // width stops shrinking is enough, later cuts only add side legs.
    let max_level = match shape.depth {
        Some(d) => d,
        None => {
            let mut m = 0;
            let mut settled = 0;
            let mut cur = (lo, hi);
            while settled < 3 {
                let next = ascend_interval(cur.0, cur.1, shape.b);
                settled = if next.1 - next.0 >= cur.1 - cur.0 { settled + 1 } else { 0 };
                cur = next;
                m += 1;
            }
            m
        }
    };
    for _ in 0..max_level {
        let (a, c) = *supports.last().unwrap();
        supports.push(ascend_interval(a, c, shape.b));
    }
    let width = |s: (i64, i64)| (s.1 - s.0 + 1) as usize;
    let mut levels = Vec::with_capacity(max_level + 1);
    let mut side = 0.0;
    for (m, &s) in supports.iter().enumerate() {
        let top = if Some(m) == shape.depth {
            width(s) as f64 * shape.cap_site_weight
        } else {
            width(s) as f64 * (shape.dim(m) as f64).ln()
        };
        let side_legs = if m < max_level { shape.b * width(supports[m + 1]) - width(s) } else { 0 };
        levels.push(CutLevel { level: m, support: s, side_legs, weight: side + top });
        side += side_legs as f64 * (shape.dim(m) as f64).ln();
    }
    let best = levels
        .iter()
        .min_by(|a, b| a.weight.total_cmp(&b.weight))
        .map(|l| (l.level, l.weight))
        .unwrap();
    Ok(CutReport { block: (lo, hi), levels, best_level: best.0, weight: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mera::{build_finite_range, build_scale_invariant};

    #[test]
    fn fits_recover_synthetic_coefficients() {
        let c = EntropyCurve::new([2usize, 3, 5, 8, 13].iter().map(|&l| (l, 0.4 * (l as f64).ln() + 0.7)).collect(), "t", "none").unwrap();
        let f = entropy_scaling_fit(&c, ScalingModel::Log).unwrap();
        assert!((f.coefficient - 0.4).abs() < 1e-10);
        let c = EntropyCurve::new([20usize, 30, 40, 50].iter().map(|&l| (l, 0.3 * l as f64 / 9.0 + 0.5 * 9f64.ln() + 0.1)).collect(), "t", "m").unwrap();
        let f = entropy_scaling_fit(&c, ScalingModel::LinearPlusLog { zstar: 9.0 }).unwrap();
        assert!((f.coefficient - 0.3).abs() < 1e-10);
        assert!(entropy_scaling_fit(&EntropyCurve::new(vec![(1, 0.0), (2, 0.1)], "t", "n").unwrap(), ScalingModel::Log).is_err());
    }

    #[test]
    fn entropies_respect_cut_bound() {
        let si = build_scale_invariant(2, 3, 4).unwrap();
        let blocks = ScaleInvariantBlocks::new(&si).unwrap();
        let shape = NetworkShape::from(&si);
        for len in [1usize, 2, 3, 5] {
            let s = blocks.entropy_at(0, len).unwrap();
            assert!(s <= cut_length(&shape, 0, len as i64 - 1).unwrap().weight + 1e-10);
        }
        for cap in [CapState::zero(2), CapState::MaximallyMixed] {
            let fr = build_finite_range(2, 3, 2, cap, 8).unwrap();
            let blocks = FiniteRangeBlocks::new(&fr).unwrap();
            let shape = NetworkShape::from(&fr);
            for len in [3usize, 9, 18] {
                let s = blocks.entropy(len).unwrap();
                let x = blocks.origin();
                assert!(s <= cut_length(&shape, x, x + len as i64 - 1).unwrap().weight + 1e-10);
            }
        }
    }

    #[test]
    fn single_site_cut_within_cone_width() {
        let si = build_scale_invariant(3, 3, 1).unwrap();
        let r = cut_length(&NetworkShape::from(&si), 4, 4).unwrap();
        assert!(r.weight <= 3f64.ln() + 1e-12);
    }
}
