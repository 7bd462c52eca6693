//! Layered isometric networks: layers, scale-invariant and finite-range
//! networks, cap states and causal-cone bookkeeping.

pub(crate) mod channels;
mod window;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::linalg::{isometry_residual, random_isometry};
use crate::tensor::{Tensor, TensorRecord, C64, ONE, ZERO};
use crate::{Error, Result};

pub use channels::{
    ascend_one_site, ascend_two_site, check_density, descend_density, descend_one_site, descend_two_site,
    two_site_environments, PairType, TwoSiteEnv,
};
pub use window::Purified;

/// Tolerance on the unitary / isometric constraints of a stored layer.
pub const LAYER_TOL: f64 = 1e-12;

/// One coarse-graining step: a disentangler `u` on neighbouring fine sites and
/// an isometry `w` from `b` fine sites to one coarse site.
///
/// Legs are ordered in the state-generation direction: `u[f0, f1, m0, m1]`
/// maps the middle pair `(m0, m1)` to the fine pair `(f0, f1)`, and
/// `w[f_0, .., f_{b-1}, c]` maps the coarse site `c` to `b` middle sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub(crate) u: Tensor,
    pub(crate) w: Tensor,
    b: usize,
    chi_in: usize,
    chi_out: usize,
}

impl Layer {
    /// Validate and wrap a disentangler and isometry.
    pub fn new(u: Tensor, w: Tensor) -> Result<Self> {
        let b = w.rank().checked_sub(1).filter(|b| *b == 2 || *b == 3).ok_or_else(|| {
            Error::Unsupported(format!("isometry of rank {} (branching must be 2 or 3)", w.rank()))
        })?;
        let chi_in = w.shape()[0];
        let chi_out = w.shape()[b];
        if w.shape()[..b].iter().any(|&d| d != chi_in) {
            return Err(Error::Shape(format!("isometry fine legs differ: {:?}", w.shape())));
        }
        if u.shape() != [chi_in; 4] {
            return Err(Error::Shape(format!(
                "disentangler shape {:?}, expected [{chi_in}; 4]",
                u.shape()
            )));
        }
        let layer = Self { u, w, b, chi_in, chi_out };
        let (ru, rw) = (layer.unitarity_residual(), layer.isometry_residual());
        if ru > LAYER_TOL || rw > LAYER_TOL {
            return Err(Error::InvalidArgument(format!(
                "layer constraints violated: |u^†u - 1| = {ru:e}, |w^†w - 1| = {rw:e}"
            )));
        }
        Ok(layer)
    }

    /// Skip the constraint check; used by the optimizer right after a polar update.
    pub(crate) fn from_parts(u: Tensor, w: Tensor) -> Self {
        let b = w.rank() - 1;
        let (chi_in, chi_out) = (w.shape()[0], w.shape()[b]);
        Self { u, w, b, chi_in, chi_out }
    }

    /// Haar-random disentangler and isometry.
    pub fn random(chi_in: usize, chi_out: usize, b: usize, seed: u64) -> Result<Self> {
        check_branching(b)?;
        let fine = chi_in.pow(b as u32);
        if chi_out > fine || chi_in == 0 || chi_out == 0 {
            return Err(Error::InvalidArgument(format!(
                "isometry {fine} -> {chi_out} cannot be isometric"
            )));
        }
        let u = random_isometry(chi_in * chi_in, chi_in * chi_in, mix(seed, 1))?.reshaped(&[chi_in; 4]);
        let mut wshape = vec![chi_in; b];
        wshape.push(chi_out);
        let w = random_isometry(fine, chi_out, mix(seed, 2))?.reshaped(&wshape);
        Self::new(u, w)
    }

    /// Identity disentangler; the isometry copies the coarse site onto the
    /// centre fine site and puts the two outer fine sites in a maximally
    /// entangled pair (b = 3), or copies onto the left site with the right
    /// one in `|0>` (b = 2). The one-site channel is then the identity and
    /// the maximally mixed state is a fixed point of the descending map.
    pub fn identity_like(chi: usize, b: usize) -> Result<Self> {
        check_branching(b)?;
        let u = Tensor::identity(chi * chi).reshaped(&[chi; 4]);
        let amp = C64::new(1.0 / (chi as f64).sqrt(), 0.0);
        let w = if b == 3 {
            Tensor::from_fn(&[chi; 4], |ix| if ix[1] == ix[3] && ix[0] == ix[2] { amp } else { ZERO })
        } else {
            Tensor::from_fn(&[chi; 3], |ix| if ix[0] == ix[2] && ix[1] == 0 { ONE } else { ZERO })
        };
        Self::new(u, w)
    }

    pub fn u(&self) -> &Tensor {
        &self.u
    }

    pub fn w(&self) -> &Tensor {
        &self.w
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Bond dimension of the fine sites.
    pub fn chi_in(&self) -> usize {
        self.chi_in
    }

    /// Bond dimension of the coarse site.
    pub fn chi_out(&self) -> usize {
        self.chi_out
    }

    pub(crate) fn u_matrix(&self) -> Tensor {
        self.u.as_matrix(2)
    }

    pub(crate) fn w_matrix(&self) -> Tensor {
        self.w.as_matrix(self.b)
    }

    pub fn unitarity_residual(&self) -> f64 {
        isometry_residual(&self.u_matrix())
    }

    pub fn isometry_residual(&self) -> f64 {
        isometry_residual(&self.w_matrix())
    }

    pub fn to_record(&self) -> LayerRecord {
        LayerRecord { u: self.u.to_record(), w: self.w.to_record() }
    }
}

fn check_branching(b: usize) -> Result<()> {
    if b == 2 || b == 3 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("branching factor {b}")))
    }
}

/// Derive an independent sub-seed.
pub(crate) fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Network with one layer repeated at every scale, optionally preceded by
/// transitional layers at the bottom (physical end).
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleInvariantMera {
    layer: Layer,
    transitional: Vec<Layer>,
}

impl ScaleInvariantMera {
    pub fn new(layer: Layer) -> Result<Self> {
        if layer.chi_in != layer.chi_out {
            return Err(Error::Shape("scale-invariant layer must keep the bond dimension".into()));
        }
        Ok(Self { layer, transitional: Vec::new() })
    }

    /// Add transitional layers, ordered from the physical sites upward.
    pub fn with_transitional(layer: Layer, transitional: Vec<Layer>) -> Result<Self> {
        let mut m = Self::new(layer)?;
        let mut chi = None;
        for t in &transitional {
            if t.b != m.layer.b || chi.is_some_and(|c| c != t.chi_in) {
                return Err(Error::Shape("transitional layers do not chain".into()));
            }
            chi = Some(t.chi_out);
        }
        if chi.is_some_and(|c| c != m.layer.chi_in) {
            return Err(Error::Shape("transitional layers do not reach the scale-invariant bond".into()));
        }
        m.transitional = transitional;
        Ok(m)
    }

    pub fn chi(&self) -> usize {
        self.layer.chi_in
    }

    pub fn b(&self) -> usize {
        self.layer.b
    }

    pub fn layer(&self) -> &Layer {
        &self.layer
    }

    pub fn transitional(&self) -> &[Layer] {
        &self.transitional
    }

    /// Dimension of a bottom (physical) site.
    pub fn physical_dim(&self) -> usize {
        self.transitional.first().unwrap_or(&self.layer).chi_in
    }

    /// Layer acting between level `n` and `n + 1`.
    pub fn layer_at(&self, n: usize) -> &Layer {
        self.transitional.get(n).unwrap_or(&self.layer)
    }
}

/// Random scale-invariant network, deterministic per seed.
pub fn build_scale_invariant(chi: usize, b: usize, seed: u64) -> Result<ScaleInvariantMera> {
    if chi < 2 {
        return Err(Error::InvalidArgument(format!("bond dimension {chi} < 2")));
    }
    ScaleInvariantMera::new(Layer::random(chi, chi, b, seed)?)
}

/// Top state of a finite-range network.
#[derive(Clone, Debug, PartialEq)]
pub enum CapState {
    /// The same unit vector on every top site.
    Product(Vec<C64>),
    /// Identity / χ on every top site.
    MaximallyMixed,
}

impl CapState {
    /// `|0>` on every top site.
    pub fn zero(chi: usize) -> Self {
        let mut v = vec![ZERO; chi];
        v[0] = ONE;
        CapState::Product(v)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CapState::Product(_) => "product",
            CapState::MaximallyMixed => "maximally-mixed",
        }
    }

    fn validate(&self, chi: usize) -> Result<()> {
        if let CapState::Product(v) = self {
            if v.len() != chi {
                return Err(Error::InvalidArgument(format!("cap vector length {} != {chi}", v.len())));
            }
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-12 || !n.is_finite() {
                return Err(Error::InvalidArgument(format!("cap vector norm {n}")));
            }
        }
        Ok(())
    }
}

/// Finitely many layers (bottom first) below a cap state.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteRangeMera {
    layers: Vec<Layer>,
    cap: CapState,
}

impl FiniteRangeMera {
    pub fn new(layers: Vec<Layer>, cap: CapState) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("w* must be >= 1".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].chi_out != pair[1].chi_in || pair[0].b != pair[1].b {
                return Err(Error::Shape("finite-range layers do not chain".into()));
            }
        }
        cap.validate(layers.last().unwrap().chi_out)?;
        Ok(Self { layers, cap })
    }

    /// The first `wstar` levels of a scale-invariant network (transitional
    /// layers included) below `cap`.
    pub fn from_scale_invariant(si: &ScaleInvariantMera, wstar: usize, cap: CapState) -> Result<Self> {
        if wstar == 0 {
            return Err(Error::InvalidArgument("w* must be >= 1".into()));
        }
        let layers = (0..wstar).map(|n| si.layer_at(n).clone()).collect();
        Self::new(layers, cap)
    }

    pub fn wstar(&self) -> usize {
        self.layers.len()
    }

    pub fn b(&self) -> usize {
        self.layers[0].b
    }

    /// Top bond dimension.
    pub fn chi(&self) -> usize {
        self.layers.last().unwrap().chi_out
    }

    pub fn physical_dim(&self) -> usize {
        self.layers[0].chi_in
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn cap(&self) -> &CapState {
        &self.cap
    }

    /// Characteristic length ξ = b^{w*} in sites.
    pub fn xi(&self) -> usize {
        self.b().pow(self.wstar() as u32)
    }
}

pub fn build_finite_range(chi: usize, b: usize, wstar: usize, cap: CapState, seed: u64) -> Result<FiniteRangeMera> {
    let si = build_scale_invariant(chi, b, seed)?;
    FiniteRangeMera::from_scale_invariant(&si, wstar, cap)
}

impl FiniteRangeMera {
    /// Purified state of sites `[lo, hi]` at `level` (0 = physical), obtained
    /// by descending the cap through the cone of the window.
    pub fn window(&self, level: usize, lo: i64, hi: i64) -> Result<Purified> {
        let w = self.wstar();
        if level > w {
            return Err(Error::InvalidArgument(format!("level {level} above the cap at {w}")));
        }
        let tower = interval_tower(lo, hi, w - level, self.b());
        let (t0, t1) = *tower.last().unwrap();
        let n = (t1 - t0 + 1) as usize;
        let mut p = match &self.cap {
            CapState::Product(v) => Purified::product(t0, &vec![v.clone(); n]),
            CapState::MaximallyMixed => Purified::maximally_mixed(t0, n, self.chi()),
        };
        for j in (level..w).rev() {
            let (a, c) = tower[j - level];
            p = p.descend(&self.layers[j], a, c)?;
        }
        Ok(p)
    }
}

/// `[lo, hi]` followed by its images `levels` times up.
pub(crate) fn interval_tower(lo: i64, hi: i64, levels: usize, b: usize) -> Vec<(i64, i64)> {
    let mut out = vec![(lo, hi)];
    for _ in 0..levels {
        let (a, c) = *out.last().unwrap();
        out.push(ascend_interval(a, c, b));
    }
    out
}

/// Sites touched one level up by the given sites.
pub fn ascend_sites(sites: &BTreeSet<i64>, b: usize) -> BTreeSet<i64> {
    let b = b as i64;
    let mut out = BTreeSet::new();
    for &s in sites {
        // disentanglers sit on (bk + b - 1, bk + b)
        let partner = match s.rem_euclid(b) {
            0 => Some(s - 1),
            r if r == b - 1 => Some(s + 1),
            _ => None,
        };
        out.insert(s.div_euclid(b));
        if let Some(p) = partner {
            out.insert(p.div_euclid(b));
        }
    }
    out
}

/// Per-level supports of the causal cone, level 0 being `sites` itself.
pub fn causal_cone_sites(sites: &BTreeSet<i64>, depth: usize, b: usize) -> Vec<BTreeSet<i64>> {
    let mut levels = vec![sites.clone()];
    for _ in 0..depth {
        let next = ascend_sites(levels.last().unwrap(), b);
        levels.push(next);
    }
    levels
}

/// First level at which the cones of two sites share a site.
pub fn cone_merge_level(x: i64, y: i64, b: usize) -> usize {
    let (mut a, mut c) = (BTreeSet::from([x]), BTreeSet::from([y]));
    let mut level = 0;
    while a.is_disjoint(&c) {
        a = ascend_sites(&a, b);
        c = ascend_sites(&c, b);
        level += 1;
    }
    level
}

/// Closed interval of sites one level up from `[lo, hi]`.
pub fn ascend_interval(lo: i64, hi: i64, b: usize) -> (i64, i64) {
    let s = ascend_sites(&BTreeSet::from([lo, hi]), b);
    (*s.first().unwrap(), *s.last().unwrap())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub u: TensorRecord,
    pub w: TensorRecord,
}

impl LayerRecord {
    pub fn to_layer(&self) -> Result<Layer> {
        Layer::new(Tensor::try_from(&self.u)?, Tensor::try_from(&self.w)?)
    }
}

/// JSON form of either network kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRecord {
    pub kind: String,
    pub chi: usize,
    pub b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wstar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_vector: Option<TensorRecord>,
    /// Bottom first. For scale-invariant networks the last entry is the
    /// repeated layer and the others are transitional.
    pub layers: Vec<LayerRecord>,
}

impl From<&ScaleInvariantMera> for NetworkRecord {
    fn from(m: &ScaleInvariantMera) -> Self {
        let mut layers: Vec<LayerRecord> = m.transitional.iter().map(Layer::to_record).collect();
        layers.push(m.layer.to_record());
        NetworkRecord { kind: "scale-invariant".into(), chi: m.chi(), b: m.b(), wstar: None, cap: None, cap_vector: None, layers }
    }
}

impl From<&FiniteRangeMera> for NetworkRecord {
    fn from(m: &FiniteRangeMera) -> Self {
        let cap_vector = match &m.cap {
            CapState::Product(v) => Some(Tensor::from_parts(vec![v.len()], v.clone()).to_record()),
            CapState::MaximallyMixed => None,
        };
        NetworkRecord {
            kind: "finite-range".into(),
            chi: m.chi(),
            b: m.b(),
            wstar: Some(m.wstar()),
            cap: Some(m.cap.kind().into()),
            cap_vector,
            layers: m.layers.iter().map(Layer::to_record).collect(),
        }
    }
}

impl NetworkRecord {
    pub fn to_scale_invariant(&self) -> Result<ScaleInvariantMera> {
        if self.kind != "scale-invariant" {
            return Err(Error::InvalidArgument(format!("network kind {}", self.kind)));
        }
        let mut layers = self.layers.iter().map(LayerRecord::to_layer).collect::<Result<Vec<_>>>()?;
        let top = layers.pop().ok_or_else(|| Error::InvalidArgument("no layers".into()))?;
        ScaleInvariantMera::with_transitional(top, layers)
    }

    pub fn to_finite_range(&self) -> Result<FiniteRangeMera> {
        if self.kind != "finite-range" {
            return Err(Error::InvalidArgument(format!("network kind {}", self.kind)));
        }
        let layers = self.layers.iter().map(LayerRecord::to_layer).collect::<Result<Vec<_>>>()?;
        let cap = match (self.cap.as_deref(), &self.cap_vector) {
            (Some("product"), Some(v)) => CapState::Product(Tensor::try_from(v)?.into_data()),
            (Some("maximally-mixed"), None) => CapState::MaximallyMixed,
            _ => return Err(Error::InvalidArgument("invalid cap description".into())),
        };
        let m = FiniteRangeMera::new(layers, cap)?;
        if self.wstar != Some(m.wstar()) {
            return Err(Error::InvalidArgument("w* does not match layer count".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_layers_satisfy_constraints() {
        for seed in 0..10 {
            let l = Layer::random(2, 2, 3, seed).unwrap();
            assert!(l.unitarity_residual() < LAYER_TOL);
            assert!(l.isometry_residual() < LAYER_TOL);
        }
        let t = Layer::random(2, 6, 3, 4).unwrap();
        assert_eq!(t.w().shape(), &[2, 2, 2, 6]);
        assert!(Layer::random(2, 9, 3, 0).is_err());
        assert!(Layer::random(2, 2, 4, 0).is_err());
    }

    #[test]
    fn identity_like_layer() {
        let l = Layer::identity_like(3, 3).unwrap();
        assert!((l.w().get(&[1, 2, 1, 2]) - C64::new(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(l.w().get(&[1, 2, 0, 2]), ZERO);
        assert!(Layer::identity_like(2, 2).is_ok());
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(build_scale_invariant(3, 3, 7).unwrap(), build_scale_invariant(3, 3, 7).unwrap());
        assert_ne!(build_scale_invariant(3, 3, 7).unwrap(), build_scale_invariant(3, 3, 8).unwrap());
        assert!(build_scale_invariant(1, 3, 0).is_err());
    }

    #[test]
    fn finite_range_copies_layer() {
        let si = build_scale_invariant(2, 3, 1).unwrap();
        let fr = FiniteRangeMera::from_scale_invariant(&si, 4, CapState::zero(2)).unwrap();
        assert_eq!(fr.xi(), 81);
        assert!(fr.layers().iter().all(|l| l == si.layer()));
        assert!(FiniteRangeMera::from_scale_invariant(&si, 0, CapState::zero(2)).is_err());
        let bad = CapState::Product(vec![ONE, ONE]);
        assert!(FiniteRangeMera::from_scale_invariant(&si, 1, bad).is_err());
    }

    #[test]
    fn cone_merge_levels() {
        assert_eq!(cone_merge_level(0, 1, 3), 1);
        assert_eq!(cone_merge_level(0, 81, 3), 4);
        let single = causal_cone_sites(&BTreeSet::from([5]), 8, 3);
        assert!(single.iter().skip(1).all(|s| s.len() <= 2));
    }

    #[test]
    fn record_roundtrip() {
        let si = build_scale_invariant(2, 3, 3).unwrap();
        let rec = NetworkRecord::from(&si);
        let text = serde_json::to_string(&rec).unwrap();
        let back: NetworkRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_scale_invariant().unwrap(), si);
        let fr = FiniteRangeMera::from_scale_invariant(&si, 2, CapState::MaximallyMixed).unwrap();
        let rec = NetworkRecord::from(&fr);
        assert_eq!(rec.to_finite_range().unwrap(), fr);
    }
}
