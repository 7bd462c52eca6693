//! Experiment configuration: one JSON document, unknown keys rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::holography::STABILITY_BOUND;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ScalingDims,
    Flow,
    Crossover,
    HoloCompare,
    Entropy,
    MpsExport,
    Optimize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ScalingDims,
        ExperimentKind::Flow,
        ExperimentKind::Crossover,
        ExperimentKind::HoloCompare,
        ExperimentKind::Entropy,
        ExperimentKind::MpsExport,
        ExperimentKind::Optimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ScalingDims => "scaling-dims",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Crossover => "crossover",
            ExperimentKind::HoloCompare => "holo-compare",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::MpsExport => "mps-export",
            ExperimentKind::Optimize => "optimize",
        }
    }

    /// File stem for artifacts.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkSource {
    /// Random isometric layers from the seed.
    #[default]
    Random,
    /// Variationally optimised for the transverse-field Ising chain.
    Optimized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapKind {
    /// `|0⟩` on every top site.
    #[default]
    Product,
    MaximallyMixed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    #[default]
    ScaleInvariant,
    FiniteRange,
}

/// Every key is optional; absent keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the command-line kind when present.
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub chi: usize,
    pub b: usize,
    pub network: NetworkSource,
    /// Optimisation sweeps for `optimize` and optimised networks.
    pub sweeps: usize,
    /// Transverse field g of `−Σ XX − g Σ Z`.
    pub field: f64,
    /// Layers below the cap of a finite-range network.
    pub wstar: usize,
    pub cap: CapKind,
    /// Entropy experiments only.
    pub state: StateKind,
    /// Defaults to `b^{w*}`.
    pub zstar: Option<f64>,
    /// Defaults to `Δ_α + Δ_β` measured on the network.
    pub eta: Option<f64>,
    /// Scaling-operator indices; default to the lowest real nontrivial one.
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
    pub mass_squared: Vec<f64>,
    /// Powers of b.
    pub separations: Option<Vec<u64>>,
    pub block_sizes: Option<Vec<usize>>,
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    /// Output directory; `--out` overrides.
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            chi: 2,
            b: 3,
            network: NetworkSource::Random,
            sweeps: 300,
            field: 1.0,
            wstar: 2,
            cap: CapKind::Product,
            state: StateKind::ScaleInvariant,
            zstar: None,
            eta: None,
            alpha: None,
            beta: None,
            mass_squared: vec![0.0, 1.0, 2.0],
            separations: None,
            block_sizes: None,
            z_min: 0.1,
            z_max: 100.0,
            z_points: 41,
            out: None,
        }
    }
}

/// Keys accepted at the top level.
pub const KEYS: [&str; 21] = [
    "experiment",
    "seed",
    "chi",
    "b",
    "network",
    "sweeps",
    "field",
    "wstar",
    "cap",
    "state",
    "zstar",
    "eta",
    "alpha",
    "beta",
    "mass_squared",
    "separations",
    "block_sizes",
    "z_min",
    "z_max",
    "z_points",
    "out",
];

pub const CHI_RANGE: (usize, usize) = (2, 8);
pub const WSTAR_RANGE: (usize, usize) = (1, 6);
pub const SWEEPS_RANGE: (usize, usize) = (1, 100_000);
/// Largest cell bond `χ^{w*}` for MPS experiments.
pub const MPS_BOND_LIMIT: usize = 64;
pub const MAX_SEPARATION_EXPONENT: u32 = 15;
pub const MAX_BLOCK: usize = 81;
pub const MAX_Z_POINTS: usize = 10_000;
/// Smallest geodesic separation; well above the cutoff.
pub const MIN_Z: f64 = 1e-2;

/// One schema or range problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending key, or `"$"` for the whole document.
    pub key: String,
    pub message: String,
}

impl Violation {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Result of validation without running anything.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub experiment: Option<ExperimentKind>,
    pub errors: Vec<Violation>,
}

impl ExperimentConfig {
    /// `b^{w*}`.
    pub fn xi(&self) -> f64 {
        (self.b as f64).powi(self.wstar as i32)
    }

    pub fn zstar_or_xi(&self) -> f64 {
        self.zstar.unwrap_or_else(|| self.xi())
    }

    pub fn separations_for(&self, kind: ExperimentKind) -> Vec<u64> {
        if let Some(s) = &self.separations {
            return s.clone();
        }
        let b = self.b as u64;
        match kind {
            ExperimentKind::Crossover | ExperimentKind::HoloCompare => (1..=self.wstar as u32 + 3).map(|q| b.pow(q)).collect(),
            _ => (1..=5).map(|q| b.pow(q)).collect(),
        }
    }

    pub fn block_sizes_for(&self) -> Vec<usize> {
        if let Some(s) = &self.block_sizes {
            return s.clone();
        }
        match self.state {
            StateKind::ScaleInvariant => vec![2, 3, 4, 6, 8, 9, 12],
            StateKind::FiniteRange => {
                let xi = self.xi() as usize;
                (3..=6).map(|k| k * xi).collect()
            }
        }
    }

    /// Range checks, given the experiment the config is for (if known).
    pub fn check(&self, kind: Option<ExperimentKind>) -> Vec<Violation> {
        let mut v = Vec::new();
        let in_range = |x: usize, (lo, hi): (usize, usize)| x >= lo && x <= hi;
        if !in_range(self.chi, CHI_RANGE) {
            v.push(Violation::new("chi", format!("chi = {} outside [{}, {}]", self.chi, CHI_RANGE.0, CHI_RANGE.1)));
        }
        if self.b != 3 {
            v.push(Violation::new("b", format!("b = {} unsupported; experiments need ternary networks (b = 3)", self.b)));
        }
        if !in_range(self.wstar, WSTAR_RANGE) {
            v.push(Violation::new("wstar", format!("wstar = {} outside [{}, {}]", self.wstar, WSTAR_RANGE.0, WSTAR_RANGE.1)));
        }
        if !in_range(self.sweeps, SWEEPS_RANGE) {
            v.push(Violation::new("sweeps", format!("sweeps = {} outside [{}, {}]", self.sweeps, SWEEPS_RANGE.0, SWEEPS_RANGE.1)));
        }
        if !self.field.is_finite() || self.field.abs() > 100.0 {
            v.push(Violation::new("field", "field must be finite with |g| <= 100"));
        }
        if let Some(z) = self.zstar {
            if !(z.is_finite() && z > 0.0) {
                v.push(Violation::new("zstar", "zstar must be finite and positive"));
            }
        }
        if let Some(e) = self.eta {
            if !(e.is_finite() && e > 0.0) {
                v.push(Violation::new("eta", "eta must be finite and positive"));
            }
        }
        for &m2 in &self.mass_squared {
            if !m2.is_finite() {
                v.push(Violation::new("mass_squared", "values must be finite"));
            } else if m2 < STABILITY_BOUND {
                v.push(Violation::new("mass_squared", format!("m^2 = {m2} below the stability bound {STABILITY_BOUND}")));
            }
        }
        if let Some(seps) = &self.separations {
            if seps.windows(2).any(|p| p[1] <= p[0]) {
                v.push(Violation::new("separations", "separations must increase strictly"));
            }
            for &r in seps {
                match crate::flow::exponent_of(r, self.b.max(2)) {
                    Some(q) if (1..=MAX_SEPARATION_EXPONENT).contains(&q) => {}
                    _ => v.push(Violation::new(
                        "separations",
                        format!("separation {r} is not b^q with 1 <= q <= {MAX_SEPARATION_EXPONENT}"),
                    )),
                }
            }
        }
        if let Some(blocks) = &self.block_sizes {
            if blocks.windows(2).any(|p| p[1] <= p[0]) {
                v.push(Violation::new("block_sizes", "block sizes must increase strictly"));
            }
            if blocks.iter().any(|&l| l == 0 || l > MAX_BLOCK) {
                v.push(Violation::new("block_sizes", format!("block sizes must lie in [1, {MAX_BLOCK}]")));
            }
        }
        if !(self.z_min.is_finite() && self.z_min >= MIN_Z) {
            v.push(Violation::new("z_min", format!("z_min must be finite and at least {MIN_Z}")));
        }
        if !(self.z_max.is_finite() && self.z_max > self.z_min) {
            v.push(Violation::new("z_max", "z_max must be finite and exceed z_min"));
        }
        if self.z_points < 2 || self.z_points > MAX_Z_POINTS {
            v.push(Violation::new("z_points", format!("z_points must lie in [2, {MAX_Z_POINTS}]")));
        }
        if let (Some(want), Some(kind)) = (self.experiment, kind) {
            if want != kind {
                v.push(Violation::new("experiment", format!("config is for '{want}' but '{kind}' was requested")));
            }
        }
        if let Some(kind) = kind.or(self.experiment) {
            v.extend(self.check_kind(kind));
        }
        v
    }

    fn check_kind(&self, kind: ExperimentKind) -> Vec<Violation> {
        let mut v = Vec::new();
        let needs = |v: &mut Vec<Violation>, n: usize, min: usize, key: &str| {
            if n < min {
                v.push(Violation::new(key, format!("{kind} needs at least {min} values")));
            }
        };
        let correlators = matches!(kind, ExperimentKind::Flow | ExperimentKind::Crossover | ExperimentKind::HoloCompare);
        if correlators && self.network == NetworkSource::Optimized && self.chi != 2 {
            v.push(Violation::new(
                "network",
                "optimised networks with chi != 2 have a transitional layer, so their scaling operators are not physical-site operators",
            ));
        }
        match kind {
            ExperimentKind::Flow => needs(&mut v, self.separations_for(kind).len(), 3, "separations"),
            ExperimentKind::Crossover | ExperimentKind::HoloCompare | ExperimentKind::MpsExport => {
                let bond = (self.chi as f64).powi(self.wstar as i32);
                if bond > MPS_BOND_LIMIT as f64 {
                    v.push(Violation::new(
                        "wstar",
                        format!("chi^wstar = {bond} exceeds the MPS bond limit {MPS_BOND_LIMIT}"),
                    ));
                }
                if kind != ExperimentKind::MpsExport {
                    needs(&mut v, self.separations_for(kind).len(), 3, "separations");
                }
            }
            ExperimentKind::Entropy => {
                needs(&mut v, self.block_sizes_for().len(), 4, "block_sizes");
                if self.state == StateKind::ScaleInvariant && self.chi > 4 {
                    v.push(Violation::new("chi", "scale-invariant block entropies support chi <= 4"));
                }
            }
            ExperimentKind::ScalingDims | ExperimentKind::Optimize => {}
        }
        v
    }
}

/// Parse and range-check a config document, collecting every problem. The
/// config is returned only when there are none.
pub fn parse(text: &str, kind: Option<ExperimentKind>) -> (Option<ExperimentConfig>, Vec<Violation>) {
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return (None, vec![Violation::new("$", format!("not a JSON document: {e}"))]),
    };
    let Some(obj) = value.as_object() else {
        return (None, vec![Violation::new("$", "config must be a JSON object")]);
    };
    let mut errors: Vec<Violation> = obj
        .keys()
        .filter(|k| !KEYS.contains(&k.as_str()))
        .map(|k| Violation::new(k, "unknown key"))
        .collect();
    let mut known = serde_json::Map::new();
    for key in KEYS {
        if let Some(field) = obj.get(key) {
            let mut probe = serde_json::Map::new();
            probe.insert(key.to_string(), field.clone());
            match serde_json::from_value::<ExperimentConfig>(serde_json::Value::Object(probe)) {
                Ok(_) => {
                    known.insert(key.to_string(), field.clone());
                }
                Err(e) => errors.push(Violation::new(key, e.to_string())),
            }
        }
    }
    // Range-check whatever parsed, so one report names every problem.
    match serde_json::from_value::<ExperimentConfig>(serde_json::Value::Object(known)) {
        Ok(cfg) => {
            errors.extend(cfg.check(kind));
            let ok = errors.is_empty();
            (ok.then_some(cfg), errors)
        }
        Err(e) => {
            errors.push(Violation::new("$", e.to_string()));
            (None, errors)
        }
    }
}

/// Schema and range report for a document.
pub fn validate(text: &str, kind: Option<ExperimentKind>) -> ValidationReport {
    let (cfg, errors) = parse(text, kind);
    ValidationReport { valid: errors.is_empty(), experiment: kind.or(cfg.and_then(|c| c.experiment)), errors }
}
