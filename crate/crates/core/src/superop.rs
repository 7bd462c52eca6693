//! One-site scaling superoperator and its scaling operators.

use serde::{Deserialize, Serialize};

use crate::linalg::{eig_general_flagged, CLUSTER_TOL};
use crate::mera::{ascend_one_site, Layer, ScaleInvariantMera};
use crate::tensor::{ncon, Tensor, TensorRecord, C64, ONE, REAL_TOL, ZERO};
use crate::{Error, Result};

/// The map `O ↦ w^†(1 ⊗ O ⊗ 1)w` as a χ²×χ² matrix on row-major `vec(O)`.
#[derive(Clone, Debug)]
pub struct ScalingSuperoperator {
    matrix: Tensor,
    b: usize,
    chi: usize,
}

impl ScalingSuperoperator {
    pub fn from_layer(layer: &Layer) -> Result<Self> {
        if layer.b() != 3 {
            return Err(Error::Unsupported("one-site scaling superoperator needs b = 3".into()));
        }
        if layer.chi_in() != layer.chi_out() {
            return Err(Error::Shape("scaling superoperator needs a bond-preserving layer".into()));
        }
        let chi = layer.chi_in();
        let w = layer.w();
        let s = ncon(&[w, &w.conj()], &[&[1, -4, 2, -2], &[1, -3, 2, -1]])?;
        Ok(Self { matrix: s.reshaped(&[chi * chi, chi * chi]), b: 3, chi })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    /// Apply to a χ×χ operator.
    pub fn apply(&self, op: &Tensor) -> Result<Tensor> {
        let c = self.chi;
        if op.shape() != [c, c] {
            return Err(Error::Shape(format!("operator {:?}, expected [{c}, {c}]", op.shape())));
        }
        let v = op.clone().reshaped(&[c * c, 1]);
        Ok(self.matrix.matmul(&v).reshaped(&[c, c]))
    }

    /// `‖S(1) − 1‖∞`.
    pub fn unitality_residual(&self) -> f64 {
        let id = Tensor::identity(self.chi);
        self.apply(&id).map(|s| s.max_abs_diff(&id)).unwrap_or(f64::INFINITY)
    }
}

pub fn build_scaling_superoperator(mera: &ScaleInvariantMera) -> Result<ScalingSuperoperator> {
    ScalingSuperoperator::from_layer(mera.layer())
}

/// `S^n(op)`.
pub fn apply_n_times(s: &ScalingSuperoperator, op: &Tensor, n: usize) -> Result<Tensor> {
    let mut cur = op.clone();
    for _ in 0..n {
        cur = s.apply(&cur)?;
    }
    if n == 0 && op.shape() != [s.chi, s.chi] {
        return Err(Error::Shape(format!("operator {:?}, expected [{1}, {1}]", op.shape(), s.chi)));
    }
    Ok(cur)
}

/// Apply the channel through the layer tensors rather than the matrix.
pub fn ascend_n_times(layer: &Layer, op: &Tensor, n: usize) -> Result<Tensor> {
    let mut cur = op.clone();
    for _ in 0..n {
        cur = ascend_one_site(&cur, layer)?;
    }
    Ok(cur)
}

#[derive(Clone, Debug)]
pub struct ScalingOperator {
    pub lambda: C64,
    /// −log_b |λ|.
    pub delta: f64,
    /// arg λ.
    pub phase: f64,
    /// Right eigen-operator, unit Hilbert–Schmidt norm; Hermitian when λ is real
    /// and non-degenerate.
    pub op: Tensor,
    /// Dual operator: `Tr(dual^† op_β) = δ_αβ`.
    pub dual: Tensor,
    pub cluster: usize,
}

#[derive(Clone, Debug)]
pub struct ScalingOperatorSet {
    pub b: usize,
    pub chi: usize,
    /// Ordered by non-decreasing Δ.
    pub operators: Vec<ScalingOperator>,
    /// Index groups of coinciding eigenvalues.
    pub clusters: Vec<Vec<usize>>,
    /// Set when the spectrum could not be biorthonormalised.
    pub defective: bool,
    pub condition: f64,
    /// `max_{α≠β} |Tr(dual_α^† φ_β)|`.
    pub biorthogonality_error: f64,
    /// `max_{α≠β} |Tr(φ_α φ_β)|` with both operators at unit norm.
    pub overlap_error: f64,
}

impl ScalingOperatorSet {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.operators.iter().map(|o| o.lambda).collect()
    }

    pub fn dimensions(&self) -> Vec<f64> {
        self.operators.iter().map(|o| o.delta).collect()
    }

    /// Nontrivial operators (identity removed) with real λ, in Δ order.
    pub fn real_nontrivial(&self) -> Vec<usize> {
        (1..self.operators.len())
            .filter(|&i| self.operators[i].lambda.im.abs() < REAL_TOL && self.operators[i].lambda.norm() > 0.0)
            .collect()
    }

    pub fn to_table(&self) -> ScalingTable {
        ScalingTable {
            b: self.b,
            chi: self.chi,
            defective: self.defective,
            condition: self.condition,
            biorthogonality_error: self.biorthogonality_error,
            rows: self
                .operators
                .iter()
                .enumerate()
                .map(|(alpha, o)| ScalingRow {
                    alpha,
                    re_lambda: o.lambda.re,
                    im_lambda: o.lambda.im,
                    delta: o.delta,
                    phase: o.phase,
                    cluster: o.cluster,
                    operator: o.op.to_record(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingRow {
    pub alpha: usize,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub delta: f64,
    pub phase: f64,
    pub cluster: usize,
    pub operator: TensorRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingTable {
    pub b: usize,
    pub chi: usize,
    pub defective: bool,
    pub condition: f64,
    pub biorthogonality_error: f64,
    pub rows: Vec<ScalingRow>,
}

fn reshape_vec(v: &[C64], chi: usize) -> Tensor {
    Tensor::from_parts(vec![chi, chi], v.to_vec())
}

/// `Tr(a b)` for square matrices.
pub fn trace_product(a: &Tensor, b: &Tensor) -> C64 {
    let n = a.rows();
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..n {
            s += a.get(&[i, j]) * b.get(&[j, i]);
        }
    }
    s
}

/// Eigen-data of the scaling superoperator. A defective spectrum is returned
/// with `defective` set rather than as an error.
pub fn spectral_decompose(s: &ScalingSuperoperator) -> Result<ScalingOperatorSet> {
    let d = eig_general_flagged(&s.matrix)?;
    let chi = s.chi;
    let n = d.eigenvalues.len();
    let ln_b = (s.b as f64).ln();
    let mut cluster_of = vec![0; n];
    for (c, members) in d.clusters.iter().enumerate() {
        for &i in members {
            cluster_of[i] = c;
        }
    }
    let mut operators = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = d.eigenvalues[i];
        let mut op = reshape_vec(&d.right_vector(i), chi);
        let mut dual = reshape_vec(&d.left_vector(i), chi);
        let single = d.clusters[cluster_of[i]].len() == 1;
        if lambda.im.abs() < REAL_TOL && single {
            // φ^† is an eigen-operator for the same λ, so φ^† = e^{iθ} φ
            let k = op.data().iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
            let (r, c) = (k / chi, k % chi);
            let ratio = op.get(&[c, r]).conj() / op.get(&[r, c]);
            let half = C64::from_polar(1.0, ratio.arg() / 2.0);
            op = op.scale(half);
            dual = dual.scale(half);
        }
        // unit Hilbert–Schmidt norm, dual rescaled to keep Tr(dual^† op) = 1
        let nrm = op.norm();
        op = op.scale(C64::new(1.0 / nrm, 0.0));
        dual = dual.scale(C64::new(nrm, 0.0));
        if i == 0 && (lambda - ONE).norm() < CLUSTER_TOL {
            // pin the identity's phase
            let tr = op.trace();
            let ph = C64::from_polar(1.0, -tr.arg());
            op = op.scale(ph);
            dual = dual.scale(ph);
        }
        operators.push(ScalingOperator {
            lambda,
            delta: -lambda.norm().ln() / ln_b,
            phase: lambda.arg(),
            op,
            dual,
            cluster: cluster_of[i],
        });
    }
    let mut biorth: f64 = 0.0;
    let mut overlap: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let pair = operators[a].dual.inner(&operators[b].op);
            let target = if a == b { ONE } else { ZERO };
            biorth = biorth.max((pair - target).norm());
            if a != b {
                overlap = overlap.max(trace_product(&operators[a].op, &operators[b].op).norm());
            }
        }
    }
    Ok(ScalingOperatorSet {
        b: s.b,
        chi,
        operators,
        clusters: d.clusters,
        defective: d.defective,
        condition: d.condition,
        biorthogonality_error: biorth,
        overlap_error: overlap,
    })
}
