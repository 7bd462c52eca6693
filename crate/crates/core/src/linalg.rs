//! Spectral and singular-value routines on square/rectangular [`Tensor`]
//! matrices. Schur, SVD and Hermitian eigensolvers come from nalgebra; the
//! non-symmetric eigenvector extraction and biorthonormalisation live here.

use nalgebra::{DMatrix, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, C64, ONE, ZERO};

/// Eigenvalues closer than this form a degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-9;

pub(crate) fn to_na(m: &Tensor) -> DMatrix<C64> {
    assert_eq!(m.rank(), 2, "expected a matrix");
    DMatrix::from_row_slice(m.shape()[0], m.shape()[1], m.data())
}

pub(crate) fn from_na(m: &DMatrix<C64>) -> Tensor {
    let (r, c) = m.shape();
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            data.push(m[(i, j)]);
        }
    }
    Tensor::from_parts(vec![r, c], data)
}

fn check_matrix(m: &Tensor, what: &'static str) -> Result<()> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!("{what}: expected a matrix, got {:?}", m.shape())));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Sorted by descending modulus, then descending real, then imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Columns are right eigenvectors (unit 2-norm).
    pub right: Tensor,
    /// Columns are left eigenvectors, scaled so that `left[:,i]^† right[:,j] = δ_ij`.
    pub left: Tensor,
    /// Groups of indices whose eigenvalues agree within [`CLUSTER_TOL`].
    pub clusters: Vec<Vec<usize>>,
    /// 2-norm condition estimate of the right-eigenvector matrix.
    pub condition: f64,
    /// Max deviation of `L^† R` from the identity.
    pub biorthogonality_error: f64,
    pub defective: bool,
}

impl SpectralDecomposition {
    /// `Σ λ_i r_i l_i^†`.
    pub fn reconstruct(&self) -> Tensor {
        let n = self.eigenvalues.len();
        let mut rl = self.right.clone();
        for i in 0..n {
            for j in 0..n {
                let v = rl.get(&[i, j]) * self.eigenvalues[j];
                rl.set(&[i, j], v);
            }
        }
        rl.matmul(&self.left.dagger())
    }

    pub fn right_vector(&self, i: usize) -> Vec<C64> {
        column(&self.right, i)
    }

    pub fn left_vector(&self, i: usize) -> Vec<C64> {
        column(&self.left, i)
    }
}

pub(crate) fn column(m: &Tensor, j: usize) -> Vec<C64> {
    (0..m.shape()[0]).map(|i| m.get(&[i, j])).collect()
}

fn eig_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    const TIE: f64 = 1e-12;
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > TIE {
        return mb.partial_cmp(&ma).unwrap();
    }
    if (a.re - b.re).abs() > TIE {
        return b.re.partial_cmp(&a.re).unwrap();
    }
    b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal)
}

/// Eigen-decomposition of a general square matrix.
///
/// Returns [`Error::Defective`] when the eigenvectors cannot be
/// biorthonormalised; use [`eig_general_flagged`] to get the decomposition
/// together with its quality flags instead.
pub fn eig_general(m: &Tensor) -> Result<SpectralDecomposition> {
    let d = eig_general_flagged(m)?;
    if d.defective {
        return Err(Error::Defective(format!(
            "eigenvector matrix condition {:.3e}, biorthogonality error {:.3e}",
            d.condition, d.biorthogonality_error
        )));
    }
    Ok(d)
}

pub fn eig_general_flagged(m: &Tensor) -> Result<SpectralDecomposition> {
    check_matrix(m, "eig_general")?;
    let n = m.shape()[0];
    if m.shape()[1] != n {
        return Err(Error::Shape(format!("eig_general: non-square {:?}", m.shape())));
    }
    const MAX_ITER: usize = 10_000;
    let schur = Schur::try_new(to_na(m), f64::EPSILON, MAX_ITER).ok_or(Error::NoConvergence {
        what: "Schur iteration",
        iterations: MAX_ITER,
        residual: f64::NAN,
    })?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    // eigenvectors of the triangular factor by back substitution
    let mut x = DMatrix::<C64>::zeros(n, n);
    let mut defective_hint = false;
    for i in 0..n {
        let lam = t[(i, i)];
        x[(i, i)] = ONE;
        for j in (0..i).rev() {
            let mut s = ZERO;
            for k in (j + 1)..=i {
                s += t[(j, k)] * x[(k, i)];
            }
            let den = t[(j, j)] - lam;
            if den.norm() < CLUSTER_TOL * scale.max(1.0) {
                // same cluster: a non-vanishing coupling means a Jordan block
                if s.norm() > 1e-8 * scale.max(1.0) {
                    defective_hint = true;
                }
                x[(j, i)] = ZERO;
            } else {
                x[(j, i)] = -s / den;
            }
        }
    }
    let mut r = &q * x;
    for j in 0..n {
        let nrm = r.column(j).norm();
        r.column_mut(j).scale_mut(1.0 / nrm);
    }

    let mut eig: Vec<(C64, usize)> = (0..n).map(|i| (t[(i, i)], i)).collect();
    eig.sort_by(|a, b| eig_order(&a.0, &b.0));
    let eigenvalues: Vec<C64> = eig.iter().map(|e| e.0).collect();
    let mut rs = DMatrix::<C64>::zeros(n, n);
    for (newj, &(_, oldj)) in eig.iter().enumerate() {
        rs.set_column(newj, &r.column(oldj));
    }

    let sv = rs.clone().singular_values();
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let (left, biorth, inverted) = match rs.clone().try_inverse() {
        Some(inv) => {
            let l = inv.adjoint();
            let err = (l.adjoint() * &rs - DMatrix::<C64>::identity(n, n))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            (l, err, true)
        }
        None => (DMatrix::<C64>::zeros(n, n), f64::INFINITY, false),
    };

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|&j| (eigenvalues[j] - eigenvalues[i]).norm() < CLUSTER_TOL))
        {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }

    let defective = defective_hint || !inverted || condition > 1e10 || biorth > 1e-8;
    Ok(SpectralDecomposition {
        eigenvalues,
        right: from_na(&rs),
        left: from_na(&left),
        clusters,
        condition,
        biorthogonality_error: biorth,
        defective,
    })
}

/// Polar decomposition `m = Q P` with `Q^† Q = 1` and `P` Hermitian positive
/// semidefinite. Requires `rows >= cols`.
pub fn svd_polar(m: &Tensor) -> Result<(Tensor, Tensor)> {
    check_matrix(m, "svd_polar")?;
    let (r, c) = (m.shape()[0], m.shape()[1]);
    if r < c {
        return Err(Error::Shape(format!("svd_polar needs rows >= cols, got {r}x{c}")));
    }
    let svd = to_na(m).svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let q = &u * &vt;
    let s = DMatrix::<C64>::from_diagonal(&svd.singular_values.map(|x| C64::new(x, 0.0)));
    let p = vt.adjoint() * s * &vt;
    Ok((from_na(&q), from_na(&p)))
}

/// Isometry `Q` (rows x cols) minimising `Re Tr(Q · env)` where `env` is
/// cols x rows. This is the update kernel for disentanglers and isometries.
pub(crate) fn minimizing_isometry(env: &Tensor) -> Tensor {
    let svd = to_na(env).svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    // env = U S V^†  =>  Q = -V U^†
    from_na(&(-(vt.adjoint() * u.adjoint())))
}

/// Thin SVD `m = U diag(s) V^†`, singular values descending.
pub fn svd(m: &Tensor) -> (Tensor, Vec<f64>, Tensor) {
    let svd = to_na(m).svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let k = idx.len();
    let mut us = DMatrix::<C64>::zeros(u.nrows(), k);
    let mut vts = DMatrix::<C64>::zeros(k, vt.ncols());
    let mut s = Vec::with_capacity(k);
    for (n, &o) in idx.iter().enumerate() {
        us.set_column(n, &u.column(o));
        vts.set_row(n, &vt.row(o));
        s.push(svd.singular_values[o]);
    }
    (from_na(&us), s, from_na(&vts.adjoint()))
}

/// Haar-distributed isometry: orthonormalised complex Gaussian matrix.
pub fn random_isometry(rows: usize, cols: usize, seed: u64) -> Result<Tensor> {
    if rows < cols || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "random_isometry needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<C64>::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let mut q = q.columns(0, cols).into_owned();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    Ok(from_na(&q))
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, vectors
/// as columns.
pub fn herm_eig(m: &Tensor) -> (Vec<f64>, Tensor) {
    let h = to_na(&m.hermitian_part());
    let e = h.symmetric_eigen();
    let n = e.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
    let mut v = DMatrix::<C64>::zeros(n, n);
    for (k, &o) in idx.iter().enumerate() {
        v.set_column(k, &e.eigenvectors.column(o));
    }
    (idx.iter().map(|&o| e.eigenvalues[o]).collect(), from_na(&v))
}

pub fn herm_eigenvalues(m: &Tensor) -> Vec<f64> {
    let mut ev: Vec<f64> = to_na(&m.hermitian_part()).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn inverse(m: &Tensor) -> Option<Tensor> {
    to_na(m).try_inverse().map(|x| from_na(&x))
}

/// Max |m^† m − 1| for a matrix with orthonormal columns.
pub fn isometry_residual(m: &Tensor) -> f64 {
    let g = m.dagger().matmul(m);
    g.max_abs_diff(&Tensor::identity(g.shape()[0]))
}

/// Von Neumann entropy (nats) of a spectrum; values below `floor` count as 0.
pub fn entropy_of_spectrum(p: &[f64], floor: f64) -> f64 {
    p.iter().filter(|&&x| x > floor).map(|&x| -x * x.ln()).sum()
}

/// Thin QR `m = Q R` with the diagonal of `R` real and non-negative.
pub fn qr_positive(m: &Tensor) -> (Tensor, Tensor) {
    let qr = to_na(m).qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            q.column_mut(i).iter_mut().for_each(|x| *x *= ph);
            r.row_mut(i).iter_mut().for_each(|x| *x *= ph.conj());
        }
    }
    (from_na(&q), from_na(&r))
}

/// Real least squares `min ‖X c − y‖` with `X` given by rows. Returns the
/// coefficients and the diagonal of `(XᵀX)⁻¹`.
pub fn solve_least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let yv = nalgebra::DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let c = svd.solve(&yv, 1e-14).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let xtx = x.transpose() * &x;
    let diag = match xtx.try_inverse() {
        Some(inv) => (0..k).map(|i| inv[(i, i)]).collect(),
        None => vec![f64::NAN; k],
    };
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares coefficients"));
    }
    Ok((c.iter().copied().collect(), diag))
}
