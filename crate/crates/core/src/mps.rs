//! Infinite matrix product states with a unit cell, built from finite-range
//! networks; transfer spectra and correlators.
//!
//! Site tensors are `[left, phys·anc, right]`. The optional ancilla factor
//! purifies a mixed cap: it rides along with the physical leg and is traced
//! whenever local quantities are evaluated.

use serde::{Deserialize, Serialize};

use crate::linalg::{eig_general, herm_eig, herm_eigenvalues, qr_positive, svd};
use crate::mera::{CapState, FiniteRangeMera, Layer};
use crate::tensor::{ncon, Tensor, TensorRecord, C64, ONE, ZERO};
use crate::{Error, Result};

/// Schmidt weights below this (relative to the largest) are dropped.
pub const WEIGHT_TOL: f64 = 1e-24;

/// Translation-invariant MPS with a unit cell of site tensors.
#[derive(Clone, Debug)]
pub struct Mps {
    tensors: Vec<Tensor>,
    phys: Vec<usize>,
    anc: Vec<usize>,
    /// Physical position of cell site 0.
    origin: i64,
}

/// Left and right transfer fixed points on every bond of the cell.
/// `left[i]` and `right[i]` live on the bond to the left of site `i`.
#[derive(Clone, Debug)]
pub struct Environments {
    pub left: Vec<Tensor>,
    pub right: Vec<Tensor>,
    /// Leading eigenvalue of the cell transfer before normalisation.
    pub eigenvalue: f64,
}

impl Mps {
    /// Cell tensors `[l, d, r]`; bonds must close cyclically.
    pub fn new(tensors: Vec<Tensor>) -> Result<Self> {
        let phys = tensors.iter().map(|t| t.shape().get(1).copied().unwrap_or(0)).collect();
        let anc = vec![1; tensors.len()];
        Self::with_ancillas(tensors, phys, anc)
    }

    fn with_ancillas(tensors: Vec<Tensor>, phys: Vec<usize>, anc: Vec<usize>) -> Result<Self> {
        let n = tensors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty unit cell".into()));
        }
        for i in 0..n {
            let s = tensors[i].shape();
            if s.len() != 3 || s[1] != phys[i] * anc[i] {
                return Err(Error::Shape(format!("site {i}: tensor {s:?}")));
            }
            let next = tensors[(i + 1) % n].shape()[0];
            if s[2] != next {
                return Err(Error::Shape(format!("bond after site {i}: {} vs {next}", s[2])));
            }
            if !tensors[i].is_finite() {
                return Err(Error::NonFinite("MPS tensor"));
            }
        }
        Ok(Self { tensors, phys, anc, origin: 0 })
    }

    /// Product state with one site per vector.
    pub fn product(vectors: &[Vec<C64>]) -> Result<Self> {
        let ts = vectors.iter().map(|v| Tensor::from_parts(vec![1, v.len(), 1], v.clone())).collect();
        Self::new(ts)
    }

    /// Random tensors with the given cell length, bond and physical dimension.
    pub fn random(d: usize, bond: usize, cell: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ts = (0..cell)
            .map(|_| {
                Tensor::from_fn(&[bond, d, bond], |_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
            })
            .collect();
        let mut m = Self::new(ts)?;
        m.normalize()?;
        Ok(m)
    }

    pub fn cell_len(&self) -> usize {
        self.tensors.len()
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// Cell index of the physical site `x`.
    pub fn cell_index(&self, x: i64) -> usize {
        (x - self.origin).rem_euclid(self.cell_len() as i64) as usize
    }

    /// Same state with cell site 0 moved to physical position `x`.
    pub fn rotated(&self, x: i64) -> Self {
        let k = self.cell_index(x);
        let mut out = self.clone();
        out.tensors.rotate_left(k);
        out.phys.rotate_left(k);
        out.anc.rotate_left(k);
        out.origin = x;
        out
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn physical_dim(&self, i: usize) -> usize {
        self.phys[i % self.cell_len()]
    }

    pub fn ancilla_dim(&self, i: usize) -> usize {
        self.anc[i % self.cell_len()]
    }

    pub fn has_ancillas(&self) -> bool {
        self.anc.iter().any(|&a| a > 1)
    }

    /// Bond dimension to the left of each cell site.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[0]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(0)
    }

    fn site_legs(&self, i: usize) -> Tensor {
        let t = &self.tensors[i];
        let s = t.shape();
        t.clone().reshaped(&[s[0], self.phys[i], self.anc[i], s[2]])
    }

    /// `X ↦ Σ A^† X A` across site `i`, with `op` on the physical leg.
    pub(crate) fn push_left(&self, x: &Tensor, i: usize, op: Option<&Tensor>) -> Tensor {
        let a = self.site_legs(i);
        match op {
            None => ncon(&[x, &a, &a.conj()], &[&[1, 2], &[1, 3, 4, -1], &[2, 3, 4, -2]]),
            Some(o) => ncon(&[x, &a, o, &a.conj()], &[&[1, 2], &[1, 3, 5, -1], &[4, 3], &[2, 4, 5, -2]]),
        }
        .expect("consistent MPS legs")
    }

    /// `X ↦ Σ A X A^†` across site `i` from the right.
    pub(crate) fn push_right(&self, x: &Tensor, i: usize, op: Option<&Tensor>) -> Tensor {
        let a = self.site_legs(i);
        match op {
            None => ncon(&[&a, x, &a.conj()], &[&[-1, 3, 4, 1], &[1, 2], &[-2, 3, 4, 2]]),
            Some(o) => ncon(&[&a, o, x, &a.conj()], &[&[-1, 3, 5, 1], &[4, 3], &[1, 2], &[-2, 4, 5, 2]]),
        }
        .expect("consistent MPS legs")
    }

    fn cell_left(&self, x: &Tensor) -> Tensor {
        (0..self.cell_len()).fold(x.clone(), |acc, i| self.push_left(&acc, i, None))
    }

    fn cell_right(&self, x: &Tensor) -> Tensor {
        (0..self.cell_len()).rev().fold(x.clone(), |acc, i| self.push_right(&acc, i, None))
    }

    /// Dominant left/right fixed points of the cell transfer, propagated to
    /// every bond and normalised so that `Tr(left[i]·right[i]ᵀ) = 1`.
    pub fn environments(&self) -> Result<Environments> {
        let d0 = self.tensors[0].shape()[0];
        let (l0, e1) = power_fixed_point(|x| self.cell_left(x), d0)?;
        let (r0, _) = power_fixed_point(|x| self.cell_right(x), d0)?;
        let n = self.cell_len();
        let scale = C64::new(e1.powf(-1.0 / n as f64), 0.0);
        let mut left = vec![l0];
        for i in 0..n - 1 {
            let next = self.push_left(&left[i], i, None).scale(scale);
            left.push(next);
        }
        let mut right = vec![Tensor::zeros(&[1]); n];
        right[0] = r0.clone();
        let mut cur = r0;
        for i in (1..n).rev() {
            cur = self.push_right(&cur, i, None).scale(scale);
            right[i] = cur.clone();
        }
        for i in 0..n {
            let t = pair_trace(&left[i], &right[i]);
            if t.abs() < 1e-300 || !t.is_finite() {
                return Err(Error::NonFinite("MPS environment normalisation"));
            }
            right[i] = right[i].scale(C64::new(1.0 / t, 0.0));
        }
        Ok(Environments { left, right, eigenvalue: e1 })
    }

    /// Rescale so the cell transfer has leading eigenvalue 1.
    pub fn normalize(&mut self) -> Result<()> {
        let d0 = self.tensors[0].shape()[0];
        let (_, e1) = power_fixed_point(|x| self.cell_left(x), d0)?;
        let s = C64::new(e1.powf(-0.5 / self.cell_len() as f64), 0.0);
        for t in &mut self.tensors {
            *t = t.scale(s);
        }
        Ok(())
    }

    /// Square roots of the transfer fixed points on every bond, from QR
    /// iteration: `Y_i^† Y_i` is the Gram matrix of the left half-chain
    /// states and `X_i X_i^†` that of the right ones. Being triangular
    /// factors rather than matrix square roots, they resolve Schmidt values
    /// down to working precision.
    fn bond_roots(&self) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let n = self.cell_len();
        let d0 = self.tensors[0].shape()[0];
        let mut c = Tensor::identity(d0);
        let mut ys = Vec::with_capacity(n);
        converge("left fixed point", |_| {
            ys.clear();
            ys.push(c.clone());
            let mut cur = c.clone();
            for (i, t) in self.tensors.iter().enumerate() {
                let (dl, p, dr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                let k = cur.rows();
                let m = cur.matmul(&t.clone().reshaped(&[dl, p * dr])).reshaped(&[k * p, dr]);
                let r = qr_positive(&m).1;
                cur = r.scale(C64::new(1.0 / r.norm(), 0.0));
                if i + 1 < n {
                    ys.push(cur.clone());
                }
            }
            let diff = cur.dagger().matmul(&cur).max_abs_diff(&c.dagger().matmul(&c));
            c = cur;
            diff
        })?;
        let mut c = Tensor::identity(d0);
        let mut xs = vec![Tensor::zeros(&[1]); n];
        converge("right fixed point", |_| {
            let mut cur = c.clone();
            for i in (0..n).rev() {
                let t = &self.tensors[i];
                let (dl, p, dr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                let k = cur.cols();
                let m = t.clone().reshaped(&[dl * p, dr]).matmul(&cur).reshaped(&[dl, p * k]);
                let l = qr_positive(&m.dagger()).1.dagger();
                cur = l.scale(C64::new(1.0 / l.norm(), 0.0));
                xs[i] = cur.clone();
            }
            let diff = cur.matmul(&cur.dagger()).max_abs_diff(&c.matmul(&c.dagger()));
            c = cur;
            diff
        })?;
        Ok((ys, xs))
    }

    /// Normalised Schmidt weights on every bond, descending.
    pub fn schmidt_spectra(&self) -> Result<Vec<Vec<f64>>> {
        let (ys, xs) = self.bond_roots()?;
        Ok(ys
            .iter()
            .zip(&xs)
            .map(|(y, x)| {
                let (_, s, _) = svd(&y.matmul(x));
                let tot: f64 = s.iter().map(|v| v * v).sum();
                s.iter().map(|v| v * v / tot).collect()
            })
            .collect())
    }

    /// Number of Schmidt weights above `WEIGHT_TOL` (relative) at every bond.
    pub fn numerical_ranks(&self) -> Result<Vec<usize>> {
        Ok(self
            .schmidt_spectra()?
            .iter()
            .map(|w| {
                let top = w.first().copied().unwrap_or(0.0);
                w.iter().filter(|&&p| p > WEIGHT_TOL * top).count()
            })
            .collect())
    }

    /// Project every bond onto its numerically nonzero Schmidt space.
    pub fn compress(&mut self) -> Result<()> {
        self.normalize()?;
        let (ys, xs) = self.bond_roots()?;
        let n = self.cell_len();
        let mut projectors = Vec::with_capacity(n);
        for (y, x) in ys.iter().zip(&xs) {
            let (u, s, v) = svd(&y.matmul(x));
            let top = s.first().copied().unwrap_or(0.0);
            let k = s.iter().filter(|&&v| v * v > WEIGHT_TOL * top * top).count().max(1);
            // P = X V_k S_k^{-1/2}, Q = S_k^{-1/2} U_k^† Y
            let inv = |j: usize| C64::new(1.0 / s[j].sqrt(), 0.0);
            let vk = Tensor::from_fn(&[v.rows(), k], |ix| v.get(&[ix[0], ix[1]]) * inv(ix[1]));
            let uk = Tensor::from_fn(&[k, u.rows()], |ix| u.get(&[ix[1], ix[0]]).conj() * inv(ix[0]));
            projectors.push((x.matmul(&vk), uk.matmul(y)));
        }
        for i in 0..n {
            let (_, q) = &projectors[i];
            let (p, _) = &projectors[(i + 1) % n];
            let t = q.contract_unchecked(&self.tensors[i], &[(1, 0)]);
            self.tensors[i] = t.contract_unchecked(p, &[(2, 0)]);
        }
        self.normalize()
    }

    /// `⟨O_x⟩` for a physical operator at cell site `x`.
    pub fn one_point(&self, env: &Environments, op: &Tensor, x: i64) -> Result<f64> {
        let i = self.cell_index(x);
        self.check_op(op, i)?;
        let l = self.push_left(&env.left[i], i, Some(op));
        Ok(pair_trace_c(&l, &env.right[(i + 1) % self.cell_len()]).re)
    }

    fn check_op(&self, op: &Tensor, i: usize) -> Result<()> {
        let d = self.phys[i];
        if op.shape() != [d, d] {
            return Err(Error::Shape(format!("operator {:?} on MPS site of dimension {d}", op.shape())));
        }
        Ok(())
    }

    /// `⟨A_x B_{x+r}⟩` for every `r` in `1..=rmax`, in one sweep.
    pub fn correlator_sweep(&self, env: &Environments, a: &Tensor, b: &Tensor, x: i64, rmax: usize) -> Result<Vec<f64>> {
        let n = self.cell_len();
        let i0 = self.cell_index(x);
        self.check_op(a, i0)?;
        let mut l = self.push_left(&env.left[i0], i0, Some(a));
        let mut out = Vec::with_capacity(rmax);
        for r in 1..=rmax {
            let j = (i0 + r) % n;
            self.check_op(b, j)?;
            let with_b = self.push_left(&l, j, Some(b));
            out.push(pair_trace_c(&with_b, &env.right[(j + 1) % n]).re);
            if r < rmax {
                l = self.push_left(&l, j, None);
            }
        }
        Ok(out)
    }

    /// Dense reduced density of sites `x..x+len` (ancillas traced).
    pub fn window_density(&self, env: &Environments, x: i64, len: usize) -> Result<Tensor> {
        let n = self.cell_len();
        let i0 = self.cell_index(x);
        let mut t = env.left[i0].clone();
        let mut dims: Vec<usize> = Vec::new();
        for k in 0..len {
            let i = (i0 + k) % n;
            let a = self.site_legs(i);
            let ac = a.conj();
            let m = dims.iter().product::<usize>();
            let cur = t.clone().reshaped(&[m, m, t.shape()[t.rank() - 2], t.shape()[t.rank() - 1]]);
            let next = ncon(&[&cur, &a, &ac], &[&[-1, -3, 1, 2], &[1, -2, 3, -5], &[2, -4, 3, -6]])?;
            let d = self.phys[i];
            let s = next.shape().to_vec();
            dims.push(d);
            t = next.reshaped(&[m * d, m * d, s[4], s[5]]);
        }
        let j = (i0 + len) % n;
        let r = &env.right[j];
        let m = dims.iter().product::<usize>();
        let rho = ncon(&[&t, r], &[&[-1, -2, 1, 2], &[1, 2]])?;
        Ok(rho.reshaped(&[m, m]))
    }

    /// `Σ_p T[l,p,A,r] T̄[l',p,A',r']` over `len` cell sites from `i0`, legs
    /// `[l, l', A, A', r, r']` with the ancillas of the segment kept open.
    fn open_transfer(&self, i0: usize, len: usize) -> Result<Tensor> {
        let n = self.cell_len();
        let a = self.site_legs(i0);
        let mut x = ncon(&[&a, &a.conj()], &[&[-1, 1, -3, -5], &[-2, 1, -4, -6]])?;
        for k in 1..len {
            let a = self.site_legs((i0 + k) % n);
            let s = x.shape().to_vec();
            let y = ncon(&[&x, &a, &a.conj()], &[&[-1, -2, -3, -5, 1, 2], &[1, 3, -4, -7], &[2, 3, -6, -8]])?;
            let xa = a.shape()[2];
            x = y.reshaped(&[s[0], s[1], s[2] * xa, s[3] * xa, a.shape()[3], a.shape()[3]]);
        }
        Ok(x)
    }

    /// Nonzero spectrum of the reduced density of sites `x..x+len` with all
    /// ancillas traced, descending. The complement is represented by the
    /// bond environments and the block's ancillas, so the work scales with
    /// `D_l · A · D_r` rather than with the physical dimension. The block is
    /// assembled cell by cell when it starts at a cell boundary.
    pub fn block_spectrum(&self, env: &Environments, x: i64, len: usize, budget: usize) -> Result<Vec<f64>> {
        if len == 0 {
            return Ok(vec![1.0]);
        }
        let n = self.cell_len();
        let i0 = self.cell_index(x);
        let anc: usize = (0..len).map(|k| self.anc[(i0 + k) % n]).product();
        let dl = self.tensors[i0].shape()[0];
        let dr = self.tensors[(i0 + len) % n].shape()[0];
        let dim = dl * anc * dr;
        if dim > budget {
            return Err(Error::Budget(format!("block complement dimension {dim} exceeds {budget}")));
        }
        let mut pieces = Vec::new();
        let mut k = 0;
        while k < len {
            let step = if (i0 + k).is_multiple_of(n) { n.min(len - k) } else { (n - (i0 + k) % n).min(len - k) };
            pieces.push(((i0 + k) % n, step));
            k += step;
        }
        let parts = crate::par::try_map(&pieces, |&(i, l)| self.open_transfer(i, l))?;
        let mut y = parts[0].clone();
        for z in &parts[1..] {
            let (s, t) = (y.shape().to_vec(), z.shape().to_vec());
            let c = ncon(&[&y, z], &[&[-1, -2, -3, -5, 1, 2], &[1, 2, -4, -6, -7, -8]])?;
            y = c.reshaped(&[s[0], s[1], s[2] * t[2], s[3] * t[3], t[4], t[5]]);
        }
        // K[(l,A,r),(l',A',r')] = conj(Y); metric H = left ⊗ 1 ⊗ right
        let k = y.permuted(&[0, 2, 4, 1, 3, 5]).reshaped(&[dim, dim]).conj();
        let hl = psd_sqrt(&env.left[i0]);
        let hr = psd_sqrt(&env.right[(i0 + len) % n]);
        let h = hl.kron(&Tensor::identity(anc)).kron(&hr);
        let rho = h.matmul(&k).matmul(&h).hermitian_part();
        let mut ev = herm_eigenvalues(&rho);
        ev.reverse();
        let total: f64 = ev.iter().filter(|v| **v > 0.0).sum();
        Ok(ev.into_iter().map(|v| v / total).collect())
    }

    pub fn to_record(&self) -> MpsRecord {
        MpsRecord {
            tensors: self.tensors.iter().map(Tensor::to_record).collect(),
            phys: self.phys.clone(),
            anc: self.anc.clone(),
            origin: self.origin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsRecord {
    pub tensors: Vec<TensorRecord>,
    pub phys: Vec<usize>,
    pub anc: Vec<usize>,
    pub origin: i64,
}

impl MpsRecord {
    pub fn to_mps(&self) -> Result<Mps> {
        let ts = self.tensors.iter().map(Tensor::try_from).collect::<Result<Vec<_>>>()?;
        let mut m = Mps::with_ancillas(ts, self.phys.clone(), self.anc.clone())?;
        m.origin = self.origin;
        Ok(m)
    }
}

/// `Σ_{ab} L[a, b] R[a, b]`.
fn pair_trace_c(l: &Tensor, r: &Tensor) -> C64 {
    l.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn pair_trace(l: &Tensor, r: &Tensor) -> f64 {
    pair_trace_c(l, r).re
}

/// Repeat `step` until it reports a change below 1e-13, or until the change
/// stalls below 1e-9 at the rounding floor.
fn converge(what: &'static str, mut step: impl FnMut(usize) -> f64) -> Result<()> {
    let mut diff = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..500 {
        diff = step(it);
        if diff < 1e-13 {
            return Ok(());
        }
        if diff < 0.5 * best {
            best = diff;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 10 && best < 1e-9 {
                return Ok(());
            }
        }
    }
    Err(Error::NoConvergence { what, iterations: 500, residual: diff })
}

/// Power iteration for the dominant Hermitian fixed point of a CP map.
fn power_fixed_point(f: impl Fn(&Tensor) -> Tensor, d: usize) -> Result<(Tensor, f64)> {
    let mut x = Tensor::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
    let mut ev = 0.0;
    for _ in 0..20_000 {
        let y = f(&x).hermitian_part();
        let t = y.trace().re;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::NonFinite("transfer fixed point"));
        }
        let y = y.scale(C64::new(1.0 / t, 0.0));
        let diff = y.max_abs_diff(&x);
        x = y;
        ev = t;
        if diff < 1e-15 * x.max_abs().max(1.0) * 10.0 {
            return Ok((x, ev));
        }
    }
    let y = f(&x).hermitian_part();
    let t = y.trace().re;
    let diff = y.scale(C64::new(1.0 / t, 0.0)).max_abs_diff(&x);
    if diff < 1e-11 {
        return Ok((x, ev));
    }
    Err(Error::NoConvergence { what: "transfer fixed point", iterations: 20_000, residual: diff })
}

/// Leading transfer eigenvalues of an MPS unit cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSpectrum {
    pub t1: C64,
    pub t2: C64,
    /// `−n / ln|t2/t1|` in sites for a cell of `n` sites; 0 when `t2 = 0`.
    pub xi: f64,
    /// `|t2| ≈ |t1|`: the tensor is not injective.
    pub degenerate: bool,
    /// `|t2/t1|` below `TRANSFER_FLOOR`; `xi` is then reported as 0.
    pub at_floor: bool,
    pub cell: usize,
}

/// Ratios below this are roundoff of an exactly vanishing subleading eigenvalue.
pub const TRANSFER_FLOOR: f64 = 1e-8;

/// Largest transfer dimension handled by dense diagonalisation.
const DENSE_TRANSFER: usize = 4096;

pub fn transfer_spectrum(m: &Mps) -> Result<TransferSpectrum> {
    let d0 = m.tensors[0].shape()[0];
    let dim = d0 * d0;
    if dim > DENSE_TRANSFER {
        return Err(Error::Budget(format!("transfer matrix of dimension {dim}")));
    }
    // columns: images of the basis matrices under the right cell transfer
    let mut t = Tensor::zeros(&[dim, dim]);
    for k in 0..dim {
        let e = Tensor::from_fn(&[d0, d0], |ix| if ix[0] * d0 + ix[1] == k { ONE } else { ZERO });
        let img = m.cell_right(&e);
        for r in 0..dim {
            t.set(&[r, k], img.data()[r]);
        }
    }
    let dec = eig_general(&t)?;
    let t1 = dec.eigenvalues[0];
    let t2 = dec.eigenvalues.get(1).copied().unwrap_or(ZERO);
    let ratio = t2.norm() / t1.norm();
    let n = m.cell_len();
    let at_floor = ratio < TRANSFER_FLOOR;
    let xi = if at_floor { 0.0 } else { -(n as f64) / ratio.ln() };
    Ok(TransferSpectrum { t1, t2, xi, degenerate: ratio > 1.0 - 1e-9, at_floor, cell: n })
}

/// `⟨A_x B_{x+r}⟩` on an MPS.
pub fn mps_correlator(m: &Mps, a: &Tensor, b: &Tensor, x: i64, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidArgument("separation must be >= 1".into()));
    }
    let env = m.environments()?;
    Ok(*m.correlator_sweep(&env, a, b, x, r)?.last().unwrap())
}

/// Result of converting a finite-range network.
#[derive(Clone, Debug)]
pub struct MpsConversion {
    pub mps: Mps,
    /// `χ^{w*}`.
    pub bound: usize,
    /// Bond between causal columns, where the bound applies. The cell is
    /// rotated so this is the bond left of cell site 0, at physical position
    /// `(b^{w*} + 1)/2`.
    pub cell_bond: usize,
    /// Largest bond anywhere in the cell.
    pub max_bond: usize,
}

/// Pure product-capped network as an MPS with a unit cell of `b^{w*}` sites.
pub fn to_mps(fr: &FiniteRangeMera) -> Result<MpsConversion> {
    if matches!(fr.cap(), CapState::MaximallyMixed) {
        return Err(Error::Unsupported(
            "a maximally mixed cap is not a pure state; use the purified form or window densities".into(),
        ));
    }
    let mps = purified_mps(fr)?;
    let mps = mps.rotated(column_origin(fr.wstar()));
    let bound = fr.chi().pow(fr.wstar() as u32);
    let cell_bond = mps.bond_dims()[0];
    let max_bond = mps.max_bond();
    if cell_bond > bound {
        return Err(Error::Shape(format!("cell bond {cell_bond} exceeds chi^w* = {bound}")));
    }
    Ok(MpsConversion { mps, bound, cell_bond, max_bond })
}

/// Left edge of the causal column containing site 0's right neighbourhood:
/// the cut left of `(3^{w*} + 1)/2` crosses one bond per layer.
pub fn column_origin(wstar: usize) -> i64 {
    (3i64.pow(wstar as u32) + 1) / 2
}

/// Cell MPS of a finite-range network; a maximally mixed cap is purified by
/// an ancilla of dimension χ on each top site.
pub fn purified_mps(fr: &FiniteRangeMera) -> Result<Mps> {
    if fr.b() != 3 {
        return Err(Error::Unsupported("MPS conversion needs b = 3".into()));
    }
    let chi = fr.chi();
    let top = match fr.cap() {
        CapState::Product(v) => Mps::product(std::slice::from_ref(v))?,
        CapState::MaximallyMixed => {
            let s = 1.0 / (chi as f64).sqrt();
            let t = Tensor::from_fn(&[1, chi * chi, 1], |ix| if ix[1] / chi == ix[1] % chi { C64::new(s, 0.0) } else { ZERO });
            Mps::with_ancillas(vec![t], vec![chi], vec![chi])?
        }
    };
    let mut m = top;
    for layer in fr.layers().iter().rev() {
        m = descend_layer(&m, layer)?;
        m.compress()?;
    }
    Ok(m)
}

/// Apply one layer in the state-generation direction.
fn descend_layer(m: &Mps, layer: &Layer) -> Result<Mps> {
    let w = layer.w();
    let f = layer.chi_in();
    let mut ts = Vec::new();
    let mut phys = Vec::new();
    let mut anc = Vec::new();
    for i in 0..m.cell_len() {
        let a = m.site_legs(i); // [l, c, x, r]
        let (l, x, r) = (a.shape()[0], a.shape()[2], a.shape()[3]);
        // t[l, x, r, f0, f1, f2] -> [l, f0, f1, x, f2, r]
        let t = a.contract_unchecked(w, &[(1, 3)]).permuted(&[0, 3, 4, 1, 5, 2]);
        let t = t.reshaped(&[l * f, f * x * f * r]);
        let (u0, s0, v0) = svd(&t);
        let k0 = rank(&s0);
        ts.push(cols(&u0, k0).reshaped(&[l, f, k0]));
        let rest = sv(&s0, &v0, k0).reshaped(&[k0 * f * x, f * r]);
        let (u1, s1, v1) = svd(&rest);
        let k1 = rank(&s1);
        ts.push(cols(&u1, k1).reshaped(&[k0, f * x, k1]));
        ts.push(sv(&s1, &v1, k1).reshaped(&[k1, f, r]));
        phys.extend([f, f, f]);
        anc.extend([1, x, 1]);
    }
    let n = ts.len();
    let u = layer.u();
    for k in 0..n / 3 {
        let (i, j) = (3 * k + 2, (3 * k + 3) % n);
        let (a, b) = (&ts[i], &ts[j]);
        let (l, r) = (a.shape()[0], b.shape()[2]);
        let (xa, xb) = (anc[i], anc[j]);
        let a4 = a.clone().reshaped(&[l, f, xa, a.shape()[2]]);
        let b4 = b.clone().reshaped(&[b.shape()[0], f, xb, r]);
        // theta[l, f0, xa, f1, xb, r]
        let theta = ncon(&[&a4, &b4, u], &[&[-1, 1, -3, 3], &[3, 2, -5, -6], &[-2, -4, 1, 2]])?;
        let theta = theta.reshaped(&[l * f * xa, f * xb * r]);
        let (uu, s, v) = svd(&theta);
        let kk = rank(&s);
        ts[i] = cols(&uu, kk).reshaped(&[l, f * xa, kk]);
        ts[j] = sv(&s, &v, kk).reshaped(&[kk, f * xb, r]);
    }
    Mps::with_ancillas(ts, phys, anc)
}

/// Square root of the positive part of a Hermitian matrix.
fn psd_sqrt(m: &Tensor) -> Tensor {
    let (vals, vecs) = herm_eig(&m.hermitian_part());
    let n = vals.len();
    let d = Tensor::from_fn(&[n, n], |ix| if ix[0] == ix[1] { C64::new(vals[ix[0]].max(0.0).sqrt(), 0.0) } else { ZERO });
    vecs.matmul(&d).matmul(&vecs.dagger())
}

fn rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > 1e-15 * top).count().max(1)
}

fn cols(u: &Tensor, k: usize) -> Tensor {
    let n = u.rows();
    Tensor::from_fn(&[n, k], |ix| u.get(&[ix[0], ix[1]]))
}

/// `diag(s_k) V^†_k`.
fn sv(s: &[f64], v: &Tensor, k: usize) -> Tensor {
    let n = v.rows();
    Tensor::from_fn(&[k, n], |ix| v.get(&[ix[1], ix[0]]).conj() * s[ix[0]])
}
