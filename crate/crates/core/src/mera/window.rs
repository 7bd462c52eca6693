//! Purified density matrices on contiguous windows of sites, and their
//! descent through layers restricted to a causal cone.

use super::{ascend_interval, Layer};
use crate::linalg::{entropy_of_spectrum, herm_eig, herm_eigenvalues};
use crate::tensor::{Tensor, C64};
use crate::{Error, Result};

/// Relative weight below which purification components are dropped.
const DROP: f64 = 1e-15;

/// `rho = psi psi^†` with `psi[s_0, .., s_{n-1}, a]`; site `k` sits at
/// position `start + k`.
#[derive(Clone, Debug)]
pub struct Purified {
    start: i64,
    dims: Vec<usize>,
    psi: Tensor,
}

impl Purified {
    /// Purify a density matrix on `dims.len()` consecutive sites.
    pub fn from_density(start: i64, dims: &[usize], rho: &Tensor) -> Result<Self> {
        let n: usize = dims.iter().product();
        if rho.shape() != [n, n] {
            return Err(Error::Shape(format!("density {:?} for site dims {dims:?}", rho.shape())));
        }
        let (vals, vecs) = herm_eig(rho);
        let psi = sqrt_weighted_columns(&vals, &vecs);
        let k = psi.shape()[1];
        let mut shape = dims.to_vec();
        shape.push(k);
        Ok(Self { start, dims: dims.to_vec(), psi: psi.reshaped(&shape) })
    }

    /// Pure product of the given site vectors.
    pub fn product(start: i64, vectors: &[Vec<C64>]) -> Self {
        let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
        let mut shape = dims.clone();
        shape.push(1);
        let psi = Tensor::from_fn(&shape, |ix| vectors.iter().zip(ix).map(|(v, &i)| v[i]).product());
        Self { start, dims, psi }
    }

    /// Identity / d^n on `n` sites of dimension `d`.
    pub fn maximally_mixed(start: i64, n: usize, d: usize) -> Self {
        let total = d.pow(n as u32);
        let psi = Tensor::identity(total).scale(C64::new(1.0 / (total as f64).sqrt(), 0.0));
        let mut shape = vec![d; n];
        shape.push(total);
        Self { start, dims: vec![d; n], psi: psi.reshaped(&shape) }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ancilla_dim(&self) -> usize {
        *self.psi.shape().last().unwrap()
    }

    fn rows(&self) -> usize {
        self.dims.iter().product()
    }

    fn matrix(&self) -> Tensor {
        let r = self.rows();
        self.psi.clone().reshaped(&[r, self.ancilla_dim()])
    }

    /// Dense density matrix on the window.
    pub fn density(&self) -> Tensor {
        let m = self.matrix();
        m.matmul(&m.dagger())
    }

    /// Nonzero spectrum of the window density, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        let m = self.matrix();
        let g = if self.rows() <= self.ancilla_dim() { m.matmul(&m.dagger()) } else { m.dagger().matmul(&m) };
        let mut ev = herm_eigenvalues(&g);
        ev.reverse();
        ev
    }

    /// Von Neumann entropy in nats (eigenvalues below 1e-14 ignored).
    pub fn entropy(&self) -> f64 {
        entropy_of_spectrum(&self.spectrum(), 1e-14)
    }

    pub fn trace(&self) -> f64 {
        self.psi.norm().powi(2)
    }

    /// `Tr(rho · prod_k O_k)` for one-site operators at absolute positions.
    pub fn expectation(&self, ops: &[(i64, &Tensor)]) -> Result<C64> {
        let mut phi = self.psi.clone();
        for &(x, op) in ops {
            let k = self.index_of(x)?;
            let d = self.dims[k];
            if op.shape() != [d, d] {
                return Err(Error::Shape(format!("operator {:?} on site of dimension {d}", op.shape())));
            }
            phi = apply_on_legs(&phi, op, k, 1);
        }
        Ok(self.psi.inner(&phi))
    }

    /// `Tr(rho · O)` for an operator on sites `x, x+1, ..` given as a matrix.
    pub fn expectation_block(&self, x: i64, op: &Tensor) -> Result<C64> {
        let k = self.index_of(x)?;
        let mut n = 0;
        let mut d = 1;
        while d < op.rows() && k + n < self.dims.len() {
            d *= self.dims[k + n];
            n += 1;
        }
        if d != op.rows() || op.shape() != [d, d] {
            return Err(Error::Shape(format!("block operator {:?} does not fit at site {x}", op.shape())));
        }
        let mut shape: Vec<usize> = self.dims[k..k + n].to_vec();
        shape.extend_from_slice(&self.dims[k..k + n]);
        let phi = apply_on_legs(&self.psi, &op.clone().reshaped(&shape), k, n);
        Ok(self.psi.inner(&phi))
    }

    fn index_of(&self, x: i64) -> Result<usize> {
        let k = x - self.start;
        if k < 0 || k as usize >= self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "site {x} outside window [{}, {}]",
                self.start,
                self.start + self.dims.len() as i64 - 1
            )));
        }
        Ok(k as usize)
    }

    /// Trace out everything outside `[lo, hi]`.
    pub fn reduce(&self, lo: i64, hi: i64) -> Result<Self> {
        let (a, b) = (self.index_of(lo)?, self.index_of(hi)?);
        if a > b {
            return Err(Error::InvalidArgument("empty window".into()));
        }
        let mut out = self.clone();
        for _ in b + 1..self.dims.len() {
            let last = out.dims.len() - 1;
            out.trace_leg(last);
        }
        for _ in 0..a {
            out.trace_leg(0);
        }
        out.start = lo;
        out.compress();
        Ok(out)
    }

    fn trace_leg(&mut self, k: usize) {
        let n = self.dims.len();
        let mut order: Vec<usize> = (0..=n).filter(|&i| i != k).collect();
        order.insert(n - 1, k);
        let p = self.psi.permuted(&order);
        let d = self.dims.remove(k);
        let mut shape = self.dims.clone();
        shape.push(d * p.shape()[n]);
        self.psi = p.reshaped(&shape);
        self.maybe_compress();
    }

    fn maybe_compress(&mut self) {
        let (r, a) = (self.rows(), self.ancilla_dim());
        if a > r || a > 512 {
            self.compress();
        }
    }

    /// Re-purify with the smallest ancilla reproducing `rho`.
    pub fn compress(&mut self) {
        let m = self.matrix();
        let (r, a) = (m.shape()[0], m.shape()[1]);
        let psi = if r <= a {
            let (vals, vecs) = herm_eig(&m.matmul(&m.dagger()));
            sqrt_weighted_columns(&vals, &vecs)
        } else {
            let (vals, vecs) = herm_eig(&m.dagger().matmul(&m));
            let total: f64 = vals.iter().filter(|v| **v > 0.0).sum();
            let keep: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > DROP * total).collect();
            if keep.len() == a {
                return;
            }
            let v = Tensor::from_fn(&[a, keep.len()], |ix| vecs.get(&[ix[0], keep[ix[1]]]));
            m.matmul(&v)
        };
        let mut shape = self.dims.clone();
        shape.push(psi.shape()[1]);
        self.psi = psi.reshaped(&shape);
    }

    /// Replace site `k` (coarse) by the fine sites of `w`.
    fn expand(&mut self, k: usize, w: &Tensor) {
        let b = w.rank() - 1;
        let n = self.dims.len();
        let t = self.psi.contract_unchecked(w, &[(k, b)]);
        // legs: sites except k, anc, fine_0..fine_{b-1}
        let mut order: Vec<usize> = (0..k).collect();
        order.extend(n..n + b);
        order.extend(k..n - 1);
        order.push(n - 1);
        self.psi = t.permuted(&order);
        let fine = w.shape()[0];
        self.dims.splice(k..=k, std::iter::repeat_n(fine, b));
    }

    /// Apply a two-site gate `g[f0, f1, m0, m1]` to sites `k, k+1`.
    fn apply_gate(&mut self, k: usize, g: &Tensor) {
        self.psi = apply_on_legs(&self.psi, g, k, 2);
    }

    /// Push the window one layer down, keeping fine sites `[lo, hi]`.
    pub fn descend(&self, layer: &Layer, lo: i64, hi: i64) -> Result<Self> {
        let b = layer.b() as i64;
        if lo > hi {
            return Err(Error::InvalidArgument("empty target window".into()));
        }
        let (c0, c1) = ascend_interval(lo, hi, layer.b());
        let end = self.start + self.dims.len() as i64 - 1;
        if c0 < self.start || c1 > end {
            return Err(Error::InvalidArgument(format!(
                "target [{lo}, {hi}] needs coarse sites [{c0}, {c1}], window is [{}, {end}]",
                self.start
            )));
        }
        if self.dims.iter().any(|&d| d != layer.chi_out()) {
            return Err(Error::Shape("window site dimension differs from the layer".into()));
        }
        let mut cur = self.reduce(c0, c1)?;
        let in_target = |s: i64| s >= lo && s <= hi;
        // disentangler on (s, s+1) with s = bk + b - 1 touches the target?
        let relevant = |s: i64| in_target(s) || in_target(s + 1);
        let mut live: Vec<i64> = Vec::new();
        for k in c0..=c1 {
            let pos = live.len();
            cur.expand(pos, &layer.w);
            for j in 0..b {
                live.push(b * k + j);
            }
            let s = b * k - 1;
            if k > c0 && relevant(s) {
                let i = live.iter().position(|&x| x == s).expect("left gate site is live");
                cur.apply_gate(i, &layer.u);
            }
            // trace sites that are outside the target and finished
            let mut i = 0;
            while i < live.len() {
                let s = live[i];
                let pending = s == b * k + b - 1 && k < c1 && relevant(s);
                if !in_target(s) && !pending {
                    cur.trace_leg(i);
                    live.remove(i);
                } else {
                    i += 1;
                }
            }
        }
        debug_assert!(live.windows(2).all(|p| p[1] == p[0] + 1));
        cur.start = lo;
        cur.compress();
        Ok(cur)
    }
}

fn sqrt_weighted_columns(vals: &[f64], vecs: &Tensor) -> Tensor {
    let total: f64 = vals.iter().filter(|v| **v > 0.0).sum();
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > DROP * total).collect();
    let n = vecs.shape()[0];
    if keep.is_empty() {
        return Tensor::zeros(&[n, 1]);
    }
    Tensor::from_fn(&[n, keep.len()], |ix| vecs.get(&[ix[0], keep[ix[1]]]) * vals[keep[ix[1]]].sqrt())
}

/// Apply an operator `op[out.., in..]` with `m` out and `m` in legs to legs
/// `k..k+m` of `psi`.
fn apply_on_legs(psi: &Tensor, op: &Tensor, k: usize, m: usize) -> Tensor {
    let n = psi.rank();
    let pairs: Vec<(usize, usize)> = (0..m).map(|j| (m + j, k + j)).collect();
    let t = op.contract_unchecked(psi, &pairs);
    // legs: op out (m), psi legs except k..k+m
    let mut order: Vec<usize> = (m..m + k).collect();
    order.extend(0..m);
    order.extend(m + k..n);
    t.permuted(&order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mera::channels::descend_pair;
    use crate::mera::PairType;
    use crate::tensor::{ONE, ZERO};

    fn zero_vector(d: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d];
        v[0] = ONE;
        v
    }

    fn rand_density(d: usize, seed: u64) -> Tensor {
        let g = crate::linalg::random_isometry(d, d, seed).unwrap();
        let diag = Tensor::from_fn(&[d, d], |ix| if ix[0] == ix[1] { C64::new(1.0 + ix[0] as f64, 0.0) } else { ZERO });
        let r = g.matmul(&diag).matmul(&g.dagger());
        let t = r.trace();
        r.scale(1.0 / t)
    }

    #[test]
    fn purification_roundtrip() {
        let r = rand_density(9, 3);
        let p = Purified::from_density(0, &[3, 3], &r).unwrap();
        assert!(p.density().max_abs_diff(&r) < 1e-13);
        assert!((p.trace() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn descend_matches_pair_channels() {
        let layer = Layer::random(2, 2, 3, 17).unwrap();
        let r = rand_density(4, 5);
        let top = Purified::from_density(0, &[2, 2], &r).unwrap();
        let r4 = r.clone().reshaped(&[2, 2, 2, 2]);
        // fine pairs with coarse pair (0, 1): L at (3, 4), C at (2, 3), R at (1, 2)
        for (a, p) in [(3, PairType::L), (2, PairType::C), (1, PairType::R)] {
            let w = top.descend(&layer, a, a + 1).unwrap();
            let want = descend_pair(&r4, &layer, p).reshaped(&[4, 4]);
            assert!(w.density().max_abs_diff(&want) < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn reduce_and_expectation() {
        let p = Purified::maximally_mixed(4, 3, 2);
        assert!((p.entropy() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let q = p.reduce(5, 5).unwrap();
        assert_eq!(q.len(), 1);
        assert!(q.density().max_abs_diff(&Tensor::identity(2).scale(C64::new(0.5, 0.0))) < 1e-14);
        let z = Tensor::from_real(vec![2, 2], &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(p.expectation(&[(5, &z)]).unwrap().norm() < 1e-14);
        let prod = Purified::product(0, &[zero_vector(2), zero_vector(2)]);
        assert!((prod.expectation(&[(0, &z), (1, &z)]).unwrap() - 1.0).norm() < 1e-14);
        assert!(prod.entropy().abs() < 1e-14);
    }
}
