//! Dense row-major complex tensors and the contraction primitives everything
//! else is built from.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Imaginary parts below this are treated as numerically real.
pub const REAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-sized leg in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Tensor::new"));
        }
        Ok(Self { shape, data })
    }

    /// Constructor for internal call sites that already guarantee the invariants.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![ZERO; n])
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::from_parts(shape.to_vec(), data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn scalar(z: C64) -> Self {
        Self::from_parts(vec![1], vec![z])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut s = vec![1usize; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * shape[i + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let st = Self::strides(&self.shape);
        self.data[idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let st = Self::strides(&self.shape);
        let off = idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>();
        self.data[off] = v;
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), self.data))
    }

    /// Reshape that panics on size mismatch; for internal fixed layouts.
    pub(crate) fn reshaped(self, shape: &[usize]) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data.len(),
            "reshape {:?} -> {shape:?}",
            self.shape
        );
        Self::from_parts(shape.to_vec(), self.data)
    }

    /// Reorder legs: leg `i` of the result is leg `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let r = self.rank();
        if order.len() != r {
            return Err(Error::InvalidArgument(format!(
                "permutation {order:?} has wrong length for rank {r}"
            )));
        }
        let mut seen = vec![false; r];
        for &o in order {
            if o >= r || seen[o] {
                return Err(Error::InvalidArgument(format!(
                    "{order:?} is not a permutation"
                )));
            }
            seen[o] = true;
        }
        Ok(self.permuted(order))
    }

    pub(crate) fn permuted(&self, order: &[usize]) -> Self {
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return self.clone();
        }
        let src_strides = Self::strides(&self.shape);
        let new_shape: Vec<usize> = order.iter().map(|&o| self.shape[o]).collect();
        let strides: Vec<usize> = order.iter().map(|&o| src_strides[o]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let r = new_shape.len();
        // innermost leg handled as a strided run
        let inner = new_shape[r - 1];
        let inner_stride = strides[r - 1];
        let mut idx = vec![0usize; r - 1];
        let mut base = 0usize;
        let outer = n / inner;
        for _ in 0..outer {
            for j in 0..inner {
                out.push(self.data[base + j * inner_stride]);
            }
            for ax in (0..r - 1).rev() {
                idx[ax] += 1;
                base += strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                base -= strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Self::from_parts(new_shape, out)
    }

    /// Contract legs `pairs[i].0` of `self` with `pairs[i].1` of `other`.
    /// Result legs: the free legs of `self` followed by the free legs of `other`.
    pub fn contract(&self, other: &Tensor, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut used_a = vec![false; self.rank()];
        let mut used_b = vec![false; other.rank()];
        for &(i, j) in pairs {
            if i >= self.rank() || j >= other.rank() {
                return Err(Error::InvalidArgument(format!(
                    "leg pair ({i}, {j}) out of range"
                )));
            }
            if used_a[i] || used_b[j] {
                return Err(Error::InvalidArgument(format!(
                    "leg repeated in contraction pairs {pairs:?}"
                )));
            }
            used_a[i] = true;
            used_b[j] = true;
            if self.shape[i] != other.shape[j] {
                return Err(Error::Shape(format!(
                    "contracted legs differ: {} vs {}",
                    self.shape[i], other.shape[j]
                )));
            }
        }
        Ok(self.contract_unchecked(other, pairs))
    }

    pub(crate) fn contract_unchecked(&self, other: &Tensor, pairs: &[(usize, usize)]) -> Self {
        let free_a: Vec<usize> = (0..self.rank())
            .filter(|i| !pairs.iter().any(|p| p.0 == *i))
            .collect();
        let free_b: Vec<usize> = (0..other.rank())
            .filter(|j| !pairs.iter().any(|p| p.1 == *j))
            .collect();
        let order_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
        let order_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
        let m: usize = free_a.iter().map(|&i| self.shape[i]).product();
        let k: usize = pairs.iter().map(|p| self.shape[p.0]).product();
        let n: usize = free_b.iter().map(|&j| other.shape[j]).product();
        let is_id = |o: &[usize]| o.iter().enumerate().all(|(i, &x)| i == x);
        let pa;
        let a = if is_id(&order_a) { &self.data } else { pa = self.permuted(&order_a); &pa.data };
        let pb;
        let b = if is_id(&order_b) { &other.data } else { pb = other.permuted(&order_b); &pb.data };
        let mut c = vec![ZERO; m * n];
        gemm(m, k, n, a, b, &mut c, ONE, ZERO);
        let mut shape: Vec<usize> = free_a.iter().map(|&i| self.shape[i]).collect();
        shape.extend(free_b.iter().map(|&j| other.shape[j]));
        if shape.is_empty() {
            shape.push(1);
        }
        Self::from_parts(shape, c)
    }

    /// Trace over pairs of legs of a single tensor.
    pub fn partial_trace(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        let traced: Vec<usize> = pairs.iter().flat_map(|p| [p.0, p.1]).collect();
        for &(i, j) in pairs {
            if i >= self.rank() || j >= self.rank() || self.shape[i] != self.shape[j] || i == j {
                return Err(Error::InvalidArgument(format!("bad trace pair ({i}, {j})")));
            }
        }
        let free: Vec<usize> = (0..self.rank()).filter(|i| !traced.contains(i)).collect();
        let mut order = free.clone();
        order.extend(pairs.iter().map(|p| p.0));
        order.extend(pairs.iter().map(|p| p.1));
        let t = self.permuted(&order);
        let nf: usize = free.iter().map(|&i| self.shape[i]).product();
        let k: usize = pairs.iter().map(|p| self.shape[p.0]).product();
        let mut out = vec![ZERO; nf];
        for (f, o) in out.iter_mut().enumerate() {
            let base = f * k * k;
            for q in 0..k {
                *o += t.data[base + q * k + q];
            }
        }
        let mut shape: Vec<usize> = free.iter().map(|&i| self.shape[i]).collect();
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Self::from_parts(shape, out))
    }

    pub fn conj(&self) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|z| z * s).collect())
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub(crate) fn axpy(&mut self, a: C64, x: &Tensor) {
        assert_eq!(self.data.len(), x.data.len());
        for (y, &xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im.abs() < REAL_TOL)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Frobenius inner product <self, other> = sum conj(self) * other.
    pub fn inner(&self, other: &Tensor) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    // ---- matrix helpers (rank-2 views) ----

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Interpret the first `k` legs as rows and the rest as columns.
    pub fn as_matrix(&self, k: usize) -> Tensor {
        let r: usize = self.shape[..k].iter().product();
        let c: usize = self.shape[k..].iter().product();
        Self::from_parts(vec![r, c], self.data.clone())
    }

    pub fn transpose(&self) -> Tensor {
        assert_eq!(self.rank(), 2);
        self.permuted(&[1, 0])
    }

    pub fn dagger(&self) -> Tensor {
        assert_eq!(self.rank(), 2, "dagger needs a matrix");
        self.permuted(&[1, 0]).conj()
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rank(), 2);
        assert_eq!(other.rank(), 2);
        let (m, k) = (self.shape[0], self.shape[1]);
        assert_eq!(k, other.shape[0], "matmul inner dimension");
        let n = other.shape[1];
        let mut c = vec![ZERO; m * n];
        gemm(m, k, n, &self.data, &other.data, &mut c, ONE, ZERO);
        Self::from_parts(vec![m, n], c)
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rank(), 2);
        let n = self.shape[0].min(self.shape[1]);
        (0..n).map(|i| self.data[i * self.shape[1] + i]).sum()
    }

    pub fn kron(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rank(), 2);
        assert_eq!(other.rank(), 2);
        let (a, b) = (self.shape[0], self.shape[1]);
        let (c, d) = (other.shape[0], other.shape[1]);
        Tensor::from_fn(&[a * c, b * d], |ix| {
            let (i, k) = (ix[0] / c, ix[0] % c);
            let (j, l) = (ix[1] / d, ix[1] % d);
            self.data[i * b + j] * other.data[k * d + l]
        })
    }

    /// Hermitian part (A + A^dagger)/2 of a square matrix.
    pub fn hermitian_part(&self) -> Tensor {
        let d = self.dagger();
        Self::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&d.data).map(|(a, b)| (a + b) * 0.5).collect(),
        )
    }

    pub fn to_record(&self) -> TensorRecord {
        TensorRecord::from(self)
    }
}

/// Row-major complex GEMM: C = alpha * A(m x k) * B(k x n) + beta * C.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], c: &mut [C64], alpha: C64, beta: C64) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for z in c.iter_mut().take(m * n) {
            *z *= beta;
        }
        return;
    }
    // SAFETY: Complex64 is repr(C) with layout [f64; 2]; the slices cover the
    // strided extents checked above.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Contract a network of tensors given per-leg labels.
///
/// Positive labels are summed (each must appear exactly twice), negative
/// labels are open and ordered `-1, -2, ...` in the result. The pairwise
/// order is chosen to minimise the flop count (exhaustive for small
/// networks, greedy otherwise).
pub fn ncon(tensors: &[&Tensor], labels: &[&[i32]]) -> Result<Tensor> {
    if tensors.len() != labels.len() || tensors.is_empty() {
        return Err(Error::InvalidArgument("ncon: tensors/labels length mismatch".into()));
    }
    let mut work: Vec<(Tensor, Vec<i32>)> = Vec::with_capacity(tensors.len());
    for (t, l) in tensors.iter().zip(labels) {
        if t.rank() != l.len() {
            return Err(Error::InvalidArgument(format!(
                "ncon: tensor of rank {} given {} labels",
                t.rank(),
                l.len()
            )));
        }
        work.push(self_trace((*t).clone(), l.to_vec())?);
    }
    // label bookkeeping
    let mut all: Vec<i32> = work.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    let mut counted = all.clone();
    counted.sort_unstable();
    for w in counted.chunk_by(|a, b| a == b) {
        let ok = if w[0] > 0 { w.len() == 2 } else { w.len() == 1 && w[0] != 0 };
        if !ok {
            return Err(Error::InvalidArgument(format!("ncon: label {} used {} times", w[0], w.len())));
        }
    }
    all.sort_unstable();
    all.dedup();
    let mut logdim = vec![0.0f64; all.len()];
    for (t, l) in &work {
        for (p, x) in l.iter().enumerate() {
            let k = all.binary_search(x).unwrap();
            if logdim[k] == 0.0 {
                logdim[k] = (t.shape()[p] as f64).ln();
            } else if (logdim[k] - (t.shape()[p] as f64).ln()).abs() > 1e-12 {
                return Err(Error::Shape(format!("ncon: label {x} has mismatched dimensions")));
            }
        }
    }
    let tree = if all.len() <= 128 {
        let masks: Vec<u128> = work
            .iter()
            .map(|(_, l)| l.iter().fold(0u128, |m, x| m | (1u128 << all.binary_search(x).unwrap())))
            .collect();
        plan(&masks, &logdim)
    } else {
        Plan::Chain((0..work.len()).collect())
    };
    let mut slots: Vec<Option<(Tensor, Vec<i32>)>> = work.into_iter().map(Some).collect();
    let (acc, lacc) = execute(&tree, &mut slots)?;
    if lacc.is_empty() {
        return Ok(acc.reshaped(&[1]));
    }
    let mut order: Vec<usize> = (0..lacc.len()).collect();
    order.sort_by_key(|&p| -lacc[p]);
    Ok(acc.permuted(&order))
}

fn self_trace(t: Tensor, l: Vec<i32>) -> Result<(Tensor, Vec<i32>)> {
    let mut pairs = Vec::new();
    let mut done = Vec::new();
    for (p, &x) in l.iter().enumerate() {
        if x > 0 && !done.contains(&x) {
            if let Some(q) = l.iter().rposition(|&y| y == x).filter(|&q| q != p) {
                pairs.push((p, q));
                done.push(x);
            }
        }
    }
    if pairs.is_empty() {
        return Ok((t, l));
    }
    let nt = t.partial_trace(&pairs)?;
    let nl: Vec<i32> = l.into_iter().filter(|x| !done.contains(x)).collect();
    Ok((nt, nl))
}

enum Plan {
    Leaf(usize),
    Pair(Box<Plan>, Box<Plan>),
    Chain(Vec<usize>),
}

fn plan(masks: &[u128], logdim: &[f64]) -> Plan {
    let n = masks.len();
    let size = |m: u128| -> f64 {
        let mut s = 0.0;
        let mut m = m;
        while m != 0 {
            let k = m.trailing_zeros() as usize;
            s += logdim[k];
            m &= m - 1;
        }
        s.exp()
    };
    if n == 1 {
        return Plan::Leaf(0);
    }
    if n > 12 {
        // greedy: repeatedly contract the cheapest pair
        let mut nodes: Vec<(Plan, u128)> = (0..n).map(|i| (Plan::Leaf(i), masks[i])).collect();
        while nodes.len() > 1 {
            let mut best = (f64::INFINITY, 0, 1);
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    let shared = nodes[i].1 & nodes[j].1;
                    let c = size(nodes[i].1 | nodes[j].1) * if shared == 0 { 1e6 } else { 1.0 };
                    if c < best.0 {
                        best = (c, i, j);
                    }
                }
            }
            let (_, i, j) = best;
            let (pj, mj) = nodes.remove(j);
            let (pi, mi) = nodes.remove(i);
            nodes.push((Plan::Pair(Box::new(pi), Box::new(pj)), mi ^ mj));
        }
        return nodes.pop().unwrap().0;
    }
    let full = (1usize << n) - 1;
    let mut legs = vec![0u128; full + 1];
    for s in 1..=full {
        let low = s.trailing_zeros() as usize;
        legs[s] = legs[s & (s - 1)] ^ masks[low];
    }
    let mut cost = vec![f64::INFINITY; full + 1];
    let mut split = vec![0usize; full + 1];
    for i in 0..n {
        cost[1 << i] = 0.0;
    }
    for s in 1..=full {
        if s & (s - 1) == 0 {
            continue;
        }
        let low = s & s.wrapping_neg();
        // enumerate subsets a containing the lowest bit, b = s \ a
        let mut a = (s - 1) & s;
        while a > 0 {
            if a & low != 0 {
                let b = s ^ a;
                let shared = legs[a] & legs[b];
                let mut c = cost[a] + cost[b] + size(legs[a] | legs[b]);
                if shared == 0 {
                    c *= 4.0;
                }
                if c < cost[s] {
                    cost[s] = c;
                    split[s] = a;
                }
            }
            a = (a - 1) & s;
        }
    }
    fn build(s: usize, split: &[usize]) -> Plan {
        if s & (s - 1) == 0 {
            return Plan::Leaf(s.trailing_zeros() as usize);
        }
        let a = split[s];
        Plan::Pair(Box::new(build(a, split)), Box::new(build(s ^ a, split)))
    }
    build(full, &split)
}

fn execute(p: &Plan, slots: &mut [Option<(Tensor, Vec<i32>)>]) -> Result<(Tensor, Vec<i32>)> {
    match p {
        Plan::Leaf(i) => Ok(slots[*i].take().expect("ncon leaf used twice")),
        Plan::Pair(a, b) => {
            let x = execute(a, slots)?;
            let y = execute(b, slots)?;
            Ok(join(x, y))
        }
        Plan::Chain(ix) => {
            let mut acc = slots[ix[0]].take().expect("ncon leaf used twice");
            for &i in &ix[1..] {
                acc = join(acc, slots[i].take().expect("ncon leaf used twice"));
            }
            Ok(acc)
        }
    }
}

fn join((ta, la): (Tensor, Vec<i32>), (tb, lb): (Tensor, Vec<i32>)) -> (Tensor, Vec<i32>) {
    if la.is_empty() {
        return (tb.scale(ta.data[0]), lb);
    }
    if lb.is_empty() {
        return (ta.scale(tb.data[0]), la);
    }
    let mut pairs = Vec::new();
    for (p, &x) in la.iter().enumerate() {
        if x > 0 {
            if let Some(q) = lb.iter().position(|&y| y == x) {
                pairs.push((p, q));
            }
        }
    }
    let tc = ta.contract_unchecked(&tb, &pairs);
    let mut lc: Vec<i32> = la.iter().copied().filter(|x| *x < 0 || !lb.contains(x)).collect();
    lc.extend(lb.iter().copied().filter(|x| *x < 0 || !la.contains(x)));
    (tc, lc)
}

/// Text record used inside every JSON document the crate writes.
///
/// Values are stored as decimal strings with 17 significant digits so that
/// a write/read cycle is bit exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub complex: bool,
    pub values: Vec<String>,
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl From<&Tensor> for TensorRecord {
    fn from(t: &Tensor) -> Self {
        let complex = !t.data.iter().all(|z| z.im == 0.0);
        let values = if complex {
            t.data.iter().flat_map(|z| [fmt17(z.re), fmt17(z.im)]).collect()
        } else {
            t.data.iter().map(|z| fmt17(z.re)).collect()
        };
        TensorRecord {
            shape: t.shape.clone(),
            complex,
            values,
        }
    }
}

impl TryFrom<&TensorRecord> for Tensor {
    type Error = Error;

    fn try_from(r: &TensorRecord) -> Result<Tensor> {
        let parse = |s: &String| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad tensor value {s:?}: {e}")))
        };
        let data = if r.complex {
            if !r.values.len().is_multiple_of(2) {
                return Err(Error::Shape("complex record with odd value count".into()));
            }
            r.values
                .chunks(2)
                .map(|c| Ok(C64::new(parse(&c[0])?, parse(&c[1])?)))
                .collect::<Result<Vec<_>>>()?
        } else {
            r.values.iter().map(|s| Ok(C64::new(parse(s)?, 0.0))).collect::<Result<Vec<_>>>()?
        };
        Tensor::new(r.shape.clone(), data)
    }
}
