//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's contraction, channel or linear-algebra code; networks are
//! read only through their raw tensor entries.
#![allow(dead_code)]

use holomera::mera::{CapState, FiniteRangeMera};
use holomera::C64;
use nalgebra::{DMatrix, SymmetricEigen};

// ---------------------------------------------------------------------------
// Cone state vector for finite-range ternary networks

#[derive(Clone, Copy, Debug, PartialEq)]
enum Leg {
    Site { level: usize, pos: i64 },
    Env,
}

/// State vector over labelled legs, first leg most significant.
struct Legs {
    labels: Vec<Leg>,
    dims: Vec<usize>,
    amp: Vec<C64>,
}

impl Legs {
    fn find(&self, level: usize, pos: i64) -> Option<usize> {
        self.labels.iter().position(|l| *l == Leg::Site { level, pos })
    }

    /// Apply `m` (rows = output index, cols = input index, row-major) to the
    /// legs `ins`; the outputs are appended as new trailing legs.
    fn apply(&mut self, ins: &[usize], m: &[C64], outs: &[(Leg, usize)]) {
        let n = self.labels.len();
        let rest: Vec<usize> = (0..n).filter(|i| !ins.contains(i)).collect();
        let mut stride = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            stride[i] = stride[i + 1] * self.dims[i + 1];
        }
        let din: usize = ins.iter().map(|&i| self.dims[i]).product();
        let dout: usize = outs.iter().map(|o| o.1).product();
        assert_eq!(m.len(), din * dout);
        let drest: usize = rest.iter().map(|&i| self.dims[i]).product();
        let offsets = |legs: &[usize]| -> Vec<usize> {
            let total: usize = legs.iter().map(|&i| self.dims[i]).product();
            (0..total)
                .map(|mut k| {
                    let mut off = 0;
                    for &i in legs.iter().rev() {
                        off += (k % self.dims[i]) * stride[i];
                        k /= self.dims[i];
                    }
                    off
                })
                .collect()
        };
        let (rest_off, in_off) = (offsets(&rest), offsets(ins));
        let mut out = vec![C64::new(0.0, 0.0); drest * dout];
        let mut v = vec![C64::new(0.0, 0.0); din];
        for (r, &base) in rest_off.iter().enumerate() {
            for (j, &o) in in_off.iter().enumerate() {
                v[j] = self.amp[base + o];
            }
            for a in 0..dout {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..din {
                    s += m[a * din + j] * v[j];
                }
                out[r * dout + a] = s;
            }
        }
        let mut labels: Vec<Leg> = rest.iter().map(|&i| self.labels[i]).collect();
        let mut dims: Vec<usize> = rest.iter().map(|&i| self.dims[i]).collect();
        for &(l, d) in outs {
            labels.push(l);
            dims.push(d);
        }
        self.labels = labels;
        self.dims = dims;
        self.amp = out;
    }

    /// Reduced density on the given legs, in the given order.
    fn density(&self, keep: &[usize]) -> (usize, Vec<C64>) {
        let n = self.labels.len();
        let mut stride = vec![1usize; n];
        for i in (0..n - 1).rev() {
            stride[i] = stride[i + 1] * self.dims[i + 1];
        }
        let rest: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let offs = |legs: &[usize]| -> Vec<usize> {
            let total: usize = legs.iter().map(|&i| self.dims[i]).product();
            (0..total)
                .map(|mut k| {
                    let mut off = 0;
                    for &i in legs.iter().rev() {
                        off += (k % self.dims[i]) * stride[i];
                        k /= self.dims[i];
                    }
                    off
                })
                .collect()
        };
        let (ko, ro) = (offs(keep), offs(&rest));
        let dk = ko.len();
        let mut rho = vec![C64::new(0.0, 0.0); dk * dk];
        for i in 0..dk {
            for j in 0..dk {
                let mut s = C64::new(0.0, 0.0);
                for &r in &ro {
                    s += self.amp[ko[i] + r] * self.amp[ko[j] + r].conj();
                }
                rho[i * dk + j] = s;
            }
        }
        (dk, rho)
    }
}

fn partner(s: i64) -> Option<i64> {
    match s.rem_euclid(3) {
        2 => Some(s + 1),
        0 => Some(s - 1),
        _ => None,
    }
}

/// Largest state vector the oracle will hold.
pub const ORACLE_AMPLITUDES: usize = 1 << 22;

/// Dense reduced density (row-major, `n × n`) of physical sites `[lo, hi]`
/// of a ternary finite-range network, from a state vector grown top-down
/// through the causal cone only. A maximally mixed cap is purified with one
/// ancilla per cap site.
pub fn cone_window_density(fr: &FiniteRangeMera, lo: i64, hi: i64) -> (usize, Vec<C64>) {
    let layers = fr.layers();
    let depth = layers.len();
    assert!(layers.iter().all(|l| l.b() == 3), "oracle is ternary only");
    // needed[m]: sites at level m whose state after the level-m disentanglers matters
    let mut needed: Vec<Vec<i64>> = vec![(lo..=hi).collect()];
    for _ in 0..depth {
        let cur = needed.last().unwrap();
        let mut pre: Vec<i64> = cur.iter().flat_map(|&s| std::iter::once(s).chain(partner(s))).collect();
        pre.sort();
        pre.dedup();
        let mut up: Vec<i64> = pre.iter().map(|s| s.div_euclid(3)).collect();
        up.dedup();
        needed.push(up);
    }
    let chi = fr.chi();
    let mut st = Legs { labels: vec![], dims: vec![], amp: vec![C64::new(1.0, 0.0)] };
    for &pos in &needed[depth] {
        match fr.cap() {
            CapState::Product(v) => {
                let m: Vec<C64> = v.clone();
                st.apply(&[], &m, &[(Leg::Site { level: depth, pos }, chi)]);
            }
            CapState::MaximallyMixed => {
                let a = C64::new(1.0 / (chi as f64).sqrt(), 0.0);
                let m: Vec<C64> = (0..chi * chi).map(|k| if k / chi == k % chi { a } else { C64::new(0.0, 0.0) }).collect();
                st.apply(&[], &m, &[(Leg::Site { level: depth, pos }, chi), (Leg::Env, chi)]);
            }
        }
    }
    for level in (0..depth).rev() {
        let layer = &layers[level];
        let (d, dc) = (layer.chi_in(), layer.chi_out());
        // isometries: coarse c -> middle sites 3c, 3c+1, 3c+2
        let wdata = layer.w().data();
        let wm: Vec<C64> = (0..d * d * d * dc).map(|k| wdata[k]).collect();
        for &c in &needed[level + 1] {
            let i = st.find(level + 1, c).expect("cone site present");
            let outs: Vec<(Leg, usize)> = (0..3).map(|k| (Leg::Site { level, pos: 3 * c + k }, d)).collect();
            st.apply(&[i], &wm, &outs);
        }
        for l in st.labels.iter_mut() {
            if matches!(l, Leg::Site { level: lv, .. } if *lv == level + 1) {
                *l = Leg::Env;
            }
        }
        // disentanglers on (3k+2, 3k+3) with both sites present
        let udata = layer.u().data().to_vec();
        let present: Vec<i64> = st
            .labels
            .iter()
            .filter_map(|l| match l {
                Leg::Site { level: lv, pos } if *lv == level => Some(*pos),
                _ => None,
            })
            .collect();
        for &s in &present {
            if s.rem_euclid(3) == 2 && present.contains(&(s + 1)) {
                let (i, j) = (st.find(level, s).unwrap(), st.find(level, s + 1).unwrap());
                st.apply(&[i, j], &udata, &[(Leg::Site { level, pos: s }, d), (Leg::Site { level, pos: s + 1 }, d)]);
            }
        }
        assert!(st.amp.len() <= ORACLE_AMPLITUDES, "cone too wide for the dense oracle: {} amplitudes", st.amp.len());
    }
    let keep: Vec<usize> = (lo..=hi).map(|p| st.find(0, p).expect("window site present")).collect();
    st.density(&keep)
}

/// `Tr(a b) / √(Tr a² Tr b²)` for Hermitian row-major matrices.
pub fn hs_overlap(n: usize, a: &[C64], b: &[C64]) -> f64 {
    let tr = |x: &[C64], y: &[C64]| -> f64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += x[i * n + j] * y[j * n + i];
            }
        }
        s.re
    };
    tr(a, b) / (tr(a, a) * tr(b, b)).sqrt()
}

/// Largest entrywise difference.
pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Von Neumann entropy of a Hermitian row-major matrix, eigenvalues below
/// 1e-14 dropped.
pub fn entropy_of(n: usize, rho: &[C64]) -> f64 {
    // real symmetric embedding [[Re, −Im], [Im, Re]] doubles every eigenvalue
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = rho[(i % n) * n + (j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let ev = SymmetricEigen::new(m).eigenvalues;
    -ev.iter().filter(|&&p| p > 1e-14).map(|&p| p * p.ln()).sum::<f64>() / 2.0
}

// ---------------------------------------------------------------------------
// Transverse-field Ising chain `H = −Σ X_i X_{i+1} − g Σ Z_i`, periodic

/// `H v` with sites as bits, `Z|0⟩ = |0⟩`.
fn ising_apply(n: usize, g: f64, v: &[f64], out: &mut [f64]) {
    for (s, o) in out.iter_mut().enumerate() {
        let field: f64 = (0..n).map(|i| if s >> i & 1 == 0 { 1.0 } else { -1.0 }).sum();
        *o = -g * field * v[s];
    }
    for s in 0..v.len() {
        for i in 0..n {
            let t = s ^ (1 << i) ^ (1 << ((i + 1) % n));
            out[t] -= v[s];
        }
    }
}

/// Lowest `k` eigenvalues by Lanczos with full reorthogonalisation.
pub fn ising_low_spectrum(n: usize, g: f64, k: usize) -> Vec<f64> {
    let dim = 1usize << n;
    let steps = 160.min(dim);
    // deterministic start with weight in both parity sectors
    let mut q: Vec<f64> = (0..dim).map(|s| 1.0 + ((s * 2654435761) % 1000) as f64 / 1000.0).collect();
    let nrm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; dim];
    for j in 0..steps {
        ising_apply(n, g, &basis[j], &mut w);
        let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if bn < 1e-12 || j + 1 == steps {
            break;
        }
        beta.push(bn);
        basis.push(w.iter().map(|x| x / bn).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.truncate(k);
    ev
}

/// Ground energy of the periodic chain of even length `n`, from free
/// fermions with antiperiodic momenta.
pub fn free_fermion_ground(n: usize, g: f64) -> f64 {
    -(0..n)
        .map(|m| {
            let k = std::f64::consts::PI * (2 * m + 1) as f64 / n as f64;
            (1.0 + g * g - 2.0 * g * k.cos()).sqrt()
        })
        .sum::<f64>()
}

/// `−4/π`, the critical infinite-chain energy per site.
pub fn critical_energy_per_site() -> f64 {
    -4.0 / std::f64::consts::PI
}

/// Spin-wave velocity at g = 1 (slope of `2√(2 − 2cos k)` at k → 0).
pub const CRITICAL_VELOCITY: f64 = 2.0;

/// Scaling dimensions of the two lowest excitations (σ, ε) from gaps of
/// critical chains, `x(N) = (E − E₀) N / (2π v)`, extrapolated as
/// `x∞ + a/N²` over the given even sizes.
pub fn ising_dimensions(sizes: &[usize]) -> (f64, f64) {
    let mut rows = Vec::new();
    for &n in sizes {
        let e = ising_low_spectrum(n, 1.0, 3);
        let scale = n as f64 / (2.0 * std::f64::consts::PI * CRITICAL_VELOCITY);
        rows.push((n, (e[1] - e[0]) * scale, (e[2] - e[0]) * scale));
    }
    let fit = |pick: &dyn Fn(&(usize, f64, f64)) -> f64| {
        let x: Vec<f64> = rows.iter().map(|r| 1.0 / (r.0 * r.0) as f64).collect();
        let y: Vec<f64> = rows.iter().map(pick).collect();
        line_fit(&x, &y).1
    };
    (fit(&|r| r.1), fit(&|r| r.2))
}

// ---------------------------------------------------------------------------
// Small numerics

/// Least-squares `y = slope·x + intercept`: `(slope, intercept, max |residual|)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| (b - slope * a - icpt).abs()).fold(0.0, f64::max);
    (slope, icpt, res)
}

/// Relative difference.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `Tr(ρ O)` for a product of one-site operators on a dense window density
/// of `sites` sites of dimension `d`; `ops` are `(site index, d×d matrix)`.
pub fn dense_expectation(sites: usize, d: usize, rho: &[C64], ops: &[(usize, &[C64])]) -> C64 {
    let n = d.pow(sites as u32);
    let digit = |s: usize, k: usize| s / d.pow((sites - 1 - k) as u32) % d;
    let mut total = C64::new(0.0, 0.0);
    for s in 0..n {
        for t in 0..n {
            // O[t, s] = Π_k op_k[t_k, s_k], identity off the listed sites
            let mut o = C64::new(1.0, 0.0);
            for k in 0..sites {
                let (a, b) = (digit(t, k), digit(s, k));
                match ops.iter().find(|(i, _)| *i == k) {
                    Some((_, m)) => o *= m[a * d + b],
                    None if a != b => {
                        o = C64::new(0.0, 0.0);
                        break;
                    }
                    None => {}
                }
            }
            if o.norm() != 0.0 {
                total += rho[s * n + t] * o;
            }
        }
    }
    total
}
