//! Ascending and descending channels of a single ternary layer.
//!
//! Two-site objects are 4-leg tensors `[r0, r1, c0, c1]` (row legs, then
//! column legs); densities use the same layout with rows as kets. The three
//! fine pair positions relative to the blocks are
//! `L = (3k, 3k+1)`, `C = (3k+2, 3k+3)` and `R = (3k+1, 3k+2)`; each maps to
//! a neighbouring coarse pair.

use super::Layer;
use crate::linalg::herm_eigenvalues;
use crate::tensor::{ncon, Tensor, C64, ZERO};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairType {
    L,
    C,
    R,
}

impl PairType {
    pub const ALL: [PairType; 3] = [PairType::L, PairType::C, PairType::R];

    /// Type of the fine pair `(a, a + 1)` and the left site of its coarse pair.
    pub fn of(a: i64) -> (PairType, i64) {
        match a.rem_euclid(3) {
            0 => (PairType::L, a.div_euclid(3) - 1),
            1 => (PairType::R, a.div_euclid(3)),
            _ => (PairType::C, a.div_euclid(3)),
        }
    }
}

// node order: rho, wa, wb, u, h, conj u, conj wa, conj wb
const RHO: usize = 0;
const WA: usize = 1;
const WB: usize = 2;
const U: usize = 3;
const H: usize = 4;

fn labels(p: PairType) -> [[i32; 4]; 8] {
    let rho = [1, 2, 3, 4];
    let wa = [5, 6, 7, 1];
    let wb = [8, 9, 10, 2];
    match p {
        PairType::C => [rho, wa, wb, [11, 12, 7, 8], [13, 14, 11, 12], [13, 14, 15, 16], [5, 6, 15, 3], [16, 9, 10, 4]],
        PairType::L => [rho, wa, wb, [17, 11, 7, 8], [13, 14, 11, 9], [17, 13, 15, 16], [5, 6, 15, 3], [16, 14, 10, 4]],
        PairType::R => [rho, wa, wb, [11, 12, 7, 8], [13, 14, 6, 11], [14, 12, 15, 16], [5, 13, 15, 3], [16, 9, 10, 4]],
    }
}

/// Contract the pair network with node `skip` removed; its legs come out open
/// in their own order. With `skip = None` the result is the scalar network.
fn contract(p: PairType, rho: Option<&Tensor>, h: Option<&Tensor>, layer: &Layer, conj: &(Tensor, Tensor), skip: Option<usize>) -> Tensor {
    let lab = labels(p);
    let dummy = Tensor::zeros(&[1]);
    let nodes: [&Tensor; 8] = [
        rho.unwrap_or(&dummy),
        &layer.w,
        &layer.w,
        &layer.u,
        h.unwrap_or(&dummy),
        &conj.0,
        &conj.1,
        &conj.1,
    ];
    let open: Vec<i32> = skip.map(|s| lab[s].to_vec()).unwrap_or_default();
    let mut ts = Vec::with_capacity(7);
    let mut ls: Vec<Vec<i32>> = Vec::with_capacity(7);
    for (i, node) in nodes.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        ts.push(*node);
        ls.push(
            lab[i]
                .iter()
                .map(|&x| match open.iter().position(|&o| o == x) {
                    Some(k) => -(k as i32) - 1,
                    None => x,
                })
                .collect(),
        );
    }
    let refs: Vec<&[i32]> = ls.iter().map(|l| l.as_slice()).collect();
    ncon(&ts, &refs).expect("pair network labels are consistent")
}

fn conj_pair(layer: &Layer) -> (Tensor, Tensor) {
    (layer.u.conj(), layer.w.conj())
}

fn check_b3(layer: &Layer) -> Result<()> {
    if layer.b() != 3 {
        return Err(Error::Unsupported(
            "local channels are implemented for the ternary layer only".into(),
        ));
    }
    Ok(())
}

fn as_legs(op: &Tensor, d: usize, what: &str) -> Result<Tensor> {
    match op.shape() {
        [r, c] if *r == d * d && *c == d * d => Ok(op.clone().reshaped(&[d, d, d, d])),
        s if s == [d, d, d, d] => Ok(op.clone()),
        s => Err(Error::Shape(format!("{what}: two-site object of shape {s:?}, site dimension {d}"))),
    }
}

/// `O ↦ w^†(1 ⊗ O ⊗ 1)w`: the one-site scaling channel through the centre leg.
pub fn ascend_one_site(op: &Tensor, layer: &Layer) -> Result<Tensor> {
    check_b3(layer)?;
    let d = layer.chi_in();
    if op.shape() != [d, d] {
        return Err(Error::Shape(format!("one-site operator shape {:?}, expected [{d}, {d}]", op.shape())));
    }
    ncon(&[&layer.w, op, &layer.w.conj()], &[&[1, 2, 3, -2], &[4, 2], &[1, 4, 3, -1]])
}

/// Adjoint of [`ascend_one_site`]: density on the centre fine site.
pub fn descend_one_site(rho: &Tensor, layer: &Layer) -> Result<Tensor> {
    check_b3(layer)?;
    let d = layer.chi_out();
    if rho.shape() != [d, d] {
        return Err(Error::Shape(format!("one-site density shape {:?}, expected [{d}, {d}]", rho.shape())));
    }
    ncon(&[&layer.w, rho, &layer.w.conj()], &[&[1, -1, 2, 3], &[3, 4], &[1, -2, 2, 4]])
}

pub(crate) fn ascend_pair(h: &Tensor, layer: &Layer, p: PairType) -> Tensor {
    let c = conj_pair(layer);
    contract(p, None, Some(h), layer, &c, Some(RHO)).permuted(&[2, 3, 0, 1])
}

pub(crate) fn descend_pair(rho: &Tensor, layer: &Layer, p: PairType) -> Tensor {
    let c = conj_pair(layer);
    contract(p, Some(rho), None, layer, &c, Some(H)).permuted(&[2, 3, 0, 1])
}

/// Translation-averaged fine pair density.
pub(crate) fn descend_avg(rho: &Tensor, layer: &Layer) -> Tensor {
    let mut acc = descend_pair(rho, layer, PairType::L);
    acc = acc.add(&descend_pair(rho, layer, PairType::C)).unwrap();
    acc.add(&descend_pair(rho, layer, PairType::R)).unwrap().scale(C64::new(1.0 / 3.0, 0.0))
}

/// Two-site ascending map for one pair position; matrix in, matrix out.
pub fn ascend_two_site(op: &Tensor, layer: &Layer, p: PairType) -> Result<Tensor> {
    check_b3(layer)?;
    let d = layer.chi_in();
    let h = as_legs(op, d, "ascend_two_site")?;
    let e = layer.chi_out();
    Ok(ascend_pair(&h, layer, p).reshaped(&[e * e, e * e]))
}

/// Two-site descending map for one pair position; matrix in, matrix out.
pub fn descend_two_site(rho: &Tensor, layer: &Layer, p: PairType) -> Result<Tensor> {
    check_b3(layer)?;
    let e = layer.chi_out();
    let r = as_legs(rho, e, "descend_two_site")?;
    let d = layer.chi_in();
    Ok(descend_pair(&r, layer, p).reshaped(&[d * d, d * d]))
}

/// Check Hermiticity, unit trace and positivity of a density matrix.
pub fn check_density(rho: &Tensor, tol: f64) -> Result<()> {
    if rho.rank() != 2 || rho.rows() != rho.cols() {
        return Err(Error::NotDensity(format!("shape {:?}", rho.shape())));
    }
    if !rho.is_finite() {
        return Err(Error::NonFinite("density matrix"));
    }
    let herm = rho.max_abs_diff(&rho.dagger());
    if herm > tol {
        return Err(Error::NotDensity(format!("Hermiticity residual {herm:e}")));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::NotDensity(format!("trace {tr}")));
    }
    let min = herm_eigenvalues(rho)[0];
    if min < -tol {
        return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Descend a one-site (centre channel) or two-site (translation-averaged)
/// density matrix through one layer.
pub fn descend_density(rho: &Tensor, layer: &Layer) -> Result<Tensor> {
    check_b3(layer)?;
    check_density(rho, 1e-10)?;
    let e = layer.chi_out();
    if rho.rows() == e {
        descend_one_site(rho, layer)
    } else if rho.rows() == e * e {
        let d = layer.chi_in();
        Ok(descend_avg(&rho.clone().reshaped(&[e, e, e, e]), layer).reshaped(&[d * d, d * d]))
    } else {
        Err(Error::Shape(format!("density of dimension {} for site dimension {e}", rho.rows())))
    }
}

/// Linear environments of one layer in the pair energy, summed over the
/// three fine positions.
#[derive(Clone, Debug)]
pub struct TwoSiteEnv {
    /// Same legs as the disentangler.
    pub u: Tensor,
    /// Same legs as the isometry (both isometries of each network summed).
    pub w: Tensor,
    /// `sum_p Tr(h D_p(rho))`.
    pub energy: C64,
}

/// Environments of `u` and `w` for the energy `sum_p Tr(h · D_p(rho))`.
pub fn two_site_environments(h: &Tensor, rho: &Tensor, layer: &Layer) -> Result<TwoSiteEnv> {
    check_b3(layer)?;
    let h = as_legs(h, layer.chi_in(), "two_site_environments")?;
    let rho = as_legs(rho, layer.chi_out(), "two_site_environments")?;
    let c = conj_pair(layer);
    let mut eu = Tensor::zeros(layer.u.shape());
    let mut ew = Tensor::zeros(layer.w.shape());
    let mut energy = ZERO;
    for p in PairType::ALL {
        let gu = contract(p, Some(&rho), Some(&h), layer, &c, Some(U));
        let ga = contract(p, Some(&rho), Some(&h), layer, &c, Some(WA));
        let gb = contract(p, Some(&rho), Some(&h), layer, &c, Some(WB));
        energy += layer.u.data().iter().zip(gu.data()).map(|(a, b)| a * b).sum::<C64>();
        eu.axpy(C64::new(1.0, 0.0), &gu);
        ew.axpy(C64::new(1.0, 0.0), &ga);
        ew.axpy(C64::new(1.0, 0.0), &gb);
    }
    Ok(TwoSiteEnv { u: eu, w: ew, energy })
}

/// `Tr(h · D_p(rho))` summed over positions, by full contraction.
pub(crate) fn pair_energy(h: &Tensor, rho: &Tensor, layer: &Layer) -> C64 {
    let c = conj_pair(layer);
    PairType::ALL
        .iter()
        .map(|&p| contract(p, Some(rho), Some(h), layer, &c, None).data()[0])
        .sum()
}
