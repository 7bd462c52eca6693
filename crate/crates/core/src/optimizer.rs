//! Energy minimisation of a scale-invariant ternary network for a nearest-
//! neighbour chain Hamiltonian, and fixed-point densities.

use serde::{Deserialize, Serialize};

use crate::linalg::{herm_eigenvalues, minimizing_isometry};
use crate::mera::channels::{ascend_pair, descend_avg, descend_pair, pair_energy};
use crate::mera::{two_site_environments, Layer, PairType, Purified, ScaleInvariantMera};
use crate::tensor::{Tensor, C64, ONE};
use crate::{par, Error, Result};

/// Two-site term of a translation-invariant chain Hamiltonian.
#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    /// d²×d² Hermitian matrix on (site, site + 1).
    pub h: Tensor,
    /// Transverse field strength.
    pub g: f64,
}

impl LocalHamiltonian {
    pub fn site_dim(&self) -> usize {
        (self.h.rows() as f64).sqrt().round() as usize
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.h.max_abs_diff(&self.h.dagger())
    }
}

pub fn pauli_x() -> Tensor {
    Tensor::from_real(vec![2, 2], &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_z() -> Tensor {
    Tensor::from_real(vec![2, 2], &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

/// `h = −X⊗X − (g/2)(Z⊗1 + 1⊗Z)`, so that `H = Σ h = −Σ XX − g Σ Z`.
pub fn ising_hamiltonian(g: f64) -> LocalHamiltonian {
    let (x, z, id) = (pauli_x(), pauli_z(), Tensor::identity(2));
    let xx = x.kron(&x);
    let field = z.kron(&id).add(&id.kron(&z)).unwrap();
    let h = xx.scale(C64::new(-1.0, 0.0)).add(&field.scale(C64::new(-g / 2.0, 0.0))).unwrap();
    LocalHamiltonian { h, g }
}

/// Critical point g = 1; ground energy per site −4/π.
pub fn ising_critical_hamiltonian() -> LocalHamiltonian {
    ising_hamiltonian(1.0)
}

/// Exact ground energy per site of the infinite chain [`ising_hamiltonian`],
/// `−(1/π)∫₀^π √(1 + g² + 2g cos k) dk`.
pub fn ising_ground_energy(g: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let out = quadrature::integrate(|k| (1.0 + g * g + 2.0 * g * k.cos()).max(0.0).sqrt(), 0.0, pi, 1e-14);
    -out.integral / pi
}

/// Translation-averaged pair densities level by level.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    /// `pairs[n]`: 4-leg pair density at level n; the last entry is the
    /// scale-invariant fixed point.
    pub pairs: Vec<Tensor>,
    /// One-site marginals, same indexing.
    pub sites: Vec<Tensor>,
    pub residual: f64,
    pub iterations: usize,
}

impl DensityProfile {
    pub fn fixed_point(&self) -> &Tensor {
        self.pairs.last().unwrap()
    }

    /// Pair density at level `n` as a matrix.
    pub fn pair_matrix(&self, n: usize) -> Tensor {
        let d = self.pairs[n].shape()[0];
        self.pairs[n].clone().reshaped(&[d * d, d * d])
    }
}

fn one_site_marginal(pair: &Tensor) -> Tensor {
    let l = pair.partial_trace(&[(1, 3)]).unwrap();
    let r = pair.partial_trace(&[(0, 2)]).unwrap();
    l.add(&r).unwrap().scale(C64::new(0.5, 0.0))
}

fn maximally_mixed_pair(d: usize) -> Tensor {
    Tensor::identity(d * d).scale(C64::new(1.0 / (d * d) as f64, 0.0)).reshaped(&[d, d, d, d])
}

/// Power iteration on the averaged descending map of the repeated layer.
pub(crate) fn power_fixed_point(layer: &Layer, start: Option<&Tensor>, tol: f64, max_iter: usize) -> (Tensor, f64, usize) {
    let d = layer.chi_out();
    let mut rho = start.cloned().unwrap_or_else(|| maximally_mixed_pair(d));
    let mut res = f64::INFINITY;
    let mut it = 0;
    while it < max_iter {
        let next = hermitize(&descend_avg_par(&rho, layer));
        res = next.max_abs_diff(&rho);
        rho = next;
        it += 1;
        if res < tol {
            break;
        }
    }
    (rho, res, it)
}

fn descend_avg_par(rho: &Tensor, layer: &Layer) -> Tensor {
    if !par::is_parallel() {
        return descend_avg(rho, layer);
    }
    let parts = par::map(&PairType::ALL, |&p| descend_pair(rho, layer, p));
    let mut acc = parts[0].add(&parts[1]).unwrap().add(&parts[2]).unwrap();
    acc = acc.scale(C64::new(1.0 / 3.0, 0.0));
    acc
}

fn ascend_avg_par(h: &Tensor, layer: &Layer) -> Tensor {
    let parts = par::map(&PairType::ALL, |&p| ascend_pair(h, layer, p));
    parts[0].add(&parts[1]).unwrap().add(&parts[2]).unwrap().scale(C64::new(1.0 / 3.0, 0.0))
}

/// Restore exact Hermiticity and unit trace of a 4-leg pair density.
fn hermitize(rho: &Tensor) -> Tensor {
    let d = rho.shape()[0];
    let m = rho.clone().reshaped(&[d * d, d * d]).hermitian_part();
    let t = m.trace();
    m.scale(ONE / t).reshaped(&[d, d, d, d])
}

/// Fixed-point pair density of the repeated layer, then descended through the
/// transitional layers.
pub fn fixed_point_density(mera: &ScaleInvariantMera) -> Result<DensityProfile> {
    fixed_point_density_with(mera, None, 1e-12, 20_000)
}

pub fn fixed_point_density_with(
    mera: &ScaleInvariantMera,
    start: Option<&Tensor>,
    tol: f64,
    max_iter: usize,
) -> Result<DensityProfile> {
    if mera.b() != 3 {
        return Err(Error::Unsupported("fixed-point densities need b = 3".into()));
    }
    let (rho, residual, iterations) = power_fixed_point(mera.layer(), start, tol, max_iter);
    if !rho.is_finite() {
        return Err(Error::NonFinite("fixed-point density"));
    }
    if residual > tol.max(1e-9) {
        return Err(Error::NoConvergence { what: "fixed-point density", iterations, residual });
    }
    Ok(profile_from(mera, rho, residual, iterations))
}

/// Translation-averaged three-site density (`χ³×χ³`) of the repeated layer,
/// by power iteration through the window engine.
pub fn fixed_point_triple(mera: &ScaleInvariantMera, tol: f64, max_iter: usize) -> Result<Tensor> {
    if mera.b() != 3 {
        return Err(Error::Unsupported("fixed-point densities need b = 3".into()));
    }
    let layer = mera.layer();
    let chi = mera.chi();
    let n = chi * chi * chi;
    let mut rho = Tensor::identity(n).scale(C64::new(1.0 / n as f64, 0.0));
    let mut res = f64::INFINITY;
    for it in 0..max_iter {
        let top = Purified::from_density(0, &[chi; 3], &rho)?;
        let parts = par::try_map(&[3i64, 4, 5], |&a| top.descend(layer, a, a + 2).map(|p| p.density()))?;
        let mut next = parts[0].add(&parts[1])?.add(&parts[2])?.hermitian_part();
        let t = next.trace();
        next = next.scale(ONE / t);
        res = next.max_abs_diff(&rho);
        rho = next;
        if !rho.is_finite() {
            return Err(Error::NonFinite("three-site density"));
        }
        if res < tol {
            return Ok(rho);
        }
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NoConvergence { what: "three-site fixed point", iterations: max_iter, residual: res })
}

fn profile_from(mera: &ScaleInvariantMera, top: Tensor, residual: f64, iterations: usize) -> DensityProfile {
    let t = mera.transitional().len();
    let mut pairs = vec![top];
    for n in (0..t).rev() {
        let next = hermitize(&descend_avg_par(&pairs[0], &mera.transitional()[n]));
        pairs.insert(0, next);
    }
    let sites = pairs.iter().map(one_site_marginal).collect();
    DensityProfile { pairs, sites, residual, iterations }
}

fn check_h(mera: &ScaleInvariantMera, h: &LocalHamiltonian) -> Result<()> {
    let d = mera.physical_dim();
    if h.h.shape() != [d * d, d * d] {
        return Err(Error::Shape(format!("hamiltonian {:?} for physical dimension {d}", h.h.shape())));
    }
    Ok(())
}

/// `Tr(h ρ₂)` with ρ₂ the physical-level pair density.
pub fn energy_per_site(mera: &ScaleInvariantMera, h: &LocalHamiltonian) -> Result<f64> {
    check_h(mera, h)?;
    let prof = fixed_point_density(mera)?;
    Ok(energy_from_profile(&prof, h))
}

fn energy_from_profile(prof: &DensityProfile, h: &LocalHamiltonian) -> f64 {
    let e = prof.pair_matrix(0).matmul(&h.h).trace();
    e.re
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationReport {
    /// Energy per site after each sweep.
    pub energies: Vec<f64>,
    /// Max constraint residual over all tensors after each sweep.
    pub isometry_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    pub chi: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Power-iteration steps refreshing the fixed point per sweep.
    pub fixed_point_steps: usize,
    /// Number of ascended copies of the Hamiltonian felt by the repeated layer.
    pub ascend_terms: usize,
    /// Stop when the relative energy change over 5 sweeps is below this.
    pub convergence: f64,
}

impl OptimizeOptions {
    pub fn new(chi: usize, sweeps: usize, seed: u64) -> Self {
        Self { chi, sweeps, seed, fixed_point_steps: 4, ascend_terms: 4, convergence: 1e-8 }
    }
}

/// Linearised environment updates of `u` then `w`.
fn update_layer(layer: &Layer, h: &Tensor, rho: &Tensor) -> Result<Layer> {
    let env = two_site_environments(h, rho, layer)?;
    let d = layer.chi_in();
    let u = minimizing_isometry(&env.u.as_matrix(2).transpose()).reshaped(&[d; 4]);
    let layer = Layer::from_parts(u, layer.w.clone());
    let env = two_site_environments(h, rho, &layer)?;
    let wshape = layer.w.shape().to_vec();
    let w = minimizing_isometry(&env.w.as_matrix(3).transpose()).reshaped(&wshape);
    Ok(Layer::from_parts(layer.u.clone(), w))
}

/// Shift a 4-leg bond term to be negative definite.
fn shifted(h: &Tensor) -> Tensor {
    let d = h.shape()[0];
    let m = h.clone().reshaped(&[d * d, d * d]);
    let top = herm_eigenvalues(&m).last().copied().unwrap_or(0.0);
    let shift = top.max(0.0) + 1e-3 * (1.0 + top.abs());
    m.sub(&Tensor::identity(d * d).scale(C64::new(shift, 0.0))).unwrap().reshaped(&[d, d, d, d])
}

pub fn optimize(h: &LocalHamiltonian, chi: usize, sweeps: usize, seed: u64) -> Result<(ScaleInvariantMera, OptimizationReport)> {
    optimize_with(h, &OptimizeOptions::new(chi, sweeps, seed), |_, _, _| Ok(()))
}

/// Initial network: random layers, with one transitional layer when the
/// physical dimension differs from χ.
pub fn initial_network(d: usize, chi: usize, seed: u64) -> Result<ScaleInvariantMera> {
    let top = Layer::random(chi, chi, 3, seed)?;
    if d == chi {
        ScaleInvariantMera::new(top)
    } else {
        let bottom = Layer::random(d, chi, 3, crate::mera::mix(seed, 77))?;
        ScaleInvariantMera::with_transitional(top, vec![bottom])
    }
}

/// Optimise from [`initial_network`]; `checkpoint(sweep, network, report)`
/// runs after every sweep.
pub fn optimize_with<F>(h: &LocalHamiltonian, opts: &OptimizeOptions, checkpoint: F) -> Result<(ScaleInvariantMera, OptimizationReport)>
where
    F: FnMut(usize, &ScaleInvariantMera, &OptimizationReport) -> Result<()>,
{
    if opts.chi < 2 {
        return Err(Error::InvalidArgument(format!("bond dimension {} < 2", opts.chi)));
    }
    let d = h.site_dim();
    if h.h.shape() != [d * d, d * d] || h.hermiticity_residual() > 1e-12 {
        return Err(Error::InvalidArgument("hamiltonian must be a Hermitian two-site term".into()));
    }
    let start = initial_network(d, opts.chi, opts.seed)?;
    optimize_from(h, start, opts, checkpoint)
}

/// Continue optimising a given network.
pub fn optimize_from<F>(h: &LocalHamiltonian, start: ScaleInvariantMera, opts: &OptimizeOptions, mut checkpoint: F) -> Result<(ScaleInvariantMera, OptimizationReport)>
where
    F: FnMut(usize, &ScaleInvariantMera, &OptimizationReport) -> Result<()>,
{
    check_h(&start, h)?;
    let d = h.site_dim();
    let h0 = shifted(&h.h.clone().reshaped(&[d, d, d, d]));
    let mut trans: Vec<Layer> = start.transitional().to_vec();
    let mut top = start.layer().clone();
    let mut rho = power_fixed_point(&top, None, 1e-10, 200).0;
    let mut report = OptimizationReport { energies: Vec::new(), isometry_residuals: Vec::new(), iterations: 0, converged: false };
    let mut mera = start;
    for sweep in 0..opts.sweeps {
        rho = power_fixed_point(&top, Some(&rho), 1e-13, opts.fixed_point_steps).0;
        // densities below the repeated layer
        let t = trans.len();
        let mut rhos = vec![rho.clone()];
        for n in (0..t).rev() {
            rhos.insert(0, hermitize(&descend_avg_par(&rhos[0], &trans[n])));
        }
        // transitional layers, bottom up
        let mut hn = h0.clone();
        for n in 0..t {
            trans[n] = update_layer(&trans[n], &hn, &rhos[n + 1])?;
            hn = shifted(&ascend_avg_par(&hn, &trans[n]));
        }
        // repeated layer against the sum of its ascended copies
        let mut hsi = hn.clone();
        let mut cur = hn;
        for _ in 1..opts.ascend_terms {
            cur = ascend_avg_par(&cur, &top);
            hsi = hsi.add(&cur).unwrap();
        }
        top = update_layer(&top, &hsi, &rho)?;

        mera = ScaleInvariantMera::with_transitional(top.clone(), trans.clone())?;
        let prof = {
            let r = power_fixed_point(&top, Some(&rho), 1e-13, 1).0;
            profile_from(&mera, r, 0.0, 0)
        };
        let e = energy_from_profile(&prof, h);
        if !e.is_finite() {
            return Err(Error::NonFinite("energy"));
        }
        let resid = trans
            .iter()
            .chain(std::iter::once(&top))
            .map(|l| l.unitarity_residual().max(l.isometry_residual()))
            .fold(0.0, f64::max);
        report.energies.push(e);
        report.isometry_residuals.push(resid);
        report.iterations = sweep + 1;
        checkpoint(sweep, &mera, &report)?;
        let k = report.energies.len();
        if k > 10 && report.energies[k - 1] - report.energies[k - 11] > 1e-6 {
            return Err(Error::Diverged(format!(
                "energy rose from {:.10} to {:.10} over 10 sweeps (sweep {})",
                report.energies[k - 11],
                report.energies[k - 1],
                sweep
            )));
        }
        if k > 5 {
            let rel = (report.energies[k - 1] - report.energies[k - 6]).abs() / report.energies[k - 1].abs().max(1e-300);
            if rel < opts.convergence {
                report.converged = true;
                break;
            }
        }
    }
    for l in mera.transitional().iter().chain(std::iter::once(mera.layer())) {
        if l.unitarity_residual() > crate::mera::LAYER_TOL || l.isometry_residual() > crate::mera::LAYER_TOL {
            return Err(Error::NonFinite("layer constraints after optimisation"));
        }
    }
    Ok((mera, report))
}

/// Energy of a pair density against the physical term via the environment
/// contraction rather than the descended density.
pub fn energy_by_contraction(mera: &ScaleInvariantMera, h: &LocalHamiltonian) -> Result<f64> {
    check_h(mera, h)?;
    let prof = fixed_point_density(mera)?;
    let d = mera.physical_dim();
    let h4 = h.h.clone().reshaped(&[d, d, d, d]);
    let rho = if prof.pairs.len() > 1 { &prof.pairs[1] } else { prof.fixed_point() };
    let e = pair_energy(&h4, rho, mera.layer_at(0));
    Ok(e.re / 3.0)
}
