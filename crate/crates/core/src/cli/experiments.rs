//! One function per experiment kind. Each computes everything first and
//! returns the artifacts; nothing is written here.

use std::fmt::Write as _;

use serde::Serialize;

use super::artifact::{num, ArtifactSet};
use super::config::{CapKind, ExperimentConfig, ExperimentKind, NetworkSource, StateKind};
use super::CliError;
use crate::entropy::{cut_length, entropy_scaling_fit, EntropyCurve, EntropyFit, FiniteRangeBlocks, NetworkShape, ScaleInvariantBlocks, ScalingModel};
use crate::flow::{connected_correlator, correlator_direct, crossover_fit, cs_residual, holographic_ratio, rescale_covariance, truncated_cs_residual, truncated_curve, CovarianceReport, CrossoverFit, FlowCurve, StateRef};
use crate::holography::{dimension_from_mass, geodesic_closed_form, geodesic_numeric, geometric_grid, holo_propagator, holo_table_csv, holographic_cs_residual, radial_ode_residual, Geometry, GeodesicRegime, HoloRow};
use crate::mera::{build_finite_range, build_scale_invariant, CapState, FiniteRangeMera, NetworkRecord, ScaleInvariantMera};
use crate::mps::{column_origin, purified_mps, to_mps, transfer_spectrum, MpsRecord, TransferSpectrum};
use crate::optimizer::{fixed_point_density, ising_ground_energy, ising_hamiltonian, optimize, OptimizationReport};
use crate::superop::{build_scaling_superoperator, spectral_decompose, ScalingOperatorSet, ScalingTable};
use crate::Error;

/// Geodesic cutoff ε.
pub const GEODESIC_CUTOFF: f64 = 1e-4;
/// Radial grid for the mass-dimension check: log-step 1e-4 from z = 1.
const RADIAL_GRID: (f64, f64, usize) = (1.0, 1.0199, 200);

type Out<T> = Result<T, CliError>;

fn at(module: &'static str) -> impl Fn(Error) -> CliError {
    move |e| CliError::numerical(module, e)
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Out<ArtifactSet> {
    let mut art = ArtifactSet::new(kind, cfg);
    match kind {
        ExperimentKind::ScalingDims => scaling_dims(cfg, &mut art)?,
        ExperimentKind::Flow => flow(cfg, &mut art)?,
        ExperimentKind::Crossover => crossover(cfg, &mut art)?,
        ExperimentKind::HoloCompare => holo_compare(cfg, &mut art)?,
        ExperimentKind::Entropy => entropy(cfg, &mut art)?,
        ExperimentKind::MpsExport => mps_export(cfg, &mut art)?,
        ExperimentKind::Optimize => optimize_run(cfg, &mut art)?,
    }
    Ok(art)
}

fn scale_invariant(cfg: &ExperimentConfig) -> Out<(ScaleInvariantMera, Option<OptimizationReport>)> {
    match cfg.network {
        NetworkSource::Random => Ok((build_scale_invariant(cfg.chi, cfg.b, cfg.seed).map_err(at("mera-network"))?, None)),
        NetworkSource::Optimized => {
            let (m, rep) = optimize(&ising_hamiltonian(cfg.field), cfg.chi, cfg.sweeps, cfg.seed).map_err(at("optimizer"))?;
            Ok((m, Some(rep)))
        }
    }
}

fn cap_state(cfg: &ExperimentConfig) -> CapState {
    match cfg.cap {
        CapKind::Product => CapState::zero(cfg.chi),
        CapKind::MaximallyMixed => CapState::MaximallyMixed,
    }
}

fn finite_range(cfg: &ExperimentConfig) -> Out<(ScaleInvariantMera, FiniteRangeMera)> {
    let (si, _) = scale_invariant(cfg)?;
    let fr = FiniteRangeMera::from_scale_invariant(&si, cfg.wstar, cap_state(cfg)).map_err(at("mera-network"))?;
    Ok((si, fr))
}

fn network_id(cfg: &ExperimentConfig) -> String {
    let src = match cfg.network {
        NetworkSource::Random => "random",
        NetworkSource::Optimized => "optimized",
    };
    format!("{src}-chi{}-seed{}", cfg.chi, cfg.seed)
}

fn decompose(si: &ScaleInvariantMera) -> Out<(ScalingOperatorSet, f64)> {
    let s = build_scaling_superoperator(si).map_err(at("superoperators"))?;
    let unitality = s.unitality_residual();
    Ok((spectral_decompose(&s).map_err(at("superoperators"))?, unitality))
}

/// Operator indices from the config or the lowest real nontrivial one.
fn pick(set: &ScalingOperatorSet, cfg: &ExperimentConfig) -> Out<(usize, usize)> {
    let default = set.real_nontrivial().first().copied();
    let choose = |key: &str, v: Option<usize>| -> Out<usize> {
        match v.or(default) {
            Some(i) if i < set.len() => Ok(i),
            Some(i) => Err(CliError::config(key, format!("operator index {i} but only {} operators", set.len()))),
            None => Err(CliError::numerical("superoperators", Error::Defective("no real nontrivial scaling operator".into()))),
        }
    };
    Ok((choose("alpha", cfg.alpha)?, choose("beta", cfg.beta)?))
}

#[derive(Serialize)]
struct ScalingDimsResult {
    unitality_residual: f64,
    real_nontrivial: Vec<usize>,
    table: ScalingTable,
}

fn scaling_dims(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let (si, _) = scale_invariant(cfg)?;
    let (set, unitality) = decompose(&si)?;
    let table = set.to_table();
    let mut csv = String::from("alpha,re_lambda,im_lambda,delta,phase,cluster\n");
    for r in &table.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.alpha, num(r.re_lambda), num(r.im_lambda), num(r.delta), num(r.phase), r.cluster);
    }
    art.csv("scaling_dims.csv", &csv);
    art.json("scaling_dims.json", &ScalingDimsResult { unitality_residual: unitality, real_nontrivial: set.real_nontrivial(), table })
        .map_err(at("cli"))
}

#[derive(Serialize)]
struct Pair {
    alpha: usize,
    beta: usize,
    delta_alpha: f64,
    delta_beta: f64,
    /// `Δ_α + Δ_β`.
    eta_measured: f64,
    eta: f64,
}

fn pair(set: &ScalingOperatorSet, cfg: &ExperimentConfig) -> Out<Pair> {
    let (alpha, beta) = pick(set, cfg)?;
    let (da, db) = (set.operators[alpha].delta, set.operators[beta].delta);
    Ok(Pair { alpha, beta, delta_alpha: da, delta_beta: db, eta_measured: da + db, eta: cfg.eta.unwrap_or(da + db) })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Serialize)]
struct FlowResult {
    pair: Pair,
    cs_residual_max: f64,
    holographic_residual_max: f64,
    /// Largest difference between the two flow operators.
    operator_difference_max: f64,
    covariance: CovarianceReport,
}

fn flow(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let (si, _) = scale_invariant(cfg)?;
    let (set, _) = decompose(&si)?;
    let p = pair(&set, cfg)?;
    let profile = fixed_point_density(&si).map_err(at("optimizer"))?;
    let state = StateRef::ScaleInvariant { mera: &si, profile: &profile };
    let (a, b) = (&set.operators[p.alpha].op, &set.operators[p.beta].op);
    let seps = cfg.separations_for(ExperimentKind::Flow);
    let values = crate::par::try_map(&seps, |&r| correlator_direct(state, a, b, r)).map_err(at("correlator-flow"))?;
    let samples = seps.iter().map(|&r| r as f64).zip(values).collect();
    let curve = FlowCurve::new(samples, p.alpha, p.beta, p.eta, network_id(cfg)).map_err(at("correlator-flow"))?;
    let cs = cs_residual(&curve, p.eta).map_err(at("correlator-flow"))?;
    let holo = holographic_cs_residual(&curve, p.eta / 2.0).map_err(at("holography"))?;
    let covariance = rescale_covariance(&curve, (cfg.b as f64).ln()).map_err(at("correlator-flow"))?;
    let mut csv = String::from("r,correlator,cs_residual,holographic_residual\n");
    for (i, (z, v)) in curve.samples.iter().enumerate() {
        let interior = i > 0 && i + 1 < curve.len();
        let (c, h) = if interior { (num(cs[i - 1]), num(holo[i - 1])) } else { (String::new(), String::new()) };
        let _ = writeln!(csv, "{},{},{c},{h}", num(*z), num(*v));
    }
    art.csv("flow.csv", &csv);
    let diff: Vec<f64> = cs.iter().zip(&holo).map(|(x, y)| x - y).collect();
    let result = FlowResult {
        pair: p,
        cs_residual_max: max_abs(&cs),
        holographic_residual_max: max_abs(&holo),
        operator_difference_max: max_abs(&diff),
        covariance,
    };
    art.json("flow.json", &result).map_err(at("cli"))
}

fn correlator_csv(curve: &FlowCurve) -> String {
    let mut csv = String::from("r,connected_correlator\n");
    for (z, v) in &curve.samples {
        let _ = writeln!(csv, "{},{}", num(*z), num(*v));
    }
    csv
}

/// Connected correlators of the finite-range network at the configured separations.
fn finite_range_curve(cfg: &ExperimentConfig, kind: ExperimentKind) -> Out<(FiniteRangeMera, Pair, FlowCurve)> {
    let (si, fr) = finite_range(cfg)?;
    let (set, _) = decompose(&si)?;
    let p = pair(&set, cfg)?;
    let (a, b) = (&set.operators[p.alpha].op, &set.operators[p.beta].op);
    let seps = cfg.separations_for(kind);
    let values = crate::par::try_map(&seps, |&r| connected_correlator(&fr, a, b, r)).map_err(at("correlator-flow"))?;
    let samples = seps.iter().map(|&r| r as f64).zip(values).collect();
    let curve = FlowCurve::new(samples, p.alpha, p.beta, p.eta, network_id(cfg)).map_err(at("correlator-flow"))?;
    Ok((fr, p, curve))
}

fn transfer(fr: &FiniteRangeMera) -> Out<TransferSpectrum> {
    let m = purified_mps(fr).map_err(at("mps-bridge"))?.rotated(column_origin(fr.wstar()));
    transfer_spectrum(&m).map_err(at("mps-bridge"))
}

#[derive(Serialize)]
struct CrossoverResult {
    pair: Pair,
    zstar: f64,
    fit: Option<CrossoverFit>,
    /// Why the fit is absent.
    fit_error: Option<String>,
    transfer: TransferSpectrum,
    /// `1/ξ_T` from the transfer matrix, absent at the floor.
    predicted_rate: Option<f64>,
    /// Max truncated-flow residual on `A e^{−ηz/z*}` at the same scales.
    synthetic_truncated_residual_max: f64,
}

fn crossover(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let (fr, p, curve) = finite_range_curve(cfg, ExperimentKind::Crossover)?;
    let zstar = cfg.zstar_or_xi();
    let (fit, fit_error) = match crossover_fit(&curve, zstar) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let transfer = transfer(&fr)?;
    let predicted_rate = (!transfer.at_floor && transfer.xi > 0.0).then(|| 1.0 / transfer.xi);
    let synth = truncated_curve(&curve.scales(), p.eta, zstar, 1.0).map_err(at("correlator-flow"))?;
    let res = truncated_cs_residual(&synth, p.eta, zstar).map_err(at("correlator-flow"))?;
    art.csv("crossover.csv", &correlator_csv(&curve));
    let result = CrossoverResult { pair: p, zstar, fit, fit_error, transfer, predicted_rate, synthetic_truncated_residual_max: max_abs(&res) };
    art.json("crossover.json", &result).map_err(at("cli"))
}

#[derive(Serialize)]
struct MassRow {
    mass_squared: f64,
    delta_plus: f64,
    delta_minus: f64,
    residual_plus: f64,
    residual_minus: f64,
}

#[derive(Serialize)]
struct GeodesicRow {
    z: f64,
    length: f64,
    closed_form: f64,
    turning_point: f64,
    regime: GeodesicRegime,
    error_estimate: f64,
}

#[derive(Serialize)]
struct HoloResult {
    zstar: f64,
    temperature: f64,
    geodesic_cutoff: f64,
    pair: Pair,
    mera_fit: Option<CrossoverFit>,
    propagator_fit: Option<CrossoverFit>,
    fit_errors: Vec<String>,
    mass_dimension: Vec<MassRow>,
    geodesics: Vec<GeodesicRow>,
}

fn holo_compare(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let zstar = cfg.zstar_or_xi();
    let geometry = Geometry::btz(zstar).map_err(at("holography"))?;
    let (_, p, curve) = finite_range_curve(cfg, ExperimentKind::HoloCompare)?;
    let c1 = curve.samples[0].1;
    let ratio = holographic_ratio(&curve, c1).map_err(at("correlator-flow"))?;
    let prop: Vec<(f64, f64)> = curve.scales().into_iter().map(|z| (z, holo_propagator(z, zstar, p.eta))).collect();
    let prop0 = prop[0].1;
    let prop = FlowCurve::new(prop.into_iter().map(|(z, v)| (z, v / prop0)).collect(), p.alpha, p.beta, p.eta, "propagator")
        .map_err(at("holography"))?;
    let mut fit_errors = Vec::new();
    let mut fit = |c: &FlowCurve, what: &str| match crossover_fit(c, zstar) {
        Ok(f) => Some(f),
        Err(e) => {
            fit_errors.push(format!("{what}: {e}"));
            None
        }
    };
    let mera_fit = fit(&ratio, "mera");
    let propagator_fit = fit(&prop, "propagator");

    let grid = geometric_grid(RADIAL_GRID.0, RADIAL_GRID.1, RADIAL_GRID.2);
    let mut mass_dimension = Vec::new();
    for &m2 in &cfg.mass_squared {
        let (dp, dm) = dimension_from_mass(m2).map_err(at("holography"))?;
        mass_dimension.push(MassRow {
            mass_squared: m2,
            delta_plus: dp,
            delta_minus: dm,
            residual_plus: radial_ode_residual(m2, dp, &grid).map_err(at("holography"))?,
            residual_minus: radial_ode_residual(m2, dm, &grid).map_err(at("holography"))?,
        });
    }
    let zs = geometric_grid(cfg.z_min, cfg.z_max, cfg.z_points);
    let geos = crate::par::try_map(&zs, |&z| geodesic_numeric(z, &geometry, GEODESIC_CUTOFF)).map_err(at("holography"))?;
    let geodesics: Vec<GeodesicRow> = geos
        .iter()
        .map(|g| GeodesicRow {
            z: g.separation,
            length: g.length,
            closed_form: geodesic_closed_form(g.separation, zstar),
            turning_point: g.turning_point,
            regime: g.regime,
            error_estimate: g.error_estimate,
        })
        .collect();
    let rows: Vec<HoloRow> = geos.iter().map(|g| HoloRow { z: g.separation, zstar, value: g.length, regime: g.regime }).collect();
    art.csv("holo_geodesics.csv", &holo_table_csv(&rows));
    let mut csv = String::from("z,mera_ratio,propagator_ratio\n");
    for ((z, m), (_, h)) in ratio.samples.iter().zip(&prop.samples) {
        let _ = writeln!(csv, "{},{},{}", num(*z), num(*m), num(*h));
    }
    art.csv("holo_compare.csv", &csv);
    let result = HoloResult {
        zstar,
        temperature: geometry.temperature(),
        geodesic_cutoff: GEODESIC_CUTOFF,
        pair: p,
        mera_fit,
        propagator_fit,
        fit_errors,
        mass_dimension,
        geodesics,
    };
    art.json("holo_compare.json", &result).map_err(at("cli"))
}

#[derive(Serialize)]
struct BlockRow {
    len: usize,
    entropy: f64,
    /// Smallest cut weight bounding every measured placement of the block.
    cut_weight: f64,
    bound_holds: bool,
}

#[derive(Serialize)]
struct EntropyResult {
    state: StateKind,
    cap: String,
    blocks: Vec<BlockRow>,
    fit: EntropyFit,
    bound_holds: bool,
}

const BOUND_SLACK: f64 = 1e-10;

fn entropy(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let sizes = cfg.block_sizes_for();
    let (samples, blocks, cap, model) = match cfg.state {
        StateKind::ScaleInvariant => {
            let (si, _) = scale_invariant(cfg)?;
            let src = ScaleInvariantBlocks::new(&si).map_err(at("entropy"))?;
            let shape = NetworkShape::from(&si);
            let mut samples = Vec::new();
            let mut blocks = Vec::new();
            for &len in &sizes {
                let offsets = [0i64, 1, 2];
                let s = crate::par::try_map(&offsets, |&x| src.entropy_at(x, len)).map_err(at("entropy"))?;
                let mut holds = true;
                let mut worst = 0.0f64;
                for (&x, &sx) in offsets.iter().zip(&s) {
                    let cut = cut_length(&shape, x, x + len as i64 - 1).map_err(at("entropy"))?.weight;
                    holds &= sx <= cut + BOUND_SLACK;
                    worst = worst.max(cut);
                }
                let mean = s.iter().sum::<f64>() / 3.0;
                samples.push((len, mean));
                blocks.push(BlockRow { len, entropy: mean, cut_weight: worst, bound_holds: holds });
            }
            (samples, blocks, "none".to_string(), ScalingModel::Log)
        }
        StateKind::FiniteRange => {
            let (_, fr) = finite_range(cfg)?;
            let src = FiniteRangeBlocks::new(&fr).map_err(at("entropy"))?;
            let shape = NetworkShape::from(&fr);
            let x = src.origin();
            let values = crate::par::try_map(&sizes, |&len| src.entropy(len)).map_err(at("entropy"))?;
            let mut blocks = Vec::new();
            for (&len, &s) in sizes.iter().zip(&values) {
                let cut = cut_length(&shape, x, x + len as i64 - 1).map_err(at("entropy"))?.weight;
                blocks.push(BlockRow { len, entropy: s, cut_weight: cut, bound_holds: s <= cut + BOUND_SLACK });
            }
            let samples = sizes.iter().copied().zip(values).collect();
            (samples, blocks, src.cap().to_string(), ScalingModel::LinearPlusLog { zstar: cfg.zstar_or_xi() })
        }
    };
    let curve = EntropyCurve::new(samples, network_id(cfg), cap.clone()).map_err(at("entropy"))?;
    let fit = entropy_scaling_fit(&curve, model).map_err(at("entropy"))?;
    let mut csv = String::from("l,S,cut_weight,bound_holds\n");
    for b in &blocks {
        let _ = writeln!(csv, "{},{},{},{}", b.len, num(b.entropy), num(b.cut_weight), b.bound_holds);
    }
    art.csv("entropy.csv", &csv);
    let bound_holds = blocks.iter().all(|b| b.bound_holds);
    art.json("entropy.json", &EntropyResult { state: cfg.state, cap, blocks, fit, bound_holds }).map_err(at("cli"))
}

#[derive(Serialize)]
struct MpsResult {
    cap: String,
    /// `χ^{w*}`.
    bound: usize,
    cell_bond: usize,
    max_bond: usize,
    bound_holds: bool,
    bond_dims: Vec<usize>,
    numerical_ranks: Vec<usize>,
    transfer: TransferSpectrum,
    network: NetworkRecord,
    mps: MpsRecord,
}

fn mps_export(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let fr = match cfg.network {
        NetworkSource::Random => build_finite_range(cfg.chi, cfg.b, cfg.wstar, cap_state(cfg), cfg.seed).map_err(at("mera-network"))?,
        NetworkSource::Optimized => finite_range(cfg)?.1,
    };
    let bound = cfg.chi.pow(cfg.wstar as u32);
    let mps = match fr.cap() {
        CapState::Product(_) => to_mps(&fr).map_err(at("mps-bridge"))?.mps,
        CapState::MaximallyMixed => purified_mps(&fr).map_err(at("mps-bridge"))?.rotated(column_origin(fr.wstar())),
    };
    let bond_dims = mps.bond_dims();
    let ranks = mps.numerical_ranks().map_err(at("mps-bridge"))?;
    let transfer = transfer_spectrum(&mps).map_err(at("mps-bridge"))?;
    let mut csv = String::from("bond,dim,numerical_rank\n");
    for (i, (d, r)) in bond_dims.iter().zip(&ranks).enumerate() {
        let _ = writeln!(csv, "{i},{d},{r}");
    }
    art.csv("mps_export.csv", &csv);
    let result = MpsResult {
        cap: fr.cap().kind().to_string(),
        bound,
        cell_bond: bond_dims[0],
        max_bond: mps.max_bond(),
        bound_holds: bond_dims[0] <= bound,
        bond_dims,
        numerical_ranks: ranks,
        transfer,
        network: NetworkRecord::from(&fr),
        mps: mps.to_record(),
    };
    art.json("mps_export.json", &result).map_err(at("cli"))
}

#[derive(Serialize)]
struct OptimizeResult {
    field: f64,
    energy: Option<f64>,
    exact_energy: f64,
    energy_error: Option<f64>,
    report: OptimizationReport,
    unitality_residual: f64,
    scaling_dimensions: Vec<f64>,
    network: NetworkRecord,
}

fn optimize_run(cfg: &ExperimentConfig, art: &mut ArtifactSet) -> Out<()> {
    let (si, report) = optimize(&ising_hamiltonian(cfg.field), cfg.chi, cfg.sweeps, cfg.seed).map_err(at("optimizer"))?;
    let (set, unitality) = decompose(&si)?;
    let exact = ising_ground_energy(cfg.field);
    let energy = report.energies.last().copied();
    let mut csv = String::from("sweep,energy,isometry_residual\n");
    for (i, (e, r)) in report.energies.iter().zip(&report.isometry_residuals).enumerate() {
        let _ = writeln!(csv, "{},{},{}", i + 1, num(*e), num(*r));
    }
    art.csv("optimize.csv", &csv);
    let result = OptimizeResult {
        field: cfg.field,
        energy,
        exact_energy: exact,
        energy_error: energy.map(|e| (e - exact).abs()),
        report,
        unitality_residual: unitality,
        scaling_dimensions: set.dimensions(),
        network: NetworkRecord::from(&si),
    };
    art.json("optimize.json", &result).map_err(at("cli"))
}
