//! Subcommands that run a single scenario file.

use std::path::PathBuf;
use std::sync::Arc;

use cogmac_core::aloha::{network_throughput, AlohaParams};
use cogmac_core::csma::{
    collision_probability_any_access, csma_throughput, loss_percentage, optimal_multi,
    optimal_single, optimal_with_errors, DetectorModel, SolveStatus, SolverOptions, SolverReport,
};
use cogmac_core::scheme::{heuristic_multi, heuristic_single};
use cogmac_core::sim::{
    simulate_aloha_datalink, simulate_csma, simulate_spatial, SimEstimate, SimOptions, SpatialScenario,
};
use cogmac_core::spatial::{
    annulus_weight, p_cc_with, p_collision_channel, simplified_cell_throughput, solve_detection_radius,
    CellModel, DetectionPolicy, SpatialConfig,
};
use cogmac_core::{ChannelSet, GroupCatalog, SensingScheme};

use crate::config::{Scenario, SchemeKind, SimModel};
use crate::error::CliError;
use crate::output::{emit, Coord, Format, Manifest, Provenance, Table};

pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
}

/// Loaded scenario plus the hash of its source text.
pub struct Loaded {
    pub scenario: Scenario,
    pub path: PathBuf,
    pub sha256: String,
}

impl Loaded {
    fn manifest(&self, command: &str) -> Manifest {
        let mut m = Manifest::new(command, self.scenario.seed);
        m.config_path = Some(self.path.clone());
        m.config_sha256 = Some(self.sha256.clone());
        m.parameters = self.scenario.resolved();
        m
    }
}

fn finish(table: &Table, stem: &str, sink: &Sink, mut manifest: Manifest) -> Result<(), CliError> {
    let path = emit(table, &sink.dir, stem, sink.format, &mut manifest)?;
    manifest.write(&sink.dir.join(format!("{stem}.manifest.json")))?;
    for note in &manifest.notes {
        eprintln!("note: {note}");
    }
    println!("{} rows -> {}", table.rows.len(), path.display());
    Ok(())
}

/// Sensing scheme used at population `m`.
pub struct Resolved {
    pub scheme: SensingScheme,
    pub report: Option<SolverReport>,
}

pub fn status_code(s: SolveStatus) -> f64 {
    match s {
        SolveStatus::Optimal => 0.0,
        SolveStatus::MaxIter => 1.0,
        SolveStatus::Infeasible => 2.0,
    }
}

fn detector_model(sc: &Scenario) -> Option<DetectorModel> {
    sc.detector
        .map(|d| DetectorModel::new(d.alpha, d.beta, d.f0.unwrap_or(1.0)).expect("validated on load"))
}

fn has_errors(sc: &Scenario) -> bool {
    sc.detector.is_some_and(|d| d.alpha > 0.0 || d.beta < 1.0)
}

/// Error-free optimum over `catalog`, using the closed form when it applies.
pub fn optimal_error_free(cs: &ChannelSet, catalog: Arc<GroupCatalog>, m: u32) -> cogmac_core::Result<SolverReport> {
    if catalog.is_single_channel() && catalog.is_full() {
        optimal_single(cs, m)
    } else {
        optimal_multi(cs, catalog, m, &SolverOptions::default())
    }
}

/// Heuristic over `catalog`, single- or multi-channel.
pub fn heuristic_for(cs: &ChannelSet, catalog: Arc<GroupCatalog>) -> cogmac_core::Result<SensingScheme> {
    if catalog.is_single_channel() && catalog.is_full() {
        heuristic_single(cs)
    } else {
        Ok(heuristic_multi(cs, catalog)?.scheme)
    }
}

pub fn resolve_scheme(sc: &Scenario, m: u32) -> Result<Resolved, CliError> {
    let cs = &sc.channels;
    let catalog = sc.scheme.catalog.clone();
    let fixed = |scheme| Ok(Resolved { scheme, report: None });
    match sc.scheme.kind {
        SchemeKind::HeuristicSingle => fixed(heuristic_single(cs)?),
        SchemeKind::HeuristicMulti => fixed(heuristic_multi(cs, catalog)?.scheme),
        SchemeKind::Explicit => fixed(sc.scheme.explicit.clone().expect("validated on load")),
        SchemeKind::Optimal => {
            let report = if has_errors(sc) {
                let d = sc.detector.expect("checked");
                let det = detector_model(sc).expect("checked");
                optimal_with_errors(cs, catalog, m, &det, d.xi, &d.options)?
            } else {
                optimal_error_free(cs, catalog, m)?
            };
            Ok(Resolved {
                scheme: report.scheme.clone(),
                report: Some(report),
            })
        }
    }
}

fn scheme_is_fixed(sc: &Scenario) -> bool {
    sc.scheme.kind != SchemeKind::Optimal
}

/// Expected throughput with detection errors: each idle channel is used
/// when at least one user senses it, sees it idle and decides to access.
pub fn throughput_with_errors(cs: &ChannelSet, coverages: &[f64], det: &DetectorModel, m: u32) -> f64 {
    cs.idle_rates()
        .iter()
        .zip(coverages)
        .map(|(w, &c)| w * -((-det.beta * det.f0 * c).ln_1p() * m as f64).exp_m1())
        .sum()
}

fn channel_item(j: usize) -> Coord {
    Coord::Text(format!("channel:{j}"))
}

fn group_item(g: &[usize]) -> Coord {
    let ids: Vec<String> = g.iter().map(usize::to_string).collect();
    Coord::Text(format!("group:{}", ids.join("-")))
}

fn summary() -> Coord {
    Coord::Text(String::new())
}

pub fn analyze_aloha(loaded: &Loaded, sink: &Sink) -> Result<(), CliError> {
    let sc = &loaded.scenario;
    let c_t = sc.channels.residual_capacity();
    let mut table = Table::new(&["M"]);
    let fixed = if scheme_is_fixed(sc) {
        Some(resolve_scheme(sc, 1)?.scheme)
    } else {
        None
    };
    for &m in &sc.population.ms {
        let scheme = match &fixed {
            Some(s) => s.clone(),
            None => resolve_scheme(sc, m)?.scheme,
        };
        let c = network_throughput(&sc.channels, &scheme, AlohaParams::new(m, sc.population.q)?)?;
        table.analytic(vec![m.into()], "throughput", c)?;
        if c_t > 0.0 {
            table.analytic(vec![m.into()], "normalized_throughput", c / c_t)?;
        }
    }
    finish(&table, "analyze-aloha", sink, loaded.manifest("analyze-aloha"))
}

/// Detection radius at population `m` under the scenario's policy.
fn radius_for(
    cfg: &SpatialConfig,
    policy: DetectionPolicy,
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
) -> Result<(f64, Option<f64>), CliError> {
    Ok(match policy {
        DetectionPolicy::Fixed => (cfg.detection_radius(), None),
        DetectionPolicy::Solve => {
            let r = solve_detection_radius(cfg, cs, scheme, params)?;
            (r.r_d, Some(r.budget))
        }
    })
}

fn symmetric_radii(cfg: &SpatialConfig) -> Option<f64> {
    let r = cfg.r_i_s;
    [cfg.r_r_p, cfg.r_r_s, cfg.r_i_p].iter().all(|&x| x == r).then_some(r)
}

fn identical_channels(cs: &ChannelSet) -> Option<(f64, f64)> {
    let (w, t) = (cs.widths()[0], cs.thetas()[0]);
    (cs.widths().iter().all(|&x| x == w) && cs.thetas().iter().all(|&x| x == t)).then_some((cs.rate(0), t))
}

pub fn cell(loaded: &Loaded, sink: &Sink) -> Result<(), CliError> {
    let sc = &loaded.scenario;
    let sp = sc
        .spatial
        .ok_or_else(|| CliError::Field {
            field: "spatial".into(),
            reason: "block is required by `cell`".into(),
        })?;
    let cs = &sc.channels;
    let q = sc.population.q;
    let c_t = cs.residual_capacity();
    let mut table = Table::new(&["M", "item"]);
    table
        .tolerance("detection_radius", cogmac_core::spatial::RADIUS_TOLERANCE)
        .tolerance("p_cc", cogmac_core::spatial::ANNULUS_TOLERANCE);
    let simplified = symmetric_radii(&sp.config).zip(identical_channels(cs));
    for &m in &sc.population.ms {
        let scheme = resolve_scheme(sc, m)?.scheme;
        let params = AlohaParams::new(m, q)?;
        let (r_d, budget) = radius_for(&sp.config, sp.detection, cs, &scheme, params)?;
        let cfg = sp.config.with_detection_radius(r_d);
        let aw = annulus_weight(&cfg)?;
        let model = CellModel::new(&cfg, cs, &scheme)?;
        let t = model.throughput(params);
        let probs = scheme.channel_probs()?;
        let at = |item: Coord| vec![m.into(), item];
        table.analytic(at(summary()), "detection_radius", r_d)?;
        let mut load = 0.0;
        for j in 0..cs.n() {
            let pcc = p_cc_with(&cfg, cs.thetas()[j], &aw);
            load += probs[j] * pcc.value;
            table.analytic(at(channel_item(j)), "p_cc", pcc.value)?;
            table.analytic(at(channel_item(j)), "sensing_probability", probs[j])?;
        }
        table.analytic(at(summary()), "collision_load", load)?;
        if let Some(b) = budget.filter(|b| b.is_finite()) {
            table.analytic(at(summary()), "collision_budget", b)?;
        }
        let tagged = model.throughput_tagged(params);
        table.analytic(at(summary()), "cell_throughput", t.value)?;
        table.analytic(at(summary()), "cell_throughput_tagged", tagged.value)?;
        if c_t > 0.0 {
            table.analytic(at(summary()), "normalized_cell_throughput", t.value / c_t)?;
            table.analytic(at(summary()), "normalized_cell_throughput_tagged", tagged.value / c_t)?;
        }
        table.analytic(at(summary()), "clamped_terms", t.clamped as f64)?;
        if let Some((radius, (rate, theta))) = simplified {
            let v = simplified_cell_throughput(radius, cfg.lambda, theta, cs.n(), m, q, sp.gamma, rate)?;
            table.analytic(at(summary()), "simplified_cell_throughput", v)?;
        }
    }
    let mut manifest = loaded.manifest("cell");
    if table.rows.iter().any(|r| r.metric == "clamped_terms" && r.value > 0.0) {
        manifest
            .notes
            .push("some conditional success probabilities were clamped into [0, 1]; see clamped_terms".into());
    }
    finish(&table, "cell", sink, manifest)
}

fn push_report(table: &mut Table, sc: &Scenario, m: u32, rep: &SolverReport) -> Result<(), CliError> {
    let cs = &sc.channels;
    let at = |item: Coord| vec![m.into(), item];
    let cov = rep.scheme.coverages();
    let det = detector_model(sc)
        .map(|d| d.with_f0(rep.f0))
        .transpose()?
        .unwrap_or_else(DetectorModel::perfect);
    let throughput = if has_errors(sc) {
        throughput_with_errors(cs, &cov, &det, m)
    } else {
        csma_throughput(cs, &rep.scheme, m)?
    };
    table.optimized(at(summary()), "objective", rep.objective)?;
    table.optimized(at(summary()), "throughput", throughput)?;
    let c_t = cs.residual_capacity();
    if c_t > 0.0 {
        table.optimized(at(summary()), "utilized_fraction", throughput / c_t)?;
    }
    table.optimized(at(summary()), "f0", rep.f0)?;
    if rep.nu.is_finite() {
        table.optimized(at(summary()), "nu", rep.nu)?;
    }
    if rep.kkt_residual.is_finite() {
        table.optimized(at(summary()), "kkt_residual", rep.kkt_residual)?;
    }
    table.optimized(at(summary()), "iterations", rep.iterations as f64)?;
    table.optimized(at(summary()), "status_code", status_code(rep.status))?;
    if rep.max_constraint.is_finite() {
        table.optimized(at(summary()), "max_constraint", rep.max_constraint)?;
    }
    for (j, &c) in cov.iter().enumerate() {
        table.optimized(at(channel_item(j)), "coverage", c)?;
        if has_errors(sc) {
            let p = collision_probability_any_access(cs, &rep.scheme, m, &det, j)?;
            table.optimized(at(channel_item(j)), "collision_probability", p)?;
        }
    }
    for (g, &p) in rep.scheme.catalog().groups().iter().zip(rep.scheme.probs()) {
        if p > 0.0 {
            table.optimized(at(group_item(g)), "probability", p)?;
        }
    }
    Ok(())
}

pub fn optimize(loaded: &Loaded, sink: &Sink) -> Result<(), CliError> {
    let sc = &loaded.scenario;
    let mut table = Table::new(&["M", "item"]);
    let opts = SolverOptions::default();
    table.tolerance("kkt_residual", opts.grad_tol).tolerance("objective", opts.obj_tol);
    let mut manifest = loaded.manifest("optimize");
    if sc.scheme.kind != SchemeKind::Optimal {
        manifest
            .notes
            .push("optimize ignores scheme.kind and optimizes over the configured catalog".into());
    }
    if sc.detector.is_some_and(|d| d.f0.is_some()) {
        manifest
            .notes
            .push("detector.f0 is not used by optimize; the access probability is optimized".into());
    }
    for &m in &sc.population.ms {
        let rep = if has_errors(sc) {
            let d = sc.detector.expect("checked");
            let det = detector_model(sc).expect("checked");
            optimal_with_errors(&sc.channels, sc.scheme.catalog.clone(), m, &det, d.xi, &d.options)?
        } else {
            optimal_error_free(&sc.channels, sc.scheme.catalog.clone(), m)?
        };
        if rep.status != SolveStatus::Optimal {
            manifest.notes.push(format!("M = {m}: solver status {:?}", rep.status));
        }
        push_report(&mut table, sc, m, &rep)?;
    }
    finish(&table, "optimize", sink, manifest)
}

fn sim_row(table: &mut Table, coords: Vec<Coord>, metric: &str, e: &SimEstimate) -> Result<(), CliError> {
    table.push(coords, metric, e.mean, Some(e.std_error), Provenance::Simulated, Some(e.seed))
}

pub fn simulate(loaded: &Loaded, sink: &Sink) -> Result<(), CliError> {
    let sc = &loaded.scenario;
    let spec = sc.simulation;
    let opts = SimOptions::new(spec.slots, spec.seed)?.with_shards(spec.shards)?;
    let cs = &sc.channels;
    let q = sc.population.q;
    let mut table = Table::new(&["M", "item"]);
    let mut manifest = loaded.manifest("simulate");
    manifest.seed = spec.seed;
    for &m in &sc.population.ms {
        let at = |item: Coord| vec![m.into(), item];
        let resolved = resolve_scheme(sc, m)?;
        let scheme = &resolved.scheme;
        match spec.model {
            SimModel::Aloha => {
                let params = AlohaParams::new(m, q)?;
                let e = simulate_aloha_datalink(cs, scheme, params, &opts)?;
                sim_row(&mut table, at(summary()), "throughput", &e)?;
                table.analytic(at(summary()), "throughput", network_throughput(cs, scheme, params)?)?;
            }
            SimModel::Csma => {
                let fixed_f0 = sc.detector.and_then(|d| d.f0);
                let solved_f0 = resolved.report.as_ref().map(|r| r.f0);
                let f0 = fixed_f0.or(solved_f0).unwrap_or(1.0);
                let det = detector_model(sc).unwrap_or_else(DetectorModel::perfect).with_f0(f0)?;
                let e = simulate_csma(cs, scheme, m, &det, &opts)?;
                sim_row(&mut table, at(summary()), "throughput", &e.throughput)?;
                sim_row(&mut table, at(summary()), "utilized_fraction", &e.utilized_fraction)?;
                let analytic = throughput_with_errors(cs, &scheme.coverages(), &det, m);
                table.analytic(at(summary()), "throughput", analytic)?;
                if fixed_f0.is_none() && solved_f0.is_some() {
                    table.optimized(at(summary()), "f0", f0)?;
                } else {
                    table.analytic(at(summary()), "f0", f0)?;
                }
                for (j, c) in e.collision.iter().enumerate() {
                    sim_row(&mut table, at(channel_item(j)), "collision_probability", c)?;
                    let p = collision_probability_any_access(cs, scheme, m, &det, j)?;
                    table.analytic(at(channel_item(j)), "collision_probability", p)?;
                }
            }
            SimModel::Spatial => {
                let sp = sc.spatial.ok_or_else(|| CliError::Field {
                    field: "spatial".into(),
                    reason: "block is required by the spatial simulation".into(),
                })?;
                let params = AlohaParams::new(m, q)?;
                let (r_d, _) = radius_for(&sp.config, sp.detection, cs, scheme, params)?;
                let cfg = sp.config.with_detection_radius(r_d);
                let scenario = SpatialScenario::new(cfg, cs.clone(), scheme.clone(), params)?;
                let e = simulate_spatial(&scenario, &opts)?;
                table.analytic(at(summary()), "detection_radius", r_d)?;
                sim_row(&mut table, at(summary()), "throughput", &e.throughput)?;
                let model = CellModel::new(&cfg, cs, scheme)?;
                table.analytic(at(summary()), "throughput", model.throughput(params).value)?;
                table.analytic(at(summary()), "throughput_tagged", model.throughput_tagged(params).value)?;
                if let Some(s) = &e.success_rate {
                    sim_row(&mut table, at(summary()), "success_rate", s)?;
                }
                for (k, s) in e.success_by_k.iter().enumerate() {
                    if let Some(s) = s {
                        sim_row(&mut table, at(summary()), &format!("success_given_k{}", k + 1), s)?;
                    }
                }
                let aw = annulus_weight(&cfg)?;
                for j in 0..cs.n() {
                    sim_row(&mut table, at(channel_item(j)), "collision_rate", &e.collision[j])?;
                    let lin = p_collision_channel(&cfg, cs, scheme, params, j)?;
                    table.analytic(at(channel_item(j)), "collision_linearized", lin.value)?;
                    sim_row(&mut table, at(channel_item(j)), "void_fraction", &e.void[j])?;
                    if let Some(p) = &e.p_cc[j] {
                        sim_row(&mut table, at(channel_item(j)), "p_cc", p)?;
                    }
                    table.analytic(at(channel_item(j)), "p_cc", p_cc_with(&cfg, cs.thetas()[j], &aw).value)?;
                }
            }
        }
    }
    finish(&table, "simulate", sink, manifest)
}

/// Loss table rows for one channel set over `ms` and `group_sizes`.
pub fn loss_rows(
    table: &mut Table,
    prefix: &[Coord],
    cs: &ChannelSet,
    ms: &[u32],
    group_sizes: &[usize],
    restricted: Option<Arc<GroupCatalog>>,
) -> Result<(), CliError> {
    let c_t = cs.residual_capacity();
    for &s in group_sizes {
        let catalog = match &restricted {
            Some(c) if c.group_size() == s => c.clone(),
            _ => Arc::new(GroupCatalog::enumerate(cs.n(), s)?),
        };
        let heuristic = heuristic_for(cs, catalog.clone())?;
        for &m in ms {
            let at = || {
                let mut v = prefix.to_vec();
                v.extend([Coord::from(m), Coord::from(s)]);
                v
            };
            let rep = optimal_error_free(cs, catalog.clone(), m)?;
            let best = csma_throughput(cs, &rep.scheme, m)?;
            let other = csma_throughput(cs, &heuristic, m)?;
            table.optimized(at(), "optimal_throughput", best)?;
            table.analytic(at(), "heuristic_throughput", other)?;
            if c_t > 0.0 {
                table.optimized(at(), "optimal_utilized_fraction", best / c_t)?;
                table.analytic(at(), "heuristic_utilized_fraction", other / c_t)?;
            }
            if let Some(loss) = loss_percentage(cs, m, &heuristic, &rep.scheme)? {
                table.optimized(at(), "loss_percentage", loss)?;
            }
        }
    }
    Ok(())
}

pub fn compare(loaded: &Loaded, sink: &Sink) -> Result<(), CliError> {
    let sc = &loaded.scenario;
    let mut table = Table::new(&["M", "S"]);
    let restricted = sc.scheme.restricted.then(|| sc.scheme.catalog.clone());
    loss_rows(
        &mut table,
        &[],
        &sc.channels,
        &sc.population.ms,
        &sc.compare_group_sizes,
        restricted,
    )?;
    finish(&table, "compare", sink, loaded.manifest("compare"))
}
