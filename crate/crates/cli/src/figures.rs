//! Named sweeps that regenerate each figure's parameter set. Values the
//! figure states are fixed; everything else is a recorded choice, and
//! channel occupancies are generated from the run seed.

use std::sync::Arc;

use cogmac_core::aloha::{network_throughput, AlohaParams};
use cogmac_core::csma::{optimal_with_errors, DetectorModel, ErrorAwareOptions, SolveStatus};
use cogmac_core::scheme::heuristic_single;
use cogmac_core::spatial::{solve_detection_radius, CellModel, SpatialConfig};
use cogmac_core::{ChannelSet, GroupCatalog, UtilizationTarget};
use serde_json::{json, Value};

use crate::commands::{loss_rows, optimal_error_free, status_code, throughput_with_errors, Sink};
use crate::error::CliError;
use crate::output::{emit, Coord, Manifest, Table};

pub struct Recipe {
    pub name: &'static str,
    pub about: &'static str,
    run: fn(&mut Ctx) -> Result<Table, CliError>,
}

pub const RECIPES: &[Recipe] = &[
    Recipe {
        name: "aloha-msweep",
        about: "ALOHA normalized throughput vs M; q = 0.4, N = 100, rho in {0.2, 0.5, 0.8}",
        run: aloha_msweep,
    },
    Recipe {
        name: "detection-radius",
        about: "detection radius vs M and N; unit radii, xi = 0.2, q = 0.3, lambda = 1/1.5^2",
        run: detection_radius,
    },
    Recipe {
        name: "cell-throughput",
        about: "cell normalized throughput vs M and N; as detection-radius plus gamma = 0.1, rho = 0.15",
        run: cell_throughput,
    },
    Recipe {
        name: "csma-throughput",
        about: "CSMA optimal normalized throughput vs M and N; rho = 0.8",
        run: csma_throughput,
    },
    Recipe {
        name: "csma-loss",
        about: "heuristic loss percentage vs M and N; rho = 0.8",
        run: csma_loss,
    },
    Recipe {
        name: "csma-loss-rho",
        about: "heuristic loss percentage vs M; N = 12, rho in {0.2, 0.5, 0.8}",
        run: csma_loss_rho,
    },
    Recipe {
        name: "multi-channel",
        about: "optimal multi-channel normalized throughput vs M and S; rho = 0.2, N = 20",
        run: multi_channel,
    },
    Recipe {
        name: "multi-loss",
        about: "multi-channel heuristic loss; N = 10, S in {2, 5, 7}, rho in {0.8, 0.4}",
        run: multi_loss,
    },
    Recipe {
        name: "error-throughput",
        about: "throughput under detection errors; rho = 0.2, alpha = 0.2, beta = 0.8; panels S = 5 and N = 12",
        run: error_throughput,
    },
    Recipe {
        name: "error-vs-free",
        about: "error-free vs erroneous detection; rho = 0.2; panels S = 3 and N = 7",
        run: error_vs_free,
    },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

struct Ctx {
    seed: u64,
    ms_override: Option<Vec<u32>>,
    fixed: Value,
    choices: serde_json::Map<String, Value>,
    channels: Vec<Value>,
    notes: Vec<String>,
}

impl Ctx {
    /// Population axis: the `--sweep` override or the recipe default.
    fn ms(&mut self, default: std::ops::RangeInclusive<u32>) -> Vec<u32> {
        self.ms_step(default, 1)
    }

    fn ms_step(&mut self, default: std::ops::RangeInclusive<u32>, step: usize) -> Vec<u32> {
        match &self.ms_override {
            Some(ms) => ms.clone(),
            None => {
                self.choose("M", json!({ "from": default.start(), "to": default.end(), "step": step }));
                default.step_by(step).collect()
            }
        }
    }

    fn choose(&mut self, key: &str, v: Value) {
        self.choices.insert(key.to_string(), v);
    }

    /// Channel set for one curve, seeded from the run seed and its index,
    /// and recorded in the manifest.
    fn channels(&mut self, label: Value, n: usize, rho: f64) -> Result<ChannelSet, CliError> {
        let seed = self.seed.wrapping_add(self.channels.len() as u64);
        let cs = UtilizationTarget::new(n, rho, seed).generate()?;
        self.channels.push(json!({
            "curve": label,
            "n": n,
            "rho": rho,
            "seed": seed,
            "widths": cs.widths(),
            "thetas": cs.thetas(),
        }));
        Ok(cs)
    }
}

pub fn run(recipe: &Recipe, seed: u64, ms_override: Option<Vec<u32>>, sink: &Sink) -> Result<(), CliError> {
    let mut ctx = Ctx {
        seed,
        ms_override,
        fixed: Value::Null,
        choices: Default::default(),
        channels: Vec::new(),
        notes: Vec::new(),
    };
    let table = (recipe.run)(&mut ctx)?;
    let mut manifest = Manifest::new(&format!("figures {}", recipe.name), seed);
    manifest.parameters = json!({
        "recipe": recipe.name,
        "fixed": ctx.fixed,
        "choices": ctx.choices,
        "channels": ctx.channels,
    });
    manifest.notes = ctx.notes;
    let path = emit(&table, &sink.dir, recipe.name, sink.format, &mut manifest)?;
    manifest.write(&sink.dir.join(format!("{}.manifest.json", recipe.name)))?;
    for note in &manifest.notes {
        eprintln!("note: {note}");
    }
    println!("{}: {} rows -> {}", recipe.name, table.rows.len(), path.display());
    Ok(())
}

fn aloha_msweep(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (q, n, rhos) = (0.4, 100, [0.2, 0.5, 0.8]);
    ctx.fixed = json!({ "q": q, "N": n, "rho": rhos });
    ctx.choose("scheme", json!("heuristic_single"));
    let ms = ctx.ms(1..=400);
    let mut t = Table::new(&["rho", "M"]);
    for rho in rhos {
        let cs = ctx.channels(json!({ "rho": rho }), n, rho)?;
        let scheme = heuristic_single(&cs)?;
        let c_t = cs.residual_capacity();
        for &m in &ms {
            let c = network_throughput(&cs, &scheme, AlohaParams::new(m, q)?)?;
            t.analytic(vec![rho.into(), m.into()], "normalized_throughput", c / c_t)?;
        }
    }
    Ok(t)
}

fn unit_spatial(gamma: f64) -> Result<SpatialConfig, CliError> {
    let (radius, xi, lambda) = (1.0, 0.2, 1.0 / (1.5 * 1.5));
    let cfg = SpatialConfig::symmetric(radius, lambda, xi, gamma)?;
    Ok(cfg)
}

const SPATIAL_Q: f64 = 0.3;

fn detection_radius(ctx: &mut Ctx) -> Result<Table, CliError> {
    // The radius does not depend on the cell area; gamma only has to be valid.
    let (gamma, rho) = (0.1, 0.15);
    ctx.fixed = json!({ "R": 1.0, "xi": 0.2, "q": SPATIAL_Q, "lambda": 1.0 / 2.25 });
    ctx.choose("gamma", json!(gamma));
    ctx.choose("rho", json!(rho));
    ctx.choose("scheme", json!("heuristic_single"));
    let ns = [5usize, 10, 15, 20];
    ctx.choose("N", json!(ns));
    let ms = ctx.ms(1..=100);
    let cfg = unit_spatial(gamma)?;
    let mut t = Table::new(&["N", "M"]);
    t.tolerance("detection_radius", cogmac_core::spatial::RADIUS_TOLERANCE);
    for n in ns {
        let cs = ctx.channels(json!({ "N": n }), n, rho)?;
        let scheme = heuristic_single(&cs)?;
        for &m in &ms {
            let r = solve_detection_radius(&cfg, &cs, &scheme, AlohaParams::new(m, SPATIAL_Q)?)?;
            let at = vec![n.into(), m.into()];
            t.analytic(at.clone(), "detection_radius", r.r_d)?;
            t.analytic(at, "collision_load", r.load)?;
        }
    }
    Ok(t)
}

fn cell_throughput(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (gamma, rho) = (0.1, 0.15);
    ctx.fixed = json!({
        "R": 1.0, "xi": 0.2, "q": SPATIAL_Q, "lambda": 1.0 / 2.25, "gamma": gamma, "rho": rho
    });
    ctx.choose("scheme", json!("heuristic_single"));
    let ns = [5usize, 10, 15, 20];
    ctx.choose("N", json!(ns));
    // each point re-solves the radius and the success integrals
    let ms = ctx.ms_step(1..=401, 10);
    let cfg = unit_spatial(gamma)?;
    let mut t = Table::new(&["N", "M"]);
    let mut clamped = false;
    for n in ns {
        let cs = ctx.channels(json!({ "N": n }), n, rho)?;
        let scheme = heuristic_single(&cs)?;
        let c_t = cs.residual_capacity();
        for &m in &ms {
            let params = AlohaParams::new(m, SPATIAL_Q)?;
            let r_d = solve_detection_radius(&cfg, &cs, &scheme, params)?.r_d;
            let model = CellModel::new(&cfg.with_detection_radius(r_d), &cs, &scheme)?;
            let (full, tagged) = (model.throughput(params), model.throughput_tagged(params));
            let at = vec![n.into(), m.into()];
            t.analytic(at.clone(), "normalized_cell_throughput", full.value / c_t)?;
            t.analytic(at.clone(), "normalized_cell_throughput_tagged", tagged.value / c_t)?;
            t.analytic(at.clone(), "detection_radius", r_d)?;
            t.analytic(at, "clamped_terms", full.clamped as f64)?;
            clamped |= full.clamped > 0;
        }
    }
    if clamped {
        ctx.notes
            .push("some conditional success probabilities were clamped into [0, 1]; see clamped_terms".into());
    }
    Ok(t)
}

fn csma_throughput(ctx: &mut Ctx) -> Result<Table, CliError> {
    let rho = 0.8;
    ctx.fixed = json!({ "rho": rho });
    let ns = [4usize, 8, 12, 16, 20];
    ctx.choose("N", json!(ns));
    ctx.choose("scheme", json!("optimal single-channel"));
    let ms = ctx.ms(2..=60);
    let mut t = Table::new(&["N", "M"]);
    for n in ns {
        let cs = ctx.channels(json!({ "N": n }), n, rho)?;
        let c_t = cs.residual_capacity();
        let catalog = Arc::new(GroupCatalog::singletons(n)?);
        for &m in &ms {
            let rep = optimal_error_free(&cs, catalog.clone(), m)?;
            let c = cogmac_core::csma::csma_throughput(&cs, &rep.scheme, m)?;
            t.optimized(vec![n.into(), m.into()], "utilized_fraction", c / c_t)?;
        }
    }
    Ok(t)
}

fn csma_loss(ctx: &mut Ctx) -> Result<Table, CliError> {
    let rho = 0.8;
    ctx.fixed = json!({ "rho": rho });
    let ns = [4usize, 8, 12, 16, 20];
    ctx.choose("N", json!(ns));
    let ms = ctx.ms(2..=60);
    let mut t = Table::new(&["N", "M", "S"]);
    for n in ns {
        let cs = ctx.channels(json!({ "N": n }), n, rho)?;
        loss_rows(&mut t, &[n.into()], &cs, &ms, &[1], None)?;
    }
    Ok(t)
}

fn csma_loss_rho(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (n, rhos) = (12, [0.2, 0.5, 0.8]);
    ctx.fixed = json!({ "N": n, "rho": rhos });
    let ms = ctx.ms(2..=60);
    let mut t = Table::new(&["rho", "M", "S"]);
    for rho in rhos {
        let cs = ctx.channels(json!({ "rho": rho }), n, rho)?;
        loss_rows(&mut t, &[rho.into()], &cs, &ms, &[1], None)?;
    }
    Ok(t)
}

fn multi_channel(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (n, rho) = (20, 0.2);
    ctx.fixed = json!({ "N": n, "rho": rho });
    let ss = [1usize, 2, 3, 4, 5];
    ctx.choose("S", json!(ss));
    let ms = ctx.ms(2..=40);
    let cs = ctx.channels(json!({ "N": n }), n, rho)?;
    let c_t = cs.residual_capacity();
    let mut t = Table::new(&["S", "M"]);
    for s in ss {
        let catalog = Arc::new(GroupCatalog::enumerate(n, s)?);
        for &m in &ms {
            let rep = optimal_error_free(&cs, catalog.clone(), m)?;
            let c = cogmac_core::csma::csma_throughput(&cs, &rep.scheme, m)?;
            let at = vec![s.into(), m.into()];
            t.optimized(at.clone(), "utilized_fraction", c / c_t)?;
            t.optimized(at, "status_code", status_code(rep.status))?;
        }
    }
    Ok(t)
}

fn multi_loss(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (n, ss, rhos) = (10, [2usize, 5, 7], [0.8, 0.4]);
    ctx.fixed = json!({ "N": n, "S": ss, "rho": rhos });
    let ms = ctx.ms(2..=40);
    let mut t = Table::new(&["rho", "M", "S"]);
    for rho in rhos {
        let cs = ctx.channels(json!({ "rho": rho }), n, rho)?;
        loss_rows(&mut t, &[rho.into()], &cs, &ms, &ss, None)?;
    }
    Ok(t)
}

/// Collision budget for the detection-error recipes; no figure states one.
const ERROR_XI: f64 = 0.1;

struct ErrorCurve {
    panel: &'static str,
    n: usize,
    s: usize,
    alpha: f64,
    beta: f64,
}

fn error_curves(ctx: &mut Ctx, rho: f64, curves: &[ErrorCurve], ms: &[u32]) -> Result<Table, CliError> {
    let mut t = Table::new(&["panel", "N", "S", "alpha", "beta", "M"]);
    let opts = ErrorAwareOptions::default();
    ctx.choose("xi", json!(ERROR_XI));
    ctx.choose("objective", serde_json::to_value(opts.objective)?);
    ctx.choose("collision", serde_json::to_value(opts.collision)?);
    let mut sets: Vec<(usize, ChannelSet)> = Vec::new();
    let mut infeasible = 0usize;
    for c in curves {
        // curves with the same N share one channel realization
        let cs = match sets.iter().find(|(n, _)| *n == c.n) {
            Some((_, cs)) => cs.clone(),
            None => {
                let cs = ctx.channels(json!({ "N": c.n }), c.n, rho)?;
                sets.push((c.n, cs.clone()));
                cs
            }
        };
        let c_t = cs.residual_capacity();
        let catalog = Arc::new(GroupCatalog::enumerate(c.n, c.s)?);
        let det = DetectorModel::new(c.alpha, c.beta, 1.0)?;
        let perfect = c.alpha == 0.0 && c.beta == 1.0;
        for &m in ms {
            let at = || -> Vec<Coord> {
                vec![c.panel.into(), c.n.into(), c.s.into(), c.alpha.into(), c.beta.into(), m.into()]
            };
            if perfect {
                let rep = optimal_error_free(&cs, catalog.clone(), m)?;
                let v = cogmac_core::csma::csma_throughput(&cs, &rep.scheme, m)?;
                t.optimized(at(), "utilized_fraction", v / c_t)?;
                continue;
            }
            let rep = optimal_with_errors(&cs, catalog.clone(), m, &det, ERROR_XI, &opts)?;
            t.optimized(at(), "status_code", status_code(rep.status))?;
            if rep.status == SolveStatus::Infeasible {
                infeasible += 1;
                continue;
            }
            let v = throughput_with_errors(&cs, &rep.scheme.coverages(), &det.with_f0(rep.f0)?, m);
            t.optimized(at(), "utilized_fraction", v / c_t)?;
            t.optimized(at(), "f0", rep.f0)?;
        }
    }
    if infeasible > 0 {
        ctx.notes.push(format!(
            "{infeasible} points have no policy meeting the collision constraints (status_code 2)"
        ));
    }
    Ok(t)
}

fn error_throughput(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (rho, alpha, beta) = (0.2, 0.2, 0.8);
    ctx.fixed = json!({ "rho": rho, "alpha": alpha, "beta": beta, "panel_a_S": 5, "panel_b_N": 12 });
    let ns_a = [5usize, 8, 12, 16];
    let ss_b = [1usize, 2, 3, 5];
    ctx.choose("panel_a_N", json!(ns_a));
    ctx.choose("panel_b_S", json!(ss_b));
    let ms = ctx.ms_step(2..=38, 4);
    let mut curves: Vec<ErrorCurve> = ns_a
        .iter()
        .map(|&n| ErrorCurve { panel: "a", n, s: 5, alpha, beta })
        .collect();
    curves.extend(ss_b.iter().map(|&s| ErrorCurve { panel: "b", n: 12, s, alpha, beta }));
    error_curves(ctx, rho, &curves, &ms)
}

fn error_vs_free(ctx: &mut Ctx) -> Result<Table, CliError> {
    let rho = 0.2;
    ctx.fixed = json!({ "rho": rho, "panel_a_S": 3, "panel_b_N": 7 });
    let ns_a = [3usize, 5, 7];
    let ss_b = [1usize, 2, 3];
    let detectors = [(0.0, 1.0), (0.1, 0.9), (0.2, 0.8)];
    ctx.choose("panel_a_N", json!(ns_a));
    ctx.choose("panel_b_S", json!(ss_b));
    ctx.choose("alpha_beta", json!(detectors));
    let ms = ctx.ms_step(2..=38, 4);
    let mut curves = Vec::new();
    for &(alpha, beta) in &detectors {
        curves.extend(ns_a.iter().map(|&n| ErrorCurve { panel: "a", n, s: 3, alpha, beta }));
        curves.extend(ss_b.iter().map(|&s| ErrorCurve { panel: "b", n: 7, s, alpha, beta }));
    }
    error_curves(ctx, rho, &curves, &ms)
}
