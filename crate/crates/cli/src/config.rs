//! Scenario files: TOML with one table per block. Parsing is strict about
//! unknown keys; every default is filled in and echoed through
//! [`Scenario::resolved`].

use std::path::Path;
use std::sync::Arc;

use cogmac_core::csma::{CollisionBound, ErrorAwareOptions, ErrorObjective, DEFAULT_F_MIN};
use cogmac_core::spatial::{DetectionPolicy, SpatialConfig};
use cogmac_core::{ChannelSet, GroupCatalog, SensingScheme, UtilizationTarget};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SLOTS: u64 = 100_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    channels: Option<RawChannels>,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    population: RawPopulation,
    spatial: Option<RawSpatial>,
    detector: Option<RawDetector>,
    #[serde(default)]
    simulation: RawSimulation,
    #[serde(default)]
    compare: RawCompare,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannels {
    widths: Option<Vec<f64>>,
    thetas: Option<Vec<f64>>,
    rate_factor: Option<f64>,
    n: Option<usize>,
    rho: Option<f64>,
    seed: Option<u64>,
    width_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<SchemeKind>,
    group_size: Option<usize>,
    groups: Option<Vec<Vec<usize>>>,
    probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPopulation {
    m: Option<u32>,
    m_range: Option<[u32; 2]>,
    m_step: Option<u32>,
    q: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpatial {
    lambda: f64,
    xi: f64,
    radius: Option<f64>,
    r_r_p: Option<f64>,
    r_r_s: Option<f64>,
    r_i_p: Option<f64>,
    r_i_s: Option<f64>,
    cell_area: Option<f64>,
    gamma: Option<f64>,
    detection: Option<DetectionPolicy>,
    r_d: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    alpha: Option<f64>,
    beta: Option<f64>,
    f0: Option<f64>,
    xi: Option<f64>,
    objective: Option<ErrorObjective>,
    collision: Option<CollisionBound>,
    f_min: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    model: Option<SimModel>,
    slots: Option<u64>,
    seed: Option<u64>,
    shards: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    group_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    HeuristicSingle,
    HeuristicMulti,
    Optimal,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Aloha,
    Csma,
    Spatial,
}

/// Where the channel set came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ChannelSource {
    Explicit,
    Generated { n: usize, rho: f64, seed: u64, width_range: [f64; 2] },
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub group_size: usize,
    /// Number of groups in the catalog.
    pub groups: usize,
    pub restricted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
    #[serde(skip)]
    pub catalog: Arc<GroupCatalog>,
    #[serde(skip)]
    pub explicit: Option<SensingScheme>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Population {
    pub ms: Vec<u32>,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpatialSpec {
    pub config: SpatialConfig,
    pub gamma: f64,
    pub detection: DetectionPolicy,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectorSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Fixed access probability. When absent the optimizer chooses it.
    pub f0: Option<f64>,
    pub xi: f64,
    pub options: ErrorAwareOptions,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimulationSpec {
    pub model: SimModel,
    pub slots: u64,
    pub seed: u64,
    pub shards: usize,
}

/// A validated scenario with every default applied.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub seed: u64,
    pub channel_source: ChannelSource,
    pub channels: ChannelSet,
    pub scheme: SchemeSpec,
    pub population: Population,
    pub spatial: Option<SpatialSpec>,
    pub detector: Option<DetectorSpec>,
    pub simulation: SimulationSpec,
    pub compare_group_sizes: Vec<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub shards: Option<usize>,
    pub ms: Option<Vec<u32>>,
}

fn field(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Field {
        field: name.to_string(),
        reason: reason.into(),
    }
}

fn core_field(name: &str) -> impl Fn(cogmac_core::Error) -> CliError + '_ {
    move |e| {
        if e.is_numerical() {
            CliError::Core(e)
        } else {
            field(name, e.to_string())
        }
    }
}

impl Scenario {
    pub fn load(path: &Path, ov: &Overrides) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        let sc = Self::parse(&text, ov).map_err(|e| match e {
            CliError::Parse { message, .. } => CliError::Parse {
                origin: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        Ok((sc, text))
    }

    pub fn parse(text: &str, ov: &Overrides) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
            origin: "<config>".into(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw, ov)
    }

    fn from_raw(raw: RawConfig, ov: &Overrides) -> Result<Self, CliError> {
        let seed = ov.seed.or(raw.seed).unwrap_or(0);
        let rc = raw.channels.ok_or_else(|| field("channels", "block is required"))?;
        let (channels, channel_source) = build_channels(&rc, seed)?;
        let n = channels.n();

        let scheme = build_scheme(&raw.scheme, n)?;
        let population = build_population(&raw.population, ov)?;
        let spatial = raw.spatial.as_ref().map(build_spatial).transpose()?;
        let detector = raw.detector.as_ref().map(build_detector).transpose()?;

        let model = raw.simulation.model.unwrap_or(if spatial.is_some() {
            SimModel::Spatial
        } else if detector.is_some() {
            SimModel::Csma
        } else {
            SimModel::Aloha
        });
        let simulation = SimulationSpec {
            model,
            slots: ov.slots.or(raw.simulation.slots).unwrap_or(DEFAULT_SLOTS),
            seed: ov.seed.or(raw.simulation.seed).unwrap_or(seed),
            shards: ov.shards.or(raw.simulation.shards).unwrap_or(1),
        };
        if simulation.slots == 0 {
            return Err(field("simulation.slots", "must be at least 1"));
        }
        if simulation.shards == 0 {
            return Err(field("simulation.shards", "must be at least 1"));
        }

        let compare_group_sizes = raw.compare.group_sizes.clone().unwrap_or(vec![scheme.group_size]);
        if compare_group_sizes.is_empty() {
            return Err(field("compare.group_sizes", "must not be empty"));
        }
        for &s in &compare_group_sizes {
            if s == 0 || s > n {
                return Err(field("compare.group_sizes", format!("group size {s} outside 1..={n}")));
            }
        }

        Ok(Scenario {
            seed,
            channel_source,
            channels,
            scheme,
            population,
            spatial,
            detector,
            simulation,
            compare_group_sizes,
        })
    }

    /// The scenario with all defaults applied, for the run manifest.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario serializes")
    }
}

fn build_channels(rc: &RawChannels, master_seed: u64) -> Result<(ChannelSet, ChannelSource), CliError> {
    let a = rc.rate_factor.unwrap_or(1.0);
    let explicit = rc.widths.is_some() || rc.thetas.is_some();
    let generated = rc.n.is_some() || rc.rho.is_some();
    match (explicit, generated) {
        (true, true) => Err(field(
            "channels",
            "give either widths and thetas, or n and rho, not both",
        )),
        (false, false) => Err(field("channels", "give widths and thetas, or n and rho")),
        (true, false) => {
            if rc.seed.is_some() || rc.width_range.is_some() {
                return Err(field("channels.seed", "only applies to generated channels"));
            }
            let widths = rc.widths.clone().ok_or_else(|| field("channels.widths", "missing"))?;
            let thetas = rc.thetas.clone().ok_or_else(|| field("channels.thetas", "missing"))?;
            let cs = ChannelSet::new(widths, thetas, a).map_err(core_field("channels"))?;
            Ok((cs, ChannelSource::Explicit))
        }
        (false, true) => {
            let n = rc.n.ok_or_else(|| field("channels.n", "missing"))?;
            let rho = rc.rho.ok_or_else(|| field("channels.rho", "missing"))?;
            let seed = rc.seed.unwrap_or(master_seed);
            let mut target = UtilizationTarget::new(n, rho, seed);
            if let Some([lo, hi]) = rc.width_range {
                target.width_range = (lo, hi);
            }
            let base = target.generate().map_err(core_field("channels"))?;
            let cs = ChannelSet::new(base.widths().to_vec(), base.thetas().to_vec(), a)
                .map_err(core_field("channels.rate_factor"))?;
            let (lo, hi) = target.width_range;
            Ok((
                cs,
                ChannelSource::Generated {
                    n,
                    rho,
                    seed,
                    width_range: [lo, hi],
                },
            ))
        }
    }
}

fn build_scheme(rs: &RawScheme, n: usize) -> Result<SchemeSpec, CliError> {
    let kind = rs.kind.unwrap_or(SchemeKind::HeuristicSingle);
    let group_size = rs
        .group_size
        .or_else(|| rs.groups.as_ref().and_then(|g| g.first().map(Vec::len)))
        .unwrap_or(1);
    if kind == SchemeKind::HeuristicSingle && group_size != 1 {
        return Err(field("scheme.group_size", "heuristic_single requires group_size = 1"));
    }
    if rs.probabilities.is_some() && kind != SchemeKind::Explicit {
        return Err(field("scheme.probabilities", "only valid with kind = \"explicit\""));
    }
    let restricted = rs.groups.is_some();
    let catalog = match &rs.groups {
        Some(groups) => {
            let cat = GroupCatalog::from_groups(n, groups.clone()).map_err(core_field("scheme.groups"))?;
            if cat.group_size() != group_size {
                return Err(field("scheme.group_size", "does not match the size of the listed groups"));
            }
            cat
        }
        None => GroupCatalog::enumerate(n, group_size).map_err(core_field("scheme.group_size"))?,
    };
    let catalog = Arc::new(catalog);
    let explicit = match kind {
        SchemeKind::Explicit => {
            let probs = rs
                .probabilities
                .clone()
                .ok_or_else(|| field("scheme.probabilities", "required when kind = \"explicit\""))?;
            Some(SensingScheme::new(catalog.clone(), probs).map_err(core_field("scheme.probabilities"))?)
        }
        _ => None,
    };
    Ok(SchemeSpec {
        kind,
        group_size,
        groups: catalog.kappa(),
        restricted,
        probabilities: rs.probabilities.clone(),
        catalog,
        explicit,
    })
}

fn build_population(rp: &RawPopulation, ov: &Overrides) -> Result<Population, CliError> {
    let q = rp.q.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&q) {
        return Err(field("population.q", format!("{q} outside [0, 1]")));
    }
    let ms = match (&ov.ms, rp.m, rp.m_range) {
        (Some(ms), _, _) => ms.clone(),
        (None, Some(_), Some(_)) => return Err(field("population", "give m or m_range, not both")),
        (None, Some(m), None) => vec![m],
        (None, None, Some([lo, hi])) => {
            let step = rp.m_step.unwrap_or(1);
            if step == 0 {
                return Err(field("population.m_step", "must be at least 1"));
            }
            if lo > hi {
                return Err(field("population.m_range", format!("empty range [{lo}, {hi}]")));
            }
            (lo..=hi).step_by(step as usize).collect()
        }
        (None, None, None) => vec![1],
    };
    if ms.is_empty() {
        return Err(field("population", "no population sizes"));
    }
    if ms.contains(&0) {
        return Err(field("population.m", "population sizes must be at least 1"));
    }
    Ok(Population { ms, q })
}

fn build_spatial(rs: &RawSpatial) -> Result<SpatialSpec, CliError> {
    let radius = |name: &str, v: Option<f64>| -> Result<f64, CliError> {
        v.or(rs.radius)
            .ok_or_else(|| field(&format!("spatial.{name}"), "missing and no `radius` default given"))
    };
    let r_i_s = radius("r_i_s", rs.r_i_s)?;
    let cell_area = match (rs.cell_area, rs.gamma) {
        (None, None) => return Err(field("spatial", "give cell_area or gamma")),
        (Some(a), None) => a,
        (None, Some(g)) => SpatialConfig::cell_area_for_gamma(r_i_s, g).map_err(core_field("spatial.gamma"))?,
        (Some(a), Some(g)) => {
            let implied = std::f64::consts::PI * r_i_s * r_i_s / a;
            if (implied - g).abs() > 1e-9 * g.abs().max(1e-300) {
                return Err(field(
                    "spatial.gamma",
                    format!("cell_area = {a} implies gamma = {implied}, not {g}"),
                ));
            }
            a
        }
    };
    let config = SpatialConfig {
        lambda: rs.lambda,
        r_r_p: radius("r_r_p", rs.r_r_p)?,
        r_r_s: radius("r_r_s", rs.r_r_s)?,
        r_i_p: radius("r_i_p", rs.r_i_p)?,
        r_i_s,
        r_d: rs.r_d.unwrap_or(0.0),
        cell_area,
        xi: rs.xi,
    };
    config.validate().map_err(core_field("spatial"))?;
    Ok(SpatialSpec {
        config,
        gamma: config.gamma(),
        detection: rs.detection.unwrap_or(DetectionPolicy::Solve),
    })
}

fn build_detector(rd: &RawDetector) -> Result<DetectorSpec, CliError> {
    let alpha = rd.alpha.unwrap_or(0.0);
    let beta = rd.beta.unwrap_or(1.0);
    cogmac_core::csma::DetectorModel::new(alpha, beta, rd.f0.unwrap_or(1.0)).map_err(core_field("detector"))?;
    let xi = rd.xi.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&xi) {
        return Err(field("detector.xi", format!("{xi} outside [0, 1]")));
    }
    let defaults = ErrorAwareOptions::default();
    let options = ErrorAwareOptions {
        objective: rd.objective.unwrap_or(defaults.objective),
        collision: rd.collision.unwrap_or(defaults.collision),
        f_min: rd.f_min.unwrap_or(DEFAULT_F_MIN),
        ..defaults
    };
    if !(options.f_min > 0.0 && options.f_min <= 1.0) {
        return Err(field("detector.f_min", format!("{} outside (0, 1]", options.f_min)));
    }
    Ok(DetectorSpec {
        alpha,
        beta,
        f0: rd.f0,
        xi,
        options,
    })
}

/// Parses `M=a..b`, `M=a..b:step` or `M=a,b,c`. Ranges are inclusive.
pub fn parse_sweep(spec: &str) -> Result<Vec<u32>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("--sweep {spec}: {why}"));
    let (key, values) = spec.split_once('=').ok_or_else(|| bad("expected KEY=RANGE"))?;
    if !key.trim().eq_ignore_ascii_case("m") {
        return Err(bad("only the population M can be swept"));
    }
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad(&format!("`{s}` is not a whole number")));
    let ms: Vec<u32> = if let Some((lo, rest)) = values.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (num(h)?, num(s)?),
            None => (num(rest)?, 1),
        };
        let lo = num(lo)?;
        if step == 0 || lo > hi {
            return Err(bad("empty range"));
        }
        (lo..=hi).step_by(step as usize).collect()
    } else {
        values.split(',').map(num).collect::<Result<_, _>>()?
    };
    if ms.contains(&0) {
        return Err(bad("M must be at least 1"));
    }
    Ok(ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_syntax() {
        assert_eq!(parse_sweep("M=1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_sweep("m=2..9:3").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_sweep("M=7,3").unwrap(), vec![7, 3]);
        assert!(parse_sweep("N=1..3").is_err());
        assert!(parse_sweep("M=0..3").is_err());
        assert!(parse_sweep("M=5..3").is_err());
    }
}
