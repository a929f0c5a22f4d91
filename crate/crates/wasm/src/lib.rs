//! Three interactive operations for the browser page in `www/`. Each one
//! takes plain numbers and returns a JSON document.

use std::sync::Arc;

use cogmac_core::aloha::{network_throughput, symmetric_optimal_m, AlohaParams};
use cogmac_core::csma::{csma_throughput, loss_percentage, optimal_multi, optimal_single, SolverOptions};
use cogmac_core::scheme::{heuristic_multi, heuristic_single};
use cogmac_core::spatial::{solve_detection_radius, SpatialConfig};
use cogmac_core::{ChannelSet, GroupCatalog, UtilizationTarget};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest catalog the page will enumerate.
const MAX_GROUPS: u128 = 50_000;

#[derive(Debug, Clone, Serialize)]
pub struct Channels {
    pub widths: Vec<f64>,
    pub thetas: Vec<f64>,
    pub residual_capacity: f64,
}

fn channels(n: usize, rho: f64, seed: u64) -> Result<(ChannelSet, Channels), String> {
    let cs = UtilizationTarget::new(n, rho, seed).generate().map_err(|e| e.to_string())?;
    let info = Channels {
        widths: cs.widths().to_vec(),
        thetas: cs.thetas().to_vec(),
        residual_capacity: cs.residual_capacity(),
    };
    Ok((cs, info))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlohaSweep {
    pub channels: Channels,
    pub m: Vec<u32>,
    pub normalized: Vec<f64>,
    pub best_m: u32,
    /// Optimum of the equal-channel approximation `−1/ln(1 − q/N)`.
    pub symmetric_m: f64,
}

pub fn aloha_sweep_impl(n: usize, rho: f64, q: f64, m_max: u32, seed: u64) -> Result<AlohaSweep, String> {
    let (cs, info) = channels(n, rho, seed)?;
    let scheme = heuristic_single(&cs).map_err(|e| e.to_string())?;
    let m: Vec<u32> = (1..=m_max.max(1)).collect();
    let normalized = m
        .iter()
        .map(|&m| {
            let p = AlohaParams::new(m, q)?;
            Ok(network_throughput(&cs, &scheme, p)? / info.residual_capacity)
        })
        .collect::<cogmac_core::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    let best = normalized
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > normalized[b] { i } else { b });
    Ok(AlohaSweep {
        channels: info,
        best_m: m[best],
        m,
        normalized,
        symmetric_m: symmetric_optimal_m(n, q).unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CsmaPolicy {
    pub channels: Channels,
    pub optimal_coverage: Vec<f64>,
    pub heuristic_coverage: Vec<f64>,
    pub optimal_fraction: f64,
    pub heuristic_fraction: f64,
    pub loss_percentage: Option<f64>,
    pub iterations: usize,
}

pub fn csma_policy_impl(n: usize, s: usize, rho: f64, m: u32, seed: u64) -> Result<CsmaPolicy, String> {
    let (cs, info) = channels(n, rho, seed)?;
    let err = |e: cogmac_core::Error| e.to_string();
    let catalog = Arc::new(GroupCatalog::enumerate_with_cap(n, s, MAX_GROUPS).map_err(err)?);
    let (opt, heu) = if s == 1 {
        (optimal_single(&cs, m).map_err(err)?, heuristic_single(&cs).map_err(err)?)
    } else {
        (
            optimal_multi(&cs, catalog.clone(), m, &SolverOptions::default()).map_err(err)?,
            heuristic_multi(&cs, catalog).map_err(err)?.scheme,
        )
    };
    let c_t = info.residual_capacity;
    Ok(CsmaPolicy {
        optimal_fraction: csma_throughput(&cs, &opt.scheme, m).map_err(err)? / c_t,
        heuristic_fraction: csma_throughput(&cs, &heu, m).map_err(err)? / c_t,
        loss_percentage: loss_percentage(&cs, m, &heu, &opt.scheme).map_err(err)?,
        optimal_coverage: opt.scheme.coverages(),
        heuristic_coverage: heu.coverages(),
        iterations: opt.iterations,
        channels: info,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusSweep {
    pub channels: Channels,
    pub m: Vec<u32>,
    pub radius: Vec<f64>,
    pub max_radius: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn detection_radius_impl(
    n: usize,
    rho: f64,
    q: f64,
    xi: f64,
    lambda: f64,
    radius: f64,
    m_max: u32,
    seed: u64,
) -> Result<RadiusSweep, String> {
    let err = |e: cogmac_core::Error| e.to_string();
    let (cs, info) = channels(n, rho, seed)?;
    let scheme = heuristic_single(&cs).map_err(err)?;
    // the radius does not depend on the cell area
    let cfg = SpatialConfig::symmetric(radius, lambda, xi, 0.1).map_err(err)?;
    let m: Vec<u32> = (1..=m_max.max(1)).collect();
    let radius = m
        .iter()
        .map(|&m| Ok(solve_detection_radius(&cfg, &cs, &scheme, AlohaParams::new(m, q)?)?.r_d))
        .collect::<cogmac_core::Result<Vec<f64>>>()
        .map_err(err)?;
    Ok(RadiusSweep {
        channels: info,
        m,
        radius,
        max_radius: cfg.max_detection_radius(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Normalized ALOHA throughput of the heuristic policy for `M = 1..=m_max`.
#[wasm_bindgen]
pub fn aloha_sweep(n: usize, rho: f64, q: f64, m_max: u32, seed: u64) -> Result<String, JsError> {
    to_js(aloha_sweep_impl(n, rho, q, m_max, seed))
}

/// Optimal and heuristic CSMA sensing policies for `m` users sensing `s` channels each.
#[wasm_bindgen]
pub fn csma_policy(n: usize, s: usize, rho: f64, m: u32, seed: u64) -> Result<String, JsError> {
    to_js(csma_policy_impl(n, s, rho, m, seed))
}

/// Detection radius meeting the collision budget for `M = 1..=m_max`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn detection_radius(
    n: usize,
    rho: f64,
    q: f64,
    xi: f64,
    lambda: f64,
    radius: f64,
    m_max: u32,
    seed: u64,
) -> Result<String, JsError> {
    to_js(detection_radius_impl(n, rho, q, xi, lambda, radius, m_max, seed))
}
