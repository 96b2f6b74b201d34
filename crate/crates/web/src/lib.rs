//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain text or numbers and returns a JSON
//! string, so the page needs no bundler. The `*_json` functions hold the
//! logic and are what the native tests exercise.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use symmpi::calibrate::{CandidateGrid, PredictionSet, UnsupLastEntry, DEFAULT_GRID_SDS};
use symmpi::groups::enumerate_automorphisms_with_cap;
use symmpi::io::{read_edge_list, read_graph_values, read_hierarchical_csv, read_points_csv, HierarchicalInput};
use symmpi::network::{graph_vertex_set, PsiKind};
use symmpi::sim::rotation_region;
use symmpi::transforms::Scale;

/// Largest graph the page will brute-force.
pub const GRAPH_CAP: usize = 9;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn set_json(set: &PredictionSet) -> Value {
    let mut v = set.to_json();
    v.as_object_mut().unwrap().remove("candidates");
    v.as_object_mut().unwrap().remove("member");
    v
}

/// Rotation region for a 2-d cloud rasterised on a `resolution²` grid over
/// `[-extent, extent]²`.
pub fn rotation_raster_json(points_csv: &str, alpha: f64, mc: usize, seed: u64, resolution: usize, extent: f64) -> Result<String, String> {
    let points = read_points_csv(points_csv.as_bytes()).map_err(err)?;
    if points[0].len() != 2 {
        return Err(format!("the demo draws 2-d points, got dimension {}", points[0].len()));
    }
    if resolution < 2 || !(extent > 0.0 && extent.is_finite()) {
        return Err("resolution must be at least 2 and extent positive".into());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let region = rotation_region(&points, alpha, mc, &mut rng).map_err(err)?;
    let axis: Vec<f64> = (0..resolution).map(|i| -extent + 2.0 * extent * i as f64 / (resolution - 1) as f64).collect();
    let raster = region.raster(&axis, &axis);
    let halfwidth = region.strip_halfwidth();
    Ok(json!({
        "axis": axis,
        "raster": raster,
        "strip_halfwidth": if halfwidth.is_finite() { json!(halfwidth) } else { Value::Null },
        "points": points,
    })
    .to_string())
}

/// Interval for the missing response of an unsupervised hierarchical CSV
/// (`branch_id,y`, target row with empty `y`).
pub fn hierarchical_interval_json(csv: &str, alpha: f64, c: f64, grid_points: usize, raw_scores: bool) -> Result<String, String> {
    let observed = match read_hierarchical_csv(csv.as_bytes()).map_err(err)? {
        HierarchicalInput::Unsupervised { observed, .. } => observed,
        HierarchicalInput::Supervised { .. } => return Err("the demo takes two columns: branch_id,y".into()),
    };
    let all: Vec<f64> = observed.iter().flatten().copied().collect();
    let grid = CandidateGrid::around(&all, grid_points, DEFAULT_GRID_SDS).map_err(err)?;
    let scale = if raw_scores { Scale::Raw } else { Scale::BranchSd };
    let set = UnsupLastEntry::with_scale(&observed, c, scale).and_then(|f| f.set(&grid, alpha)).map_err(err)?;
    let means: Vec<f64> = observed.iter().map(|b| b.iter().sum::<f64>() / b.len().max(1) as f64).collect();
    Ok(json!({ "set": set_json(&set), "branch_means": means, "branches": observed }).to_string())
}

/// Set for the missing vertex value given `vertex_id,value` rows and an
/// edge list.
pub fn graph_set_json(values_csv: &str, edges: &str, alpha: f64, grid_points: usize) -> Result<String, String> {
    let (values, target) = read_graph_values(values_csv.as_bytes()).map_err(err)?;
    let n = values.len();
    let adjacency = read_edge_list(edges.as_bytes(), Some(n)).map_err(err)?;
    let aut = enumerate_automorphisms_with_cap(&adjacency, GRAPH_CAP).map_err(err)?;
    let filled: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
    let observed: Vec<f64> = values.iter().flatten().copied().collect();
    let grid = CandidateGrid::around(&observed, grid_points, DEFAULT_GRID_SDS).map_err(err)?;
    let pred = graph_vertex_set(&filled, target, &aut, &grid, alpha, PsiKind::LastCoordinate).map_err(err)?;
    Ok(json!({
        "set": set_json(&pred.set),
        "target": target,
        "orbit": pred.orbit.members,
        "group_order": aut.len(),
        "overcoverage": pred.overcoverage,
        "trivial_orbit": pred.trivial_orbit,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn rotation_raster(points_csv: &str, alpha: f64, mc: usize, seed: u32, resolution: usize, extent: f64) -> Result<String, JsValue> {
    rotation_raster_json(points_csv, alpha, mc, seed.into(), resolution, extent).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hierarchical_interval(csv: &str, alpha: f64, c: f64, grid_points: usize, raw_scores: bool) -> Result<String, JsValue> {
    hierarchical_interval_json(csv, alpha, c, grid_points, raw_scores).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn graph_set(values_csv: &str, edges: &str, alpha: f64, grid_points: usize) -> Result<String, JsValue> {
    graph_set_json(values_csv, edges, alpha, grid_points).map_err(|e| JsValue::from_str(&e))
}
