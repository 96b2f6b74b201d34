use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use symmpi::calibrate::{CandidateGrid, PredictionSet, SupLastEntry, UnsupLastEntry, DEFAULT_GRID_POINTS, DEFAULT_GRID_SDS};
use symmpi::groups::{enumerate_automorphisms_with_cap, BlockPermutationGroup, GraphAutomorphismGroup, SymmetricGroup, AUTOMORPHISM_CAP};
use symmpi::io;
use symmpi::network::{graph_vertex_set, PsiKind};
use symmpi::sim::{rotation_region, run_benchmark, HierarchicalConfig, Method};
use symmpi::transforms::{check_distributional_equivariance, fit_regressors, BuiltinMap, EquivarianceReport, Scale, SupBranch};
use symmpi::DEFAULT_C;

use crate::config::{self, FileConfig};
use crate::error::CliError;
use crate::output::{Format, Output};
use crate::{BenchArgs, Cli, Command, EquivarianceArgs, GraphArgs, HierarchicalArgs, RotationArgs};

struct Globals {
    seed: u64,
    output: Output,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    let format = Format::parse(cli.format.as_deref().or(file.format.as_deref()).unwrap_or("csv"))?;
    let g = Globals { seed: cli.seed.or(file.seed).unwrap_or(0), output: Output { path: cli.out.or(file.out.clone()), format } };
    match cli.command {
        Command::Bench(a) => bench(a, &file, &g),
        Command::PredictHierarchical(a) => predict_hierarchical(a, &file, &g),
        Command::PredictGraph(a) => predict_graph(a, &file, &g),
        Command::PredictRotation(a) => predict_rotation(a, &file, &g),
        Command::TestEquivariance(a) => test_equivariance(a, &file, &g),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

fn parse_scale(s: &str) -> Result<Scale, CliError> {
    match s {
        "branch-sd" => Ok(Scale::BranchSd),
        "raw" => Ok(Scale::Raw),
        other => Err(CliError::Usage(format!("unknown scale '{other}', expected branch-sd or raw"))),
    }
}

fn write_set(w: &mut dyn Write, format: Format, set: &PredictionSet) -> symmpi::Result<()> {
    match format {
        Format::Csv => io::write_set_csv(w, set),
        Format::Json => io::write_set_json(w, set),
    }
}

fn describe_set(set: &PredictionSet) -> String {
    if set.unbounded {
        return "prediction set: unbounded (every candidate is kept)".into();
    }
    if set.is_empty() {
        return "prediction set: empty on the candidate grid".into();
    }
    let parts: Vec<String> = set.intervals().iter().map(|(a, b)| format!("[{a:.6}, {b:.6}]")).collect();
    format!("prediction set: {} (length {:.6})", parts.join(" ∪ "), set.length())
}

fn default_methods(preset: &str) -> Vec<Method> {
    let mut m = vec![Method::SymmPI, Method::Conformal, Method::Subsampling, Method::SingleTree];
    if preset.starts_with("random-n") {
        m.push(Method::Hcp);
    }
    m
}

fn bench(a: BenchArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let f = &file.bench;
    let preset = a.preset.or(f.preset.clone()).ok_or_else(|| CliError::Usage("bench needs --preset".into()))?;
    let alpha = a.alpha.or(f.alpha).unwrap_or(0.05);
    let sigma2 = a.sigma2.or(f.sigma2).unwrap_or(10.0);
    let mut cfg = HierarchicalConfig::preset(&preset, sigma2, alpha)?;
    if let Some(t) = a.trials.or(f.trials) {
        cfg.trials = t;
    }
    if let Some(t) = a.tests.or(f.tests) {
        cfg.tests = t;
    }
    if let Some(k) = a.branches.or(f.branches) {
        cfg.branches = k;
    }
    if let Some(c) = a.c.or(f.c) {
        cfg.c = c;
    }
    if let Some(s) = a.scale.as_deref().or(f.scale.as_deref()) {
        cfg.scale = parse_scale(s)?;
    }
    if let Some(n) = a.grid_points.or(f.grid_points) {
        cfg.grid_points = n;
    }
    cfg.seed = g.seed;
    cfg.validate()?;
    let methods = match a.methods.or(f.methods.clone()) {
        Some(names) => names.iter().map(|n| Method::from_name(n.trim())).collect::<symmpi::Result<Vec<_>>>()?,
        None => default_methods(&preset),
    };
    let result = run_benchmark(&cfg, &methods)?;
    g.output.note(&result.to_table());
    g.output.emit(|w, format| match format {
        Format::Csv => io::write_bench_csv(w, &result),
        Format::Json => io::write_bench_json(w, &result),
    })?;
    if let Some(plot) = a.plot.or(f.plot.clone()) {
        let file = File::create(&plot).map_err(|e| CliError::Data(format!("cannot create {}: {e}", plot.display())))?;
        io::write_plot_csv(file, &result)?;
    }
    Ok(())
}

/// Splits every branch into a training head of `ceil(n/2)` rows and a
/// calibration tail. The target counts towards `n` for its own branch.
fn split_branches(branches: &[SupBranch]) -> (Vec<SupBranch>, Vec<SupBranch>) {
    let last = branches.len() - 1;
    branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let n = b.len() + usize::from(k == last);
            let head = n.div_ceil(2).min(b.len());
            let train = SupBranch { x: b.x[..head].to_vec(), y: b.y[..head].to_vec() };
            let calib = SupBranch { x: b.x[head..].to_vec(), y: b.y[head..].to_vec() };
            (train, calib)
        })
        .unzip()
}

fn check_sizes(sizes: impl Iterator<Item = usize>, random_sizes: bool) -> Result<(), CliError> {
    let sizes: Vec<usize> = sizes.collect();
    if !random_sizes && sizes.iter().any(|&n| n != sizes[0]) {
        return Err(CliError::Data(format!(
            "branch sizes differ ({sizes:?}, target included); pass --random-sizes to use size-weighted calibration"
        )));
    }
    Ok(())
}

fn predict_hierarchical(a: HierarchicalArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let f = &file.hierarchical;
    let data = required(a.data.or(f.data.clone()), "hierarchical data file")?;
    let alpha = a.alpha.or(f.alpha).unwrap_or(0.1);
    let c = a.c.or(f.c).unwrap_or(DEFAULT_C);
    let points = a.grid.or(f.grid).unwrap_or(DEFAULT_GRID_POINTS);
    let random_sizes = a.random_sizes || f.random_sizes.unwrap_or(false);
    let scale = parse_scale(a.scale.as_deref().or(f.scale.as_deref()).unwrap_or("branch-sd"))?;
    let input = io::read_hierarchical_csv(open(&data)?)?;
    let mode = a.mode.or(f.mode.clone()).unwrap_or_else(|| {
        match input {
            io::HierarchicalInput::Unsupervised { .. } => "unsup",
            io::HierarchicalInput::Supervised { .. } => "sup",
        }
        .into()
    });
    let set = match (mode.as_str(), input) {
        ("unsup", io::HierarchicalInput::Unsupervised { observed, .. }) => {
            let k = observed.len();
            check_sizes(observed.iter().enumerate().map(|(i, b)| b.len() + usize::from(i + 1 == k)), random_sizes)?;
            let all: Vec<f64> = observed.iter().flatten().copied().collect();
            let grid = CandidateGrid::around(&all, points, DEFAULT_GRID_SDS)?;
            UnsupLastEntry::with_scale(&observed, c, scale)?.set(&grid, alpha)?
        }
        ("sup", io::HierarchicalInput::Supervised { branches, x_star, .. }) => {
            let k = branches.len();
            check_sizes(branches.iter().enumerate().map(|(i, b)| b.len() + usize::from(i + 1 == k)), random_sizes)?;
            let (train, calib) = split_branches(&branches);
            let reg = fit_regressors(&train)?;
            let all: Vec<f64> = branches.iter().flat_map(|b| b.y.iter().copied()).collect();
            let grid = CandidateGrid::around(&all, points, DEFAULT_GRID_SDS)?;
            SupLastEntry::with_scale(&calib, &x_star, &reg, c, scale)?.set(&grid, alpha)?
        }
        ("unsup", _) => return Err(CliError::Data("--mode unsup needs a file with columns branch_id,y".into())),
        ("sup", _) => return Err(CliError::Data("--mode sup needs covariate columns between branch_id and y".into())),
        (other, _) => return Err(CliError::Usage(format!("unknown mode '{other}', expected unsup or sup"))),
    };
    g.output.note(&describe_set(&set));
    g.output.emit(|w, format| write_set(w, format, &set))
}

fn predict_graph(a: GraphArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let f = &file.graph;
    let values_path = required(a.values.or(f.values.clone()), "graph values file")?;
    let alpha = a.alpha.or(f.alpha).unwrap_or(0.1);
    let points = a.grid.or(f.grid).unwrap_or(DEFAULT_GRID_POINTS);
    let psi = match a.psi.as_deref().or(f.psi.as_deref()).unwrap_or("last") {
        "last" => PsiKind::LastCoordinate,
        "orbit-deviation" => PsiKind::OrbitDeviation,
        other => return Err(CliError::Usage(format!("unknown psi '{other}', expected last or orbit-deviation"))),
    };
    let (values, target) = io::read_graph_values(open(&values_path)?)?;
    let n = values.len();
    let adjacency = match (a.adjacency.or(f.adjacency.clone()), a.edges.or(f.edges.clone())) {
        (Some(p), None) => io::read_adjacency_csv(open(&p)?)?,
        (None, Some(p)) => io::read_edge_list(open(&p)?, Some(n))?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --adjacency or --edges, not both".into())),
        (None, None) => return Err(CliError::Usage("missing graph: pass --adjacency or --edges".into())),
    };
    if adjacency.len() != n {
        return Err(CliError::Data(format!("graph has {} vertices but {n} values were given", adjacency.len())));
    }
    let aut = match a.generators.or(f.generators.clone()) {
        Some(p) => GraphAutomorphismGroup::from_generators(adjacency, &io::read_generators(open(&p)?)?)?,
        None => enumerate_automorphisms_with_cap(&adjacency, a.cap.or(f.cap).unwrap_or(AUTOMORPHISM_CAP))?,
    };
    let filled: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
    let observed: Vec<f64> = values.iter().flatten().copied().collect();
    let grid = CandidateGrid::around(&observed, points, DEFAULT_GRID_SDS)?;
    let pred = graph_vertex_set(&filled, target, &aut, &grid, alpha, psi)?;
    g.output.note(&format!(
        "target vertex {target}: orbit size {}, |G| = {}, over-coverage bound |H|/|G| = {}",
        pred.orbit.len(),
        aut.len(),
        pred.overcoverage
    ));
    if pred.trivial_orbit {
        g.output.warn("the target is fixed by every automorphism (trivial orbit); the set is the whole grid");
    }
    g.output.note(&describe_set(&pred.set));
    g.output.emit(|w, format| write_set(w, format, &pred.set))
}

fn predict_rotation(a: RotationArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let f = &file.rotation;
    let path = required(a.points.or(f.points.clone()), "points file")?;
    let alpha = a.alpha.or(f.alpha).unwrap_or(0.05);
    let mc = a.mc.or(f.mc).unwrap_or(10_000);
    let resolution = a.resolution.or(f.resolution).unwrap_or(101);
    if resolution < 2 {
        return Err(CliError::Usage("--resolution must be at least 2".into()));
    }
    let points = io::read_points_csv(open(&path)?)?;
    let mut rng = ChaCha20Rng::seed_from_u64(g.seed);
    let region = rotation_region(&points, alpha, mc, &mut rng)?;
    let extent = match a.extent.or(f.extent) {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(CliError::Usage(format!("--extent must be positive, got {e}"))),
        None => {
            let r = points.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
            if r > 0.0 { 1.5 * r } else { 1.0 }
        }
    };
    let axis: Vec<f64> = (0..resolution).map(|i| -extent + 2.0 * extent * i as f64 / (resolution - 1) as f64).collect();
    let raster = (region.dim() == 2).then(|| region.raster(&axis, &axis));
    let halfwidth = region.strip_halfwidth();
    g.output.note(&format!(
        "rotation region: dimension {}, {} draws, excluded strip |z_1| < {halfwidth:.6} on the first axis",
        region.dim(),
        region.draws()
    ));
    if raster.is_none() {
        g.output.warn("raster output is only produced for two-dimensional points");
    }
    g.output.emit(|w, format| {
        match format {
            Format::Json => {
                let body = json!({
                    "alpha": region.alpha(),
                    "dim": region.dim(),
                    "draws": region.draws(),
                    "strip_halfwidth": if halfwidth.is_finite() { json!(halfwidth) } else { json!(null) },
                    "axis": axis,
                    "raster": raster,
                });
                serde_json::to_writer_pretty(w, &body)?;
            }
            Format::Csv => {
                writeln!(w, "x,y,member")?;
                if let Some(r) = &raster {
                    for (row, &y) in r.iter().zip(&axis) {
                        for (&m, &x) in row.iter().zip(&axis) {
                            writeln!(w, "{x},{y},{m}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    })
}

fn hierarchical_sampler(blocks: usize, block_size: usize) -> impl Fn(&mut dyn RngCore) -> Vec<f64> {
    move |rng| {
        let mut z = Vec::with_capacity(blocks * block_size);
        for _ in 0..blocks {
            let mu: f64 = StandardNormal.sample(rng);
            for _ in 0..block_size {
                let e: f64 = StandardNormal.sample(rng);
                z.push(mu + 0.5 * e);
            }
        }
        z
    }
}

fn test_equivariance(a: EquivarianceArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let f = &file.equivariance;
    let name = a.map.or(f.map.clone()).ok_or_else(|| CliError::Usage("test-equivariance needs --map".into()))?;
    let samples = a.samples.or(f.samples).unwrap_or(2000);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let blocks = a.blocks.or(f.blocks).unwrap_or(4);
    let block_size = a.block_size.or(f.block_size).unwrap_or(5);
    let c = a.c.or(f.c).unwrap_or(DEFAULT_C);
    let map = BuiltinMap::from_name(&name, blocks, block_size, c)?;
    let group = a.group.or(f.group.clone()).unwrap_or_else(|| "block".into());
    let sampler = hierarchical_sampler(blocks, block_size);
    let mut rng = ChaCha20Rng::seed_from_u64(g.seed);
    let report: EquivarianceReport = match group.as_str() {
        "block" => {
            let grp = BlockPermutationGroup::new(blocks, block_size)?;
            check_distributional_equivariance(&map, &grp, &grp, &sampler, samples, &mut rng)?
        }
        "symmetric" => {
            let grp = SymmetricGroup::new(blocks * block_size)?;
            check_distributional_equivariance(&map, &grp, &grp, &sampler, samples, &mut rng)?
        }
        other => return Err(CliError::Usage(format!("unknown group '{other}', expected block or symmetric"))),
    };
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    g.output.note(&format!(
        "map {name} under {group} ({blocks}x{block_size}): statistic {:.6}, p-value {:.4}, {verdict}",
        report.statistic, report.p_value
    ));
    g.output.emit(|w, format| {
        match format {
            Format::Json => serde_json::to_writer_pretty(w, &report)?,
            Format::Csv => {
                writeln!(w, "map,group,samples,statistic,p_value,result")?;
                writeln!(w, "{name},{group},{},{},{},{verdict}", report.samples, report.statistic, report.p_value)?;
            }
        }
        Ok(())
    })
}
