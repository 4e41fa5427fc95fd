//! Occupancy heat maps: agent positions binned on a square grid and
//! averaged over rollouts (and checkpoints).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::TeamEnv;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_indexed, Rng};
use crate::train::{read_manifest, Checkpoint, JointPolicy, PolicyRunner};

pub const DEFAULT_GRID: usize = 50;
pub const DEFAULT_ROLLOUTS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub size: usize,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub iterations: Vec<usize>,
    pub rollouts: usize,
    /// Row-major, `size x size`; row index is the y bin (row 0 at `min[1]`).
    pub cells: Vec<f64>,
}

impl HeatmapGrid {
    pub fn new(size: usize, min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("heat-map grid size must be positive".into()));
        }
        if !(max[0] > min[0] && max[1] > min[1]) {
            return Err(Error::Config("heat-map extent is empty".into()));
        }
        Ok(Self {
            size,
            min,
            max,
            iterations: Vec::new(),
            rollouts: 0,
            cells: vec![0.0; size * size],
        })
    }

    /// Cell `(row, col)` containing `p`; points outside land in edge cells.
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let bin = |v: f64, lo: f64, hi: f64| {
            let f = ((v - lo) / (hi - lo) * self.size as f64).floor();
            (f.max(0.0) as usize).min(self.size - 1)
        };
        (bin(p[1], self.min[1], self.max[1]), bin(p[0], self.min[0], self.max[0]))
    }

    pub fn add(&mut self, p: [f64; 2], weight: f64) {
        let (r, c) = self.cell_of(p);
        self.cells[r * self.size + c] += weight;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.size + col]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }
}

/// Mean per-rollout occupancy of the cooperative agents over `rollouts`
/// episodes, recorded after every step.
pub fn occupancy(
    env: &mut dyn TeamEnv,
    policy: &mut dyn JointPolicy,
    rollouts: usize,
    size: usize,
    rng: &mut Rng,
) -> Result<HeatmapGrid> {
    let (min, max) = env.world_bounds();
    let mut grid = HeatmapGrid::new(size, min, max)?;
    if rollouts == 0 {
        return Err(Error::Config("heat-map needs at least one rollout".into()));
    }
    let w = 1.0 / rollouts as f64;
    for _ in 0..rollouts {
        policy.reset();
        let mut obs = env.reset(rng)?;
        loop {
            let actions = policy.act(env, &obs, rng)?;
            let out = env.step(&actions)?;
            for p in env.positions() {
                grid.add(p, w);
            }
            obs = out.observations;
            if out.done {
                break;
            }
        }
    }
    grid.rollouts = rollouts;
    Ok(grid)
}

/// Averages per-checkpoint occupancy grids of a run. Rollouts at iteration
/// `i` draw from their own stream, so results do not depend on which other
/// iterations are requested.
pub fn heatmap_from_run(
    run_dir: &Path,
    iterations: &[usize],
    rollouts: usize,
    size: usize,
    deterministic: bool,
) -> Result<HeatmapGrid> {
    if iterations.is_empty() {
        return Err(Error::Config("no iterations requested for the heat map".into()));
    }
    let manifest = read_manifest(run_dir)?;
    let checkpoints = iterations
        .iter()
        .map(|&it| Checkpoint::load_iteration(run_dir, it))
        .collect::<Result<Vec<_>>>()?;
    let mut env = manifest.config.env.build()?;
    let (min, max) = env.world_bounds();
    let mut total = HeatmapGrid::new(size, min, max)?;
    let seed = derive_seed(manifest.config.seed, "heatmap");
    for (ck, &it) in checkpoints.iter().zip(iterations) {
        let mut runner = PolicyRunner::new(&ck.policies, deterministic);
        let mut rng = rng_indexed(seed, "iteration", it as u64);
        let g = occupancy(env.as_mut(), &mut runner, rollouts, size, &mut rng)?;
        for (a, b) in total.cells.iter_mut().zip(&g.cells) {
            *a += b / iterations.len() as f64;
        }
    }
    total.iterations = iterations.to_vec();
    total.rollouts = rollouts;
    Ok(total)
}

/// Matrix CSV: one line per grid row, shortest round-trip decimal floats.
pub fn grid_to_csv(grid: &HeatmapGrid) -> String {
    let mut out = String::new();
    for r in 0..grid.size {
        let row: Vec<String> = (0..grid.size).map(|c| grid.get(r, c).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad heat-map value {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("heat-map CSV is not a square matrix".into()));
    }
    Ok(rows)
}

/// SVG rendering of a square matrix. Darker is more occupancy; every cell
/// carries its exact value, and row 0 is drawn at the bottom.
pub fn render_svg(matrix: &[Vec<f64>]) -> String {
    const CELL: usize = 10;
    let n = matrix.len();
    let peak = matrix.iter().flatten().copied().fold(0.0, f64::max);
    let mut svg = String::new();
    let side = n * CELL;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}" data-grid="{n}">"#
    );
    for (r, row) in matrix.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let shade = if peak > 0.0 {
                255 - (255.0 * v / peak).round() as i64
            } else {
                255
            };
            let y = (n - 1 - r) * CELL;
            let x = c * CELL;
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},255)" data-row="{r}" data-col="{c}" data-value="{v}"/>"#
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Recovers the matrix from `render_svg` output.
pub fn matrix_from_svg(svg: &str) -> Result<Vec<Vec<f64>>> {
    let attr = |line: &str, name: &str| -> Option<String> {
        let key = format!("{name}=\"");
        let start = line.find(&key)? + key.len();
        let end = line[start..].find('"')? + start;
        Some(line[start..end].to_string())
    };
    let n: usize = svg
        .lines()
        .next()
        .and_then(|l| attr(l, "data-grid"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config("SVG lacks a data-grid attribute".into()))?;
    let mut m = vec![vec![0.0; n]; n];
    for line in svg.lines().filter(|l| l.starts_with("<rect")) {
        let get = |name| attr(line, name).ok_or_else(|| Error::Config(format!("SVG cell lacks {name}")));
        let r: usize = get("data-row")?.parse().map_err(|_| Error::Config("bad data-row".into()))?;
        let c: usize = get("data-col")?.parse().map_err(|_| Error::Config("bad data-col".into()))?;
        let v: f64 = get("data-value")?
            .parse()
            .map_err(|_| Error::Config("bad data-value".into()))?;
        if r >= n || c >= n {
            return Err(Error::Config("SVG cell outside the grid".into()));
        }
        m[r][c] = v;
    }
    Ok(m)
}

pub fn grid_matrix(grid: &HeatmapGrid) -> Vec<Vec<f64>> {
    grid.cells.chunks(grid.size).map(|r| r.to_vec()).collect()
}

/// Writes `<stem>.csv`, `<stem>.svg` (rendered from the CSV text) and
/// `<stem>.json` metadata into `dir`.
pub fn write_heatmap(dir: &Path, stem: &str, grid: &HeatmapGrid) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_text = grid_to_csv(grid);
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, &csv_text).map_err(|e| Error::io(&csv_path, e))?;
    let svg_path = dir.join(format!("{stem}.svg"));
    fs::write(&svg_path, render_svg(&matrix_from_csv(&csv_text)?)).map_err(|e| Error::io(&svg_path, e))?;
    let meta = HeatmapGrid {
        cells: Vec::new(),
        ..grid.clone()
    };
    let meta_path = dir.join(format!("{stem}.json"));
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{RoverConfig, RoverEnv};
    use crate::train::ScriptedPolicy;
    use rand::SeedableRng;

    #[test]
    fn binning_edges() {
        let g = HeatmapGrid::new(50, [0.0, 0.0], [30.0, 30.0]).unwrap();
        assert_eq!(g.cell_of([0.0, 0.0]), (0, 0));
        assert_eq!(g.cell_of([30.0, 30.0]), (49, 49));
        assert_eq!(g.cell_of([15.0, 0.59]), (0, 25));
    }

    #[test]
    fn stationary_policy_is_a_delta() {
        let mut env = RoverEnv::new(RoverConfig {
            spawn_radius: 0.0,
            ..Default::default()
        })
        .unwrap();
        let mut still = ScriptedPolicy(|_: &dyn TeamEnv, obs: &[Vec<f64>]| vec![vec![0.0, 0.0]; obs.len()]);
        let g = occupancy(&mut env, &mut still, 4, 50, &mut Rng::seed_from_u64(0)).unwrap();
        let nonzero: Vec<f64> = g.cells.iter().copied().filter(|v| *v > 0.0).collect();
        assert_eq!(nonzero, vec![150.0]);
    }

    #[test]
    fn csv_and_svg_round_trip() {
        let mut g = HeatmapGrid::new(3, [0.0, 0.0], [1.0, 1.0]).unwrap();
        g.cells = vec![0.1, 1.0 / 3.0, 0.0, 2.5e-17, 7.0, 0.0, 1e300, 0.2, 0.3];
        let csv_text = grid_to_csv(&g);
        let m = matrix_from_csv(&csv_text).unwrap();
        assert_eq!(m, grid_matrix(&g));
        let svg = render_svg(&m);
        assert_eq!(matrix_from_svg(&svg).unwrap(), m);
        assert_eq!(render_svg(&matrix_from_svg(&svg).unwrap()), svg);
    }
}
