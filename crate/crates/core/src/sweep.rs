//! Grid sweeps: one training run per grid point per seed, then a summary
//! table of final evaluation means.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::train::Trainer;

/// One swept key and its candidate values (raw `key=value` right-hand sides).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl GridAxis {
    /// Parses `key=v1,v2,...`; commas inside brackets or braces do not split.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, rest) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid `{spec}` is not of the form key=v1,v2,...")))?;
        let mut values = Vec::new();
        let (mut depth, mut cur) = (0i32, String::new());
        for ch in rest.chars() {
            match ch {
                '[' | '{' => depth += 1,
                ']' | '}' => depth -= 1,
                _ => {}
            }
            if ch == ',' && depth == 0 {
                values.push(std::mem::take(&mut cur).trim().to_string());
            } else {
                cur.push(ch);
            }
        }
        values.push(cur.trim().to_string());
        if key.trim().is_empty() || values.iter().any(|v| v.is_empty()) {
            return Err(Error::Config(format!("grid `{spec}` has an empty key or value")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Cartesian product of the axes as override lists.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<String>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(format!("{}={v}", axis.key));
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: String,
    pub seed: u64,
    pub status: String,
    pub final_eval_mean: Option<f64>,
    pub final_eval_std: Option<f64>,
    pub best: bool,
    pub run_dir: String,
    pub error: String,
}

fn point_dir_name(point: &[String]) -> String {
    if point.is_empty() {
        return "base".into();
    }
    point
        .join("_")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "=.-_".contains(c) {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Runs every grid point for every seed in `base.seeds` under `out_dir`.
/// A failing run is recorded and the sweep moves on.
pub fn run_sweep(
    base: &RunConfig,
    axes: &[GridAxis],
    out_dir: &Path,
    mut progress: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let points = grid_points(axes);
    if points.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    // Resolve every point before running anything so typos fail fast.
    let configs = points.iter().map(|p| base.with_overrides(p)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::new();
    for (point, cfg) in points.iter().zip(&configs) {
        for &seed in &base.seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            let dir: PathBuf = out_dir.join(point_dir_name(point)).join(format!("seed_{seed}"));
            let mut last = None;
            let result =
                Trainer::create(run_cfg, &dir).and_then(|mut t| t.train(|row| last = Some((row.eval_mean, row.eval_std))));
            let row = SweepRow {
                point: point.join(" "),
                seed,
                status: if result.is_ok() { "ok".into() } else { "failed".into() },
                final_eval_mean: last.map(|l| l.0),
                final_eval_std: last.map(|l| l.1),
                best: false,
                run_dir: dir.display().to_string(),
                error: result.err().map(|e| e.to_string()).unwrap_or_default(),
            };
            progress(&row);
            rows.push(row);
        }
    }
    mark_best(&mut rows);
    write_summary(&out_dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

/// Flags the first successful row with the highest final evaluation mean.
pub fn mark_best(rows: &mut [SweepRow]) {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let (Some(m), "ok") = (r.final_eval_mean, r.status.as_str()) {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    for r in rows.iter_mut() {
        r.best = false;
    }
    if let Some((i, _)) = best {
        rows[i].best = true;
    }
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_respects_brackets() {
        let a = GridAxis::parse("alpha=0.1,0.3, 0.5").unwrap();
        assert_eq!(a.values, vec!["0.1", "0.3", "0.5"]);
        let k = GridAxis::parse("k_set=[3,5],[3,5,7]").unwrap();
        assert_eq!(k.values, vec!["[3,5]", "[3,5,7]"]);
        assert!(GridAxis::parse("alpha").is_err());
        assert!(GridAxis::parse("alpha=0.1,").is_err());
    }

    #[test]
    fn product_count() {
        let a = GridAxis::parse("alpha=0.1,0.3,0.5,0.7,1.0").unwrap();
        let b = GridAxis::parse("mode=ccl,mixture").unwrap();
        assert_eq!(grid_points(&[a.clone()]).len(), 5);
        assert_eq!(grid_points(&[a, b]).len(), 10);
        assert_eq!(grid_points(&[]), vec![Vec::<String>::new()]);
    }

    #[test]
    fn best_row_is_argmax_of_successes() {
        let row = |m: Option<f64>, status: &str| SweepRow {
            point: String::new(),
            seed: 0,
            status: status.into(),
            final_eval_mean: m,
            final_eval_std: None,
            best: false,
            run_dir: String::new(),
            error: String::new(),
        };
        let mut rows = vec![
            row(Some(0.2), "ok"),
            row(Some(0.9), "ok"),
            row(None, "failed"),
            row(Some(0.9), "ok"),
        ];
        mark_best(&mut rows);
        assert_eq!(
            rows.iter().map(|r| r.best).collect::<Vec<_>>(),
            vec![false, true, false, false]
        );
    }
}
