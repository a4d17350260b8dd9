//! Files written by a run: per-episode CSV, evaluation CSV, JSON manifest
//! and an SVG plot of smoothed min welfare.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::run::{csv_header, RunOutput};
use crate::harness::stats::smooth;

pub const SMOOTHING_WINDOW: usize = 1000;

/// Per-episode CSV over every run, header first.
pub fn episodes_csv(runs: &[RunOutput]) -> Result<String> {
    let first = runs.first().ok_or_else(|| Error::Usage("no runs to write".into()))?;
    let mut out = csv_header(first.agents);
    out.push('\n');
    for r in runs {
        out.push_str(&r.csv_rows);
    }
    Ok(out)
}

/// Periodic and final greedy evaluations; the final row has episode `final`.
pub fn eval_csv(runs: &[RunOutput]) -> Result<String> {
    let first = runs.first().ok_or_else(|| Error::Usage("no runs to write".into()))?;
    let mut out = String::from("episode,seed,selector,min_welfare_mean,min_welfare_std");
    for i in 1..=first.agents {
        write!(out, ",ret_{i}_mean").unwrap();
    }
    out.push('\n');
    for r in runs {
        let points = r.evals.iter().map(|p| (p.episode.to_string(), &p.summary));
        for (label, s) in points.chain(std::iter::once(("final".to_string(), &r.final_eval))) {
            write!(out, "{label},{},{},{},{}", r.seed, r.selector, s.min_welfare_mean, s.min_welfare_std).unwrap();
            for m in &s.return_mean {
                write!(out, ",{m}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunEntry<'a> {
    seed: u64,
    selector: &'a str,
    final_min_welfare_mean: f64,
    final_min_welfare_std: f64,
    wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    config_hash: String,
    config: String,
    seeds: Vec<u64>,
    runs: Vec<RunEntry<'a>>,
    wall_clock_seconds: f64,
}

pub fn manifest_json(cfg: &RunConfig, runs: &[RunOutput]) -> String {
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        config: cfg.to_text(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        runs: runs
            .iter()
            .map(|r| RunEntry {
                seed: r.seed,
                selector: &r.selector,
                final_min_welfare_mean: r.final_eval.min_welfare_mean,
                final_min_welfare_std: r.final_eval.min_welfare_std,
                wall_clock_seconds: r.seconds,
            })
            .collect(),
        wall_clock_seconds: runs.iter().map(|r| r.seconds).sum(),
    };
    serde_json::to_string_pretty(&manifest).expect("manifest serialises")
}

/// Seed-averaged, smoothed min-welfare curve per selector.
pub fn selector_curves(runs: &[RunOutput], window: usize) -> BTreeMap<String, Vec<f64>> {
    let mut grouped: BTreeMap<String, Vec<&RunOutput>> = BTreeMap::new();
    for r in runs {
        grouped.entry(r.selector.clone()).or_default().push(r);
    }
    grouped
        .into_iter()
        .map(|(name, rs)| {
            let len = rs.iter().map(|r| r.min_welfare.len()).min().unwrap_or(0);
            let mean: Vec<f64> = (0..len)
                .map(|i| rs.iter().map(|r| r.min_welfare[i]).sum::<f64>() / rs.len() as f64)
                .collect();
            (name, smooth(&mean, window))
        })
        .collect()
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of the curves over episodes `[0, episodes]`.
pub fn plot_svg(curves: &BTreeMap<String, Vec<f64>>, episodes: u64) -> String {
    let (w, h, pad) = (720.0, 420.0, 50.0);
    let values = curves.values().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let x_max = episodes.max(1) as f64;
    let sx = |x: f64| pad + x / x_max * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - lo) / (hi - lo) * (h - 2.0 * pad);
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<g stroke="black" fill="none"><line x1="{pad}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}"/></g>"#,
        b = h - pad,
        r = w - pad
    )
    .unwrap();
    writeln!(
        out,
        r#"<g font-family="sans-serif" font-size="12"><text x="{pad}" y="{ty}">0</text><text x="{r}" y="{ty}" text-anchor="end">{episodes}</text><text x="{lx}" y="{b}" text-anchor="end">{lo:.2}</text><text x="{lx}" y="{t}" text-anchor="end">{hi:.2}</text><text x="{cx}" y="{ty2}" text-anchor="middle">episode</text></g>"#,
        ty = h - pad + 16.0,
        ty2 = h - 8.0,
        r = w - pad,
        lx = pad - 4.0,
        b = h - pad,
        t = pad + 4.0,
        cx = w / 2.0,
    )
    .unwrap();
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = (curve.len() / 2000).max(1);
        let mut points = String::new();
        for (e, v) in curve.iter().enumerate().step_by(stride) {
            write!(points, "{:.2},{:.2} ", sx((e + 1) as f64), sy(*v)).unwrap();
        }
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.trim_end()).unwrap();
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            x = w - pad - 120.0,
            y = pad + 16.0 * (i as f64 + 1.0)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `episodes.csv`, `eval.csv`, `manifest.json`, `min_welfare.svg`
/// and one checkpoint per run into `dir`.
pub fn emit_outputs(dir: &Path, cfg: &RunConfig, runs: &[RunOutput]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("episodes.csv"), episodes_csv(runs)?)?;
    fs::write(dir.join("eval.csv"), eval_csv(runs)?)?;
    fs::write(dir.join("manifest.json"), manifest_json(cfg, runs))?;
    let episodes = runs.iter().map(|r| r.episodes).max().unwrap_or(0);
    fs::write(dir.join("min_welfare.svg"), plot_svg(&selector_curves(runs, SMOOTHING_WINDOW), episodes))?;
    for r in runs {
        fs::write(dir.join(format!("checkpoint-{}-seed{}.txt", r.selector, r.seed)), &r.checkpoint)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::run_seed;

    fn one_episode() -> (RunConfig, RunOutput) {
        let cfg = RunConfig::parse("episodes = 1\neval_every = 0\neval_episodes = 1").unwrap();
        let out = run_seed(&cfg, 0).unwrap();
        (cfg, out)
    }

    #[test]
    fn single_episode_csv_has_two_lines() {
        let (_, out) = one_episode();
        assert_eq!(episodes_csv(&[out]).unwrap().lines().count(), 2);
        assert!(episodes_csv(&[]).is_err());
    }

    #[test]
    fn manifest_hash_is_stable() {
        let (cfg, out) = one_episode();
        let a: serde_json::Value = serde_json::from_str(&manifest_json(&cfg, std::slice::from_ref(&out))).unwrap();
        let b: serde_json::Value = serde_json::from_str(&manifest_json(&cfg, &[out])).unwrap();
        assert_eq!(a["config_hash"], b["config_hash"]);
        assert_eq!(a["config_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn plot_spans_the_episode_range() {
        let mut curves = BTreeMap::new();
        curves.insert("jamql".to_string(), vec![1.0, 2.0, 3.0, 4.0]);
        let svg = plot_svg(&curves, 4);
        assert!(svg.contains(">0</text>") && svg.contains(">4</text>"));
        // Last point sits on the right edge.
        assert!(svg.contains("670.00,50.00"));
    }

    #[test]
    fn writes_every_file() {
        let (cfg, out) = one_episode();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(dir.path(), &cfg, &[out]).unwrap();
        for f in ["episodes.csv", "eval.csv", "manifest.json", "min_welfare.svg", "checkpoint-jamql-seed0.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let (cfg, out) = one_episode();
        let file = tempfile::NamedTempFile::new().unwrap();
        let err = emit_outputs(&file.path().join("sub"), &cfg, &[out]).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
