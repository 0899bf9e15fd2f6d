//! Run configuration.
//!
//! One TOML document drives every subcommand. All sections and fields are
//! optional and default to the reference setup (the default model
//! parameters on the `[-60, 120]` grid with `h = 0.02`, and the standard
//! simulation window); unknown keys are rejected by name. Command-line
//! `--override KEY=VALUE` pairs use dot-paths into the same tree (for
//! example `model.beta=2.5` or `grid.h=0.01`) and are applied onto the
//! parsed document before validation, so they obey the same typing and
//! unknown-key rules as the file itself.
//!
//! ```toml
//! [model]    # d1, d2, d3, beta, gamma, s_minus_inf
//! [grid]     # xi_min, xi_max, h
//! [solve]    # theta0, tol, max_iter, stagnation_window, anderson_depth
//! [sim]      # domain_length, dx, t_end, dt, level, ic_amplitude,
//!            # ic_width, include_r, out_every
//! [emit]     # profile, trace, report, snapshots, front  (booleans)
//! output_dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::WaveError;
use crate::model::ModelParams;
use crate::pdesim::SimConfig;
use crate::solver::SolveConfig;
use crate::waveop::WaveGrid;

/// Wave-frame grid bounds and step, as stored in configuration files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub xi_min: f64,
    pub xi_max: f64,
    pub h: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            xi_min: -60.0,
            xi_max: 120.0,
            h: 0.02,
        }
    }
}

impl GridConfig {
    /// Materializes the grid (validating step/span compatibility).
    pub fn build(&self) -> Result<WaveGrid, WaveError> {
        WaveGrid::new(self.xi_min, self.xi_max, self.h)
    }
}

/// Which artifact files the subcommands write.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitConfig {
    /// Wave profile CSV from `solve` / `crosscheck`.
    pub profile: bool,
    /// Convergence trace CSV from `solve`.
    pub trace: bool,
    /// JSON reports (each subcommand's summary).
    pub report: bool,
    /// Field snapshots from `simulate`.
    pub snapshots: bool,
    /// Front-trajectory CSV from `simulate`.
    pub front: bool,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig {
            profile: true,
            trace: true,
            report: true,
            snapshots: true,
            front: true,
        }
    }
}

/// The full configuration tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    pub sim: SimConfig,
    pub output_dir: PathBuf,
    pub emit: EmitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::default(),
            grid: GridConfig::default(),
            solve: SolveConfig::default(),
            sim: SimConfig::default(),
            output_dir: PathBuf::from("out"),
            emit: EmitConfig::default(),
        }
    }
}

/// Parses one override value. Anything that reads as a TOML scalar (number,
/// boolean, quoted string, ...) keeps that type; everything else becomes a
/// plain string, so `--override output_dir=results` works unquoted.
fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    if let Ok(table) = wrapped.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

/// Applies one `KEY=VALUE` override onto the parsed document, creating
/// intermediate tables along the dot-path as needed.
fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), WaveError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(WaveError::Config(format!(
            "override key '{key}' has an empty path segment"
        )));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                WaveError::Config(format!(
                    "override key '{key}': segment '{part}' is not a table"
                ))
            })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
    Ok(())
}

/// Loads the configuration: the file at `path` (or an empty document when
/// `None`), then the overrides in order, then one deserialization pass that
/// applies defaults and rejects unknown or ill-typed keys by name.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunConfig, WaveError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                WaveError::Config(format!("cannot read {}: {e}", p.display()))
            })?;
            text.parse::<toml::Table>().map_err(|e| {
                WaveError::Config(format!("{}: {e}", p.display()))
            })?
        }
        None => toml::Table::new(),
    };
    for (key, value) in overrides {
        apply_override(&mut table, key, value)?;
    }
    // Re-serialize and parse from text so type/unknown-key errors carry the
    // full key path and a line marker.
    let text = toml::to_string(&table)
        .map_err(|e| WaveError::Config(format!("cannot normalize configuration: {e}")))?;
    toml::from_str(&text).map_err(|e| WaveError::Config(e.to_string()))
}

/// Splits a raw `KEY=VALUE` argument.
pub fn split_override(raw: &str) -> Result<(String, String), WaveError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(WaveError::Config(format!(
            "override '{raw}' must have the form KEY=VALUE"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sources_yield_the_reference_configuration() {
        let cfg = load_config(None, &[]).unwrap();
        assert_eq!(cfg.grid.xi_min, -60.0);
        assert_eq!(cfg.grid.xi_max, 120.0);
        assert_eq!(cfg.grid.h, 0.02);
        assert_eq!(cfg.model.beta, 2.0);
        assert_eq!(cfg.sim.domain_length, 400.0);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert!(cfg.emit.profile && cfg.emit.trace && cfg.emit.report);
    }

    #[test]
    fn file_sections_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "output_dir = \"artifacts\"\n\n[model]\nbeta = 3.0\n\n[grid]\nh = 0.04\n\n[sim]\ndt = 1e-3\ninclude_r = true\n",
        )
        .unwrap();
        let cfg = load_config(Some(&path), &[]).unwrap();
        assert_eq!(cfg.model.beta, 3.0);
        assert_eq!(cfg.model.gamma, 1.0, "untouched fields keep defaults");
        assert_eq!(cfg.grid.h, 0.04);
        assert_eq!(cfg.sim.dt, Some(1e-3));
        assert!(cfg.sim.include_r);
        assert_eq!(cfg.output_dir, PathBuf::from("artifacts"));
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[grid]\nxi_mn = 1.0\n").unwrap();
        let err = load_config(Some(&path), &[]).unwrap_err();
        assert_eq!(err.kind(), "config");
        assert!(err.to_string().contains("xi_mn"), "{err}");
    }

    #[test]
    fn overrides_follow_dot_paths_and_types() {
        let overrides = vec![
            ("grid.h".to_string(), "0.05".to_string()),
            ("model.beta".to_string(), "2.5".to_string()),
            ("sim.dt".to_string(), "1e-3".to_string()),
            ("emit.trace".to_string(), "false".to_string()),
            ("solve.max_iter".to_string(), "700".to_string()),
            ("output_dir".to_string(), "elsewhere".to_string()),
        ];
        let cfg = load_config(None, &overrides).unwrap();
        assert_eq!(cfg.grid.h, 0.05);
        assert_eq!(cfg.model.beta, 2.5);
        assert_eq!(cfg.sim.dt, Some(1e-3));
        assert!(!cfg.emit.trace);
        assert_eq!(cfg.solve.max_iter, 700);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn override_wins_over_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[model]\nbeta = 3.0\n").unwrap();
        let overrides = vec![("model.beta".to_string(), "4.0".to_string())];
        let cfg = load_config(Some(&path), &overrides).unwrap();
        assert_eq!(cfg.model.beta, 4.0);
    }

    #[test]
    fn ill_typed_override_errors_name_the_key() {
        let overrides = vec![("grid.h".to_string(), "fast".to_string())];
        let err = load_config(None, &overrides).unwrap_err();
        assert_eq!(err.kind(), "config");
        let msg = err.to_string();
        assert!(msg.contains('h'), "{msg}");
        assert!(msg.contains("invalid type") || msg.contains("expected"), "{msg}");
    }

    #[test]
    fn unknown_override_key_is_rejected() {
        let overrides = vec![("grid.step".to_string(), "0.1".to_string())];
        let err = load_config(None, &overrides).unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn overriding_through_a_scalar_names_the_bad_segment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[grid]\nh = 0.02\n").unwrap();
        let overrides = vec![("grid.h.fine".to_string(), "1".to_string())];
        let err = load_config(Some(&path), &overrides).unwrap_err();
        assert!(err.to_string().contains("not a table"), "{err}");
    }

    #[test]
    fn malformed_override_argument_is_rejected() {
        let err = split_override("gridh0.05").unwrap_err();
        assert!(err.to_string().contains("KEY=VALUE"), "{err}");
        let (k, v) = split_override("a.b=c=d").unwrap();
        assert_eq!((k.as_str(), v.as_str()), ("a.b", "c=d"));
    }
}
