//! Flat key=value configuration files.
//!
//! Recognized keys: `n`, `t`, `c_pi`, `c_fv`, `reps`, `boot_reps`, `seed`,
//! `levels`, `freeze_units`. Grid keys (`c_pi`, `c_fv`, `levels`) accept
//! comma-separated lists. Unknown keys are rejected with their line number;
//! overrides are applied after the file in the order given.

use std::fmt;
use std::path::Path;

use factor_mc::dgp::SimConfig;
use factor_mc::experiments::{
    ExperimentConfig, DESK_N_BOOT, DESK_N_PERIODS, DESK_N_REPS, DESK_N_UNITS,
};

/// Default master seed when none is configured.
pub const DEFAULT_SEED: u64 = 42;

/// A configuration error with the location that caused it.
#[derive(Debug)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config {}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses a config file plus `key=value` overrides into a validated
/// experiment configuration. Defaults are desk scale.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String, String)> = Vec::new();

    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("file {}", path.display()), e.to_string()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let location = format!("line {}", idx + 1);
            let (key, value) = split_pair(line, &location)?;
            entries.push((key, value, location));
        }
    }
    for (idx, raw) in overrides.iter().enumerate() {
        let location = format!("override #{}", idx + 1);
        let (key, value) = split_pair(raw.trim(), &location)?;
        entries.push((key, value, location));
    }

    let mut base = SimConfig::new(DESK_N_UNITS, DESK_N_PERIODS);
    base.master_seed = DEFAULT_SEED;
    let mut config = ExperimentConfig {
        base,
        factor_strength_grid: vec![0.5, 1.0, 2.0],
        common_dependence_grid: vec![0.0],
        n_reps: DESK_N_REPS,
        n_boot: DESK_N_BOOT,
        levels: vec![0.01, 0.05, 0.10],
        freeze_units: false,
    };

    for (key, value, location) in &entries {
        apply(&mut config, key, value, location)?;
    }

    // Levels are normalized to ascending order before validation.
    config.levels.sort_unstable_by(f64::total_cmp);
    config.levels.dedup();

    config
        .validate()
        .map_err(|e| err("validation", e.to_string()))?;
    Ok(config)
}

fn split_pair(line: &str, location: &str) -> Result<(String, String), ConfigError> {
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| err(location, format!("expected key=value, got {line:?}")))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

fn apply(
    config: &mut ExperimentConfig,
    key: &str,
    value: &str,
    location: &str,
) -> Result<(), ConfigError> {
    match key {
        "n" => config.base.n_units = parse_scalar(key, value, location)?,
        "t" => config.base.n_periods = parse_scalar(key, value, location)?,
        "reps" => config.n_reps = parse_scalar(key, value, location)?,
        "boot_reps" => config.n_boot = parse_scalar(key, value, location)?,
        "seed" => config.base.master_seed = parse_scalar(key, value, location)?,
        "freeze_units" => {
            config.freeze_units = value.parse::<bool>().map_err(|_| {
                err(
                    location,
                    format!("freeze_units must be true or false, got {value:?}"),
                )
            })?;
        }
        "c_pi" => {
            let grid = parse_list(key, value, location)?;
            if grid.iter().any(|v| *v < 0.0) {
                return Err(err(location, format!("c_pi must be >= 0, got {value:?}")));
            }
            config.factor_strength_grid = grid;
        }
        "c_fv" => {
            let grid = parse_list(key, value, location)?;
            if let Some(bad) = grid.iter().find(|v| v.abs() > 1.0) {
                return Err(err(
                    location,
                    format!("c_fv must lie in [-1, 1], got {bad}"),
                ));
            }
            config.common_dependence_grid = grid;
        }
        "levels" => {
            let grid = parse_list(key, value, location)?;
            if let Some(bad) = grid.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return Err(err(
                    location,
                    format!("levels must lie in (0, 1), got {bad}"),
                ));
            }
            config.levels = grid;
        }
        _ => return Err(err(location, format!("unknown key {key:?}"))),
    }
    Ok(())
}

fn parse_scalar<T: std::str::FromStr>(
    key: &str,
    value: &str,
    location: &str,
) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| err(location, format!("cannot parse {key}={value:?}")))
}

fn parse_list(key: &str, value: &str, location: &str) -> Result<Vec<f64>, ConfigError> {
    let grid: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let grid =
        grid.map_err(|_| err(location, format!("cannot parse {key}={value:?} as a list")))?;
    if grid.is_empty() {
        return Err(err(location, format!("{key} must not be empty")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse_text(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        parse_config(Some(file.path()), &[])
    }

    #[test]
    fn defaults_fill_unlisted_keys() {
        let cfg = parse_text("n=200\nt=200\nseed=42\n").unwrap();
        assert_eq!(cfg.base.n_units, 200);
        assert_eq!(cfg.n_reps, DESK_N_REPS);
        assert_eq!(cfg.n_boot, DESK_N_BOOT);
        assert_eq!(cfg.levels, vec![0.01, 0.05, 0.10]);
        assert_eq!(cfg.factor_strength_grid, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn levels_are_resorted_ascending() {
        let cfg = parse_text("levels=0.10,0.05,0.01\n").unwrap();
        assert_eq!(cfg.levels, vec![0.01, 0.05, 0.10]);
    }

    #[test]
    fn c_fv_bound_is_enforced_with_location() {
        let e = parse_text("c_fv=1.5\n").unwrap_err();
        assert!(e.to_string().contains("c_fv"), "{e}");
        assert!(e.to_string().contains("[-1, 1]"), "{e}");
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let e = parse_text("n=100\nbogus=3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn overrides_apply_after_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(b"n=100\nreps=50\n").unwrap();
        let cfg = parse_config(Some(file.path()), &["n=64".to_string()]).unwrap();
        assert_eq!(cfg.base.n_units, 64);
        assert_eq!(cfg.n_reps, 50);
        let e = parse_config(Some(file.path()), &["nope=1".to_string()]).unwrap_err();
        assert!(e.to_string().contains("override #1"), "{e}");
    }

    #[test]
    fn boot_reps_too_small_cites_the_precondition() {
        let e = parse_text("boot_reps=5\nlevels=0.05\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("order statistic"), "{msg}");
    }

    #[test]
    fn report_config_text_parses_back_identically() {
        let cfg =
            parse_text("n=32\nt=24\nc_pi=0.5,2\nreps=10\nboot_reps=39\nseed=9\nlevels=0.05,0.1\n")
                .unwrap();
        let text = factor_mc::experiments::report::config_file_text(&cfg);
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        let reparsed = parse_config(Some(file.path()), &[]).unwrap();
        assert_eq!(
            factor_mc::experiments::report::config_file_text(&reparsed),
            text
        );
    }
}
