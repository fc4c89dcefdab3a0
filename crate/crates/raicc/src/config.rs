//! Key=value configuration file, pointed to by the `RAICC_CONFIG`
//! environment variable. Values here override the defaults; command-line
//! flags override both.
//!
//! Recognized keys: `prop.widen_cap`, `prop.max_iterations`, `prop.call_depth`.

use thiserror::Error;

use crate::coalprop::PropConfig;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("config error at line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// Apply a key=value config file on top of `base`.
pub fn apply_config_file(base: &mut PropConfig, text: &str) -> Result<(), ConfigError> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError {
            line,
            message: "expected key=value".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse = |what: &str| -> Result<u64, ConfigError> {
            value.parse().map_err(|_| ConfigError {
                line,
                message: format!("bad {} value '{}'", what, value),
            })
        };
        match key {
            "prop.widen_cap" => base.widen_cap = parse("prop.widen_cap")? as usize,
            "prop.max_iterations" => base.max_iterations = parse("prop.max_iterations")?,
            "prop.call_depth" => base.call_depth = parse("prop.call_depth")? as usize,
            other => {
                return Err(ConfigError {
                    line,
                    message: format!("unknown key '{}'", other),
                })
            }
        }
    }
    Ok(())
}

/// Load overrides from the file named by `RAICC_CONFIG`, when set.
pub fn from_env(base: &mut PropConfig) -> Result<(), String> {
    let Ok(path) = std::env::var("RAICC_CONFIG") else {
        return Ok(());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read RAICC_CONFIG file {}: {}", path, e))?;
    apply_config_file(base, &text).map_err(|e| e.to_string())
}
