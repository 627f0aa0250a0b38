use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use skillsight::config::ExperimentConfig;

use crate::Failure;

/// Parses a TOML or JSON file (by extension; TOML otherwise), reporting the
/// path of the offending field on schema errors.
pub fn parse_file<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| schema_error(path, e.path().to_string(), e.inner().to_string()))
    } else {
        serde_path_to_error::deserialize(toml::Deserializer::new(&text))
            .map_err(|e| schema_error(path, e.path().to_string(), e.inner().message().to_string()))
    };
    parsed
}

fn schema_error(path: &Path, field: String, message: String) -> Failure {
    let at = if field == "." {
        "top level".to_string()
    } else {
        format!("field `{field}`")
    };
    Failure::Schema(format!("{}: {at}: {message}", path.display()))
}

/// Loads and resolves the experiment config; no file means defaults.
pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let raw = match path {
        Some(p) => parse_file::<ExperimentConfig>(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(raw.resolve()?)
}

/// Output directory: the flag, then the config, then `$SKILLSIGHT_OUT/<name>`.
pub fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("SKILLSIGHT_OUT").map(|root| PathBuf::from(root).join(name)))
        .ok_or_else(|| Failure::Schema("no output directory (--out, `out` in the config, or SKILLSIGHT_OUT)".into()))
}

pub fn data_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    flag.or_else(|| cfg.data.clone())
        .ok_or_else(|| Failure::Schema("no data directory (--data or `data` in the config)".into()))
}
