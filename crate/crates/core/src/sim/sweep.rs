//! One-parameter sweeps: independent runs of a base config with one dotted key overridden.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::{parse_value, set_dotted, SimConfig};
use super::harness::run_closed_loop_partial;
use super::output::{compute_metrics, format_metrics, write_csv_file, write_metrics_file};

/// Splits `a,b,[c,d],"e,f"` at top-level commas.
pub fn split_values(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '"' => quoted = !quoted,
            '[' | '{' if !quoted => depth += 1,
            ']' | '}' if !quoted => depth -= 1,
            ',' if !quoted && depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub value: String,
    pub csv: PathBuf,
    pub error: Option<Error>,
}

/// Builds every variant first (so a bad value fails before any run starts), then
/// runs them in parallel. Each run writes `run_<i>.csv` and `run_<i>.metrics`;
/// `summary.txt` lists value and status per run.
pub fn run_sweep(base_text: &str, base_dir: &Path, key: &str, values: &[String], out_dir: &Path) -> Result<Vec<SweepOutcome>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let base: toml::Value = toml::from_str(base_text).map_err(|e| Error::Config(e.to_string()))?;
    let configs = values
        .iter()
        .map(|v| {
            let mut doc = base.clone();
            set_dotted(&mut doc, key, parse_value(v))?;
            let mut cfg = SimConfig::from_toml_value(doc)
                .map_err(|e| Error::Config(format!("{key} = {v}: {e}")))?;
            cfg.resolve_paths(base_dir);
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir)?;

    let outcomes: Vec<SweepOutcome> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let csv = out_dir.join(format!("run_{i:03}.csv"));
            let (log, err) = run_closed_loop_partial(cfg);
            let mut error = write_csv_file(&log, &csv).err().or(err);
            if error.is_none() {
                let metrics = compute_metrics(&log, cfg.settle_time.0, &cfg.band())
                    .and_then(|m| write_metrics_file(&m, &out_dir.join(format!("run_{i:03}.metrics"))));
                error = metrics.err();
            }
            SweepOutcome {
                value: values[i].clone(),
                csv,
                error,
            }
        })
        .collect();

    let mut summary = String::new();
    for (i, o) in outcomes.iter().enumerate() {
        summary.push_str(&format!("run_{i:03}.{key} = {}\n", o.value));
        let status = match &o.error {
            None => "ok".to_string(),
            Some(e) => format!("{:?}", e.to_string()),
        };
        summary.push_str(&format!("run_{i:03}.status = {status}\n"));
    }
    std::fs::write(out_dir.join("summary.txt"), summary)?;
    Ok(outcomes)
}

/// Formats a metric table for a single run; used by the CLI to echo results.
pub fn metrics_text(cfg: &SimConfig, log: &super::harness::SimLog) -> Result<String> {
    Ok(format_metrics(&compute_metrics(log, cfg.settle_time.0, &cfg.band())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting() {
        assert_eq!(split_values("1, 2.5,3"), vec!["1", "2.5", "3"]);
        assert_eq!(split_values("[1,2],[3,4]"), vec!["[1,2]", "[3,4]"]);
        assert_eq!(split_values("\"9/7\",\"a,b\""), vec!["\"9/7\"", "\"a,b\""]);
        assert!(split_values("").is_empty());
    }
}
