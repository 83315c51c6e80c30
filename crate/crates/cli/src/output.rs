//! Deterministic output helpers: header blocks and full-precision numbers.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

/// 17 significant digits round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Meta {
    pub version: &'static str,
    pub scenario_hash: String,
    pub seed: Option<u64>,
    pub eps: Option<String>,
    pub profile_id: String,
}

impl Meta {
    pub fn header_lines(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# wavetrace {}", self.version).unwrap();
        writeln!(s, "# scenario={}", self.scenario_hash).unwrap();
        writeln!(
            s,
            "# seed={}",
            self.seed
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into())
        )
        .unwrap();
        writeln!(
            s,
            "# eps={}",
            self.eps.clone().unwrap_or_else(|| "-".into())
        )
        .unwrap();
        writeln!(s, "# profile={}", self.profile_id).unwrap();
        s
    }

    pub fn json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": format!("wavetrace {}", self.version),
            "scenario": self.scenario_hash,
            "seed": self.seed,
            "eps": self.eps,
            "profile": self.profile_id,
        })
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(content.as_bytes())
        .map_err(|e| CliError::Validation(format!("write error on {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    write_text(
        path,
        &format!("{}\n", serde_json::to_string_pretty(value).unwrap()),
    )
}
