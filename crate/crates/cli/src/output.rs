//! Output plumbing: resolved output directory, CSV/JSON/gnuplot writers,
//! and the run summary schema. All writes happen once, after reduction;
//! summaries carry no timestamps so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DSLAB_OUT";

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
    }
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Run summary: inputs echoed, crate version, seed, named verdicts.
#[derive(Serialize)]
pub struct Summary {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub verdicts: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Summary {
    pub fn new(subcommand: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Summary {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            verdicts: BTreeMap::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
        self.pass &= ok;
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn write(&self, dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_text(dir, name, &text)
    }
}

/// Plain two-column file for gnuplot.
pub fn gnuplot_columns(pairs: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (a, b) in pairs {
        out.push_str(&format!("{a:.16e} {b:.16e}\n"));
    }
    out
}
