//! Collected outputs of one command run and their atomic emission.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use warpcone::io::write_atomic;
use warpcone::VERSION;

use crate::config::RunConfig;

pub const SUMMARY_FILE: &str = "summary.json";

/// One numerical acceptance check of a command.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// The invariant being tested.
    pub name: String,
    pub pass: bool,
    /// Measured value and, on failure, the worst offending datum.
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    version: &'a str,
    status: &'a str,
    config: &'a Value,
    checks: &'a [Check],
    files: Vec<&'a str>,
    results: &'a Value,
}

/// Files, checks and results produced by a command, written out together at the end.
#[derive(Debug)]
pub struct Run {
    command: &'static str,
    echo: Value,
    files: BTreeMap<String, Vec<u8>>,
    checks: Vec<Check>,
    results: Value,
}

impl Run {
    /// The echo omits the output directory so that runs into different directories stay byte-identical.
    pub fn new(command: &'static str, config: &RunConfig) -> Result<Self> {
        let mut echo = serde_json::to_value(config)?;
        if let Value::Object(map) = &mut echo {
            map.remove("out");
            map.insert("seed".into(), config.seed().into());
        }
        Ok(Self {
            command,
            echo,
            files: BTreeMap::new(),
            checks: Vec::new(),
            results: Value::Null,
        })
    }

    /// `# warpcone <version> <command> <config>` line placed at the top of every CSV.
    fn header_line(&self) -> String {
        format!("# warpcone {VERSION} {} {}\n", self.command, self.echo)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut out = self.header_line().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row).with_context(|| format!("writing {name}"))?;
            }
            w.flush()?;
        }
        self.files.insert(name.to_string(), out);
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: String) {
        self.files.insert(name.to_string(), body.into_bytes());
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn results<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.results = serde_json::to_value(value)?;
        Ok(())
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> Result<String> {
        let summary = Summary {
            command: self.command,
            version: VERSION,
            status: if self.passed() { "PASS" } else { "FAIL" },
            config: &self.echo,
            checks: &self.checks,
            files: self.files.keys().map(String::as_str).collect(),
            results: &self.results,
        };
        let mut s = serde_json::to_string_pretty(&summary)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes every file and `summary.json` into `dir`, each through a temporary file.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        write_atomic(&dir.join(SUMMARY_FILE), self.summary()?.as_bytes()).context("writing summary")?;
        Ok(())
    }
}
