//! Collects a run's artifacts and writes them, with a manifest, only once the
//! run has succeeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::CliResult;

pub fn environment_note() -> String {
    format!(
        "molgrad {}; IEEE-754 binary64; solver runs single-threaded; \
         sweep trials merged in ascending trial order",
        env!("CARGO_PKG_VERSION")
    )
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    environment: String,
    outputs: Vec<String>,
}

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let text = serde_json::to_string_pretty(value).expect("artifact serializes");
        self.add(name, text + "\n");
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every artifact plus `{command}-manifest.json` into `dir`.
    pub fn commit<C: Serialize>(
        self,
        dir: &Path,
        command: &str,
        config: &C,
    ) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let manifest_name = format!("{command}-manifest.json");
        let manifest = Manifest {
            command,
            config,
            environment: environment_note(),
            outputs: self.names(),
        };
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, text) in self.files {
            let path = dir.join(&name);
            fs::write(&path, text)?;
            written.push(path);
        }
        let path = dir.join(manifest_name);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n")?;
        written.push(path);
        Ok(written)
    }
}

/// A gnuplot script drawing column 2 against column 1 of each CSV.
pub fn gnuplot_script(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    logy: bool,
    series: &[(String, &str)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    if logy {
        let _ = writeln!(s, "set logscale y");
        let _ = writeln!(s, "set format y '10^{{%L}}'");
    }
    let plots: Vec<String> = series
        .iter()
        .map(|(file, label)| format!("'{file}' every ::1 using 1:2 with lines title '{label}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
