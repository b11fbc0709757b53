use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ct_core::Result;
use serde::Serialize;

/// Record of one run: enough to repeat it. Everything except
/// `duration_seconds` and `threads` is a function of the flags.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub flags: serde_json::Value,
    /// Values filled in from data-dependent defaults.
    pub resolved: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

pub struct Run {
    command: String,
    started: Instant,
    out_dir: PathBuf,
    inputs: BTreeMap<String, PathBuf>,
    outputs: Vec<String>,
    resolved: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    pub fn start(command: &str, out_dir: &Path, threads: Option<usize>) -> Result<Run> {
        if let Some(t) = threads {
            // Only fails if a pool already exists, which cannot happen in `main`.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
        }
        std::fs::create_dir_all(out_dir)?;
        Ok(Run {
            command: command.to_string(),
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            resolved: serde_json::Map::new(),
        })
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.to_path_buf());
    }

    pub fn resolve(&mut self, name: &str, value: impl Serialize) {
        self.resolved
            .insert(name.to_string(), serde_json::to_value(value).expect("serializable value"));
    }

    /// Creates `name` in the output directory and records it.
    pub fn create(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        self.outputs.push(name.to_string());
        let file = std::fs::File::create(self.out_dir.join(name))?;
        Ok(std::io::BufWriter::new(file))
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        std::io::Write::write_all(&mut out, b"\n")?;
        std::io::Write::flush(&mut out)?;
        Ok(())
    }

    pub fn finish(self, flags: &impl Serialize, seed: Option<u64>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            inputs: self.inputs,
            flags: serde_json::to_value(flags)?,
            resolved: serde_json::Value::Object(self.resolved),
            seed,
            threads: rayon::current_num_threads(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let file = std::fs::File::create(self.out_dir.join("manifest.json"))?;
        let mut out = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        std::io::Write::write_all(&mut out, b"\n")?;
        std::io::Write::flush(&mut out)?;
        Ok(())
    }
}
