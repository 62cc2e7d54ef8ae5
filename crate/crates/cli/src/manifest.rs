use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

/// Provenance record written next to the outputs of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub config: Value,
    pub outputs: Vec<String>,
    pub version: String,
    pub duration_seconds: f64,
    pub exit_code: u8,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            inputs: Vec::new(),
            config: Value::Null,
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: 0.0,
            exit_code: 0,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(&mut self, elapsed: Duration, exit_code: u8) {
        self.duration_seconds = elapsed.as_secs_f64();
        self.exit_code = exit_code;
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
