use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Map, Value};

use zfdfe_core::SystemConfig;

/// `<root>/<command>/<name>/`, created on demand.
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str, name: &str) -> anyhow::Result<Self> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(zfdfe_core::Error::InvalidConfig(format!("invalid run name `{name}`")).into());
        }
        let dir = root.join(command).join(name);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write_json<S: Serialize>(&self, file: &str, value: &S) -> anyhow::Result<()> {
        let path = self.path(file);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Arguments that determine the results; the worker count does not.
fn recorded_args(argv: &[String]) -> Vec<&str> {
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1).map(String::as_str);
    while let Some(a) = it.next() {
        if a == "--threads" {
            it.next();
        } else if !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}

/// Run record. Contains no timestamps or host details so reruns are
/// byte-identical.
pub struct Manifest {
    fields: Map<String, Value>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        fields.insert("args".into(), json!(recorded_args(argv)));
        Self { fields, outputs: Vec::new() }
    }

    pub fn config(mut self, cfg: &SystemConfig) -> Self {
        self.fields.insert("config".into(), json!(cfg));
        self.fields.insert("snr_db".into(), json!(cfg.snr_db()));
        self
    }

    pub fn seeds(mut self, seeds: Value) -> Self {
        self.fields.insert("seeds".into(), seeds);
        self
    }

    pub fn extra(mut self, key: &str, value: Value) -> Self {
        self.fields.insert(key.into(), value);
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn write(mut self, dir: &OutputDir) -> anyhow::Result<()> {
        self.fields.insert("files".into(), json!(self.outputs));
        dir.write_json("manifest.json", &Value::Object(self.fields))
    }
}
