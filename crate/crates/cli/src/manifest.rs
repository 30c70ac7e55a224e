//! Every subcommand echoes its fully resolved configuration into the output
//! directory as a plain-text manifest, so a result directory is
//! self-describing and reruns are comparable.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use fcurve_core::{Error, Result};

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl Display>) -> &mut Self {
        match value {
            Some(v) => self.set(key, v),
            None => self.set(key, "default"),
        }
    }

    /// Writes `manifest.txt` with the command first and remaining keys
    /// sorted, one `key = value` per line.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut rest: Vec<&(String, String)> =
            self.entries.iter().filter(|(k, _)| k != "command").collect();
        rest.sort();
        let mut out = String::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| k == "command") {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (k, v) in rest {
            out.push_str(&format!("{k} = {v}\n"));
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
