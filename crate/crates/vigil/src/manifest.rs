//! Dataset manifest: every emitted file with its counts and seeds.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fsutil;

/// One emitted file plus its bookkeeping.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    /// Path relative to the dataset root.
    pub path: String,
    pub rows: usize,
    pub seed: u64,
    /// Extra per-file keys (anomaly counts, split sizes, window counts).
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub master_seed: u64,
    pub header: Vec<(String, String)>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(master_seed: u64) -> Self {
        Manifest {
            master_seed,
            header: Vec::new(),
            entries: Vec::new(),
        }
    }

    pub fn header_line(&mut self, key: &str, value: impl ToString) {
        self.header.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# vigil dataset manifest\n");
        let _ = writeln!(out, "version = 1");
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        for e in &self.entries {
            let _ = writeln!(out, "\n[file]");
            let _ = writeln!(out, "path = {}", e.path);
            let _ = writeln!(out, "rows = {}", e.rows);
            let _ = writeln!(out, "seed = {}", e.seed);
            for (k, v) in &e.extra {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.render().as_bytes())
    }

    /// Counts `[file]` sections of a rendered manifest (test support).
    pub fn count_files(text: &str) -> usize {
        text.lines().filter(|l| l.trim() == "[file]").count()
    }
}
