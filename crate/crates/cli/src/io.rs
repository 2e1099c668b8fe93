//! Line-at-a-time JSONL input, ordered output, and the worker pool.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

/// Records handed to the worker pool at once. Fixed so that chunking never
/// depends on the number of workers.
pub const CHUNK: usize = 4096;

pub struct JsonlInput {
    path: PathBuf,
    reader: BufReader<File>,
    line_no: usize,
}

impl JsonlInput {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(JsonlInput {
            path: path.to_path_buf(),
            reader: BufReader::new(file),
            line_no: 0,
        })
    }

    /// Up to `max` non-blank lines with their 1-based line numbers.
    pub fn next_chunk(&mut self, max: usize) -> Result<Vec<(usize, String)>, CliError> {
        let mut out = Vec::new();
        while out.len() < max {
            let mut line = String::new();
            let n = self
                .reader
                .read_line(&mut line)
                .map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))?;
            if n == 0 {
                break;
            }
            self.line_no += 1;
            if !line.trim().is_empty() {
                out.push((self.line_no, line));
            }
        }
        Ok(out)
    }

    /// Reads every record; for inputs that must be joined in memory.
    pub fn read_all(mut self) -> Result<Vec<(usize, String)>, CliError> {
        let mut all = Vec::new();
        loop {
            let chunk = self.next_chunk(CHUNK)?;
            if chunk.is_empty() {
                return Ok(all);
            }
            all.extend(chunk);
        }
    }
}

pub struct JsonlOutput {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl JsonlOutput {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        }
        let file = File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(JsonlOutput {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(record).map_err(|e| CliError::io(e.to_string()))?;
        self.write_line(&line)
    }

    pub fn write_line(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.writer, "{line}").map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub struct Pool(rayon::ThreadPool);

impl Pool {
    pub fn new(jobs: usize) -> Result<Self, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map(Pool)
            .map_err(|e| CliError::io(format!("cannot start workers: {e}")))
    }

    /// Maps in parallel, keeping input order.
    pub fn map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
        self.0.install(|| items.par_iter().map(f).collect())
    }
}

/// Refuses to overwrite an input with an output.
pub fn ensure_distinct(inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
    let key = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    for o in outputs {
        for i in inputs {
            if key(i) == key(o) {
                return Err(CliError::io(format!(
                    "output {} would overwrite input {}",
                    o.display(),
                    i.display()
                )));
            }
        }
    }
    Ok(())
}
