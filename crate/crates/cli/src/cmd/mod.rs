pub mod convert;
pub mod denoise;
pub mod evaluate;
pub mod stats;
pub mod taskgen;

use std::io::Write;

use crate::CliError;

/// Counts record-level failures, logging each one to stderr.
#[derive(Default)]
pub(crate) struct RecordErrors {
    count: usize,
}

impl RecordErrors {
    pub fn log(&mut self, err: &mut dyn Write, line: usize, message: &str) {
        self.count += 1;
        let _ = writeln!(err, "line {line}: {message}");
    }

    /// Exit status 2 when any record failed.
    pub fn finish(self, what: &str) -> Result<(), CliError> {
        if self.count == 0 {
            Ok(())
        } else {
            Err(CliError::data(format!("{} {what} failed", self.count)))
        }
    }
}

pub(crate) fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(format!("stdout: {e}")))
}
