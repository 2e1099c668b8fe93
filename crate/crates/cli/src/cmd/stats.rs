use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Deserialize;
use uiforge_core::report::percent_one_decimal;
use uiforge_core::TaskKind;

use super::{print, RecordErrors};
use crate::io::{JsonlInput, CHUNK};
use crate::{CliError, StatsArgs};

#[derive(Deserialize)]
struct KindOnly {
    kind: TaskKind,
}

/// Per-kind sample counts and shares of the total.
pub fn run(args: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut input = JsonlInput::open(&args.input)?;
    let mut counts: BTreeMap<TaskKind, u64> = BTreeMap::new();
    let mut errors = RecordErrors::default();
    loop {
        let chunk = input.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        for (line_no, line) in &chunk {
            match serde_json::from_str::<KindOnly>(line) {
                Ok(k) => *counts.entry(k.kind).or_default() += 1,
                Err(e) => errors.log(err, *line_no, &format!("malformed sample: {e}")),
            }
        }
    }
    let total: u64 = counts.values().sum();
    let mut table = String::from("| kind | count | percent |\n|---|---|---|\n");
    for (kind, n) in &counts {
        let _ = writeln!(table, "| {kind} | {n} | {} |", percent_one_decimal(*n, total));
    }
    let _ = writeln!(table, "| total | {total} | {} |", if total == 0 { "0.0" } else { "100.0" });
    print(out, &table)?;
    errors.finish("records")
}
