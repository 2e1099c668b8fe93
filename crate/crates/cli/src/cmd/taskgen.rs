use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde_json::Value;
use uiforge_core::taskgen::{
    mix_seed, pass_through, samples_for_episode, samples_for_screen, PassThroughRecord, ScreenTasks,
};
use uiforge_core::{Episode, ScreenRecord, TaskKind, TaskSample, TemplateSet};

use super::{print, RecordErrors};
use crate::config::PipelineConfig;
use crate::io::{ensure_distinct, JsonlInput, JsonlOutput, Pool, CHUNK};
use crate::{CliError, TaskgenArgs};

fn generate(
    line: &str,
    seed: u64,
    tasks: ScreenTasks,
    history_window: usize,
    templates: &TemplateSet,
) -> Result<Vec<TaskSample>, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if v.get("elements").is_some() {
        let rec: ScreenRecord =
            serde_json::from_value(v).map_err(|e| format!("malformed screen record: {e}"))?;
        samples_for_screen(&rec, tasks, templates, seed).map_err(|e| e.to_string())
    } else if v.get("steps").is_some() {
        let ep: Episode = serde_json::from_value(v).map_err(|e| format!("malformed episode: {e}"))?;
        samples_for_episode(&ep, history_window, templates, seed).map_err(|e| e.to_string())
    } else if v.get("answer").is_some() {
        let rec: PassThroughRecord =
            serde_json::from_value(v).map_err(|e| format!("malformed captioning/qa record: {e}"))?;
        pass_through(&rec).map(|s| vec![s]).map_err(|e| e.to_string())
    } else {
        Err("record is neither a screen, an episode nor a captioning/qa pair".into())
    }
}

pub fn run(
    args: &TaskgenArgs,
    cfg: &PipelineConfig,
    jobs: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let templates = match args.templates.as_ref().or(cfg.taskgen.templates.as_ref()) {
        Some(path) => TemplateSet::load(path).map_err(CliError::io)?,
        None => TemplateSet::builtin(),
    };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let history_window = args.history_window.unwrap_or(cfg.adapter.history_window);
    let mut tasks = cfg.taskgen.tasks;
    tasks.grounding &= !args.no_grounding;
    tasks.referring &= !args.no_referring;
    tasks.widget_listing &= !args.no_widget_listing;
    ensure_distinct(&[&args.input], &[&args.output])?;

    let mut input = JsonlInput::open(&args.input)?;
    let mut output = JsonlOutput::create(&args.output)?;
    let pool = Pool::new(jobs)?;
    let mut errors = RecordErrors::default();
    let mut counts: BTreeMap<TaskKind, u64> = BTreeMap::new();
    loop {
        let chunk = input.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let results = pool.map(&chunk, |(line_no, line)| {
            generate(line, mix_seed(seed, *line_no as u64), tasks, history_window, &templates)
        });
        for ((line_no, _), result) in chunk.iter().zip(results) {
            match result {
                Ok(samples) => {
                    for s in &samples {
                        *counts.entry(s.kind).or_default() += 1;
                        output.write(s)?;
                    }
                }
                Err(message) => errors.log(err, *line_no, &message),
            }
        }
    }
    output.finish()?;
    let total: u64 = counts.values().sum();
    let mut summary = String::new();
    for (kind, n) in &counts {
        let _ = writeln!(summary, "{kind}: {n}");
    }
    let _ = writeln!(summary, "total: {total}");
    print(out, &summary)?;
    errors.finish("records")
}
