use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use uiforge_core::adapters::{convert_episode, Manifest, Registry, SourceEpisode};
use uiforge_core::{Episode, Source};

use super::{print, RecordErrors};
use crate::config::PipelineConfig;
use crate::io::{ensure_distinct, JsonlInput, JsonlOutput, Pool, CHUNK};
use crate::{CliError, ConvertArgs};

/// A source episode whose `source` may come from the command line instead.
#[derive(Deserialize)]
struct Line {
    #[serde(default)]
    source: Option<Source>,
    episode_id: String,
    #[serde(default)]
    goal: String,
    raw_steps: Vec<Map<String, Value>>,
}

enum Converted {
    Ok(Episode),
    Failed { message: String, detail: Value },
}

fn convert_line(
    line: &str,
    default_source: Option<Source>,
    registry: &Registry,
    cfg: &uiforge_core::AdapterConfig,
) -> Converted {
    let parsed: Line = match serde_json::from_str(line) {
        Ok(l) => l,
        Err(e) => {
            return Converted::Failed {
                message: format!("malformed record: {e}"),
                detail: json!({ "error": e.to_string() }),
            }
        }
    };
    let source = match (parsed.source, default_source) {
        (Some(s), Some(d)) if s != d => {
            return Converted::Failed {
                message: format!("record source {s} differs from --source {d}"),
                detail: json!({ "episode_id": parsed.episode_id, "error": "source mismatch" }),
            }
        }
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => {
            return Converted::Failed {
                message: format!("episode `{}` names no source; pass --source", parsed.episode_id),
                detail: json!({ "episode_id": parsed.episode_id, "error": "no source" }),
            }
        }
    };
    let episode = SourceEpisode {
        source,
        episode_id: parsed.episode_id,
        goal: parsed.goal,
        raw_steps: parsed.raw_steps,
    };
    match convert_episode(&episode, registry, cfg) {
        Ok(ep) => Converted::Ok(ep),
        Err(e) => Converted::Failed {
            message: e.to_string(),
            detail: json!({
                "source": e.dataset,
                "episode_id": e.episode_id,
                "step_index": e.step_index,
                "error": e.kind.to_string(),
                "raw": e.raw,
            }),
        },
    }
}

pub fn run(
    args: &ConvertArgs,
    cfg: &PipelineConfig,
    jobs: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let mut adapter = cfg.adapter.clone();
    if let Some(t) = args.tap_threshold {
        adapter.tap_vs_swipe_threshold = t;
    }
    if args.no_invert_scroll {
        adapter.invert_scroll = false;
    }
    adapter.validate().map_err(|e| CliError::io(e.to_string()))?;
    let mut registry = Registry::builtin();
    for path in &args.manifest {
        registry.register(Manifest::load(path).map_err(|e| CliError::io(e.to_string()))?);
    }
    let mut outputs = vec![args.output.as_path()];
    outputs.extend(args.errors.as_deref());
    ensure_distinct(&[&args.input], &outputs)?;

    let mut input = JsonlInput::open(&args.input)?;
    let mut output = JsonlOutput::create(&args.output)?;
    let mut error_log = args.errors.as_deref().map(JsonlOutput::create).transpose()?;
    let pool = Pool::new(jobs)?;
    let mut errors = RecordErrors::default();
    let (mut episodes, mut steps) = (0u64, 0u64);
    let mut per_type: BTreeMap<&'static str, u64> = BTreeMap::new();
    loop {
        let chunk = input.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let results = pool.map(&chunk, |(_, line)| convert_line(line, args.source, &registry, &adapter));
        for ((line_no, _), result) in chunk.iter().zip(results) {
            match result {
                Converted::Ok(ep) => {
                    episodes += 1;
                    steps += ep.steps.len() as u64;
                    for s in &ep.steps {
                        *per_type.entry(s.gold_action.action_type()).or_default() += 1;
                    }
                    output.write(&ep)?;
                }
                Converted::Failed { message, mut detail } => {
                    errors.log(err, *line_no, &message);
                    if let Some(log) = error_log.as_mut() {
                        detail["line"] = json!(line_no);
                        log.write(&detail)?;
                    }
                }
            }
        }
    }
    output.finish()?;
    if let Some(log) = error_log {
        log.finish()?;
    }
    let mut summary = format!("episodes: {episodes}\nsteps: {steps}\n");
    for (action, n) in &per_type {
        let _ = writeln!(summary, "  {action}: {n}");
    }
    print(out, &summary)?;
    errors.finish("records")
}
