use std::fmt::Write as _;
use std::io::Write;

use uiforge_core::eval::{
    emit_report, grounding_report, ClickRule, Evaluator, GroundingCase, PredictionRecord,
    ReportFormat, TextRule,
};
use uiforge_core::report::format_percent;
use uiforge_core::{Episode, MatchPolicy};

use super::{print, RecordErrors};
use crate::config::PipelineConfig;
use crate::io::{ensure_distinct, write_file, JsonlInput, JsonlOutput, Pool, CHUNK};
use crate::{ClickRuleArg, CliError, EvalMode, EvaluateArgs};

fn policy(args: &EvaluateArgs, cfg: &PipelineConfig) -> Result<MatchPolicy, CliError> {
    let mut p = cfg.match_policy.clone();
    if let Some(rule) = args.click_rule {
        p.click_rule = match rule {
            ClickRuleArg::BboxContainment => ClickRule::BboxContainment,
            ClickRuleArg::BboxThenRadius => ClickRule::BboxThenRadius,
        };
    }
    if let Some(r) = args.radius {
        p.radius = r;
    }
    if let Some(t) = args.fuzzy_text {
        p.text_rule = TextRule::Fuzzy(t);
    }
    p.compare_swipe_distance |= args.compare_swipe_distance;
    p.compare_answer &= !args.ignore_answer;
    p.validate().map_err(CliError::io)?;
    Ok(p)
}

fn read_records<T: serde::de::DeserializeOwned>(
    input: JsonlInput,
    what: &str,
    err: &mut dyn Write,
) -> Result<Vec<T>, CliError> {
    let mut errors = RecordErrors::default();
    let mut out = Vec::new();
    for (line_no, line) in input.read_all()? {
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(e) => errors.log(err, line_no, &format!("malformed {what}: {e}")),
        }
    }
    errors.finish(what)?;
    Ok(out)
}

pub fn run(
    args: &EvaluateArgs,
    cfg: &PipelineConfig,
    jobs: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    outputs.extend(args.report_json.as_deref());
    outputs.extend(args.report_md.as_deref());
    outputs.extend(args.outcomes.as_deref());
    ensure_distinct(&[&args.gold, &args.predictions], &outputs)?;
    let predictions_in = JsonlInput::open(&args.predictions)?;
    let mut gold = JsonlInput::open(&args.gold)?;
    let predictions: Vec<PredictionRecord> = read_records(predictions_in, "prediction", err)?;

    if args.mode == EvalMode::Grounding {
        let cases: Vec<GroundingCase> = read_records(gold, "grounding case", err)?;
        let report = grounding_report(&cases, predictions).map_err(|e| CliError::data(e.to_string()))?;
        if let Some(path) = &args.report_json {
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            write_file(path, &json)?;
        }
        if let Some(path) = &args.report_md {
            let md = format!(
                "| Metric | Value |\n|---|---|\n| Cases | {} |\n| Grounding Acc | {} |\n| Unparseable | {} |\n",
                report.cases,
                format_percent(report.accuracy),
                report.unparseable
            );
            write_file(path, &md)?;
        }
        return print(
            out,
            &format!("cases: {}\ngrounding_acc: {}\n", report.cases, format_percent(report.accuracy)),
        );
    }

    let policy = policy(args, cfg)?;
    let mut ev = Evaluator::new(predictions, policy).map_err(|e| CliError::data(e.to_string()))?;
    let pool = Pool::new(jobs)?;
    let mut errors = RecordErrors::default();
    loop {
        let chunk = gold.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let scored = pool.map(&chunk, |(_, line)| {
            serde_json::from_str::<Episode>(line)
                .map(|ep| ev.score_episode(&ep))
                .map_err(|e| format!("malformed episode: {e}"))
        });
        for ((line_no, _), result) in chunk.iter().zip(scored) {
            match result {
                Ok((steps, missing)) => ev.add(steps, missing),
                Err(message) => errors.log(err, *line_no, &message),
            }
        }
    }
    errors.finish("gold records")?;
    let outcomes = args.outcomes.as_ref().map(|_| ev.outcomes());
    let report = ev.finish().map_err(|e| CliError::data(e.to_string()))?;
    if let (Some(path), Some(outcomes)) = (&args.outcomes, outcomes) {
        let mut log = JsonlOutput::create(path)?;
        for o in &outcomes {
            log.write(o)?;
        }
        log.finish()?;
    }
    if let Some(path) = &args.report_json {
        write_file(path, &emit_report(&report, ReportFormat::Json))?;
    }
    if let Some(path) = &args.report_md {
        write_file(path, &emit_report(&report, ReportFormat::Markdown))?;
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), format_percent);
    let mut summary = String::new();
    let _ = writeln!(summary, "steps: {}", report.steps);
    let _ = writeln!(summary, "step_sr: {}", format_percent(report.step_sr));
    let _ = writeln!(summary, "type_acc: {}", format_percent(report.type_acc));
    let _ = writeln!(summary, "click_acc: {}", opt(report.click_acc));
    let _ = writeln!(summary, "grounding_acc: {}", opt(report.grounding_acc));
    let _ = writeln!(summary, "op_f1: {}", format_percent(report.op_f1));
    print(out, &summary)
}
