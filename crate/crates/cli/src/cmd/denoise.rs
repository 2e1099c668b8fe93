use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;
use uiforge_core::denoise::{
    denoise_episode, denoise_screen, AuditAccumulator, CommandOcr, DenoiseVerdict, ImagePixels,
    KeywordTable, PixelProvider, Providers, TextRecognizer,
};
use uiforge_core::{Episode, ScreenRecord};

use super::{print, RecordErrors};
use crate::config::PipelineConfig;
use crate::io::{ensure_distinct, write_file, JsonlInput, JsonlOutput, Pool, CHUNK};
use crate::{CliError, DenoiseArgs};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Corpus {
    Screens,
    Episodes,
}

fn detect(line: &str) -> Option<Corpus> {
    let v: Value = serde_json::from_str(line).ok()?;
    if v.get("elements").is_some() {
        Some(Corpus::Screens)
    } else if v.get("steps").is_some() {
        Some(Corpus::Episodes)
    } else {
        None
    }
}

enum Cleaned {
    Screen(ScreenRecord, Vec<DenoiseVerdict>),
    Episode(Episode, Vec<DenoiseVerdict>),
    Failed(String),
}

fn default_audit_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".audit.json");
    PathBuf::from(s)
}

pub fn run(
    args: &DenoiseArgs,
    cfg: &PipelineConfig,
    jobs: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let mut dcfg = cfg.denoise.clone();
    if let Some(mask) = args.rules {
        dcfg.rule_mask = mask;
    }
    let images = args.images.clone().or_else(|| cfg.providers.images.clone());
    let ocr_cmd = args.ocr_cmd.clone().or_else(|| cfg.providers.ocr_cmd.clone());
    let keywords = match args.keywords.as_ref().or(cfg.providers.keywords.as_ref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            KeywordTable::parse(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?
        }
        None => KeywordTable::builtin(),
    };
    let pixels = images.as_ref().map(|dir| ImagePixels::new(Some(dir.clone())));
    let ocr = match ocr_cmd.as_deref().filter(|c| !c.trim().is_empty()) {
        Some(cmd) => Some(
            CommandOcr::from_command_line(cmd, images.clone())
                .ok_or_else(|| CliError::io("empty OCR command"))?,
        ),
        None => None,
    };
    let providers = Providers {
        pixels: pixels.as_ref().map(|p| p as &dyn PixelProvider),
        ocr: ocr.as_ref().map(|o| o as &dyn TextRecognizer),
    };

    let audit_path = args.audit.clone().unwrap_or_else(|| default_audit_path(&args.output));
    let mut outputs = vec![args.output.as_path(), audit_path.as_path()];
    outputs.extend(args.verdicts.as_deref());
    ensure_distinct(&[&args.input], &outputs)?;

    let mut input = JsonlInput::open(&args.input)?;
    let mut output = JsonlOutput::create(&args.output)?;
    let mut verdict_log = args.verdicts.as_deref().map(JsonlOutput::create).transpose()?;
    let pool = Pool::new(jobs)?;
    let mut errors = RecordErrors::default();
    let mut corpus = None;
    let mut acc = None;
    loop {
        let chunk = input.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        if corpus.is_none() {
            let kind = chunk.iter().find_map(|(_, l)| detect(l)).unwrap_or(Corpus::Screens);
            acc = Some(match kind {
                Corpus::Screens => AuditAccumulator::for_elements(&dcfg, providers),
                Corpus::Episodes => AuditAccumulator::for_episodes(providers.pixels.is_some()),
            });
            corpus = Some(kind);
        }
        let kind = corpus.expect("set above");
        let results = pool.map(&chunk, |(_, line)| match kind {
            Corpus::Screens => match serde_json::from_str::<ScreenRecord>(line) {
                Ok(rec) => {
                    let o = denoise_screen(&rec, providers, &dcfg);
                    Cleaned::Screen(o.cleaned, o.verdicts)
                }
                Err(e) => Cleaned::Failed(format!("malformed screen record: {e}")),
            },
            Corpus::Episodes => match serde_json::from_str::<Episode>(line) {
                Ok(ep) => {
                    let o = denoise_episode(&ep, providers.pixels, &keywords, dcfg.min_color_std);
                    Cleaned::Episode(o.episode, o.verdicts)
                }
                Err(e) => Cleaned::Failed(format!("malformed episode: {e}")),
            },
        });
        let acc = acc.as_mut().expect("set above");
        for ((line_no, _), result) in chunk.iter().zip(results) {
            let verdicts = match result {
                Cleaned::Screen(rec, v) => {
                    output.write(&rec)?;
                    v
                }
                Cleaned::Episode(ep, v) => {
                    output.write(&ep)?;
                    v
                }
                Cleaned::Failed(message) => {
                    errors.log(err, *line_no, &message);
                    continue;
                }
            };
            acc.add(&verdicts);
            if let Some(log) = verdict_log.as_mut() {
                for v in &verdicts {
                    log.write(v)?;
                }
            }
        }
    }
    output.finish()?;
    if let Some(log) = verdict_log {
        log.finish()?;
    }
    let report = acc
        .unwrap_or_else(|| AuditAccumulator::for_elements(&dcfg, providers))
        .finish();
    let mut json = report.to_json();
    json.push('\n');
    write_file(&audit_path, &json)?;
    print(out, &report.to_table())?;
    errors.finish("records")
}
