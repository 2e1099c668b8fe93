#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uiforge_core::{BBox, ElementRecord, Platform, ScreenRecord, ScreenshotMeta};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built binary.
pub fn uiforge(args: &[&str]) -> Run {
    uiforge_env(args, &[])
}

pub fn uiforge_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_uiforge"));
    cmd.args(args).env_remove("UIFORGE_OCR_CMD");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("run uiforge");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Runs a command in-process (same optimization level as the test).
pub fn run_in_process(args: &[&str]) -> Run {
    let mut argv = vec!["uiforge"];
    argv.extend_from_slice(args);
    let cli = uiforge_cli::Cli::try_parse_from(argv).expect("valid command line");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = uiforge_cli::run(cli, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

/// Rules a planted violation is built to trip first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planted {
    InvalidBbox,
    Oversized,
    Tiny,
    Duplicate,
}

pub const ELEMENTS_PER_SCREEN: usize = 10;

/// Element corpus on 1000x1000 screens with exactly `violations` planted
/// among `total` elements, cycling through the four metadata rules. Returns
/// the records and the planted count per kind, in rule order 1, 2, 3, 5.
pub fn planted_corpus(total: usize, violations: usize) -> (Vec<ScreenRecord>, [usize; 4]) {
    assert_eq!(total % ELEMENTS_PER_SCREEN, 0);
    let screens = total / ELEMENTS_PER_SCREEN;
    let kinds = [Planted::InvalidBbox, Planted::Oversized, Planted::Tiny, Planted::Duplicate];
    let mut counts = [0usize; 4];
    let mut k = 0usize;
    let mut out = Vec::with_capacity(screens);
    for sc in 0..screens {
        let here = (sc + 1) * violations / screens - sc * violations / screens;
        assert!(here < ELEMENTS_PER_SCREEN);
        let screen = ScreenshotMeta::new(format!("screen{sc}"), 1000, 1000, Platform::Mobile);
        let clean_box = |j: usize| {
            let j = j as i32;
            BBox { left: 10 + 90 * j, top: 100, right: 70 + 90 * j, bottom: 160 }
        };
        let mut elements = Vec::with_capacity(ELEMENTS_PER_SCREEN);
        for j in 0..ELEMENTS_PER_SCREEN {
            let id = format!("s{sc}e{j}");
            // element 0 stays clean so duplicates have an original to copy
            let planted = j >= 1 && j <= here;
            let bbox = if planted {
                let kind = kinds[k % 4];
                counts[k % 4] += 1;
                k += 1;
                match kind {
                    Planted::InvalidBbox => BBox { left: 500, top: 500, right: 400, bottom: 600 },
                    Planted::Oversized => BBox { left: 0, top: 0, right: 900, bottom: 900 },
                    Planted::Tiny => BBox { left: 20 * j as i32, top: 700, right: 20 * j as i32 + 10, bottom: 710 },
                    Planted::Duplicate => clean_box(0),
                }
            } else {
                clean_box(j)
            };
            let mut e = ElementRecord::new(id, bbox);
            e.elem_class = Some("Button".into());
            e.text = Some(format!("label {j}"));
            elements.push(e);
        }
        out.push(ScreenRecord { screenshot: screen, elements });
    }
    assert_eq!(k, violations);
    (out, counts)
}

pub fn to_jsonl<T: serde::Serialize>(records: &[T]) -> Vec<String> {
    records.iter().map(|r| serde_json::to_string(r).unwrap()).collect()
}

/// Random AITW-style source episode with `steps` raw steps.
pub fn aitw_episode(rng: &mut ChaCha8Rng, id: &str, steps: usize) -> Value {
    let mut raw = Vec::with_capacity(steps);
    for i in 0..steps {
        let base = json!({"image_width": 1080, "image_height": 2400, "image_id": format!("{id}_{i}")});
        let mut step = base.as_object().unwrap().clone();
        let last = i + 1 == steps;
        let pick = if last { 9 } else { rng.random_range(0..9) };
        match pick {
            0..=3 => {
                let (y, x) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
                step.insert("action_type".into(), json!("DUAL_POINT"));
                step.insert("touch_yx".into(), json!([y, x]));
                step.insert("lift_yx".into(), json!([y, x]));
            }
            4 | 5 => {
                let y0 = rng.random_range(0.6..0.9);
                let y1 = rng.random_range(0.1..0.4);
                step.insert("action_type".into(), json!("DUAL_POINT"));
                step.insert("touch_yx".into(), json!([y0, 0.5]));
                step.insert("lift_yx".into(), json!([y1, 0.5]));
            }
            6 => {
                step.insert("action_type".into(), json!("TYPE"));
                step.insert("typed_text".into(), json!(format!("query {}", rng.random_range(0..1000))));
            }
            7 => {
                step.insert("action_type".into(), json!("PRESS_BACK"));
            }
            8 => {
                step.insert("action_type".into(), json!("PRESS_ENTER"));
            }
            _ => {
                step.insert("action_type".into(), json!("STATUS_TASK_COMPLETE"));
            }
        }
        raw.push(Value::Object(step));
    }
    json!({"source": "aitw", "episode_id": id, "goal": format!("goal for {id}"), "raw_steps": raw})
}

pub fn aitw_corpus(seed: u64, episodes: usize, steps: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes)
        .map(|i| aitw_episode(&mut rng, &format!("ep{i:06}"), steps).to_string())
        .collect()
}

/// Gold-echo predictions for a unified episode file.
pub fn echo_predictions(episodes_jsonl: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for line in read_lines(episodes_jsonl) {
        let ep: uiforge_core::Episode = serde_json::from_str(&line).unwrap();
        for (i, s) in ep.steps.iter().enumerate() {
            out.push(
                json!({
                    "step_id": ep.step_id(i),
                    "output": uiforge_core::serialize_action(&s.gold_action, uiforge_core::SerializeMode::Paper),
                })
                .to_string(),
            );
        }
    }
    out
}
