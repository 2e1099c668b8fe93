//! Training-sample generation: grounding and referring tasks from triplets,
//! widget listings from element corpora, and agent-step prompts with history.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{serialize_action, SerializeMode};
use crate::model::{
    grounding_point, ElementRecord, Episode, GroundingTriplet, ModelError, ReKind, ScreenRecord,
    ScreenshotMeta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Funcgnd,
    Elemgnd,
    Textgnd,
    Icongnd,
    Intentgnd,
    Funcref,
    Elemref,
    Ocr,
    Iconref,
    WidgetListing,
    Captioning,
    Qa,
    AgentStep,
}

impl TaskKind {
    pub const ALL: [TaskKind; 13] = [
        TaskKind::Funcgnd,
        TaskKind::Elemgnd,
        TaskKind::Textgnd,
        TaskKind::Icongnd,
        TaskKind::Intentgnd,
        TaskKind::Funcref,
        TaskKind::Elemref,
        TaskKind::Ocr,
        TaskKind::Iconref,
        TaskKind::WidgetListing,
        TaskKind::Captioning,
        TaskKind::Qa,
        TaskKind::AgentStep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Funcgnd => "funcgnd",
            TaskKind::Elemgnd => "elemgnd",
            TaskKind::Textgnd => "textgnd",
            TaskKind::Icongnd => "icongnd",
            TaskKind::Intentgnd => "intentgnd",
            TaskKind::Funcref => "funcref",
            TaskKind::Elemref => "elemref",
            TaskKind::Ocr => "ocr",
            TaskKind::Iconref => "iconref",
            TaskKind::WidgetListing => "widget_listing",
            TaskKind::Captioning => "captioning",
            TaskKind::Qa => "qa",
            TaskKind::AgentStep => "agent_step",
        }
    }

    /// The expression kind a grounding or referring task is built from.
    pub fn re_kind(self) -> Option<ReKind> {
        match self {
            TaskKind::Funcgnd | TaskKind::Funcref => Some(ReKind::Functionality),
            TaskKind::Elemgnd | TaskKind::Elemref => Some(ReKind::Description),
            TaskKind::Textgnd | TaskKind::Ocr => Some(ReKind::DisplayedText),
            TaskKind::Icongnd | TaskKind::Iconref => Some(ReKind::IconName),
            TaskKind::Intentgnd => Some(ReKind::Intent),
            _ => None,
        }
    }

    pub fn is_grounding(self) -> bool {
        matches!(
            self,
            TaskKind::Funcgnd
                | TaskKind::Elemgnd
                | TaskKind::Textgnd
                | TaskKind::Icongnd
                | TaskKind::Intentgnd
        )
    }

    pub fn is_referring(self) -> bool {
        matches!(
            self,
            TaskKind::Funcref | TaskKind::Elemref | TaskKind::Ocr | TaskKind::Iconref
        )
    }

    pub fn is_pass_through(self) -> bool {
        matches!(self, TaskKind::Captioning | TaskKind::Qa)
    }

    pub fn grounding_for(re: ReKind) -> TaskKind {
        match re {
            ReKind::Functionality => TaskKind::Funcgnd,
            ReKind::Description => TaskKind::Elemgnd,
            ReKind::DisplayedText => TaskKind::Textgnd,
            ReKind::IconName => TaskKind::Icongnd,
            ReKind::Intent => TaskKind::Intentgnd,
        }
    }

    /// Intent expressions have no referring counterpart.
    pub fn referring_for(re: ReKind) -> Option<TaskKind> {
        match re {
            ReKind::Functionality => Some(TaskKind::Funcref),
            ReKind::Description => Some(TaskKind::Elemref),
            ReKind::DisplayedText => Some(TaskKind::Ocr),
            ReKind::IconName => Some(TaskKind::Iconref),
            ReKind::Intent => None,
        }
    }

    fn placeholders(self) -> &'static [&'static str] {
        if self.is_grounding() {
            &["re"]
        } else if self.is_referring() {
            &["point"]
        } else if self == TaskKind::AgentStep {
            &["task", "instruction", "history"]
        } else {
            &[]
        }
    }

    fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            TaskKind::AgentStep => &["task", "history"],
            k if k.is_grounding() => &["re"],
            k if k.is_referring() => &["point"],
            _ => &[],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task kind `{s}`"))
    }
}

/// One line of a training-sample JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSample {
    pub kind: TaskKind,
    pub image: String,
    pub prompt: String,
    pub target: String,
    pub provenance: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskgenError {
    #[error("task kind {kind} cannot be built from a {re:?} expression")]
    Pairing { kind: TaskKind, re: ReKind },
    #[error("task kind {0} is not handled by this generator")]
    WrongKind(TaskKind),
    #[error("no templates for task kind {0}")]
    NoTemplates(TaskKind),
    #[error("screen `{0}` has no elements to list")]
    EmptyListing(String),
    #[error("step {index} out of range for episode `{episode}` with {len} steps")]
    StepOutOfRange {
        episode: String,
        index: usize,
        len: usize,
    },
    #[error("pass-through record: {0}")]
    PassThrough(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("line {line}: template outside of a [kind] section")]
    NoSection { line: usize },
    #[error("line {line}: {message}")]
    BadSection { line: usize, message: String },
    #[error("line {line}: placeholder {{{name}}} is not available for {kind}")]
    UnknownPlaceholder {
        line: usize,
        kind: TaskKind,
        name: String,
    },
    #[error("line {line}: {kind} template lacks {{{name}}}")]
    MissingPlaceholder {
        line: usize,
        kind: TaskKind,
        name: String,
    },
    #[error("no templates for {0}")]
    Missing(TaskKind),
}

/// Prompt templates per task kind.
///
/// File format: `[kind]` headers followed by one template per line; blank
/// lines and lines starting with `#` are ignored; `\n` inside a template is a
/// newline. Every generated kind needs at least one template; captioning and
/// qa copy their source prompts and take none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TaskKind, Vec<String>>,
}

fn placeholders_in(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        match rest[open + 1..].find('}') {
            Some(close) => {
                out.push(&rest[open + 1..open + 1 + close]);
                rest = &rest[open + 2 + close..];
            }
            None => break,
        }
    }
    out
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        TemplateSet::parse(include_str!("../data/templates.txt")).expect("builtin templates")
    }

    pub fn parse(text: &str) -> Result<TemplateSet, TemplateError> {
        let mut templates: BTreeMap<TaskKind, Vec<String>> = BTreeMap::new();
        let mut current = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let kind: TaskKind = name.trim().parse().map_err(|message| TemplateError::BadSection {
                    line: line_no,
                    message,
                })?;
                if kind.is_pass_through() {
                    return Err(TemplateError::BadSection {
                        line: line_no,
                        message: format!("{kind} samples are copied from the source and take no templates"),
                    });
                }
                current = Some(kind);
                continue;
            }
            let kind = current.ok_or(TemplateError::NoSection { line: line_no })?;
            let template = line.replace("\\n", "\n");
            let found = placeholders_in(&template);
            if let Some(bad) = found.iter().find(|p| !kind.placeholders().contains(p)) {
                return Err(TemplateError::UnknownPlaceholder {
                    line: line_no,
                    kind,
                    name: bad.to_string(),
                });
            }
            if let Some(missing) = kind.required_placeholders().iter().find(|p| !found.contains(p)) {
                return Err(TemplateError::MissingPlaceholder {
                    line: line_no,
                    kind,
                    name: missing.to_string(),
                });
            }
            templates.entry(kind).or_default().push(template);
        }
        let set = TemplateSet { templates };
        if let Some(kind) = TaskKind::ALL
            .into_iter()
            .find(|k| !k.is_pass_through() && set.get(*k).is_empty())
        {
            return Err(TemplateError::Missing(kind));
        }
        Ok(set)
    }

    pub fn load(path: &std::path::Path) -> Result<TemplateSet, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        TemplateSet::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn get(&self, kind: TaskKind) -> &[String] {
        self.templates.get(&kind).map_or(&[], Vec::as_slice)
    }

    fn pick(&self, kind: TaskKind, rng_seed: u64) -> Result<&str, TaskgenError> {
        let options = self.get(kind);
        if options.is_empty() {
            return Err(TaskgenError::NoTemplates(kind));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        Ok(&options[rng.random_range(0..options.len())])
    }
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// Per-record seed from a run seed and the record's input index, so output
/// does not depend on how records are scheduled.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(index))
}

fn image_of(s: &ScreenshotMeta) -> String {
    match &s.image_ref {
        Some(p) => p.to_string_lossy().into_owned(),
        None => s.id.clone(),
    }
}

fn check_pairing(t: &GroundingTriplet, kind: TaskKind) -> Result<(), TaskgenError> {
    match kind.re_kind() {
        Some(re) if re == t.re.kind => Ok(()),
        _ => Err(TaskgenError::Pairing { kind, re: t.re.kind }),
    }
}

pub fn gen_grounding(
    t: &GroundingTriplet,
    kind: TaskKind,
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<TaskSample, TaskgenError> {
    if !kind.is_grounding() {
        return Err(TaskgenError::WrongKind(kind));
    }
    check_pairing(t, kind)?;
    let point = grounding_point(&t.target_bbox, &t.screenshot)?;
    let prompt = fill(templates.pick(kind, rng_seed)?, &[("re", t.re.text.trim())]);
    Ok(TaskSample {
        kind,
        image: image_of(&t.screenshot),
        prompt,
        target: point.to_string(),
        provenance: vec![t.screenshot.id.clone()],
    })
}

pub fn gen_referring(
    t: &GroundingTriplet,
    kind: TaskKind,
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<TaskSample, TaskgenError> {
    if !kind.is_referring() {
        return Err(TaskgenError::WrongKind(kind));
    }
    check_pairing(t, kind)?;
    let point = grounding_point(&t.target_bbox, &t.screenshot)?;
    let prompt = fill(templates.pick(kind, rng_seed)?, &[("point", &point.to_string())]);
    Ok(TaskSample {
        kind,
        image: image_of(&t.screenshot),
        prompt,
        target: t.re.text.trim().to_string(),
        provenance: vec![t.screenshot.id.clone()],
    })
}

fn listing_line(e: &ElementRecord, screen: &ScreenshotMeta) -> Result<String, ModelError> {
    let class = e
        .elem_class
        .as_deref()
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .unwrap_or("element");
    let label = e
        .non_empty_text()
        .or(e.icon_class.as_deref())
        .map(str::trim)
        .unwrap_or("");
    let p = grounding_point(&e.bbox, screen)?;
    Ok(format!("{class} '{label}' at {p}"))
}

/// Lists elements in reading order: by top edge, then left edge.
pub fn gen_widget_listing(
    screen: &ScreenshotMeta,
    elements: &[ElementRecord],
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<TaskSample, TaskgenError> {
    if elements.is_empty() {
        return Err(TaskgenError::EmptyListing(screen.id.clone()));
    }
    let mut order: Vec<&ElementRecord> = elements.iter().collect();
    order.sort_by_key(|e| (e.bbox.top, e.bbox.left));
    let lines = order
        .iter()
        .map(|e| listing_line(e, screen))
        .collect::<Result<Vec<_>, _>>()?;
    let mut provenance = vec![screen.id.clone()];
    provenance.extend(order.iter().map(|e| e.source_id.clone()));
    Ok(TaskSample {
        kind: TaskKind::WidgetListing,
        image: image_of(screen),
        prompt: templates.pick(TaskKind::WidgetListing, rng_seed)?.to_string(),
        target: lines.join("\n"),
        provenance,
    })
}

/// Numbered lines for the last `window` actions before `step_idx`, numbered
/// by absolute position from 1.
pub fn render_history(ep: &Episode, step_idx: usize, window: usize) -> String {
    let from = step_idx.saturating_sub(window);
    ep.steps[from..step_idx]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "step {}: {}",
                from + i + 1,
                serialize_action(&s.gold_action, SerializeMode::Paper)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Agent-step sample: the goal, optional step instruction and numbered action
/// history in the prompt; the gold action in paper syntax as the target.
pub fn format_agent_sample(
    ep: &Episode,
    step_idx: usize,
    history_window: usize,
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<TaskSample, TaskgenError> {
    let step = ep.steps.get(step_idx).ok_or_else(|| TaskgenError::StepOutOfRange {
        episode: ep.id.clone(),
        index: step_idx,
        len: ep.steps.len(),
    })?;
    let instruction = match step.low_level_instruction.as_deref().map(str::trim) {
        Some(text) if !text.is_empty() => format!("Step instruction: {text}\n"),
        _ => String::new(),
    };
    let history = render_history(ep, step_idx, history_window);
    let prompt = fill(
        templates.pick(TaskKind::AgentStep, rng_seed)?,
        &[
            ("task", ep.goal.trim()),
            ("instruction", &instruction),
            ("history", &history),
        ],
    );
    Ok(TaskSample {
        kind: TaskKind::AgentStep,
        image: image_of(&step.screenshot),
        prompt,
        target: serialize_action(&step.gold_action, SerializeMode::Paper),
        provenance: vec![ep.id.clone(), ep.step_id(step_idx)],
    })
}

/// Source-provided captioning or Q&A pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassThroughRecord {
    pub kind: TaskKind,
    pub image: String,
    pub prompt: String,
    pub answer: String,
    #[serde(default)]
    pub provenance: Vec<String>,
}

pub fn pass_through(r: &PassThroughRecord) -> Result<TaskSample, TaskgenError> {
    if !r.kind.is_pass_through() {
        return Err(TaskgenError::WrongKind(r.kind));
    }
    for (field, value) in [("image", &r.image), ("prompt", &r.prompt), ("answer", &r.answer)] {
        if value.trim().is_empty() {
            return Err(TaskgenError::PassThrough(format!("empty {field}")));
        }
    }
    Ok(TaskSample {
        kind: r.kind,
        image: r.image.clone(),
        prompt: r.prompt.clone(),
        target: r.answer.clone(),
        provenance: r.provenance.clone(),
    })
}

/// Triplets for every referring expression of every element on a screen.
pub fn triplets(screen: &ScreenRecord) -> Vec<GroundingTriplet> {
    screen
        .elements
        .iter()
        .flat_map(|e| {
            e.referring_expressions()
                .into_iter()
                .map(move |re| GroundingTriplet {
                    screenshot: screen.screenshot.clone(),
                    re,
                    target_bbox: e.bbox,
                })
        })
        .collect()
}

/// Which sample families to produce from element corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenTasks {
    pub grounding: bool,
    pub referring: bool,
    pub widget_listing: bool,
}

impl Default for ScreenTasks {
    fn default() -> Self {
        ScreenTasks {
            grounding: true,
            referring: true,
            widget_listing: true,
        }
    }
}

/// All samples for one screen, in a fixed order: per expression a grounding
/// then a referring sample, then the widget listing.
pub fn samples_for_screen(
    screen: &ScreenRecord,
    tasks: ScreenTasks,
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<Vec<TaskSample>, TaskgenError> {
    let mut out = Vec::new();
    let mut n = 0u64;
    let mut next_seed = || {
        n += 1;
        mix_seed(rng_seed, n)
    };
    for t in triplets(screen) {
        if tasks.grounding {
            out.push(gen_grounding(&t, TaskKind::grounding_for(t.re.kind), templates, next_seed())?);
        }
        if tasks.referring {
            if let Some(kind) = TaskKind::referring_for(t.re.kind) {
                out.push(gen_referring(&t, kind, templates, next_seed())?);
            }
        }
    }
    if tasks.widget_listing && !screen.elements.is_empty() {
        out.push(gen_widget_listing(
            &screen.screenshot,
            &screen.elements,
            templates,
            next_seed(),
        )?);
    }
    Ok(out)
}

/// One agent sample per step, in step order.
pub fn samples_for_episode(
    ep: &Episode,
    history_window: usize,
    templates: &TemplateSet,
    rng_seed: u64,
) -> Result<Vec<TaskSample>, TaskgenError> {
    (0..ep.steps.len())
        .map(|i| format_agent_sample(ep, i, history_window, templates, mix_seed(rng_seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{parse_action, MobileAction, UnifiedAction};
    use crate::model::{
        denormalize_point, parse_norm_point, point_in_bbox, BBox, NormPoint, Platform,
        ReferringExpression, Step,
    };
    use proptest::prelude::*;

    fn screen() -> ScreenshotMeta {
        ScreenshotMeta::new("s1", 1000, 1000, Platform::Mobile)
    }

    fn triplet(kind: ReKind, text: &str, bbox: BBox) -> GroundingTriplet {
        GroundingTriplet {
            screenshot: screen(),
            re: ReferringExpression::new(kind, text),
            target_bbox: bbox,
        }
    }

    const SHARE_BOX: BBox = BBox { left: 300, top: 30, right: 324, bottom: 58 };

    #[test]
    fn builtin_templates_cover_every_generated_kind() {
        let t = TemplateSet::builtin();
        for kind in TaskKind::ALL {
            if kind.is_pass_through() {
                assert!(t.get(kind).is_empty());
            } else {
                assert!(t.get(kind).len() >= 5, "{kind}");
            }
        }
    }

    #[test]
    fn grounding_example() {
        let t = triplet(ReKind::Functionality, "shares content with others", SHARE_BOX);
        let s = gen_grounding(&t, TaskKind::Funcgnd, &TemplateSet::builtin(), 7).unwrap();
        assert_eq!(s.target, "(312,44)");
        assert!(s.prompt.contains("shares content with others"));
        assert_eq!(s.kind, TaskKind::Funcgnd);
    }

    #[test]
    fn referring_examples() {
        let templates = TemplateSet::builtin();
        let t = triplet(ReKind::Description, "a navigating-home button at the top left", SHARE_BOX);
        let s = gen_referring(&t, TaskKind::Elemref, &templates, 1).unwrap();
        assert_eq!(s.target, "a navigating-home button at the top left");
        assert!(s.prompt.contains("(312,44)"));
        let t = triplet(ReKind::DisplayedText, "Submit", SHARE_BOX);
        assert_eq!(gen_referring(&t, TaskKind::Ocr, &templates, 1).unwrap().target, "Submit");
        let t = triplet(ReKind::IconName, "Home icon", SHARE_BOX);
        assert_eq!(gen_referring(&t, TaskKind::Iconref, &templates, 1).unwrap().target, "Home icon");
    }

    #[test]
    fn pairing_matrix_is_exact() {
        let templates = TemplateSet::builtin();
        let expected = [
            (TaskKind::Funcgnd, ReKind::Functionality),
            (TaskKind::Funcref, ReKind::Functionality),
            (TaskKind::Elemgnd, ReKind::Description),
            (TaskKind::Elemref, ReKind::Description),
            (TaskKind::Textgnd, ReKind::DisplayedText),
            (TaskKind::Ocr, ReKind::DisplayedText),
            (TaskKind::Icongnd, ReKind::IconName),
            (TaskKind::Iconref, ReKind::IconName),
            (TaskKind::Intentgnd, ReKind::Intent),
        ];
        for kind in TaskKind::ALL {
            for re in ReKind::ALL {
                let t = triplet(re, "x", SHARE_BOX);
                let result = if kind.is_grounding() {
                    gen_grounding(&t, kind, &templates, 0)
                } else {
                    gen_referring(&t, kind, &templates, 0)
                };
                let compatible = expected.contains(&(kind, re));
                assert_eq!(result.is_ok(), compatible, "{kind} / {re:?}");
            }
        }
        let t = triplet(ReKind::Intent, "share it", SHARE_BOX);
        assert_eq!(
            gen_grounding(&t, TaskKind::Funcgnd, &templates, 0),
            Err(TaskgenError::Pairing { kind: TaskKind::Funcgnd, re: ReKind::Intent })
        );
    }

    fn element(id: &str, bbox: BBox, class: &str, text: Option<&str>, icon: Option<&str>) -> ElementRecord {
        let mut e = ElementRecord::new(id, bbox);
        e.elem_class = Some(class.into());
        e.text = text.map(Into::into);
        e.icon_class = icon.map(Into::into);
        e
    }

    #[test]
    fn widget_listing_order() {
        let templates = TemplateSet::builtin();
        let lower = element("a", BBox { left: 0, top: 500, right: 100, bottom: 600 }, "Button", Some("OK"), None);
        let right = element("b", BBox { left: 600, top: 100, right: 700, bottom: 200 }, "Image", None, Some("Home icon"));
        let left = element("c", BBox { left: 100, top: 100, right: 200, bottom: 200 }, "Text", Some("Title"), None);
        let s = gen_widget_listing(&screen(), &[lower, right, left], &templates, 0).unwrap();
        assert_eq!(
            s.target,
            "Text 'Title' at (150,150)\nImage 'Home icon' at (650,150)\nButton 'OK' at (50,550)"
        );
        assert_eq!(
            gen_widget_listing(&screen(), &[], &templates, 0),
            Err(TaskgenError::EmptyListing("s1".into()))
        );
    }

    fn episode(n: usize) -> Episode {
        let steps = (0..n)
            .map(|i| Step {
                screenshot: ScreenshotMeta::new(format!("shot{i}"), 1080, 2400, Platform::Mobile),
                low_level_instruction: (i % 2 == 0).then(|| format!("do thing {i}")),
                gold_action: UnifiedAction::Mobile(MobileAction::Click {
                    target: NormPoint { x: i as i32, y: 10 },
                }),
                gold_bbox: None,
                history_index: i,
                reasoning: None,
                provenance: None,
            })
            .collect();
        Episode {
            id: "ep".into(),
            platform: Platform::Mobile,
            goal: "turn on wifi".into(),
            steps,
        }
    }

    fn history_numbers(h: &str) -> Vec<usize> {
        h.lines()
            .map(|l| l.strip_prefix("step ").unwrap().split(':').next().unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn agent_history_windows() {
        let ep = episode(13);
        assert_eq!(render_history(&ep, 0, 8), "");
        assert_eq!(history_numbers(&render_history(&ep, 3, 8)), vec![1, 2, 3]);
        assert_eq!(history_numbers(&render_history(&ep, 12, 8)), (5..=12).collect::<Vec<_>>());
        assert_eq!(
            render_history(&ep, 1, 8),
            r#"step 1: {"action_type": "click", "target": (0,10)}"#
        );
        let templates = TemplateSet::builtin();
        let s = format_agent_sample(&ep, 12, 8, &templates, 3).unwrap();
        assert!(s.prompt.contains("turn on wifi"));
        assert!(s.prompt.contains("do thing 12"));
        assert!(s.prompt.contains("step 5: ") && !s.prompt.contains("step 4: "));
        assert!(!s.prompt.contains("action_type\": \"swipe"));
        assert_eq!(parse_action(&s.target, Platform::Mobile).unwrap(), ep.steps[12].gold_action);
        assert!(matches!(
            format_agent_sample(&ep, 13, 8, &templates, 0),
            Err(TaskgenError::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn agent_targets_match_gold_multiset() {
        let ep = episode(9);
        let samples = samples_for_episode(&ep, 8, &TemplateSet::builtin(), 11).unwrap();
        let mut got: Vec<String> = samples.into_iter().map(|s| s.target).collect();
        let mut want: Vec<String> = ep
            .steps
            .iter()
            .map(|s| serialize_action(&s.gold_action, SerializeMode::Paper))
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn template_parsing_errors() {
        assert!(matches!(TemplateSet::parse("hello"), Err(TemplateError::NoSection { line: 1 })));
        assert!(matches!(
            TemplateSet::parse("[funcgnd]\nfind {point}"),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            TemplateSet::parse("[funcgnd]\nfind it"),
            Err(TemplateError::MissingPlaceholder { .. })
        ));
        assert!(matches!(TemplateSet::parse("[qa]\nx"), Err(TemplateError::BadSection { .. })));
        assert!(matches!(
            TemplateSet::parse("[funcgnd]\nfind {re}"),
            Err(TemplateError::Missing(TaskKind::Elemgnd))
        ));
    }

    #[test]
    fn pass_through_validates() {
        let r = PassThroughRecord {
            kind: TaskKind::Qa,
            image: "a.png".into(),
            prompt: "What is shown?".into(),
            answer: "A login form".into(),
            provenance: vec!["rico:1".into()],
        };
        assert_eq!(pass_through(&r).unwrap().target, "A login form");
        let empty = PassThroughRecord { answer: " ".into(), ..r.clone() };
        assert!(pass_through(&empty).is_err());
        let wrong = PassThroughRecord { kind: TaskKind::Ocr, ..r };
        assert_eq!(pass_through(&wrong), Err(TaskgenError::WrongKind(TaskKind::Ocr)));
    }

    #[test]
    fn screen_samples_are_deterministic() {
        let mut e = element("a", SHARE_BOX, "Button", Some("Share"), Some("share icon"));
        e.expressions.push(ReferringExpression::new(ReKind::Intent, "share the page"));
        let rec = ScreenRecord { screenshot: screen(), elements: vec![e] };
        let templates = TemplateSet::builtin();
        let a = samples_for_screen(&rec, ScreenTasks::default(), &templates, 5).unwrap();
        let b = samples_for_screen(&rec, ScreenTasks::default(), &templates, 5).unwrap();
        assert_eq!(a, b);
        let kinds: Vec<TaskKind> = a.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TaskKind::Textgnd,
                TaskKind::Ocr,
                TaskKind::Icongnd,
                TaskKind::Iconref,
                TaskKind::Intentgnd,
                TaskKind::WidgetListing
            ]
        );
    }

    proptest! {
        #[test]
        fn grounding_target_inside_box(
            w in 1u32..4000, h in 1u32..4000,
            fl in 0.0f64..1.0, ft in 0.0f64..1.0, fw in 0.0f64..1.0, fh in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let left = (fl * f64::from(w)) as i32;
            let top = (ft * f64::from(h)) as i32;
            let right = left + ((fw * f64::from(w - left as u32)) as i32).max(0);
            let bottom = top + ((fh * f64::from(h - top as u32)) as i32).max(0);
            let bbox = BBox { left, top, right, bottom };
            let t = GroundingTriplet {
                screenshot: ScreenshotMeta::new("p", w, h, Platform::Web),
                re: ReferringExpression::new(ReKind::Description, "the thing"),
                target_bbox: bbox,
            };
            let templates = TemplateSet::builtin();
            let s = gen_grounding(&t, TaskKind::Elemgnd, &templates, seed).unwrap();
            let p = parse_norm_point(&s.target).unwrap();
            prop_assert!(p.is_valid());
            let px = denormalize_point(p, &t.screenshot);
            // a box narrower than one grid step may hold no representable point
            let grid_w = f64::from(w) / 1000.0;
            let grid_h = f64::from(h) / 1000.0;
            if bbox.width() as f64 >= grid_w && bbox.height() as f64 >= grid_h {
                prop_assert!(point_in_bbox(px, &bbox), "{:?} not in {:?}", px, bbox);
            }
            prop_assert_eq!(gen_grounding(&t, TaskKind::Elemgnd, &templates, seed).unwrap(), s);
        }
    }
}
