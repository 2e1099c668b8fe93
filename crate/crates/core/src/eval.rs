//! Offline scoring of agent and grounding predictions.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{
    parse_action, serialize_action, DesktopAction, MobileAction, SerializeMode, UnifiedAction,
    WebAction, LOCALIZATION_ACTIONS,
};
use crate::model::{
    denormalize_point, parse_norm_point, point_in_bbox, BBox, Episode, NormPoint, PixelPoint,
    ScreenshotMeta, Step,
};
use crate::report::format_percent;
use crate::text::similarity_below;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickRule {
    /// Inside the gold box; exact point match when no box is known.
    BboxContainment,
    /// Inside the gold box, or within `radius` of the gold point when no box
    /// is known.
    BboxThenRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextRule {
    /// Equal after trimming and case folding.
    ExactCasefold,
    /// Normalized Levenshtein similarity at or above the threshold (0-100).
    Fuzzy(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchPolicy {
    pub click_rule: ClickRule,
    /// Unit-square distance for point matches without a gold box.
    pub radius: f64,
    pub text_rule: TextRule,
    pub compare_swipe_distance: bool,
    pub compare_answer: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            click_rule: ClickRule::BboxThenRadius,
            radius: 0.14,
            text_rule: TextRule::ExactCasefold,
            compare_swipe_distance: false,
            compare_answer: true,
        }
    }
}

impl MatchPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0 && self.radius <= std::f64::consts::SQRT_2) {
            return Err(format!("radius {} outside (0, sqrt(2)]", self.radius));
        }
        if let TextRule::Fuzzy(t) = self.text_rule {
            if !(0.0..=100.0).contains(&t) {
                return Err(format!("fuzzy threshold {t} outside [0, 100]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ParseError,
    WrongType,
    WrongTarget,
    WrongDirection,
    WrongDistance,
    WrongText,
    WrongTab,
    WrongStatus,
    WrongAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_id: String,
    pub action_type: String,
    pub type_correct: bool,
    pub args_correct: bool,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<FailureReason>,
}

impl StepOutcome {
    fn new(step_id: String, gold: &UnifiedAction, type_correct: bool, args: Result<(), FailureReason>) -> Self {
        let args_correct = type_correct && args.is_ok();
        let failure_reason = if !type_correct {
            Some(FailureReason::WrongType)
        } else {
            args.err()
        };
        StepOutcome {
            step_id,
            action_type: gold.action_type().to_string(),
            type_correct,
            args_correct,
            success: type_correct && args_correct,
            failure_reason,
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub step_id: String,
    pub output: String,
}

/// A model output parsed against the platform of its gold step.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub step_id: String,
    pub output: String,
    pub parsed: Result<UnifiedAction, String>,
}

impl Prediction {
    pub fn parse(record: &PredictionRecord, platform: crate::model::Platform) -> Prediction {
        Prediction {
            step_id: record.step_id.clone(),
            output: record.output.clone(),
            parsed: parse_action(&record.output, platform).map_err(|e| e.to_string()),
        }
    }
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

fn text_eq(pred: &str, gold: &str, rule: TextRule) -> bool {
    match rule {
        TextRule::ExactCasefold => fold(pred) == fold(gold),
        TextRule::Fuzzy(threshold) => !similarity_below(pred, gold, threshold),
    }
}

fn check(ok: bool, reason: FailureReason) -> Result<(), FailureReason> {
    if ok {
        Ok(())
    } else {
        Err(reason)
    }
}

fn target_ok(
    pred: NormPoint,
    gold: NormPoint,
    bbox: Option<&BBox>,
    screen: &ScreenshotMeta,
    policy: &MatchPolicy,
) -> bool {
    match bbox {
        Some(b) => point_in_bbox(denormalize_point(pred, screen), b),
        None => match policy.click_rule {
            ClickRule::BboxThenRadius => pred.unit_distance(&gold) <= policy.radius + 1e-12,
            ClickRule::BboxContainment => pred == gold,
        },
    }
}

fn within_radius(pred: NormPoint, gold: NormPoint, policy: &MatchPolicy) -> bool {
    pred.unit_distance(&gold) <= policy.radius + 1e-12
}

/// Argument check for two actions of the same type.
fn args_match(pred: &UnifiedAction, gold: &Step, policy: &MatchPolicy) -> Result<(), FailureReason> {
    use FailureReason::*;
    let bbox = gold.gold_bbox.as_ref();
    let screen = &gold.screenshot;
    let point = |p: NormPoint, g: NormPoint| check(target_ok(p, g, bbox, screen, policy), WrongTarget);
    let ends = |ps: NormPoint, pe: NormPoint, gs: NormPoint, ge: NormPoint| {
        check(within_radius(ps, gs, policy) && within_radius(pe, ge, policy), WrongTarget)
    };
    let text = |p: &str, g: &str| check(text_eq(p, g, policy.text_rule), WrongText);
    let scroll = |pd, gd, pdist, gdist| {
        check(pd == gd, WrongDirection)?;
        check(!policy.compare_swipe_distance || pdist == gdist, WrongDistance)
    };
    let status = |pg, gg, pa: &str, ga: &str| {
        check(pg == gg, WrongStatus)?;
        check(!policy.compare_answer || text_eq(pa, ga, policy.text_rule), WrongAnswer)
    };
    match (pred, &gold.gold_action) {
        (UnifiedAction::Mobile(p), UnifiedAction::Mobile(g)) => {
            use MobileAction as M;
            match (p, g) {
                (M::Click { target: p }, M::Click { target: g })
                | (M::LongPress { target: p }, M::LongPress { target: g }) => point(*p, *g),
                (
                    M::Swipe { direction: pd, distance: pdist, .. },
                    M::Swipe { direction: gd, distance: gdist, .. },
                ) => scroll(pd, gd, pdist, gdist),
                (M::InputText { text: p }, M::InputText { text: g }) => text(p, g),
                (M::Drag { start: ps, end: pe }, M::Drag { start: gs, end: ge }) => ends(*ps, *pe, *gs, *ge),
                (
                    M::Status { goal_status: pg, answer: pa },
                    M::Status { goal_status: gg, answer: ga },
                ) => status(pg, gg, pa, ga),
                _ => Ok(()),
            }
        }
        (UnifiedAction::Web(p), UnifiedAction::Web(g)) => {
            use WebAction as W;
            match (p, g) {
                (W::Click { target: p }, W::Click { target: g }) => point(*p, *g),
                (
                    W::Scroll { direction: pd, distance: pdist },
                    W::Scroll { direction: gd, distance: gdist },
                ) => scroll(pd, gd, pdist, gdist),
                (W::InputText { text: p }, W::InputText { text: g })
                | (W::GoTo { url: p }, W::GoTo { url: g })
                | (W::SearchGoogle { query: p }, W::SearchGoogle { query: g })
                | (W::PressKey { key: p }, W::PressKey { key: g })
                | (W::Hotkey { key_comb: p }, W::Hotkey { key_comb: g }) => text(p, g),
                (W::Drag { start: ps, end: pe }, W::Drag { start: gs, end: ge })
                | (W::MoveTo { start: ps, end: pe }, W::MoveTo { start: gs, end: ge }) => {
                    ends(*ps, *pe, *gs, *ge)
                }
                (W::SwitchTab { tab: p }, W::SwitchTab { tab: g }) => check(p == g, WrongTab),
                (
                    W::Status { goal_status: pg, answer: pa },
                    W::Status { goal_status: gg, answer: ga },
                ) => status(pg, gg, pa, ga),
                _ => Ok(()),
            }
        }
        (UnifiedAction::Desktop(p), UnifiedAction::Desktop(g)) => {
            use DesktopAction as D;
            match (p, g) {
                (D::Click { target: p }, D::Click { target: g })
                | (D::RightClick { target: p }, D::RightClick { target: g })
                | (D::DoubleClick { target: p }, D::DoubleClick { target: g }) => point(*p, *g),
                (
                    D::Scroll { direction: pd, distance: pdist },
                    D::Scroll { direction: gd, distance: gdist },
                ) => scroll(pd, gd, pdist, gdist),
                (D::InputText { text: p }, D::InputText { text: g })
                | (D::PressKey { key: p }, D::PressKey { key: g })
                | (D::Hotkey { key_comb: p }, D::Hotkey { key_comb: g }) => text(p, g),
                (D::Drag { start: ps, end: pe }, D::Drag { start: gs, end: ge })
                | (D::MoveTo { start: ps, end: pe }, D::MoveTo { start: gs, end: ge }) => {
                    ends(*ps, *pe, *gs, *ge)
                }
                (
                    D::Status { goal_status: pg, answer: pa },
                    D::Status { goal_status: gg, answer: ga },
                ) => status(pg, gg, pa, ga),
                _ => Ok(()),
            }
        }
        _ => Err(WrongType),
    }
}

/// Compares a predicted action with a gold step.
pub fn match_step(pred: &UnifiedAction, gold: &Step, policy: &MatchPolicy) -> StepOutcome {
    let step_id = format!("#{}", gold.history_index);
    match_step_with_id(step_id, pred, gold, policy)
}

fn match_step_with_id(step_id: String, pred: &UnifiedAction, gold: &Step, policy: &MatchPolicy) -> StepOutcome {
    let type_correct = pred.platform() == gold.gold_action.platform()
        && pred.action_type() == gold.gold_action.action_type();
    let args = if type_correct {
        args_match(pred, gold, policy)
    } else {
        Err(FailureReason::WrongType)
    };
    StepOutcome::new(step_id, &gold.gold_action, type_correct, args)
}

fn op_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .chars()
        .map(|c| if matches!(c, '{' | '}' | ',' | '"' | '(' | ')' | ':') { ' ' } else { c })
        .collect();
    cleaned.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Token-level F1 between two action strings after stripping JSON
/// punctuation and case folding; both empty scores 1.
pub fn op_f1(pred: &str, gold: &str) -> f64 {
    let (p, g) = (op_tokens(pred), op_tokens(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{} gold steps have no prediction: {}", .0.len(), preview(.0))]
    MissingPredictions(Vec<String>),
    #[error("duplicate prediction for step `{0}`")]
    DuplicatePrediction(String),
    #[error("{} predictions match no gold step: {}", .0.len(), preview(.0))]
    UnknownPredictions(Vec<String>),
    #[error("length mismatch: {preds} predictions for {gts} gold boxes")]
    LengthMismatch { preds: usize, gts: usize },
    #[error("nothing to evaluate")]
    Empty,
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}

/// Percentage of predicted points inside their gold boxes, edges inclusive.
pub fn grounding_accuracy(preds: &[PixelPoint], gts: &[BBox]) -> Result<f64, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = preds.iter().zip(gts).filter(|(p, b)| point_in_bbox(**p, b)).count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub action_type: String,
    pub steps: u64,
    pub type_correct: u64,
    pub successes: u64,
    pub type_acc: f64,
    pub step_sr: f64,
    pub op_f1: f64,
}

/// Aggregate metrics. Percentages keep full precision; rounding happens only
/// when a report is rendered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps: u64,
    pub successes: u64,
    pub type_correct: u64,
    pub click_steps: u64,
    pub click_successes: u64,
    pub grounded_steps: u64,
    pub grounded_hits: u64,
    pub parse_errors: u64,
    pub step_sr: f64,
    pub type_acc: f64,
    /// Step success over steps whose gold action needs element localization.
    pub click_acc: Option<f64>,
    /// Predicted target inside the gold box, over steps that have one.
    pub grounding_acc: Option<f64>,
    /// Mean token-level F1, as a percentage.
    pub op_f1: f64,
    pub per_type: Vec<TypeRow>,
    pub failures: BTreeMap<FailureReason, u64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn emit_report(r: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => {
            let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), format_percent);
            let mut s = String::new();
            s.push_str("| Metric | Value |\n|---|---|\n");
            s.push_str(&format!("| Steps | {} |\n", r.steps));
            s.push_str(&format!("| Step SR | {} |\n", format_percent(r.step_sr)));
            s.push_str(&format!("| Type Acc | {} |\n", format_percent(r.type_acc)));
            s.push_str(&format!("| Click Acc | {} |\n", opt(r.click_acc)));
            s.push_str(&format!("| Grounding Acc | {} |\n", opt(r.grounding_acc)));
            s.push_str(&format!("| Op F1 | {} |\n", format_percent(r.op_f1)));
            s.push_str(&format!("| Parse errors | {} |\n", r.parse_errors));
            s.push_str("\n| Action type | Steps | Type Acc | Step SR | Op F1 |\n|---|---|---|---|---|\n");
            for row in &r.per_type {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    row.action_type,
                    row.steps,
                    format_percent(row.type_acc),
                    format_percent(row.step_sr),
                    format_percent(row.op_f1)
                ));
            }
            if !r.notes.is_empty() {
                s.push('\n');
                for n in &r.notes {
                    s.push_str(&format!("- {n}\n"));
                }
            }
            s
        }
    }
}

#[derive(Default)]
struct TypeAcc {
    steps: u64,
    type_correct: u64,
    successes: u64,
    f1_sum: f64,
}

/// Per-step scores, produced independently for each step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredStep {
    pub outcome: StepOutcome,
    pub op_f1: f64,
    /// `Some(hit)` when the gold step has a box to hit.
    pub grounding_hit: Option<bool>,
}

/// Joins predictions to gold steps and accumulates metrics. Episodes can be
/// scored in any order (and in parallel via [`Evaluator::score_episode`]);
/// sums are reduced in a fixed order so the report does not depend on it.
pub struct Evaluator {
    policy: MatchPolicy,
    predictions: HashMap<String, PredictionRecord>,
    seen: Vec<String>,
    missing: Vec<String>,
    scored: Vec<(String, ScoredStep)>,
}

impl Evaluator {
    pub fn new(records: Vec<PredictionRecord>, policy: MatchPolicy) -> Result<Self, EvalError> {
        let mut predictions = HashMap::with_capacity(records.len());
        for r in records {
            if predictions.contains_key(&r.step_id) {
                return Err(EvalError::DuplicatePrediction(r.step_id));
            }
            predictions.insert(r.step_id.clone(), r);
        }
        Ok(Evaluator {
            policy,
            predictions,
            seen: Vec::new(),
            missing: Vec::new(),
            scored: Vec::new(),
        })
    }

    /// Scores every step of an episode that has a prediction; returns the ids
    /// of steps without one.
    pub fn score_episode(&self, ep: &Episode) -> (Vec<(String, ScoredStep)>, Vec<String>) {
        let mut scored = Vec::with_capacity(ep.steps.len());
        let mut missing = Vec::new();
        for (i, step) in ep.steps.iter().enumerate() {
            let id = ep.step_id(i);
            match self.predictions.get(&id) {
                Some(rec) => {
                    let pred = Prediction::parse(rec, ep.platform);
                    scored.push((id.clone(), score_step(id, &pred, step, &self.policy)));
                }
                None => missing.push(id),
            }
        }
        (scored, missing)
    }

    pub fn add(&mut self, scored: Vec<(String, ScoredStep)>, missing: Vec<String>) {
        self.seen.extend(scored.iter().map(|(id, _)| id.clone()));
        self.scored.extend(scored);
        self.missing.extend(missing);
    }

    pub fn add_episode(&mut self, ep: &Episode) {
        let (scored, missing) = self.score_episode(ep);
        self.add(scored, missing);
    }

    /// Outcomes sorted by step id.
    pub fn outcomes(&self) -> Vec<StepOutcome> {
        let mut v: Vec<&(String, ScoredStep)> = self.scored.iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(_, s)| s.outcome.clone()).collect()
    }

    pub fn finish(mut self) -> Result<MetricsReport, EvalError> {
        if !self.missing.is_empty() {
            self.missing.sort();
            return Err(EvalError::MissingPredictions(self.missing));
        }
        for id in &self.seen {
            self.predictions.remove(id);
        }
        if !self.predictions.is_empty() {
            let mut unknown: Vec<String> = self.predictions.into_keys().collect();
            unknown.sort();
            return Err(EvalError::UnknownPredictions(unknown));
        }
        if self.scored.is_empty() {
            return Err(EvalError::Empty);
        }
        self.scored.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(aggregate(self.scored.iter().map(|(_, s)| s)))
    }
}

fn score_step(step_id: String, pred: &Prediction, gold: &Step, policy: &MatchPolicy) -> ScoredStep {
    let gold_str = serialize_action(&gold.gold_action, SerializeMode::Paper);
    match &pred.parsed {
        Ok(action) => {
            let outcome = match_step_with_id(step_id, action, gold, policy);
            let grounding_hit = gold.gold_bbox.as_ref().map(|b| {
                action
                    .target()
                    .is_some_and(|p| point_in_bbox(denormalize_point(p, &gold.screenshot), b))
            });
            ScoredStep {
                outcome,
                op_f1: op_f1(&serialize_action(action, SerializeMode::Paper), &gold_str),
                grounding_hit,
            }
        }
        Err(_) => ScoredStep {
            outcome: StepOutcome {
                step_id,
                action_type: gold.gold_action.action_type().to_string(),
                type_correct: false,
                args_correct: false,
                success: false,
                failure_reason: Some(FailureReason::ParseError),
            },
            op_f1: op_f1(&pred.output, &gold_str),
            grounding_hit: gold.gold_bbox.map(|_| false),
        },
    }
}

fn aggregate<'a>(steps: impl Iterator<Item = &'a ScoredStep>) -> MetricsReport {
    let mut r = MetricsReport::default();
    let mut types: BTreeMap<String, TypeAcc> = BTreeMap::new();
    let mut f1_sum = 0.0;
    for s in steps {
        let o = &s.outcome;
        r.steps += 1;
        r.successes += u64::from(o.success);
        r.type_correct += u64::from(o.type_correct);
        if LOCALIZATION_ACTIONS.contains(&o.action_type.as_str()) {
            r.click_steps += 1;
            r.click_successes += u64::from(o.success);
        }
        if let Some(hit) = s.grounding_hit {
            r.grounded_steps += 1;
            r.grounded_hits += u64::from(hit);
        }
        if let Some(reason) = o.failure_reason {
            *r.failures.entry(reason).or_default() += 1;
            if reason == FailureReason::ParseError {
                r.parse_errors += 1;
            }
        }
        f1_sum += s.op_f1;
        let t = types.entry(o.action_type.clone()).or_default();
        t.steps += 1;
        t.type_correct += u64::from(o.type_correct);
        t.successes += u64::from(o.success);
        t.f1_sum += s.op_f1;
    }
    r.step_sr = pct(r.successes, r.steps);
    r.type_acc = pct(r.type_correct, r.steps);
    r.click_acc = (r.click_steps > 0).then(|| pct(r.click_successes, r.click_steps));
    r.grounding_acc = (r.grounded_steps > 0).then(|| pct(r.grounded_hits, r.grounded_steps));
    r.op_f1 = if r.steps == 0 { 0.0 } else { 100.0 * f1_sum / r.steps as f64 };
    r.per_type = types
        .into_iter()
        .map(|(action_type, t)| TypeRow {
            action_type,
            steps: t.steps,
            type_correct: t.type_correct,
            successes: t.successes,
            type_acc: pct(t.type_correct, t.steps),
            step_sr: pct(t.successes, t.steps),
            op_f1: 100.0 * t.f1_sum / t.steps as f64,
        })
        .collect();
    r.notes.push("Op F1 is computed on the full serialized action string.".into());
    r
}

/// Scores a whole corpus held in memory.
pub fn step_sr(
    episodes: &[Episode],
    predictions: Vec<PredictionRecord>,
    policy: &MatchPolicy,
) -> Result<MetricsReport, EvalError> {
    let mut ev = Evaluator::new(predictions, policy.clone())?;
    for ep in episodes {
        ev.add_episode(ep);
    }
    ev.finish()
}

/// A grounding test case: the screen and the box the answer must hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingCase {
    pub id: String,
    pub screenshot: ScreenshotMeta,
    pub target_bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub cases: u64,
    pub hits: u64,
    pub unparseable: u64,
    pub accuracy: f64,
}

/// Reads a point from free-form model output: the first `(x,y)` or `[x,y]`
/// pair, or the target of a parseable click.
pub fn extract_point(output: &str) -> Option<NormPoint> {
    let bytes = output.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let close = match b {
            b'(' => b')',
            b'[' => b']',
            _ => continue,
        };
        if let Some(len) = bytes[i + 1..].iter().position(|&c| c == close) {
            let inner = &output[i + 1..i + 1 + len];
            if let Ok(p) = parse_norm_point(&format!("({inner})")) {
                return Some(p);
            }
        }
    }
    None
}

pub fn grounding_report(cases: &[GroundingCase], predictions: Vec<PredictionRecord>) -> Result<GroundingReport, EvalError> {
    let mut by_id: HashMap<String, PredictionRecord> = HashMap::with_capacity(predictions.len());
    for r in predictions {
        if by_id.contains_key(&r.step_id) {
            return Err(EvalError::DuplicatePrediction(r.step_id));
        }
        by_id.insert(r.step_id.clone(), r);
    }
    let mut missing = Vec::new();
    let (mut points, mut boxes) = (Vec::new(), Vec::new());
    let mut unparseable = 0;
    for c in cases {
        let Some(rec) = by_id.remove(&c.id) else {
            missing.push(c.id.clone());
            continue;
        };
        let p = match extract_point(&rec.output) {
            Some(p) => denormalize_point(p, &c.screenshot),
            None => {
                unparseable += 1;
                // never inside a box with non-negative coordinates
                PixelPoint::new(-1, -1)
            }
        };
        points.push(p);
        boxes.push(c.target_bbox);
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(EvalError::MissingPredictions(missing));
    }
    if !by_id.is_empty() {
        let mut unknown: Vec<String> = by_id.into_keys().collect();
        unknown.sort();
        return Err(EvalError::UnknownPredictions(unknown));
    }
    let accuracy = grounding_accuracy(&points, &boxes)?;
    let hits = points.iter().zip(&boxes).filter(|(p, b)| point_in_bbox(**p, b)).count() as u64;
    Ok(GroundingReport {
        cases: points.len() as u64,
        hits,
        unparseable,
        accuracy,
    })
}
