//! Annotation denoising.
//!
//! Element rules run in a fixed order and an element is attributed to the
//! first rule it fails; later rules never see it:
//!
//! 1. bounding box outside the screenshot or of zero area
//! 2. box covering more than 65% of the screen (likely a container)
//! 3. box whose shorter side is under 18 px
//! 4. blank region (grayscale population std below 5)
//! 5. box identical to an earlier surviving element on the same screen
//! 6. displayed text the recognizer cannot read back (similarity below 22)
//!
//! Episode cleaning collapses repeated steps and flags blank targets and
//! reasoning that names a different action than the one taken.

mod keywords;
mod providers;

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{serialize_action, SerializeMode};
use crate::model::{BBox, ElementRecord, Episode, ScreenRecord, ScreenshotMeta};
use crate::report::percent_one_decimal;
use crate::text;

pub use keywords::{KeywordTable, KeywordTableError};
pub use providers::{CommandOcr, ImagePixels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRule {
    InvalidBbox,
    Oversized,
    Tiny,
    Blank,
    Duplicate,
    InvisibleText,
    EpisodeRepeat,
    EpisodeBlankTarget,
    EpisodeReasonMismatch,
}

impl NoiseRule {
    pub const ELEMENT_RULES: [NoiseRule; 6] = [
        NoiseRule::InvalidBbox,
        NoiseRule::Oversized,
        NoiseRule::Tiny,
        NoiseRule::Blank,
        NoiseRule::Duplicate,
        NoiseRule::InvisibleText,
    ];

    pub const EPISODE_RULES: [NoiseRule; 3] = [
        NoiseRule::EpisodeRepeat,
        NoiseRule::EpisodeBlankTarget,
        NoiseRule::EpisodeReasonMismatch,
    ];

    /// Procedure number; all episode checks share number 7.
    pub fn number(self) -> u8 {
        match self {
            NoiseRule::InvalidBbox => 1,
            NoiseRule::Oversized => 2,
            NoiseRule::Tiny => 3,
            NoiseRule::Blank => 4,
            NoiseRule::Duplicate => 5,
            NoiseRule::InvisibleText => 6,
            _ => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseRule::InvalidBbox => "invalid_bbox",
            NoiseRule::Oversized => "oversized",
            NoiseRule::Tiny => "tiny",
            NoiseRule::Blank => "blank",
            NoiseRule::Duplicate => "duplicate",
            NoiseRule::InvisibleText => "invisible_text",
            NoiseRule::EpisodeRepeat => "episode_repeat",
            NoiseRule::EpisodeBlankTarget => "episode_blank_target",
            NoiseRule::EpisodeReasonMismatch => "episode_reason_mismatch",
        }
    }
}

impl fmt::Display for NoiseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which of the six element rules are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct RuleMask(u8);

#[derive(Debug, Error, PartialEq)]
#[error("invalid rule list `{0}`: expected comma-separated rule numbers 1-6")]
pub struct RuleMaskError(String);

impl RuleMask {
    pub const ALL: RuleMask = RuleMask(0b11_1111);

    pub fn enabled(self, rule: NoiseRule) -> bool {
        match rule.number() {
            n @ 1..=6 => self.0 & (1 << (n - 1)) != 0,
            _ => true,
        }
    }

    pub fn from_numbers(numbers: &[u8]) -> Result<Self, RuleMaskError> {
        let mut bits = 0u8;
        for &n in numbers {
            if !(1..=6).contains(&n) {
                return Err(RuleMaskError(format!("{numbers:?}")));
            }
            bits |= 1 << (n - 1);
        }
        Ok(RuleMask(bits))
    }

    pub fn numbers(self) -> Vec<u8> {
        (1..=6).filter(|n| self.0 & (1 << (n - 1)) != 0).collect()
    }
}

impl Default for RuleMask {
    fn default() -> Self {
        RuleMask::ALL
    }
}

impl std::str::FromStr for RuleMask {
    type Err = RuleMaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let numbers = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<u8>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| RuleMaskError(s.to_string()))?;
        RuleMask::from_numbers(&numbers).map_err(|_| RuleMaskError(s.to_string()))
    }
}

impl TryFrom<Vec<u8>> for RuleMask {
    type Error = RuleMaskError;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        RuleMask::from_numbers(&v)
    }
}

impl From<RuleMask> for Vec<u8> {
    fn from(m: RuleMask) -> Self {
        m.numbers()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub rule_mask: RuleMask,
    pub max_area_ratio: f64,
    pub min_side_px: i64,
    pub min_color_std: f64,
    pub min_ocr_similarity: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            rule_mask: RuleMask::ALL,
            max_area_ratio: 0.65,
            min_side_px: 18,
            min_color_std: 5.0,
            min_ocr_similarity: 22.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// Grayscale intensities of a screenshot region, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRegion {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

pub trait PixelProvider: Sync {
    fn region(&self, screen: &ScreenshotMeta, bbox: &BBox) -> Result<GrayRegion, ProviderError>;
}

pub trait TextRecognizer: Sync {
    fn recognize(&self, screen: &ScreenshotMeta, bbox: &BBox) -> Result<String, ProviderError>;
}

/// Rule 1.
pub fn check_bbox(e: &ElementRecord, screen: &ScreenshotMeta) -> Option<NoiseRule> {
    (!e.bbox.is_valid() || !e.bbox.within(screen)).then_some(NoiseRule::InvalidBbox)
}

pub fn area_ratio(bbox: &BBox, screen: &ScreenshotMeta) -> f64 {
    bbox.area() as f64 / screen.area() as f64
}

/// Rule 2.
pub fn check_oversized(
    e: &ElementRecord,
    screen: &ScreenshotMeta,
    max_ratio: f64,
) -> Option<NoiseRule> {
    (area_ratio(&e.bbox, screen) > max_ratio).then_some(NoiseRule::Oversized)
}

/// Rule 3.
pub fn check_tiny(e: &ElementRecord, min_side_px: i64) -> Option<NoiseRule> {
    (e.bbox.width().min(e.bbox.height()) < min_side_px).then_some(NoiseRule::Tiny)
}

/// Population standard deviation of the intensities.
pub fn region_std(region: &GrayRegion) -> f64 {
    let (n, spread) = spread(&region.pixels);
    if n == 0 {
        return 0.0;
    }
    (spread as f64).sqrt() / n as f64
}

/// `n * Σx² − (Σx)²`, which equals `n² · variance` exactly.
fn spread(pixels: &[u8]) -> (u128, u128) {
    let n = pixels.len() as u128;
    let (sum, sumsq) = pixels.iter().fold((0u128, 0u128), |(s, q), &p| {
        let p = u128::from(p);
        (s + p, q + p * p)
    });
    (n, n * sumsq - sum * sum)
}

/// `std < min_std`, decided on integers when `min_std²` is integral.
pub fn is_blank(region: &GrayRegion, min_std: f64) -> bool {
    let (n, spread) = spread(&region.pixels);
    if n == 0 {
        return true;
    }
    let t2 = min_std * min_std;
    if t2.fract() == 0.0 && (0.0..1e15).contains(&t2) {
        spread < (t2 as u128) * n * n
    } else {
        region_std(region) < min_std
    }
}

/// Rule 4. Returns the verdict and the measured std.
pub fn check_blank(
    e: &ElementRecord,
    screen: &ScreenshotMeta,
    pixels: &dyn PixelProvider,
    min_std: f64,
) -> Result<(Option<NoiseRule>, f64), ProviderError> {
    let region = fetch_region(screen, &e.bbox, pixels)?;
    let std = region_std(&region);
    Ok((is_blank(&region, min_std).then_some(NoiseRule::Blank), std))
}

fn fetch_region(
    screen: &ScreenshotMeta,
    bbox: &BBox,
    pixels: &dyn PixelProvider,
) -> Result<GrayRegion, ProviderError> {
    let region = pixels.region(screen, bbox)?;
    if i64::from(region.width) != bbox.width()
        || i64::from(region.height) != bbox.height()
        || region.pixels.len() != (region.width as usize) * (region.height as usize)
    {
        return Err(ProviderError(format!(
            "pixel provider returned {}x{} region for a {}x{} box",
            region.width,
            region.height,
            bbox.width(),
            bbox.height()
        )));
    }
    Ok(region)
}

/// Rule 5 over one screen: `true` marks a duplicate of an earlier box.
pub fn dedup_boxes(elements: &[&ElementRecord]) -> Vec<bool> {
    let mut seen = HashSet::with_capacity(elements.len());
    elements.iter().map(|e| !seen.insert(e.bbox)).collect()
}

/// Rule 6. Elements without text are never flagged. Returns the verdict and
/// the measured similarity when one was computed.
pub fn check_invisible_text(
    e: &ElementRecord,
    screen: &ScreenshotMeta,
    ocr: &dyn TextRecognizer,
    min_similarity: f64,
) -> Result<(Option<NoiseRule>, Option<f64>), ProviderError> {
    let Some(expected) = e.non_empty_text() else {
        return Ok((None, None));
    };
    let seen = ocr.recognize(screen, &e.bbox)?;
    let sim = text::similarity(&seen, expected);
    let below = text::similarity_below(&seen, expected, min_similarity);
    Ok((below.then_some(NoiseRule::InvisibleText), Some(sim)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseVerdict {
    pub id: String,
    pub removed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failing_rule: Option<NoiseRule>,
    /// Rules that flagged the item without removing it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<NoiseRule>,
    /// Rules that could not be evaluated because a provider failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<NoiseRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_dim_px: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_similarity: Option<f64>,
}

impl DenoiseVerdict {
    fn new(id: String) -> Self {
        DenoiseVerdict {
            id,
            removed: false,
            first_failing_rule: None,
            flags: Vec::new(),
            skipped: Vec::new(),
            area_ratio: None,
            min_dim_px: None,
            color_std: None,
            ocr_similarity: None,
        }
    }

    fn remove(&mut self, rule: NoiseRule) {
        self.removed = true;
        self.first_failing_rule = Some(rule);
    }
}

/// Optional external capabilities. Rules 4 and 6 are skipped when theirs is absent.
#[derive(Clone, Copy, Default)]
pub struct Providers<'a> {
    pub pixels: Option<&'a dyn PixelProvider>,
    pub ocr: Option<&'a dyn TextRecognizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutcome {
    pub cleaned: ScreenRecord,
    pub verdicts: Vec<DenoiseVerdict>,
}

/// Runs rules 1-6 over the elements of one screenshot.
pub fn denoise_screen(
    record: &ScreenRecord,
    providers: Providers<'_>,
    cfg: &DenoiseConfig,
) -> ScreenOutcome {
    let screen = &record.screenshot;
    let mask = cfg.rule_mask;
    let mut verdicts: Vec<DenoiseVerdict> = record
        .elements
        .iter()
        .enumerate()
        .map(|(i, _)| DenoiseVerdict::new(format!("{}:{}", screen.id, i)))
        .collect();

    for (e, v) in record.elements.iter().zip(verdicts.iter_mut()) {
        if mask.enabled(NoiseRule::InvalidBbox) {
            if let Some(rule) = check_bbox(e, screen) {
                v.remove(rule);
                continue;
            }
        }
        if e.bbox.is_valid() {
            v.area_ratio = Some(area_ratio(&e.bbox, screen));
            v.min_dim_px = Some(e.bbox.width().min(e.bbox.height()));
        }
        if mask.enabled(NoiseRule::Oversized) {
            if let Some(rule) = check_oversized(e, screen, cfg.max_area_ratio) {
                v.remove(rule);
                continue;
            }
        }
        if mask.enabled(NoiseRule::Tiny) {
            if let Some(rule) = check_tiny(e, cfg.min_side_px) {
                v.remove(rule);
                continue;
            }
        }
        if mask.enabled(NoiseRule::Blank) {
            if let Some(pixels) = providers.pixels {
                match check_blank(e, screen, pixels, cfg.min_color_std) {
                    Ok((verdict, std)) => {
                        v.color_std = Some(std);
                        if let Some(rule) = verdict {
                            v.remove(rule);
                        }
                    }
                    Err(_) => v.skipped.push(NoiseRule::Blank),
                }
            }
        }
    }

    if mask.enabled(NoiseRule::Duplicate) {
        let survivors: Vec<usize> = (0..verdicts.len()).filter(|&i| !verdicts[i].removed).collect();
        let refs: Vec<&ElementRecord> = survivors.iter().map(|&i| &record.elements[i]).collect();
        for (&i, dup) in survivors.iter().zip(dedup_boxes(&refs)) {
            if dup {
                verdicts[i].remove(NoiseRule::Duplicate);
            }
        }
    }

    if mask.enabled(NoiseRule::InvisibleText) {
        if let Some(ocr) = providers.ocr {
            for (e, v) in record.elements.iter().zip(verdicts.iter_mut()) {
                if v.removed {
                    continue;
                }
                match check_invisible_text(e, screen, ocr, cfg.min_ocr_similarity) {
                    Ok((verdict, sim)) => {
                        v.ocr_similarity = sim;
                        if let Some(rule) = verdict {
                            v.remove(rule);
                        }
                    }
                    Err(_) => v.skipped.push(NoiseRule::InvisibleText),
                }
            }
        }
    }

    let elements = record
        .elements
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| !v.removed)
        .map(|(e, _)| e.clone())
        .collect();
    ScreenOutcome {
        cleaned: ScreenRecord {
            screenshot: screen.clone(),
            elements,
        },
        verdicts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleStatus {
    Applied,
    /// Excluded by the rule mask.
    Masked,
    /// Enabled but the required provider was not configured.
    NoProvider,
}

impl RuleStatus {
    pub fn is_skipped(self) -> bool {
        self != RuleStatus::Applied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub rule: NoiseRule,
    pub number: u8,
    pub status: RuleStatus,
    pub removed: u64,
    pub flagged: u64,
    pub provider_failures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditUnit {
    Elements,
    Steps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub unit: AuditUnit,
    pub total: u64,
    pub removed: u64,
    pub kept: u64,
    /// Removals over total, as a percentage with one decimal.
    pub percent_invalid: String,
    pub rules: Vec<RuleCount>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let unit = match self.unit {
            AuditUnit::Elements => "elements",
            AuditUnit::Steps => "steps",
        };
        let _ = writeln!(out, "| # | rule | status | removed | flagged | provider failures |");
        let _ = writeln!(out, "|---|------|--------|---------|---------|-------------------|");
        for r in &self.rules {
            let status = match r.status {
                RuleStatus::Applied => "applied",
                RuleStatus::Masked => "skipped (masked)",
                RuleStatus::NoProvider => "skipped (no provider)",
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.number, r.rule, status, r.removed, r.flagged, r.provider_failures
            );
        }
        let _ = writeln!(
            out,
            "\n{} {unit}, {} removed, {} kept, {}% invalid",
            self.total, self.removed, self.kept, self.percent_invalid
        );
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

/// Folds verdicts into an [`AuditReport`]; feed records in input order.
#[derive(Debug, Clone)]
pub struct AuditAccumulator {
    unit: AuditUnit,
    rules: Vec<RuleCount>,
    total: u64,
    removed: u64,
}

impl AuditAccumulator {
    pub fn for_elements(cfg: &DenoiseConfig, providers: Providers<'_>) -> Self {
        let rules = NoiseRule::ELEMENT_RULES
            .iter()
            .map(|&rule| {
                let status = if !cfg.rule_mask.enabled(rule) {
                    RuleStatus::Masked
                } else if (rule == NoiseRule::Blank && providers.pixels.is_none())
                    || (rule == NoiseRule::InvisibleText && providers.ocr.is_none())
                {
                    RuleStatus::NoProvider
                } else {
                    RuleStatus::Applied
                };
                RuleCount {
                    rule,
                    number: rule.number(),
                    status,
                    removed: 0,
                    flagged: 0,
                    provider_failures: 0,
                }
            })
            .collect();
        AuditAccumulator {
            unit: AuditUnit::Elements,
            rules,
            total: 0,
            removed: 0,
        }
    }

    pub fn for_episodes(has_pixels: bool) -> Self {
        let rules = NoiseRule::EPISODE_RULES
            .iter()
            .map(|&rule| RuleCount {
                rule,
                number: rule.number(),
                status: if rule == NoiseRule::EpisodeBlankTarget && !has_pixels {
                    RuleStatus::NoProvider
                } else {
                    RuleStatus::Applied
                },
                removed: 0,
                flagged: 0,
                provider_failures: 0,
            })
            .collect();
        AuditAccumulator {
            unit: AuditUnit::Steps,
            rules,
            total: 0,
            removed: 0,
        }
    }

    fn slot(&mut self, rule: NoiseRule) -> &mut RuleCount {
        self.rules
            .iter_mut()
            .find(|r| r.rule == rule)
            .expect("rule tracked by this accumulator")
    }

    pub fn add(&mut self, verdicts: &[DenoiseVerdict]) {
        for v in verdicts {
            self.total += 1;
            if let Some(rule) = v.first_failing_rule {
                self.removed += 1;
                self.slot(rule).removed += 1;
            }
            for &rule in &v.flags {
                self.slot(rule).flagged += 1;
            }
            for &rule in &v.skipped {
                self.slot(rule).provider_failures += 1;
            }
        }
    }

    pub fn finish(self) -> AuditReport {
        let mut notes = Vec::new();
        if self.total == 0 {
            notes.push("empty corpus: percentage computed over a zero denominator, reported as 0.0".into());
        }
        for r in &self.rules {
            match r.status {
                RuleStatus::Masked => notes.push(format!("rule {} ({}) skipped: excluded by rule mask", r.number, r.rule)),
                RuleStatus::NoProvider => notes.push(format!("rule {} ({}) skipped: no provider configured", r.number, r.rule)),
                RuleStatus::Applied => {}
            }
            if r.provider_failures > 0 {
                notes.push(format!(
                    "rule {} ({}): provider failed on {} items, which were kept",
                    r.number, r.rule, r.provider_failures
                ));
            }
        }
        AuditReport {
            unit: self.unit,
            total: self.total,
            removed: self.removed,
            kept: self.total - self.removed,
            percent_invalid: percent_one_decimal(self.removed, self.total),
            rules: self.rules,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementsOutcome {
    pub cleaned: Vec<ScreenRecord>,
    pub verdicts: Vec<DenoiseVerdict>,
    pub report: AuditReport,
}

/// Denoises a whole in-memory corpus. The CLI streams with [`denoise_screen`]
/// and [`AuditAccumulator`] instead.
pub fn denoise_elements(
    corpus: &[ScreenRecord],
    providers: Providers<'_>,
    cfg: &DenoiseConfig,
) -> ElementsOutcome {
    let mut acc = AuditAccumulator::for_elements(cfg, providers);
    let mut cleaned = Vec::with_capacity(corpus.len());
    let mut verdicts = Vec::new();
    for record in corpus {
        let out = denoise_screen(record, providers, cfg);
        acc.add(&out.verdicts);
        cleaned.push(out.cleaned);
        verdicts.extend(out.verdicts);
    }
    ElementsOutcome {
        cleaned,
        verdicts,
        report: acc.finish(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub episode: Episode,
    pub verdicts: Vec<DenoiseVerdict>,
}

/// Episode-level cleaning: (a) consecutive steps with the same serialized
/// action on the same screenshot collapse into the first, (b) steps whose
/// gold box is blank are flagged, (c) reasoning naming a different action
/// type than the gold action is flagged. Flags never remove steps.
pub fn denoise_episode(
    ep: &Episode,
    pixels: Option<&dyn PixelProvider>,
    keywords: &KeywordTable,
    min_color_std: f64,
) -> EpisodeOutcome {
    let mut verdicts = Vec::with_capacity(ep.steps.len());
    let mut kept = Vec::with_capacity(ep.steps.len());
    let mut prev: Option<(String, &str)> = None;
    for (i, step) in ep.steps.iter().enumerate() {
        let mut v = DenoiseVerdict::new(ep.step_id(i));
        let key = serialize_action(&step.gold_action, SerializeMode::Paper);
        let repeat = prev
            .as_ref()
            .is_some_and(|(a, s)| *a == key && *s == step.screenshot.id);
        if repeat {
            v.remove(NoiseRule::EpisodeRepeat);
            verdicts.push(v);
            continue;
        }
        prev = Some((key, step.screenshot.id.as_str()));

        if let (Some(bbox), Some(pixels)) = (step.gold_bbox.as_ref(), pixels) {
            match fetch_region(&step.screenshot, bbox, pixels) {
                Ok(region) => {
                    v.color_std = Some(region_std(&region));
                    if is_blank(&region, min_color_std) {
                        v.flags.push(NoiseRule::EpisodeBlankTarget);
                    }
                }
                Err(_) => v.skipped.push(NoiseRule::EpisodeBlankTarget),
            }
        }
        if let Some(reasoning) = step.reasoning.as_deref() {
            if keywords.mismatch(reasoning, step.gold_action.action_type()) {
                v.flags.push(NoiseRule::EpisodeReasonMismatch);
            }
        }
        verdicts.push(v);
        kept.push(step.clone());
    }
    let mut episode = Episode {
        id: ep.id.clone(),
        platform: ep.platform,
        goal: ep.goal.clone(),
        steps: kept,
    };
    episode.reindex();
    EpisodeOutcome { episode, verdicts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{MobileAction, UnifiedAction};
    use crate::model::{NormPoint, Platform, Step};
    use std::collections::HashMap;

    fn screen(w: u32, h: u32) -> ScreenshotMeta {
        ScreenshotMeta::new("s", w, h, Platform::Mobile)
    }

    fn el(l: i32, t: i32, r: i32, b: i32) -> ElementRecord {
        ElementRecord::new("e", BBox { left: l, top: t, right: r, bottom: b })
    }

    /// Serves fixed regions keyed by box.
    struct FixedPixels(HashMap<BBox, Vec<u8>>);

    impl PixelProvider for FixedPixels {
        fn region(&self, _: &ScreenshotMeta, bbox: &BBox) -> Result<GrayRegion, ProviderError> {
            let pixels = self
                .0
                .get(bbox)
                .cloned()
                .ok_or_else(|| ProviderError("no pixels".into()))?;
            Ok(GrayRegion {
                width: bbox.width() as u32,
                height: bbox.height() as u32,
                pixels,
            })
        }
    }

    struct FixedOcr(&'static str);

    impl TextRecognizer for FixedOcr {
        fn recognize(&self, _: &ScreenshotMeta, _: &BBox) -> Result<String, ProviderError> {
            Ok(self.0.to_string())
        }
    }

    fn region(pixels: Vec<u8>) -> GrayRegion {
        GrayRegion {
            width: pixels.len() as u32,
            height: 1,
            pixels,
        }
    }

    #[test]
    fn bbox_examples() {
        let s = screen(1080, 1920);
        assert_eq!(check_bbox(&el(0, 0, 100, 50), &s), None);
        assert_eq!(check_bbox(&el(0, 0, 0, 50), &s), Some(NoiseRule::InvalidBbox));
        assert_eq!(check_bbox(&el(1000, 0, 1100, 50), &s), Some(NoiseRule::InvalidBbox));
        assert_eq!(check_bbox(&el(-1, 0, 10, 50), &s), Some(NoiseRule::InvalidBbox));
    }

    #[test]
    fn oversized_examples() {
        assert_eq!(
            check_oversized(&el(0, 0, 800, 1700), &screen(1000, 2000), 0.65),
            Some(NoiseRule::Oversized)
        );
        assert_eq!(check_oversized(&el(0, 0, 650, 1000), &screen(1000, 1000), 0.65), None);
        assert_eq!(check_oversized(&el(0, 0, 10, 10), &screen(1000, 1000), 0.65), None);
    }

    #[test]
    fn tiny_examples() {
        assert_eq!(check_tiny(&el(0, 0, 17, 100), 18), Some(NoiseRule::Tiny));
        assert_eq!(check_tiny(&el(0, 0, 18, 18), 18), None);
        assert_eq!(check_tiny(&el(0, 0, 100, 17), 18), Some(NoiseRule::Tiny));
    }

    #[test]
    fn blank_examples() {
        assert!(is_blank(&region(vec![128; 64]), 5.0));
        assert_eq!(region_std(&region(vec![128; 64])), 0.0);
        let half: Vec<u8> = (0..64).map(|i| if i < 32 { 0 } else { 255 }).collect();
        assert_eq!(region_std(&region(half.clone())), 127.5);
        assert!(!is_blank(&region(half), 5.0));
        // 9 tens and 11 zeros: variance 0.45 * 0.55 * 100 = 24.75, std ~4.975
        let below: Vec<u8> = (0..20).map(|i| if i < 9 { 10 } else { 0 }).collect();
        assert!(is_blank(&region(below), 5.0));
        // half 0 / half 10: std exactly 5
        let at: Vec<u8> = (0..20).map(|i| if i < 10 { 10 } else { 0 }).collect();
        assert_eq!(region_std(&region(at.clone())), 5.0);
        assert!(!is_blank(&region(at), 5.0));
    }

    #[test]
    fn dedup_examples() {
        let a = el(0, 0, 10, 10);
        let b = el(0, 0, 10, 10);
        assert_eq!(dedup_boxes(&[&a, &b]), vec![false, true]);
        let c = el(0, 0, 10, 11);
        assert_eq!(dedup_boxes(&[&a, &c]), vec![false, false]);
        assert!(dedup_boxes(&[]).is_empty());
    }

    #[test]
    fn invisible_text_examples() {
        let s = screen(100, 100);
        let mut e = el(0, 0, 50, 50);
        e.text = Some("Submit".into());
        let (v, sim) = check_invisible_text(&e, &s, &FixedOcr(""), 22.0).unwrap();
        assert_eq!((v, sim), (Some(NoiseRule::InvisibleText), Some(0.0)));
        let (v, sim) = check_invisible_text(&e, &s, &FixedOcr("Submit"), 22.0).unwrap();
        assert_eq!((v, sim), (None, Some(100.0)));
        let (v, sim) = check_invisible_text(&e, &s, &FixedOcr("Subrnit"), 22.0).unwrap();
        assert_eq!(v, None);
        assert!((sim.unwrap() - 500.0 / 7.0).abs() < 1e-9);
        e.text = None;
        assert_eq!(check_invisible_text(&e, &s, &FixedOcr(""), 22.0).unwrap(), (None, None));
    }

    #[test]
    fn attribution_goes_to_first_failing_rule() {
        let s = screen(1000, 1000);
        // Oversized and tiny at once is impossible; use zero-area + duplicate.
        let rec = ScreenRecord {
            screenshot: s,
            elements: vec![el(0, 0, 0, 10), el(0, 0, 0, 10), el(0, 0, 900, 900), el(0, 0, 10, 100)],
        };
        let out = denoise_screen(&rec, Providers::default(), &DenoiseConfig::default());
        let rules: Vec<_> = out.verdicts.iter().map(|v| v.first_failing_rule).collect();
        assert_eq!(
            rules,
            vec![
                Some(NoiseRule::InvalidBbox),
                Some(NoiseRule::InvalidBbox),
                Some(NoiseRule::Oversized),
                Some(NoiseRule::Tiny)
            ]
        );
        assert!(out.cleaned.elements.is_empty());
    }

    #[test]
    fn masked_rules_are_reported_as_skipped() {
        let cfg = DenoiseConfig {
            rule_mask: "1,2,3,5".parse().unwrap(),
            ..Default::default()
        };
        let report = denoise_elements(&[], Providers::default(), &cfg).report;
        let skipped: Vec<u8> = report.rules.iter().filter(|r| r.status.is_skipped()).map(|r| r.number).collect();
        assert_eq!(skipped, vec![4, 6]);
        assert_eq!(report.percent_invalid, "0.0");
        assert!(report.notes.iter().any(|n| n.contains("zero denominator")));
    }

    #[test]
    fn provider_failure_keeps_element() {
        let s = screen(1000, 1000);
        let rec = ScreenRecord {
            screenshot: s,
            elements: vec![el(0, 0, 100, 100)],
        };
        let pixels = FixedPixels(HashMap::new());
        let providers = Providers {
            pixels: Some(&pixels),
            ocr: None,
        };
        let out = denoise_elements(&[rec], providers, &DenoiseConfig::default());
        assert_eq!(out.cleaned[0].elements.len(), 1);
        assert_eq!(out.verdicts[0].skipped, vec![NoiseRule::Blank]);
        assert_eq!(out.report.rules[3].provider_failures, 1);
    }

    #[test]
    fn rule_mask_parsing() {
        let m: RuleMask = "1, 2,3,5".parse().unwrap();
        assert_eq!(m.numbers(), vec![1, 2, 3, 5]);
        assert!(!m.enabled(NoiseRule::Blank));
        assert!("0,1".parse::<RuleMask>().is_err());
        assert!("x".parse::<RuleMask>().is_err());
    }

    fn step(action: MobileAction, shot: &str) -> Step {
        Step {
            screenshot: ScreenshotMeta::new(shot, 100, 100, Platform::Mobile),
            low_level_instruction: None,
            gold_action: UnifiedAction::Mobile(action),
            gold_bbox: None,
            history_index: 0,
            reasoning: None,
            provenance: None,
        }
    }

    fn episode(steps: Vec<Step>) -> Episode {
        let mut ep = Episode {
            id: "ep".into(),
            platform: Platform::Mobile,
            goal: "g".into(),
            steps,
        };
        ep.reindex();
        ep
    }

    #[test]
    fn repeated_steps_collapse() {
        let click = MobileAction::Click {
            target: NormPoint { x: 500, y: 500 },
        };
        let ep = episode(vec![
            step(click.clone(), "s1"),
            step(click.clone(), "s1"),
            step(MobileAction::InputText { text: "a".into() }, "s2"),
        ]);
        let out = denoise_episode(&ep, None, &KeywordTable::builtin(), 5.0);
        assert_eq!(out.episode.steps.len(), 2);
        assert_eq!(out.episode.steps[1].history_index, 1);
        assert_eq!(out.verdicts[1].first_failing_rule, Some(NoiseRule::EpisodeRepeat));
        // same action on a different screenshot is not a repeat
        let ep = episode(vec![step(click.clone(), "s1"), step(click, "s2")]);
        assert_eq!(denoise_episode(&ep, None, &KeywordTable::builtin(), 5.0).episode.steps.len(), 2);
    }

    #[test]
    fn blank_target_is_flagged() {
        let bbox = BBox { left: 10, top: 10, right: 30, bottom: 30 };
        let mut s = step(MobileAction::Click { target: NormPoint { x: 200, y: 200 } }, "s1");
        s.gold_bbox = Some(bbox);
        let pixels = FixedPixels(HashMap::from([(bbox, vec![200u8; 400])]));
        let out = denoise_episode(&episode(vec![s]), Some(&pixels), &KeywordTable::builtin(), 5.0);
        assert_eq!(out.verdicts[0].flags, vec![NoiseRule::EpisodeBlankTarget]);
        assert!(!out.verdicts[0].removed);
        assert_eq!(out.episode.steps.len(), 1);
    }

    #[test]
    fn reasoning_mismatch_is_flagged() {
        let mut s = step(MobileAction::NavigateBack, "s1");
        s.reasoning = Some("I will type the query".into());
        let out = denoise_episode(&episode(vec![s]), None, &KeywordTable::builtin(), 5.0);
        assert_eq!(out.verdicts[0].flags, vec![NoiseRule::EpisodeReasonMismatch]);
    }
}
