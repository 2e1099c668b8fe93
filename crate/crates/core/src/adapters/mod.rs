//! Conversion of source-native trajectory exports into unified [`Episode`]s.
//!
//! Every source is described by a mapping manifest (TOML, see
//! `manifests/*.toml`) that names the raw fields holding screen size, ids and
//! action arguments, and maps each raw action name to a conversion rule. The
//! rules are the only code; fixing a source mapping is a data change.

mod manifest;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::action::{
    DesktopAction, Direction, GoalStatus, MobileAction, SwipeDistance, UnifiedAction, WebAction,
};
use crate::model::{
    point_in_bbox, BBox, Episode, NormPoint, PixelPoint, Platform, ScreenshotMeta, Step, NORM_MAX,
};

pub use manifest::{
    ActionRule, BBoxFormat, CoordinateSpace, Manifest, ManifestError, Registry, ScreenFields,
    StepFields, ValueRef,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Aitw,
    Aitz,
    Amex,
    Androidcontrol,
    Guiodyssey,
    GuiactMobile,
    GuiactWeb,
    Mind2web,
    Weblinx,
    OmniactDesktop,
}

impl Source {
    pub const ALL: [Source; 10] = [
        Source::Aitw,
        Source::Aitz,
        Source::Amex,
        Source::Androidcontrol,
        Source::Guiodyssey,
        Source::GuiactMobile,
        Source::GuiactWeb,
        Source::Mind2web,
        Source::Weblinx,
        Source::OmniactDesktop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Aitw => "aitw",
            Source::Aitz => "aitz",
            Source::Amex => "amex",
            Source::Androidcontrol => "androidcontrol",
            Source::Guiodyssey => "guiodyssey",
            Source::GuiactMobile => "guiact_mobile",
            Source::GuiactWeb => "guiact_web",
            Source::Mind2web => "mind2web",
            Source::Weblinx => "weblinx",
            Source::OmniactDesktop => "omniact_desktop",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown source `{s}`"))
    }
}

/// One episode as exported by its source dataset. Step records are kept
/// verbatim; the manifest says how to read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEpisode {
    pub source: Source,
    pub episode_id: String,
    #[serde(default)]
    pub goal: String,
    pub raw_steps: Vec<Map<String, Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    /// Unit-square distance at or below which a two-point gesture is a tap.
    pub tap_vs_swipe_threshold: f64,
    /// Upper bounds of the short and medium swipe buckets.
    pub swipe_distance_buckets: [f64; 2],
    pub history_window: usize,
    /// Map direction-only scrolls to the opposite finger direction
    /// (scroll down = swipe up) on mobile.
    pub invert_scroll: bool,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            tap_vs_swipe_threshold: 0.04,
            swipe_distance_buckets: [0.25, 0.50],
            history_window: 8,
            invert_scroll: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid adapter config: require 0 < tap threshold < short bucket < medium bucket <= sqrt(2), got {0:?}")]
pub struct AdapterConfigError(pub AdapterConfig);

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), AdapterConfigError> {
        let [b0, b1] = self.swipe_distance_buckets;
        let ok = 0.0 < self.tap_vs_swipe_threshold
            && self.tap_vs_swipe_threshold < b0
            && b0 < b1
            && b1 <= std::f64::consts::SQRT_2;
        if ok {
            Ok(())
        } else {
            Err(AdapterConfigError(self.clone()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualPointKind {
    Tap,
    Swipe {
        direction: Direction,
        distance: SwipeDistance,
    },
}

// Absorbs representation error in boundary cases such as 0.8 - 0.3.
const BUCKET_EPS: f64 = 1e-9;

/// Finger direction along the dominant axis; vertical wins ties.
pub fn gesture_direction(start: (f64, f64), end: (f64, f64)) -> Direction {
    let (dx, dy) = (end.0 - start.0, end.1 - start.1);
    if dy.abs() >= dx.abs() {
        if dy < 0.0 {
            Direction::Up
        } else {
            Direction::Down
        }
    } else if dx < 0.0 {
        Direction::Left
    } else {
        Direction::Right
    }
}

pub fn distance_bucket(length: f64, cfg: &AdapterConfig) -> SwipeDistance {
    let [short, medium] = cfg.swipe_distance_buckets;
    if length <= short + BUCKET_EPS {
        SwipeDistance::Short
    } else if length <= medium + BUCKET_EPS {
        SwipeDistance::Medium
    } else {
        SwipeDistance::Long
    }
}

/// Splits a two-point gesture in unit coordinates into a tap or a swipe.
pub fn classify_dual_point(start: (f64, f64), end: (f64, f64), cfg: &AdapterConfig) -> DualPointKind {
    let length = (end.0 - start.0).hypot(end.1 - start.1);
    if length <= cfg.tap_vs_swipe_threshold + BUCKET_EPS {
        return DualPointKind::Tap;
    }
    DualPointKind::Swipe {
        direction: gesture_direction(start, end),
        distance: distance_bucket(length, cfg),
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("no candidate box contains ({}, {})", .0.x, .0.y)]
pub struct NotFound(pub PixelPoint);

/// Smallest-area candidate containing `p`; ties break on (top, left).
pub fn derive_enclosing_bbox(p: PixelPoint, candidates: &[BBox]) -> Result<BBox, NotFound> {
    candidates
        .iter()
        .filter(|b| b.is_valid() && point_in_bbox(p, b))
        .min_by_key(|b| (b.area(), b.top, b.left))
        .copied()
        .ok_or(NotFound(p))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConversionErrorKind {
    #[error("no adapter registered for source")]
    Unregistered,
    #[error("unmappable action `{0}`")]
    UnmappableAction(String),
    #[error("missing screen dimensions")]
    MissingScreenDims,
    #[error("missing or malformed field `{0}`")]
    BadField(String),
    #[error("invalid value for `{field}`: {message}")]
    BadValue { field: String, message: String },
    #[error("episode has no convertible steps")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{dataset} episode `{episode_id}` step {step_index}: {kind} (raw: {raw})")]
pub struct ConversionError {
    pub dataset: Source,
    pub episode_id: String,
    pub step_index: usize,
    pub raw: String,
    pub kind: ConversionErrorKind,
}

struct Ctx<'a> {
    manifest: &'a Manifest,
    raw: &'a Map<String, Value>,
    screen: &'a ScreenshotMeta,
    bbox: Option<BBox>,
}

type KResult<T> = Result<T, ConversionErrorKind>;

fn bad(field: &str) -> ConversionErrorKind {
    ConversionErrorKind::BadField(field.to_string())
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

impl Ctx<'_> {
    fn field(&self, key: &str) -> KResult<&Value> {
        self.raw.get(key).filter(|v| !v.is_null()).ok_or_else(|| bad(key))
    }

    fn text(&self, r: &ValueRef) -> KResult<String> {
        match r {
            ValueRef::Literal { value } => Ok(value.clone()),
            ValueRef::Field(key) => match self.field(key)? {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                _ => Err(bad(key)),
            },
        }
    }

    /// Point in the manifest's coordinate space, in (x, y) order.
    fn raw_point(&self, key: &str) -> KResult<(f64, f64)> {
        if key == "@bbox" {
            let b = self.bbox.ok_or_else(|| bad("@bbox"))?;
            let c = crate::model::bbox_center(&b);
            let (w, h) = (f64::from(self.screen.width_px), f64::from(self.screen.height_px));
            return Ok(self.manifest.coordinates.pixels_to_space(f64::from(c.x), f64::from(c.y), w, h));
        }
        if let Some((kx, ky)) = key.split_once(',') {
            let x = as_f64(self.field(kx.trim())?).ok_or_else(|| bad(kx))?;
            let y = as_f64(self.field(ky.trim())?).ok_or_else(|| bad(ky))?;
            return Ok((x, y));
        }
        let (a, b) = match self.field(key)? {
            Value::Array(xs) if xs.len() == 2 => (
                as_f64(&xs[0]).ok_or_else(|| bad(key))?,
                as_f64(&xs[1]).ok_or_else(|| bad(key))?,
            ),
            Value::Object(o) => {
                let x = o.get("x").and_then(as_f64).ok_or_else(|| bad(key))?;
                let y = o.get("y").and_then(as_f64).ok_or_else(|| bad(key))?;
                return Ok((x, y));
            }
            _ => return Err(bad(key)),
        };
        Ok(if self.manifest.yx_order { (b, a) } else { (a, b) })
    }

    /// Point in unit coordinates.
    fn unit_point(&self, key: &str) -> KResult<(f64, f64)> {
        let (x, y) = self.raw_point(key)?;
        let (w, h) = (f64::from(self.screen.width_px), f64::from(self.screen.height_px));
        Ok(self.manifest.coordinates.to_unit(x, y, w, h))
    }

    fn norm_point(&self, key: &str) -> KResult<NormPoint> {
        let (x, y) = self.unit_point(key)?;
        Ok(unit_to_norm(x, y))
    }

    fn direction(&self, r: &ValueRef) -> KResult<Direction> {
        let raw = self.text(r)?;
        let s = raw.trim().to_ascii_lowercase();
        let s = s.strip_prefix("scroll_").unwrap_or(&s);
        Direction::parse(s).ok_or_else(|| ConversionErrorKind::BadValue {
            field: r.describe(),
            message: format!("`{raw}` is not a direction"),
        })
    }

    fn distance(&self, r: Option<&ValueRef>) -> KResult<SwipeDistance> {
        match r {
            None => Ok(SwipeDistance::Medium),
            Some(r) => {
                let raw = self.text(r)?;
                SwipeDistance::parse(&raw).ok_or_else(|| ConversionErrorKind::BadValue {
                    field: r.describe(),
                    message: format!("`{raw}` is not a swipe distance"),
                })
            }
        }
    }
}

/// Rounds half-up onto the `[0, 1000]` grid, clamping first.
fn unit_to_norm(x: f64, y: f64) -> NormPoint {
    let q = |v: f64| -> i32 {
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        ((v * f64::from(NORM_MAX) + 0.5 + BUCKET_EPS).floor() as i32).clamp(0, NORM_MAX)
    };
    NormPoint { x: q(x), y: q(y) }
}

const SCREEN_CENTER: NormPoint = NormPoint { x: 500, y: 500 };

/// Actions produced by one raw step: usually one, two for a typing action
/// that must first move focus, none for dropped steps.
type Emitted = Vec<UnifiedAction>;

fn click_for(platform: Platform, target: NormPoint) -> UnifiedAction {
    match platform {
        Platform::Mobile => MobileAction::Click { target }.into(),
        Platform::Web => WebAction::Click { target }.into(),
        Platform::Desktop => DesktopAction::Click { target }.into(),
    }
}

fn mismatch(platform: Platform, what: &str) -> ConversionErrorKind {
    ConversionErrorKind::UnmappableAction(format!("{what} has no {platform} equivalent"))
}

fn convert_rule(
    rule: &ActionRule,
    ctx: &Ctx<'_>,
    cfg: &AdapterConfig,
    focus: &mut Option<NormPoint>,
) -> KResult<Emitted> {
    let platform = ctx.manifest.platform;
    let mut next_focus = None;
    let out: Emitted = match rule {
        ActionRule::Drop => vec![],
        ActionRule::DualPoint { start, end } => {
            let (s, e) = (ctx.unit_point(start)?, ctx.unit_point(end)?);
            match classify_dual_point(s, e, cfg) {
                DualPointKind::Tap => {
                    let target = unit_to_norm(s.0, s.1);
                    next_focus = Some(target);
                    vec![click_for(platform, target)]
                }
                DualPointKind::Swipe {
                    direction,
                    distance,
                } => vec![swipe_for(platform, unit_to_norm(s.0, s.1), direction, distance)?],
            }
        }
        ActionRule::Swipe { start, end } => {
            let (s, e) = (ctx.unit_point(start)?, ctx.unit_point(end)?);
            let length = (e.0 - s.0).hypot(e.1 - s.1);
            vec![swipe_for(
                platform,
                unit_to_norm(s.0, s.1),
                gesture_direction(s, e),
                distance_bucket(length, cfg),
            )?]
        }
        ActionRule::Click { point } => {
            let target = ctx.norm_point(point)?;
            next_focus = Some(target);
            vec![click_for(platform, target)]
        }
        ActionRule::LongPress { point } => match platform {
            Platform::Mobile => vec![MobileAction::LongPress {
                target: ctx.norm_point(point)?,
            }
            .into()],
            _ => return Err(mismatch(platform, "long_press")),
        },
        ActionRule::DoubleClick { point } => match platform {
            Platform::Desktop => vec![DesktopAction::DoubleClick {
                target: ctx.norm_point(point)?,
            }
            .into()],
            _ => return Err(mismatch(platform, "double_click")),
        },
        ActionRule::RightClick { point } => match platform {
            Platform::Desktop => vec![DesktopAction::RightClick {
                target: ctx.norm_point(point)?,
            }
            .into()],
            _ => return Err(mismatch(platform, "right_click")),
        },
        ActionRule::ScrollDirection {
            direction,
            distance,
            start,
        } => {
            let direction = ctx.direction(direction)?;
            let distance = ctx.distance(distance.as_ref())?;
            match platform {
                Platform::Mobile => {
                    let start = match start {
                        Some(key) => ctx.norm_point(key)?,
                        None => SCREEN_CENTER,
                    };
                    let direction = if cfg.invert_scroll {
                        direction.opposite()
                    } else {
                        direction
                    };
                    vec![swipe_for(platform, start, direction, distance)?]
                }
                Platform::Web => vec![WebAction::Scroll {
                    direction,
                    distance,
                }
                .into()],
                Platform::Desktop => vec![DesktopAction::Scroll {
                    direction,
                    distance,
                }
                .into()],
            }
        }
        ActionRule::InputText { text, point } => {
            let text = ctx.text(text)?;
            let typing: UnifiedAction = match platform {
                Platform::Mobile => MobileAction::InputText { text }.into(),
                Platform::Web => WebAction::InputText { text }.into(),
                Platform::Desktop => DesktopAction::InputText { text }.into(),
            };
            match point {
                Some(key) => {
                    let target = ctx.norm_point(key)?;
                    next_focus = Some(target);
                    if *focus == Some(target) {
                        vec![typing]
                    } else {
                        vec![click_for(platform, target), typing]
                    }
                }
                None => {
                    next_focus = *focus;
                    vec![typing]
                }
            }
        }
        ActionRule::Drag { start, end } => {
            let (start, end) = (ctx.norm_point(start)?, ctx.norm_point(end)?);
            vec![match platform {
                Platform::Mobile => MobileAction::Drag { start, end }.into(),
                Platform::Web => WebAction::Drag { start, end }.into(),
                Platform::Desktop => DesktopAction::Drag { start, end }.into(),
            }]
        }
        ActionRule::MoveTo { start, end } => {
            let end = ctx.norm_point(end)?;
            let start = match start {
                Some(key) => ctx.norm_point(key)?,
                None => end,
            };
            vec![match platform {
                Platform::Web => WebAction::MoveTo { start, end }.into(),
                Platform::Desktop => DesktopAction::MoveTo { start, end }.into(),
                Platform::Mobile => return Err(mismatch(platform, "move_to")),
            }]
        }
        ActionRule::Key { key } => {
            let key = ctx.text(key)?;
            vec![match platform {
                Platform::Web => WebAction::PressKey { key }.into(),
                Platform::Desktop => DesktopAction::PressKey { key }.into(),
                Platform::Mobile => match key.trim().to_ascii_lowercase().as_str() {
                    "enter" => MobileAction::Enter.into(),
                    "back" => MobileAction::NavigateBack.into(),
                    "home" => MobileAction::NavigateHome.into(),
                    "recent" | "app_switch" | "appselect" => MobileAction::NavigateRecent.into(),
                    _ => return Err(mismatch(platform, &format!("key `{key}`"))),
                },
            }]
        }
        ActionRule::Hotkey { key_comb } => {
            let key_comb = normalize_key_comb(&ctx.text(key_comb)?);
            vec![match platform {
                Platform::Web => WebAction::Hotkey { key_comb }.into(),
                Platform::Desktop => DesktopAction::Hotkey { key_comb }.into(),
                Platform::Mobile => return Err(mismatch(platform, "hotkey")),
            }]
        }
        ActionRule::GoTo { url } => match platform {
            Platform::Web => vec![WebAction::GoTo { url: ctx.text(url)? }.into()],
            _ => return Err(mismatch(platform, "go_to")),
        },
        ActionRule::SearchGoogle { query } => match platform {
            Platform::Web => vec![WebAction::SearchGoogle {
                query: ctx.text(query)?,
            }
            .into()],
            _ => return Err(mismatch(platform, "search_google")),
        },
        ActionRule::SwitchTab { tab } => match platform {
            Platform::Web => {
                let raw = ctx.text(tab)?;
                let tab = raw.trim().parse().map_err(|_| ConversionErrorKind::BadValue {
                    field: "tab".into(),
                    message: format!("`{raw}` is not a tab index"),
                })?;
                vec![WebAction::SwitchTab { tab }.into()]
            }
            _ => return Err(mismatch(platform, "switch_tab")),
        },
        ActionRule::Fixed { action } => vec![fixed_action(platform, action)?],
        ActionRule::Status {
            goal_status,
            answer,
        } => {
            let goal_status =
                GoalStatus::parse(goal_status).ok_or_else(|| ConversionErrorKind::BadValue {
                    field: "goal_status".into(),
                    message: format!("`{goal_status}` is not a goal status"),
                })?;
            let answer = match answer {
                Some(r) => ctx.text(r)?,
                None => String::new(),
            };
            vec![match platform {
                Platform::Mobile => MobileAction::Status {
                    goal_status,
                    answer,
                }
                .into(),
                Platform::Web => WebAction::Status {
                    goal_status,
                    answer,
                }
                .into(),
                Platform::Desktop => DesktopAction::Status {
                    goal_status,
                    answer,
                }
                .into(),
            }]
        }
    };
    *focus = next_focus;
    Ok(out)
}

fn swipe_for(
    platform: Platform,
    start: NormPoint,
    direction: Direction,
    distance: SwipeDistance,
) -> KResult<UnifiedAction> {
    Ok(match platform {
        Platform::Mobile => MobileAction::Swipe {
            start,
            direction,
            distance,
        }
        .into(),
        Platform::Web => WebAction::Scroll {
            direction,
            distance,
        }
        .into(),
        Platform::Desktop => DesktopAction::Scroll {
            direction,
            distance,
        }
        .into(),
    })
}

/// `ctrl+shift+s`, `ctrl shift s` and `Ctrl-Shift-S` all become `Ctrl-Shift-S`.
fn normalize_key_comb(raw: &str) -> String {
    raw.split(['+', '-', ' ', ','])
        .filter(|k| !k.is_empty())
        .map(|k| {
            let mut cs = k.chars();
            match cs.next() {
                Some(c) => c.to_uppercase().chain(cs.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join("-")
}

fn fixed_action(platform: Platform, name: &str) -> KResult<UnifiedAction> {
    let a: UnifiedAction = match (platform, name) {
        (Platform::Mobile, "enter") => MobileAction::Enter.into(),
        (Platform::Mobile, "navigate_back") => MobileAction::NavigateBack.into(),
        (Platform::Mobile, "navigate_home") => MobileAction::NavigateHome.into(),
        (Platform::Mobile, "navigate_recent") => MobileAction::NavigateRecent.into(),
        (Platform::Mobile, "wait") => MobileAction::Wait.into(),
        (Platform::Web, "navigate_back") => WebAction::NavigateBack.into(),
        (Platform::Web, "navigate_forward") => WebAction::NavigateForward.into(),
        (Platform::Web, "new_tab") => WebAction::NewTab.into(),
        (Platform::Web, "close_tab") => WebAction::CloseTab.into(),
        _ => return Err(mismatch(platform, name)),
    };
    Ok(a)
}

fn screen_for(
    manifest: &Manifest,
    raw: &Map<String, Value>,
    episode_id: &str,
    index: usize,
) -> KResult<ScreenshotMeta> {
    let dim = |key: &str| -> KResult<u32> {
        raw.get(key)
            .and_then(as_f64)
            .filter(|v| *v >= 1.0 && v.fract() == 0.0 && *v <= f64::from(u32::MAX))
            .map(|v| v as u32)
            .ok_or(ConversionErrorKind::MissingScreenDims)
    };
    let s = &manifest.screen;
    let id = s
        .id
        .as_deref()
        .and_then(|k| raw.get(k))
        .and_then(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .unwrap_or_else(|| format!("{episode_id}/{index}"));
    let image_ref = s
        .image
        .as_deref()
        .and_then(|k| raw.get(k))
        .and_then(Value::as_str)
        .map(Into::into);
    Ok(ScreenshotMeta {
        id,
        width_px: dim(&s.width)?,
        height_px: dim(&s.height)?,
        platform: manifest.platform,
        image_ref,
    })
}

fn read_bbox(manifest: &Manifest, v: &Value, screen: &ScreenshotMeta) -> Option<BBox> {
    let xs: Vec<f64> = v.as_array()?.iter().map(as_f64).collect::<Option<_>>()?;
    let [a, b, c, d] = <[f64; 4]>::try_from(xs).ok()?;
    let (l, t, r, btm) = match manifest.step.bbox_format {
        BBoxFormat::Ltrb => (a, b, c, d),
        BBoxFormat::Xywh => (a, b, a + c, b + d),
    };
    let (w, h) = (f64::from(screen.width_px), f64::from(screen.height_px));
    let (l, t) = manifest.coordinates.to_pixels(l, t, w, h);
    let (r, btm) = manifest.coordinates.to_pixels(r, btm, w, h);
    let px = |v: f64| (v + 0.5).floor() as i32;
    let bbox = BBox {
        left: px(l),
        top: px(t),
        right: px(r),
        bottom: px(btm),
    };
    bbox.is_valid().then_some(bbox)
}

fn action_name(raw: &Map<String, Value>, key: &str) -> Option<String> {
    match raw.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Converts one source episode with its manifest.
pub fn convert_with_manifest(
    e: &SourceEpisode,
    manifest: &Manifest,
    cfg: &AdapterConfig,
) -> Result<Episode, ConversionError> {
    let err = |step_index: usize, raw: &Map<String, Value>, kind| ConversionError {
        dataset: e.source,
        episode_id: e.episode_id.clone(),
        step_index,
        raw: Value::Object(raw.clone()).to_string(),
        kind,
    };
    let mut steps = Vec::with_capacity(e.raw_steps.len());
    let mut focus = None;
    let limit = if manifest.first_action_only { 1 } else { usize::MAX };
    for (index, raw) in e.raw_steps.iter().enumerate().take(limit) {
        let name = action_name(raw, &manifest.action_key)
            .ok_or_else(|| err(index, raw, bad(&manifest.action_key)))?;
        let rule = manifest
            .actions
            .get(&name)
            .ok_or_else(|| err(index, raw, ConversionErrorKind::UnmappableAction(name.clone())))?;
        if matches!(rule, ActionRule::Drop) {
            continue;
        }
        let screen = screen_for(manifest, raw, &e.episode_id, index).map_err(|k| err(index, raw, k))?;
        let given_bbox = manifest
            .step
            .bbox
            .as_deref()
            .and_then(|k| raw.get(k))
            .and_then(|v| read_bbox(manifest, v, &screen));
        let ctx = Ctx {
            manifest,
            raw,
            screen: &screen,
            bbox: given_bbox,
        };
        let actions = convert_rule(rule, &ctx, cfg, &mut focus).map_err(|k| err(index, raw, k))?;
        let text_field = |key: &Option<String>| {
            key.as_deref()
                .and_then(|k| raw.get(k))
                .and_then(Value::as_str)
                .filter(|s| !s.trim().is_empty())
                .map(str::to_string)
        };
        let instruction = text_field(&manifest.step.instruction);
        let reasoning = text_field(&manifest.step.reasoning);
        for action in actions {
            let gold_bbox = if action.is_localization() {
                given_bbox.or_else(|| {
                    let target = action.target()?;
                    let p = crate::model::denormalize_point(target, &screen);
                    let candidates = candidate_boxes(manifest, raw, &screen);
                    derive_enclosing_bbox(p, &candidates).ok()
                })
            } else {
                None
            };
            steps.push(Step {
                screenshot: screen.clone(),
                low_level_instruction: instruction.clone(),
                gold_action: action,
                gold_bbox,
                history_index: 0,
                reasoning: reasoning.clone(),
                provenance: Some(Value::Object(raw.clone())),
            });
        }
    }
    if steps.is_empty() {
        let empty = Map::new();
        return Err(err(0, e.raw_steps.first().unwrap_or(&empty), ConversionErrorKind::Empty));
    }
    let mut ep = Episode {
        id: e.episode_id.clone(),
        platform: manifest.platform,
        goal: e.goal.clone(),
        steps,
    };
    ep.reindex();
    Ok(ep)
}

fn candidate_boxes(manifest: &Manifest, raw: &Map<String, Value>, screen: &ScreenshotMeta) -> Vec<BBox> {
    manifest
        .step
        .candidates
        .as_deref()
        .and_then(|k| raw.get(k))
        .and_then(Value::as_array)
        .map(|xs| xs.iter().filter_map(|v| read_bbox(manifest, v, screen)).collect())
        .unwrap_or_default()
}

/// Converts a source episode using the adapter registered for its source.
pub fn convert_episode(
    e: &SourceEpisode,
    registry: &Registry,
    cfg: &AdapterConfig,
) -> Result<Episode, ConversionError> {
    let manifest = registry.get(e.source).ok_or_else(|| ConversionError {
        dataset: e.source,
        episode_id: e.episode_id.clone(),
        step_index: 0,
        raw: String::new(),
        kind: ConversionErrorKind::Unregistered,
    })?;
    convert_with_manifest(e, manifest, cfg)
}
