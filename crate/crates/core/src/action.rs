//! Unified action spaces for mobile, web and desktop agents.
//!
//! Each platform has a closed set of actions. Actions travel as strings of the
//! form `{"action_type": "click", "target": (231,876)}`; in [`SerializeMode::Paper`]
//! coordinate pairs are parenthesized tuples, in [`SerializeMode::StrictJson`]
//! they are two-element arrays so any JSON reader accepts them. Key order is
//! fixed per action so serialized corpora are byte-stable.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NormPoint, Platform, NORM_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwipeDistance {
    Short,
    Medium,
    Long,
}

impl SwipeDistance {
    pub const ALL: [SwipeDistance; 3] = [SwipeDistance::Short, SwipeDistance::Medium, SwipeDistance::Long];

    pub fn as_str(self) -> &'static str {
        match self {
            SwipeDistance::Short => "short",
            SwipeDistance::Medium => "medium",
            SwipeDistance::Long => "long",
        }
    }

    pub fn parse(s: &str) -> Option<SwipeDistance> {
        SwipeDistance::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalStatus {
    Successful,
    Infeasible,
}

impl GoalStatus {
    pub const ALL: [GoalStatus; 2] = [GoalStatus::Successful, GoalStatus::Infeasible];

    pub fn as_str(self) -> &'static str {
        match self {
            GoalStatus::Successful => "successful",
            GoalStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<GoalStatus> {
        GoalStatus::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action_type", rename_all = "snake_case")]
pub enum MobileAction {
    Click {
        target: NormPoint,
    },
    LongPress {
        target: NormPoint,
    },
    Swipe {
        start: NormPoint,
        direction: Direction,
        distance: SwipeDistance,
    },
    InputText {
        text: String,
    },
    Drag {
        start: NormPoint,
        end: NormPoint,
    },
    Enter,
    NavigateBack,
    NavigateHome,
    NavigateRecent,
    Wait,
    Status {
        goal_status: GoalStatus,
        answer: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action_type", rename_all = "snake_case")]
pub enum WebAction {
    Click {
        target: NormPoint,
    },
    Scroll {
        direction: Direction,
        distance: SwipeDistance,
    },
    InputText {
        text: String,
    },
    Drag {
        start: NormPoint,
        end: NormPoint,
    },
    MoveTo {
        start: NormPoint,
        end: NormPoint,
    },
    NavigateBack,
    NavigateForward,
    GoTo {
        url: String,
    },
    SearchGoogle {
        query: String,
    },
    PressKey {
        key: String,
    },
    Hotkey {
        key_comb: String,
    },
    NewTab,
    SwitchTab {
        tab: u32,
    },
    CloseTab,
    Status {
        goal_status: GoalStatus,
        answer: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action_type", rename_all = "snake_case")]
pub enum DesktopAction {
    Click {
        target: NormPoint,
    },
    RightClick {
        target: NormPoint,
    },
    DoubleClick {
        target: NormPoint,
    },
    Scroll {
        direction: Direction,
        distance: SwipeDistance,
    },
    InputText {
        text: String,
    },
    Drag {
        start: NormPoint,
        end: NormPoint,
    },
    MoveTo {
        start: NormPoint,
        end: NormPoint,
    },
    PressKey {
        key: String,
    },
    Hotkey {
        key_comb: String,
    },
    Status {
        goal_status: GoalStatus,
        answer: String,
    },
}

/// An action tagged with the platform whose action space it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "platform", content = "action", rename_all = "lowercase")]
pub enum UnifiedAction {
    Mobile(MobileAction),
    Web(WebAction),
    Desktop(DesktopAction),
}

impl From<MobileAction> for UnifiedAction {
    fn from(a: MobileAction) -> Self {
        UnifiedAction::Mobile(a)
    }
}

impl From<WebAction> for UnifiedAction {
    fn from(a: WebAction) -> Self {
        UnifiedAction::Web(a)
    }
}

impl From<DesktopAction> for UnifiedAction {
    fn from(a: DesktopAction) -> Self {
        UnifiedAction::Desktop(a)
    }
}

/// One argument value in the generic key/value view of an action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue<'a> {
    Point(NormPoint),
    Str(&'a str),
    /// Enumerated strings such as directions; rendered quoted.
    Word(&'static str),
    Index(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArgKind {
    Point,
    Text,
    Direction,
    Distance,
    GoalStatus,
    Index,
}

struct ActionSpec {
    name: &'static str,
    args: &'static [(&'static str, ArgKind)],
}

const fn spec(name: &'static str, args: &'static [(&'static str, ArgKind)]) -> ActionSpec {
    ActionSpec { name, args }
}

use ArgKind as K;

const TARGET: &[(&str, ArgKind)] = &[("target", K::Point)];
const START_END: &[(&str, ArgKind)] = &[("start", K::Point), ("end", K::Point)];
const TEXT: &[(&str, ArgKind)] = &[("text", K::Text)];
const STATUS: &[(&str, ArgKind)] = &[("goal_status", K::GoalStatus), ("answer", K::Text)];
const SCROLL: &[(&str, ArgKind)] = &[("direction", K::Direction), ("distance", K::Distance)];
const NONE: &[(&str, ArgKind)] = &[];

const MOBILE_SPECS: &[ActionSpec] = &[
    spec("click", TARGET),
    spec("long_press", TARGET),
    spec(
        "swipe",
        &[("start", K::Point), ("direction", K::Direction), ("distance", K::Distance)],
    ),
    spec("input_text", TEXT),
    spec("drag", START_END),
    spec("enter", NONE),
    spec("navigate_back", NONE),
    spec("navigate_home", NONE),
    spec("navigate_recent", NONE),
    spec("wait", NONE),
    spec("status", STATUS),
];

const WEB_SPECS: &[ActionSpec] = &[
    spec("click", TARGET),
    spec("scroll", SCROLL),
    spec("input_text", TEXT),
    spec("drag", START_END),
    spec("move_to", START_END),
    spec("navigate_back", NONE),
    spec("navigate_forward", NONE),
    spec("go_to", &[("url", K::Text)]),
    spec("search_google", &[("query", K::Text)]),
    spec("press_key", &[("key", K::Text)]),
    spec("hotkey", &[("key_comb", K::Text)]),
    spec("new_tab", NONE),
    spec("switch_tab", &[("tab", K::Index)]),
    spec("close_tab", NONE),
    spec("status", STATUS),
];

const DESKTOP_SPECS: &[ActionSpec] = &[
    spec("click", TARGET),
    spec("right_click", TARGET),
    spec("double_click", TARGET),
    spec("scroll", SCROLL),
    spec("input_text", TEXT),
    spec("drag", START_END),
    spec("move_to", START_END),
    spec("press_key", &[("key", K::Text)]),
    spec("hotkey", &[("key_comb", K::Text)]),
    spec("status", STATUS),
];

fn specs(platform: Platform) -> &'static [ActionSpec] {
    match platform {
        Platform::Mobile => MOBILE_SPECS,
        Platform::Web => WEB_SPECS,
        Platform::Desktop => DESKTOP_SPECS,
    }
}

/// Canonical `action_type` names accepted on a platform, in table order.
pub fn action_names(platform: Platform) -> Vec<&'static str> {
    specs(platform).iter().map(|s| s.name).collect()
}

/// Action types that point at an element and are scored by localization.
pub const LOCALIZATION_ACTIONS: [&str; 4] = ["click", "long_press", "double_click", "right_click"];

impl UnifiedAction {
    pub fn platform(&self) -> Platform {
        match self {
            UnifiedAction::Mobile(_) => Platform::Mobile,
            UnifiedAction::Web(_) => Platform::Web,
            UnifiedAction::Desktop(_) => Platform::Desktop,
        }
    }

    pub fn action_type(&self) -> &'static str {
        self.parts().0
    }

    pub fn is_localization(&self) -> bool {
        LOCALIZATION_ACTIONS.contains(&self.action_type())
    }

    /// Target point of click-like actions.
    pub fn target(&self) -> Option<NormPoint> {
        match self.args().first() {
            Some(("target", ArgValue::Point(p))) => Some(*p),
            _ => None,
        }
    }

    /// Ordered key/value view of the arguments, excluding `action_type`.
    pub fn args(&self) -> Vec<(&'static str, ArgValue<'_>)> {
        self.parts().1
    }

    fn parts(&self) -> (&'static str, Vec<(&'static str, ArgValue<'_>)>) {
        fn status<'a>(g: &GoalStatus, a: &'a str) -> Vec<(&'static str, ArgValue<'a>)> {
            vec![("goal_status", ArgValue::Word(g.as_str())), ("answer", ArgValue::Str(a))]
        }
        use ArgValue::*;
        match self {
            UnifiedAction::Mobile(a) => match a {
                MobileAction::Click { target } => ("click", vec![("target", Point(*target))]),
                MobileAction::LongPress { target } => ("long_press", vec![("target", Point(*target))]),
                MobileAction::Swipe {
                    start,
                    direction,
                    distance,
                } => (
                    "swipe",
                    vec![
                        ("start", Point(*start)),
                        ("direction", Word(direction.as_str())),
                        ("distance", Word(distance.as_str())),
                    ],
                ),
                MobileAction::InputText { text } => ("input_text", vec![("text", Str(text))]),
                MobileAction::Drag { start, end } => {
                    ("drag", vec![("start", Point(*start)), ("end", Point(*end))])
                }
                MobileAction::Enter => ("enter", vec![]),
                MobileAction::NavigateBack => ("navigate_back", vec![]),
                MobileAction::NavigateHome => ("navigate_home", vec![]),
                MobileAction::NavigateRecent => ("navigate_recent", vec![]),
                MobileAction::Wait => ("wait", vec![]),
                MobileAction::Status {
                    goal_status,
                    answer,
                } => ("status", status(goal_status, answer)),
            },
            UnifiedAction::Web(a) => match a {
                WebAction::Click { target } => ("click", vec![("target", Point(*target))]),
                WebAction::Scroll {
                    direction,
                    distance,
                } => (
                    "scroll",
                    vec![
                        ("direction", Word(direction.as_str())),
                        ("distance", Word(distance.as_str())),
                    ],
                ),
                WebAction::InputText { text } => ("input_text", vec![("text", Str(text))]),
                WebAction::Drag { start, end } => {
                    ("drag", vec![("start", Point(*start)), ("end", Point(*end))])
                }
                WebAction::MoveTo { start, end } => {
                    ("move_to", vec![("start", Point(*start)), ("end", Point(*end))])
                }
                WebAction::NavigateBack => ("navigate_back", vec![]),
                WebAction::NavigateForward => ("navigate_forward", vec![]),
                WebAction::GoTo { url } => ("go_to", vec![("url", Str(url))]),
                WebAction::SearchGoogle { query } => ("search_google", vec![("query", Str(query))]),
                WebAction::PressKey { key } => ("press_key", vec![("key", Str(key))]),
                WebAction::Hotkey { key_comb } => ("hotkey", vec![("key_comb", Str(key_comb))]),
                WebAction::NewTab => ("new_tab", vec![]),
                WebAction::SwitchTab { tab } => ("switch_tab", vec![("tab", Index(*tab))]),
                WebAction::CloseTab => ("close_tab", vec![]),
                WebAction::Status {
                    goal_status,
                    answer,
                } => ("status", status(goal_status, answer)),
            },
            UnifiedAction::Desktop(a) => match a {
                DesktopAction::Click { target } => ("click", vec![("target", Point(*target))]),
                DesktopAction::RightClick { target } => {
                    ("right_click", vec![("target", Point(*target))])
                }
                DesktopAction::DoubleClick { target } => {
                    ("double_click", vec![("target", Point(*target))])
                }
                DesktopAction::Scroll {
                    direction,
                    distance,
                } => (
                    "scroll",
                    vec![
                        ("direction", Word(direction.as_str())),
                        ("distance", Word(distance.as_str())),
                    ],
                ),
                DesktopAction::InputText { text } => ("input_text", vec![("text", Str(text))]),
                DesktopAction::Drag { start, end } => {
                    ("drag", vec![("start", Point(*start)), ("end", Point(*end))])
                }
                DesktopAction::MoveTo { start, end } => {
                    ("move_to", vec![("start", Point(*start)), ("end", Point(*end))])
                }
                DesktopAction::PressKey { key } => ("press_key", vec![("key", Str(key))]),
                DesktopAction::Hotkey { key_comb } => ("hotkey", vec![("key_comb", Str(key_comb))]),
                DesktopAction::Status {
                    goal_status,
                    answer,
                } => ("status", status(goal_status, answer)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SerializeMode {
    /// Coordinate pairs as `(x,y)` tuples.
    #[default]
    Paper,
    /// Coordinate pairs as `[x,y]` arrays; valid JSON.
    StrictJson,
}

fn push_json_str(out: &mut String, s: &str) {
    // serde_json string escaping cannot fail for &str
    out.push_str(&serde_json::to_string(s).expect("string serialization"));
}

pub fn serialize_action(action: &UnifiedAction, mode: SerializeMode) -> String {
    let (name, args) = action.parts();
    let mut out = String::with_capacity(48);
    out.push_str("{\"action_type\": ");
    push_json_str(&mut out, name);
    for (key, value) in args {
        out.push_str(", \"");
        out.push_str(key);
        out.push_str("\": ");
        match value {
            ArgValue::Point(p) => {
                let (open, close) = match mode {
                    SerializeMode::Paper => ('(', ')'),
                    SerializeMode::StrictJson => ('[', ']'),
                };
                let _ = write!(out, "{open}{},{}{close}", p.x, p.y);
            }
            ArgValue::Str(s) => push_json_str(&mut out, s),
            ArgValue::Word(w) => push_json_str(&mut out, w),
            ArgValue::Index(i) => {
                let _ = write!(out, "\"{i}\"");
            }
        }
    }
    out.push('}');
    out
}

impl fmt::Display for UnifiedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_action(self, SerializeMode::Paper))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("missing `action_type` key")]
    MissingActionType,
    #[error("unknown action type `{0}`")]
    UnknownAction(String),
    #[error("action `{action}` is not part of the {platform} action space")]
    PlatformMismatch { action: String, platform: Platform },
    #[error("action `{action}`: {message}")]
    Schema { action: String, message: String },
    #[error("action `{action}`: {field} value {value} outside [0,{NORM_MAX}]")]
    Range {
        action: String,
        field: String,
        value: i64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum RawValue {
    Str(String),
    Int(i64),
    Pair { x: i64, y: i64, paren: bool },
}

impl RawValue {
    fn describe(&self) -> &'static str {
        match self {
            RawValue::Str(_) => "string",
            RawValue::Int(_) => "integer",
            RawValue::Pair { .. } => "coordinate pair",
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ActionError> {
        Err(ActionError::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), ActionError> {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", b as char))
        }
    }

    fn string(&mut self) -> Result<String, ActionError> {
        self.skip_ws();
        if self.peek() != Some(b'"') {
            return self.err("expected string");
        }
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut i = start + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    let lit = &self.src[start..=i];
                    let s: String = match serde_json::from_str(lit) {
                        Ok(s) => s,
                        Err(e) => return self.err(format!("bad string literal: {e}")),
                    };
                    self.pos = i + 1;
                    return Ok(s);
                }
                _ => i += 1,
            }
        }
        self.err("unterminated string")
    }

    fn integer(&mut self) -> Result<i64, ActionError> {
        self.skip_ws();
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut i = start;
        if bytes.get(i) == Some(&b'-') {
            i += 1;
        }
        let digits = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == digits {
            return self.err("expected integer");
        }
        match self.src[start..i].parse() {
            Ok(v) => {
                self.pos = i;
                Ok(v)
            }
            Err(_) => self.err("integer overflow"),
        }
    }

    fn value(&mut self) -> Result<RawValue, ActionError> {
        self.skip_ws();
        match self.peek() {
            Some(b'"') => self.string().map(RawValue::Str),
            Some(open @ (b'(' | b'[')) => {
                self.pos += 1;
                let x = self.integer()?;
                self.expect(b',')?;
                let y = self.integer()?;
                self.expect(if open == b'(' { b')' } else { b']' })?;
                Ok(RawValue::Pair {
                    x,
                    y,
                    paren: open == b'(',
                })
            }
            Some(b'-' | b'0'..=b'9') => self.integer().map(RawValue::Int),
            _ => self.err("expected value"),
        }
    }

    fn object(&mut self) -> Result<Vec<(String, RawValue)>, ActionError> {
        self.expect(b'{')?;
        let mut pairs = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
        } else {
            loop {
                let key = self.string()?;
                self.expect(b':')?;
                let value = self.value()?;
                pairs.push((key, value));
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b'}') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("expected `,` or `}`"),
                }
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.err("trailing characters after action object");
        }
        Ok(pairs)
    }
}

/// Maps an `action_type` as written to its canonical name on `platform`:
/// case-folds and resolves the mobile `tap` alias.
fn canonical_name(raw: &str, platform: Platform) -> String {
    let lower = raw.trim().to_ascii_lowercase();
    match (lower.as_str(), platform) {
        ("tap", Platform::Mobile) => "click".to_string(),
        _ => lower,
    }
}

pub fn parse_action(s: &str, platform: Platform) -> Result<UnifiedAction, ActionError> {
    parse_action_with_mode(s, platform).map(|(a, _)| a)
}

/// Parses an action and reports which serialization mode it was written in
/// (tuples imply [`SerializeMode::Paper`]).
pub fn parse_action_with_mode(
    s: &str,
    platform: Platform,
) -> Result<(UnifiedAction, SerializeMode), ActionError> {
    let pairs = Lexer { src: s, pos: 0 }.object()?;
    let mut mode = SerializeMode::StrictJson;
    let mut name = None;
    let mut args: BTreeMap<String, RawValue> = BTreeMap::new();
    for (key, value) in pairs {
        if let RawValue::Pair { paren: true, .. } = value {
            mode = SerializeMode::Paper;
        }
        if key == "action_type" {
            match value {
                RawValue::Str(n) if name.is_none() => name = Some(n),
                RawValue::Str(_) => {
                    return Err(ActionError::Schema {
                        action: name.unwrap_or_default(),
                        message: "duplicate `action_type`".into(),
                    })
                }
                other => {
                    return Err(ActionError::Schema {
                        action: String::new(),
                        message: format!("`action_type` must be a string, found {}", other.describe()),
                    })
                }
            }
        } else if args.insert(key.clone(), value).is_some() {
            return Err(ActionError::Schema {
                action: name.clone().unwrap_or_default(),
                message: format!("duplicate argument `{key}`"),
            });
        }
    }
    let raw_name = name.ok_or(ActionError::MissingActionType)?;
    let name = canonical_name(&raw_name, platform);
    let spec = match specs(platform).iter().find(|s| s.name == name) {
        Some(spec) => spec,
        None => {
            let elsewhere = Platform::ALL
                .into_iter()
                .any(|p| specs(p).iter().any(|s| s.name == canonical_name(&raw_name, p)));
            return Err(if elsewhere {
                ActionError::PlatformMismatch {
                    action: name,
                    platform,
                }
            } else {
                ActionError::UnknownAction(raw_name)
            });
        }
    };
    build(spec, platform, args).map(|a| (a, mode))
}

enum Arg {
    Point(NormPoint),
    Text(String),
    Direction(Direction),
    Distance(SwipeDistance),
    Goal(GoalStatus),
    Index(u32),
}

fn build(
    spec: &ActionSpec,
    platform: Platform,
    mut raw: BTreeMap<String, RawValue>,
) -> Result<UnifiedAction, ActionError> {
    let schema = |message: String| ActionError::Schema {
        action: spec.name.to_string(),
        message,
    };
    let mut vals = Vec::with_capacity(spec.args.len());
    for &(key, kind) in spec.args {
        let value = raw
            .remove(key)
            .ok_or_else(|| schema(format!("missing argument `{key}`")))?;
        let arg = match (kind, value) {
            (ArgKind::Point, RawValue::Pair { x, y, .. }) => {
                for v in [x, y] {
                    if !(0..=i64::from(NORM_MAX)).contains(&v) {
                        return Err(ActionError::Range {
                            action: spec.name.to_string(),
                            field: key.to_string(),
                            value: v,
                        });
                    }
                }
                Arg::Point(NormPoint {
                    x: x as i32,
                    y: y as i32,
                })
            }
            (ArgKind::Text, RawValue::Str(s)) => Arg::Text(s),
            (ArgKind::Direction, RawValue::Str(s)) => Arg::Direction(
                Direction::parse(&s).ok_or_else(|| schema(format!("invalid direction `{s}`")))?,
            ),
            (ArgKind::Distance, RawValue::Str(s)) => Arg::Distance(
                SwipeDistance::parse(&s).ok_or_else(|| schema(format!("invalid distance `{s}`")))?,
            ),
            (ArgKind::GoalStatus, RawValue::Str(s)) => Arg::Goal(
                GoalStatus::parse(&s).ok_or_else(|| schema(format!("invalid goal_status `{s}`")))?,
            ),
            (ArgKind::Index, RawValue::Int(i)) => Arg::Index(
                u32::try_from(i).map_err(|_| schema(format!("invalid tab index {i}")))?,
            ),
            (ArgKind::Index, RawValue::Str(s)) => Arg::Index(
                s.trim()
                    .parse()
                    .map_err(|_| schema(format!("invalid tab index `{s}`")))?,
            ),
            (_, other) => {
                return Err(schema(format!(
                    "argument `{key}` has wrong type {}",
                    other.describe()
                )))
            }
        };
        vals.push(arg);
    }
    if let Some(extra) = raw.keys().next() {
        return Err(schema(format!("unexpected argument `{extra}`")));
    }
    Ok(assemble(spec.name, platform, vals))
}

fn assemble(name: &str, platform: Platform, vals: Vec<Arg>) -> UnifiedAction {
    // Arguments were type-checked against the spec table, so every take!
    // sees exactly the kind it expects.
    let mut it = vals.into_iter();
    macro_rules! take {
        ($variant:ident) => {
            match it.next() {
                Some(Arg::$variant(v)) => v,
                _ => unreachable!("spec table guarantees argument kind"),
            }
        };
    }
    match platform {
        Platform::Mobile => UnifiedAction::Mobile(match name {
            "click" => MobileAction::Click { target: take!(Point) },
            "long_press" => MobileAction::LongPress { target: take!(Point) },
            "swipe" => MobileAction::Swipe {
                start: take!(Point),
                direction: take!(Direction),
                distance: take!(Distance),
            },
            "input_text" => MobileAction::InputText { text: take!(Text) },
            "drag" => MobileAction::Drag {
                start: take!(Point),
                end: take!(Point),
            },
            "enter" => MobileAction::Enter,
            "navigate_back" => MobileAction::NavigateBack,
            "navigate_home" => MobileAction::NavigateHome,
            "navigate_recent" => MobileAction::NavigateRecent,
            "wait" => MobileAction::Wait,
            "status" => MobileAction::Status {
                goal_status: take!(Goal),
                answer: take!(Text),
            },
            _ => unreachable!("unknown mobile action {name}"),
        }),
        Platform::Web => UnifiedAction::Web(match name {
            "click" => WebAction::Click { target: take!(Point) },
            "scroll" => WebAction::Scroll {
                direction: take!(Direction),
                distance: take!(Distance),
            },
            "input_text" => WebAction::InputText { text: take!(Text) },
            "drag" => WebAction::Drag {
                start: take!(Point),
                end: take!(Point),
            },
            "move_to" => WebAction::MoveTo {
                start: take!(Point),
                end: take!(Point),
            },
            "navigate_back" => WebAction::NavigateBack,
            "navigate_forward" => WebAction::NavigateForward,
            "go_to" => WebAction::GoTo { url: take!(Text) },
            "search_google" => WebAction::SearchGoogle { query: take!(Text) },
            "press_key" => WebAction::PressKey { key: take!(Text) },
            "hotkey" => WebAction::Hotkey { key_comb: take!(Text) },
            "new_tab" => WebAction::NewTab,
            "switch_tab" => WebAction::SwitchTab { tab: take!(Index) },
            "close_tab" => WebAction::CloseTab,
            "status" => WebAction::Status {
                goal_status: take!(Goal),
                answer: take!(Text),
            },
            _ => unreachable!("unknown web action {name}"),
        }),
        Platform::Desktop => UnifiedAction::Desktop(match name {
            "click" => DesktopAction::Click { target: take!(Point) },
            "right_click" => DesktopAction::RightClick { target: take!(Point) },
            "double_click" => DesktopAction::DoubleClick { target: take!(Point) },
            "scroll" => DesktopAction::Scroll {
                direction: take!(Direction),
                distance: take!(Distance),
            },
            "input_text" => DesktopAction::InputText { text: take!(Text) },
            "drag" => DesktopAction::Drag {
                start: take!(Point),
                end: take!(Point),
            },
            "move_to" => DesktopAction::MoveTo {
                start: take!(Point),
                end: take!(Point),
            },
            "press_key" => DesktopAction::PressKey { key: take!(Text) },
            "hotkey" => DesktopAction::Hotkey { key_comb: take!(Text) },
            "status" => DesktopAction::Status {
                goal_status: take!(Goal),
                answer: take!(Text),
            },
            _ => unreachable!("unknown desktop action {name}"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    CoordinateOutOfRange { field: String, x: i32, y: i32 },
    EmptyText { field: String },
    MalformedKeyCombination { key_comb: String },
}

/// Checks coordinate ranges and required text. An empty `status` answer is
/// allowed; empty typing is not.
pub fn validate_action(action: &UnifiedAction) -> Vec<Violation> {
    let mut out = Vec::new();
    let answer_may_be_empty = action.action_type() == "status";
    for (key, value) in action.args() {
        match value {
            ArgValue::Point(p) if !p.is_valid() => out.push(Violation::CoordinateOutOfRange {
                field: key.to_string(),
                x: p.x,
                y: p.y,
            }),
            ArgValue::Str(s) if s.is_empty() && !(answer_may_be_empty && key == "answer") => {
                out.push(Violation::EmptyText {
                    field: key.to_string(),
                })
            }
            ArgValue::Str(s) if key == "key_comb" && s.split('-').any(|k| k.trim().is_empty()) => {
                out.push(Violation::MalformedKeyCombination {
                    key_comb: s.to_string(),
                })
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i32, y: i32) -> NormPoint {
        NormPoint { x, y }
    }

    #[test]
    fn serialize_examples() {
        let click = UnifiedAction::Mobile(MobileAction::Click { target: p(231, 876) });
        assert_eq!(
            serialize_action(&click, SerializeMode::Paper),
            r#"{"action_type": "click", "target": (231,876)}"#
        );
        let swipe = UnifiedAction::Mobile(MobileAction::Swipe {
            start: p(500, 800),
            direction: Direction::Up,
            distance: SwipeDistance::Medium,
        });
        assert_eq!(
            serialize_action(&swipe, SerializeMode::Paper),
            r#"{"action_type": "swipe", "start": (500,800), "direction": "up", "distance": "medium"}"#
        );
        let status = UnifiedAction::Mobile(MobileAction::Status {
            goal_status: GoalStatus::Successful,
            answer: "42".into(),
        });
        let s = serialize_action(&status, SerializeMode::StrictJson);
        assert_eq!(s, r#"{"action_type": "status", "goal_status": "successful", "answer": "42"}"#);
        assert_eq!(s, serialize_action(&status, SerializeMode::Paper));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_action(r#"{"action_type": "navigate_back"}"#, Platform::Mobile).unwrap(),
            UnifiedAction::Mobile(MobileAction::NavigateBack)
        );
        let swipe = parse_action(
            r#"{"action_type": "swipe", "start": (500,800), "direction": "up", "distance": "medium"}"#,
            Platform::Mobile,
        )
        .unwrap();
        assert_eq!(
            swipe,
            UnifiedAction::Mobile(MobileAction::Swipe {
                start: p(500, 800),
                direction: Direction::Up,
                distance: SwipeDistance::Medium,
            })
        );
        let err = parse_action(r#"{"action_type": "go_to", "url": "https://a.b"}"#, Platform::Mobile)
            .unwrap_err();
        assert!(matches!(err, ActionError::PlatformMismatch { ref action, .. } if action == "go_to"));
    }

    #[test]
    fn parse_tolerates_whitespace_and_aliases() {
        let a = parse_action(
            "  {\n\"action_type\" :\"long_Press\" ,\t\"target\":( 3 , 4 )}  ",
            Platform::Mobile,
        )
        .unwrap();
        assert_eq!(a, UnifiedAction::Mobile(MobileAction::LongPress { target: p(3, 4) }));
        let tap = parse_action(r#"{"action_type": "tap", "target": [1,2]}"#, Platform::Mobile).unwrap();
        assert_eq!(tap, UnifiedAction::Mobile(MobileAction::Click { target: p(1, 2) }));
        // tap is a mobile-only alias
        assert!(parse_action(r#"{"action_type": "tap", "target": [1,2]}"#, Platform::Web).is_err());
    }

    #[test]
    fn parse_errors() {
        let unknown = parse_action(r#"{"action_type": "teleport"}"#, Platform::Web).unwrap_err();
        assert_eq!(unknown, ActionError::UnknownAction("teleport".into()));
        let missing = parse_action(r#"{"action_type": "click"}"#, Platform::Web).unwrap_err();
        assert!(matches!(missing, ActionError::Schema { .. }));
        let extra = parse_action(
            r#"{"action_type": "wait", "seconds": "3"}"#,
            Platform::Mobile,
        )
        .unwrap_err();
        assert!(matches!(extra, ActionError::Schema { ref message, .. } if message.contains("seconds")));
        let range = parse_action(r#"{"action_type": "click", "target": (1200,10)}"#, Platform::Mobile)
            .unwrap_err();
        assert!(matches!(range, ActionError::Range { value: 1200, .. }));
        assert!(matches!(
            parse_action("click(3,4)", Platform::Mobile),
            Err(ActionError::Syntax { .. })
        ));
        assert!(matches!(
            parse_action(r#"{"target": (1,2)}"#, Platform::Mobile),
            Err(ActionError::MissingActionType)
        ));
        assert!(matches!(
            parse_action(r#"{"action_type": "swipe", "start": (1,2), "direction": "north", "distance": "long"}"#, Platform::Mobile),
            Err(ActionError::Schema { .. })
        ));
        assert!(matches!(
            parse_action(r#"{"action_type": "click", "target": (1,2]}"#, Platform::Mobile),
            Err(ActionError::Syntax { .. })
        ));
    }

    #[test]
    fn switch_tab_accepts_quoted_or_bare_index() {
        let a = parse_action(r#"{"action_type": "switch_tab", "tab": 2}"#, Platform::Web).unwrap();
        let b = parse_action(r#"{"action_type": "switch_tab", "tab": "2"}"#, Platform::Web).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), r#"{"action_type": "switch_tab", "tab": "2"}"#);
    }

    #[test]
    fn text_escaping_round_trips() {
        let a = UnifiedAction::Web(WebAction::InputText {
            text: "say \"hi\"\\ (ok), {x}: ñ".into(),
        });
        for mode in [SerializeMode::Paper, SerializeMode::StrictJson] {
            assert_eq!(parse_action(&serialize_action(&a, mode), Platform::Web).unwrap(), a);
        }
    }

    #[test]
    fn validate_examples() {
        assert!(validate_action(&UnifiedAction::Mobile(MobileAction::Click { target: p(231, 876) })).is_empty());
        assert_eq!(
            validate_action(&UnifiedAction::Mobile(MobileAction::Click { target: p(1200, 10) })),
            vec![Violation::CoordinateOutOfRange {
                field: "target".into(),
                x: 1200,
                y: 10
            }]
        );
        assert_eq!(
            validate_action(&UnifiedAction::Mobile(MobileAction::InputText { text: String::new() })),
            vec![Violation::EmptyText { field: "text".into() }]
        );
        let status = UnifiedAction::Web(WebAction::Status {
            goal_status: GoalStatus::Infeasible,
            answer: String::new(),
        });
        assert!(validate_action(&status).is_empty());
        let hk = UnifiedAction::Desktop(DesktopAction::Hotkey { key_comb: "Ctrl-".into() });
        assert_eq!(validate_action(&hk).len(), 1);
    }

    #[test]
    fn serde_form_is_tagged() {
        let a = UnifiedAction::Mobile(MobileAction::Click { target: p(1, 2) });
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"platform":"mobile","action":{"action_type":"click","target":[1,2]}}"#
        );
    }

    #[test]
    fn name_tables_have_expected_sizes() {
        assert_eq!(action_names(Platform::Mobile).len(), 11);
        assert_eq!(action_names(Platform::Web).len(), 15);
        assert_eq!(action_names(Platform::Desktop).len(), 10);
    }
}
