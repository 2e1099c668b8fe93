use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::Source;
use crate::model::Platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateSpace {
    /// Fractions of the screen in `[0, 1]`.
    Unit,
    /// Screen pixels.
    Pixel,
    /// Already on the `[0, 1000]` grid.
    Thousandths,
}

impl CoordinateSpace {
    pub(crate) fn to_unit(self, x: f64, y: f64, w: f64, h: f64) -> (f64, f64) {
        match self {
            CoordinateSpace::Unit => (x, y),
            CoordinateSpace::Pixel => (x / w, y / h),
            CoordinateSpace::Thousandths => (x / 1000.0, y / 1000.0),
        }
    }

    pub(crate) fn to_pixels(self, x: f64, y: f64, w: f64, h: f64) -> (f64, f64) {
        match self {
            CoordinateSpace::Unit => (x * w, y * h),
            CoordinateSpace::Pixel => (x, y),
            CoordinateSpace::Thousandths => (x * w / 1000.0, y * h / 1000.0),
        }
    }

    pub(crate) fn pixels_to_space(self, x: f64, y: f64, w: f64, h: f64) -> (f64, f64) {
        match self {
            CoordinateSpace::Unit => (x / w, y / h),
            CoordinateSpace::Pixel => (x, y),
            CoordinateSpace::Thousandths => (x * 1000.0 / w, y * 1000.0 / h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BBoxFormat {
    #[default]
    Ltrb,
    Xywh,
}

/// A string argument: either the name of a raw field or a fixed value
/// written as `{ value = "..." }`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ValueRef {
    Field(String),
    Literal { value: String },
}

impl ValueRef {
    pub(crate) fn describe(&self) -> String {
        match self {
            ValueRef::Field(f) => f.clone(),
            ValueRef::Literal { value } => format!("literal `{value}`"),
        }
    }
}

/// How one raw action name becomes unified actions.
///
/// Point arguments name a raw field holding `[a, b]` (ordered per
/// `coordinate_order`) or `{x, y}`, a pair of scalar fields written `"x,y"`,
/// or `"@bbox"` for the center of the step's target box.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionRule {
    /// Touch and lift points; a tap when they nearly coincide.
    DualPoint { start: String, end: String },
    /// Always a swipe (scroll on web and desktop), even for short gestures.
    Swipe { start: String, end: String },
    Click { point: String },
    LongPress { point: String },
    DoubleClick { point: String },
    RightClick { point: String },
    /// Direction-only scroll. On mobile it becomes a swipe from `start`
    /// (default screen center), inverted when `invert_scroll` is set.
    ScrollDirection {
        direction: ValueRef,
        #[serde(default)]
        distance: Option<ValueRef>,
        #[serde(default)]
        start: Option<String>,
    },
    /// Typing. With a `point`, a click is emitted first unless the previous
    /// step already focused that point.
    InputText {
        text: ValueRef,
        #[serde(default)]
        point: Option<String>,
    },
    Drag { start: String, end: String },
    /// Pointer move; a missing `start` means the move ends where it starts.
    MoveTo {
        #[serde(default)]
        start: Option<String>,
        end: String,
    },
    Key { key: ValueRef },
    Hotkey { key_comb: ValueRef },
    GoTo { url: ValueRef },
    SearchGoogle { query: ValueRef },
    SwitchTab { tab: ValueRef },
    /// A unified action without arguments, named by `action`.
    Fixed { action: String },
    Status {
        goal_status: String,
        #[serde(default)]
        answer: Option<ValueRef>,
    },
    /// Non-action steps (chat turns and the like) are skipped.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenFields {
    pub width: String,
    pub height: String,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepFields {
    pub instruction: Option<String>,
    pub reasoning: Option<String>,
    /// Target box of the step, in the manifest's coordinate space.
    pub bbox: Option<String>,
    pub bbox_format: BBoxFormat,
    /// List of boxes searched for the smallest one enclosing a click.
    pub candidates: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CoordinateOrder {
    #[default]
    Xy,
    Yx,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    source: Source,
    platform: Platform,
    action_key: String,
    coordinate_space: CoordinateSpace,
    #[serde(default)]
    coordinate_order: CoordinateOrder,
    #[serde(default)]
    first_action_only: bool,
    screen: ScreenFields,
    #[serde(default)]
    step: StepFields,
    actions: BTreeMap<String, ActionRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub source: Source,
    pub platform: Platform,
    pub action_key: String,
    pub coordinates: CoordinateSpace,
    pub yx_order: bool,
    pub first_action_only: bool,
    pub screen: ScreenFields,
    pub step: StepFields,
    pub actions: BTreeMap<String, ActionRule>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let raw: RawManifest = toml::from_str(text)?;
        Ok(Manifest {
            source: raw.source,
            platform: raw.platform,
            action_key: raw.action_key,
            coordinates: raw.coordinate_space,
            yx_order: raw.coordinate_order == CoordinateOrder::Yx,
            first_action_only: raw.first_action_only,
            screen: raw.screen,
            step: raw.step,
            actions: raw.actions,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Manifest::from_toml(&text)
    }

    pub fn builtin(source: Source) -> Manifest {
        let text = match source {
            Source::Aitw => include_str!("../../manifests/aitw.toml"),
            Source::Aitz => include_str!("../../manifests/aitz.toml"),
            Source::Amex => include_str!("../../manifests/amex.toml"),
            Source::Androidcontrol => include_str!("../../manifests/androidcontrol.toml"),
            Source::Guiodyssey => include_str!("../../manifests/guiodyssey.toml"),
            Source::GuiactMobile => include_str!("../../manifests/guiact_mobile.toml"),
            Source::GuiactWeb => include_str!("../../manifests/guiact_web.toml"),
            Source::Mind2web => include_str!("../../manifests/mind2web.toml"),
            Source::Weblinx => include_str!("../../manifests/weblinx.toml"),
            Source::OmniactDesktop => include_str!("../../manifests/omniact_desktop.toml"),
        };
        Manifest::from_toml(text).unwrap_or_else(|e| panic!("builtin manifest for {source}: {e}"))
    }
}

/// Manifests keyed by source.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    manifests: HashMap<Source, Manifest>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        for source in Source::ALL {
            r.register(Manifest::builtin(source));
        }
        r
    }

    /// Adds or replaces the manifest for its source.
    pub fn register(&mut self, m: Manifest) {
        self.manifests.insert(m.source, m);
    }

    pub fn get(&self, source: Source) -> Option<&Manifest> {
        self.manifests.get(&source)
    }
}
