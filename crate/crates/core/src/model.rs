//! Screens, elements, referring expressions, triplets and episodes.
//!
//! Pixel coordinates use a top-left origin with y growing downward. Normalized
//! coordinates are integer thousandths of the screen width/height in `[0, 1000]`.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::UnifiedAction;

/// Upper bound of the normalized coordinate range.
pub const NORM_MAX: i32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Mobile,
    Web,
    Desktop,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Mobile, Platform::Web, Platform::Desktop];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Mobile => "mobile",
            Platform::Web => "web",
            Platform::Desktop => "desktop",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Platform {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mobile" => Ok(Platform::Mobile),
            "web" => Ok(Platform::Web),
            "desktop" => Ok(Platform::Desktop),
            other => Err(ModelError::UnknownPlatform(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{axis} coordinate {value} lies outside the screen extent 0..={extent}")]
    OutOfBounds { axis: Axis, value: i64, extent: u32 },
    #[error("screen dimensions must be positive, got {width}x{height}")]
    EmptyScreen { width: u32, height: u32 },
    #[error("invalid bounding box ({left},{top},{right},{bottom}): left < right and top < bottom required")]
    InvalidBBox {
        left: i32,
        top: i32,
        right: i32,
        bottom: i32,
    },
    #[error("normalized point ({x},{y}) outside [0,{NORM_MAX}]")]
    InvalidNormPoint { x: i32, y: i32 },
    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotMeta {
    pub id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<PathBuf>,
}

impl ScreenshotMeta {
    pub fn new(id: impl Into<String>, width_px: u32, height_px: u32, platform: Platform) -> Self {
        ScreenshotMeta {
            id: id.into(),
            width_px,
            height_px,
            platform,
            image_ref: None,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(ModelError::EmptyScreen {
                width: self.width_px,
                height: self.height_px,
            });
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width_px) * u64::from(self.height_px)
    }

    /// The whole screen as a box.
    pub fn bounds(&self) -> BBox {
        BBox {
            left: 0,
            top: 0,
            right: self.width_px as i32,
            bottom: self.height_px as i32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: i32,
    pub y: i32,
}

impl PixelPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        PixelPoint { x, y }
    }
}

/// Pixel-space box. Deserialization does not enforce validity so that noisy
/// annotations can reach the denoiser; use [`BBox::new`] or [`BBox::is_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl BBox {
    pub fn new(left: i32, top: i32, right: i32, bottom: i32) -> Result<Self, ModelError> {
        let b = BBox {
            left,
            top,
            right,
            bottom,
        };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(ModelError::InvalidBBox {
                left,
                top,
                right,
                bottom,
            })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.left < self.right && self.top < self.bottom
    }

    pub fn width(&self) -> i64 {
        i64::from(self.right) - i64::from(self.left)
    }

    pub fn height(&self) -> i64 {
        i64::from(self.bottom) - i64::from(self.top)
    }

    /// Area of a valid box; zero for degenerate ones.
    pub fn area(&self) -> u64 {
        if self.is_valid() {
            (self.width() * self.height()) as u64
        } else {
            0
        }
    }

    pub fn within(&self, screen: &ScreenshotMeta) -> bool {
        self.left >= 0
            && self.top >= 0
            && i64::from(self.right) <= i64::from(screen.width_px)
            && i64::from(self.bottom) <= i64::from(screen.height_px)
    }

    pub fn scaled(&self, factor: i32) -> BBox {
        BBox {
            left: self.left * factor,
            top: self.top * factor,
            right: self.right * factor,
            bottom: self.bottom * factor,
        }
    }
}

/// A point in thousandths of the screen extent.
///
/// Fields are public so that out-of-range model outputs can be represented and
/// reported by [`crate::action::validate_action`]; [`NormPoint::new`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct NormPoint {
    pub x: i32,
    pub y: i32,
}

impl NormPoint {
    pub fn new(x: i32, y: i32) -> Result<Self, ModelError> {
        let p = NormPoint { x, y };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(ModelError::InvalidNormPoint { x, y })
        }
    }

    pub fn is_valid(&self) -> bool {
        (0..=NORM_MAX).contains(&self.x) && (0..=NORM_MAX).contains(&self.y)
    }

    /// Euclidean distance in unit-square coordinates.
    pub fn unit_distance(&self, other: &NormPoint) -> f64 {
        let dx = f64::from(self.x - other.x) / f64::from(NORM_MAX);
        let dy = f64::from(self.y - other.y) / f64::from(NORM_MAX);
        dx.hypot(dy)
    }
}

impl From<(i32, i32)> for NormPoint {
    fn from((x, y): (i32, i32)) -> Self {
        NormPoint { x, y }
    }
}

impl From<NormPoint> for (i32, i32) {
    fn from(p: NormPoint) -> Self {
        (p.x, p.y)
    }
}

impl fmt::Display for NormPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Parses the `(x,y)` rendering used for grounding targets. Whitespace around
/// the numbers is tolerated; square brackets are accepted as well.
pub fn parse_norm_point(s: &str) -> Result<NormPoint, ModelError> {
    let bad = || ModelError::InvalidNormPoint { x: -1, y: -1 };
    let t = s.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .or_else(|| t.strip_prefix('[').and_then(|r| r.strip_suffix(']')))
        .ok_or_else(bad)?;
    let (a, b) = inner.split_once(',').ok_or_else(bad)?;
    let x: i32 = a.trim().parse().map_err(|_| bad())?;
    let y: i32 = b.trim().parse().map_err(|_| bad())?;
    NormPoint::new(x, y)
}

/// Round-half-up division for non-negative numerators and positive divisors.
fn div_round_half_up(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

/// Maps a pixel point onto the `[0, 1000]` grid, rounding half-up.
pub fn normalize_point(p: PixelPoint, screen: &ScreenshotMeta) -> Result<NormPoint, ModelError> {
    screen.check()?;
    let axis = |value: i32, extent: u32, axis: Axis| -> Result<i32, ModelError> {
        if value < 0 || i64::from(value) > i64::from(extent) {
            return Err(ModelError::OutOfBounds {
                axis,
                value: i64::from(value),
                extent,
            });
        }
        let n = div_round_half_up(i64::from(value) * i64::from(NORM_MAX), i64::from(extent));
        Ok(n.clamp(0, i64::from(NORM_MAX)) as i32)
    };
    Ok(NormPoint {
        x: axis(p.x, screen.width_px, Axis::X)?,
        y: axis(p.y, screen.height_px, Axis::Y)?,
    })
}

/// Inverse of [`normalize_point`] up to quantization.
pub fn denormalize_point(p: NormPoint, screen: &ScreenshotMeta) -> PixelPoint {
    let axis = |value: i32, extent: u32| -> i32 {
        div_round_half_up(i64::from(value) * i64::from(extent), i64::from(NORM_MAX)) as i32
    };
    PixelPoint {
        x: axis(p.x, screen.width_px),
        y: axis(p.y, screen.height_px),
    }
}

/// Box center, each axis rounded half-up.
pub fn bbox_center(b: &BBox) -> PixelPoint {
    let mid = |a: i32, c: i32| -> i32 { (i64::from(a) + i64::from(c) + 1).div_euclid(2) as i32 };
    PixelPoint {
        x: mid(b.left, b.right),
        y: mid(b.top, b.bottom),
    }
}

/// Inclusive containment on all four edges.
pub fn point_in_bbox(p: PixelPoint, b: &BBox) -> bool {
    b.left <= p.x && p.x <= b.right && b.top <= p.y && p.y <= b.bottom
}

/// Normalized target point for a box: the normalized center, nudged by one
/// grid step when quantization would push it outside the box.
pub fn grounding_point(b: &BBox, screen: &ScreenshotMeta) -> Result<NormPoint, ModelError> {
    let center = bbox_center(b);
    let clamped = PixelPoint {
        x: center.x.clamp(0, screen.width_px as i32),
        y: center.y.clamp(0, screen.height_px as i32),
    };
    let n = normalize_point(clamped, screen)?;
    if point_in_bbox(denormalize_point(n, screen), b) {
        return Ok(n);
    }
    for dx in [0, -1, 1] {
        for dy in [0, -1, 1] {
            let cand = NormPoint {
                x: n.x + dx,
                y: n.y + dy,
            };
            if cand.is_valid() && point_in_bbox(denormalize_point(cand, screen), b) {
                return Ok(cand);
            }
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReKind {
    Description,
    Intent,
    Functionality,
    DisplayedText,
    IconName,
}

impl ReKind {
    pub const ALL: [ReKind; 5] = [
        ReKind::Description,
        ReKind::Intent,
        ReKind::Functionality,
        ReKind::DisplayedText,
        ReKind::IconName,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferringExpression {
    pub kind: ReKind,
    pub text: String,
}

impl ReferringExpression {
    pub fn new(kind: ReKind, text: impl Into<String>) -> Self {
        ReferringExpression {
            kind,
            text: text.into(),
        }
    }
}

/// One annotated element taken from a layout tree or metadata export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elem_class: Option<String>,
    #[serde(default)]
    pub clickable: bool,
    pub source_id: String,
    /// Extra expressions supplied by upstream annotation (functionality,
    /// intent, description).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expressions: Vec<ReferringExpression>,
}

impl ElementRecord {
    pub fn new(source_id: impl Into<String>, bbox: BBox) -> Self {
        ElementRecord {
            bbox,
            text: None,
            icon_class: None,
            elem_class: None,
            clickable: false,
            source_id: source_id.into(),
            expressions: Vec::new(),
        }
    }

    pub fn non_empty_text(&self) -> Option<&str> {
        self.text.as_deref().filter(|t| !t.trim().is_empty())
    }

    /// All referring expressions this element can seed: displayed text, icon
    /// class and any supplied expressions, in that order.
    pub fn referring_expressions(&self) -> Vec<ReferringExpression> {
        let mut out = Vec::new();
        if let Some(t) = self.non_empty_text() {
            out.push(ReferringExpression::new(ReKind::DisplayedText, t.trim()));
        }
        if let Some(icon) = self.icon_class.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push(ReferringExpression::new(ReKind::IconName, icon.trim()));
        }
        out.extend(
            self.expressions
                .iter()
                .filter(|re| !re.text.trim().is_empty())
                .cloned(),
        );
        out
    }
}

/// A screenshot with its element annotations; one line of an element corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenRecord {
    pub screenshot: ScreenshotMeta,
    pub elements: Vec<ElementRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingTriplet {
    pub screenshot: ScreenshotMeta,
    pub re: ReferringExpression,
    pub target_bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub screenshot: ScreenshotMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_level_instruction: Option<String>,
    pub gold_action: UnifiedAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_bbox: Option<BBox>,
    pub history_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    /// The untouched source record this step was converted from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub platform: Platform,
    pub goal: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EpisodeError {
    #[error("episode `{0}` has no steps")]
    Empty(String),
    #[error("episode `{episode}` step {index}: action platform {found} differs from episode platform {expected}")]
    PlatformMismatch {
        episode: String,
        index: usize,
        expected: Platform,
        found: Platform,
    },
    #[error("episode `{episode}` step {index}: gold_bbox given for non-localization action `{action}`")]
    BBoxOnNonLocalization {
        episode: String,
        index: usize,
        action: &'static str,
    },
}

impl Episode {
    /// Stable identifier of one step, used to join predictions with gold.
    pub fn step_id(&self, index: usize) -> String {
        step_id(&self.id, index)
    }

    pub fn check(&self) -> Result<(), EpisodeError> {
        if self.steps.is_empty() {
            return Err(EpisodeError::Empty(self.id.clone()));
        }
        for (index, step) in self.steps.iter().enumerate() {
            let found = step.gold_action.platform();
            if found != self.platform {
                return Err(EpisodeError::PlatformMismatch {
                    episode: self.id.clone(),
                    index,
                    expected: self.platform,
                    found,
                });
            }
            if step.gold_bbox.is_some() && !step.gold_action.is_localization() {
                return Err(EpisodeError::BBoxOnNonLocalization {
                    episode: self.id.clone(),
                    index,
                    action: step.gold_action.action_type(),
                });
            }
        }
        Ok(())
    }

    /// Renumbers `history_index` to match list positions.
    pub fn reindex(&mut self) {
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.history_index = i;
        }
    }
}

pub fn step_id(episode_id: &str, index: usize) -> String {
    format!("{episode_id}#{index}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn screen(w: u32, h: u32) -> ScreenshotMeta {
        ScreenshotMeta::new("s", w, h, Platform::Mobile)
    }

    #[test]
    fn normalize_examples() {
        let s = screen(1080, 1920);
        assert_eq!(
            normalize_point(PixelPoint::new(540, 960), &s).unwrap(),
            NormPoint { x: 500, y: 500 }
        );
        assert_eq!(
            normalize_point(PixelPoint::new(0, 0), &s).unwrap(),
            NormPoint { x: 0, y: 0 }
        );
        assert_eq!(
            normalize_point(PixelPoint::new(1080, 1920), &s).unwrap(),
            NormPoint { x: 1000, y: 1000 }
        );
    }

    #[test]
    fn normalize_rejects_outside_naming_axis() {
        let s = screen(1080, 1920);
        let err = normalize_point(PixelPoint::new(10, 1921), &s).unwrap_err();
        assert!(matches!(err, ModelError::OutOfBounds { axis: Axis::Y, .. }));
        let err = normalize_point(PixelPoint::new(-1, 0), &s).unwrap_err();
        assert!(matches!(err, ModelError::OutOfBounds { axis: Axis::X, .. }));
        assert!(err.to_string().starts_with("x coordinate"));
    }

    #[test]
    fn denormalize_examples() {
        let s = screen(1080, 1920);
        assert_eq!(
            denormalize_point(NormPoint { x: 500, y: 500 }, &s),
            PixelPoint::new(540, 960)
        );
        assert_eq!(denormalize_point(NormPoint { x: 0, y: 0 }, &s), PixelPoint::new(0, 0));
        assert_eq!(
            denormalize_point(NormPoint { x: 1000, y: 1000 }, &s),
            PixelPoint::new(1080, 1920)
        );
    }

    #[test]
    fn center_examples() {
        assert_eq!(bbox_center(&BBox::new(0, 0, 100, 50).unwrap()), PixelPoint::new(50, 25));
        assert_eq!(bbox_center(&BBox::new(10, 10, 11, 11).unwrap()), PixelPoint::new(11, 11));
        assert_eq!(
            bbox_center(&BBox::new(100, 200, 300, 400).unwrap()),
            PixelPoint::new(200, 300)
        );
    }

    #[test]
    fn containment_examples() {
        let b = BBox::new(0, 0, 100, 50).unwrap();
        assert!(point_in_bbox(PixelPoint::new(50, 25), &b));
        assert!(!point_in_bbox(PixelPoint::new(101, 25), &b));
        assert!(point_in_bbox(PixelPoint::new(100, 50), &b));
    }

    #[test]
    fn bbox_new_rejects_zero_area() {
        assert!(BBox::new(0, 0, 0, 50).is_err());
        assert!(BBox::new(5, 5, 4, 10).is_err());
    }

    #[test]
    fn norm_point_serializes_as_pair() {
        let p = NormPoint { x: 3, y: 4 };
        assert_eq!(serde_json::to_string(&p).unwrap(), "[3,4]");
        assert_eq!(parse_norm_point(" ( 3 , 4 ) ").unwrap(), p);
        assert!(parse_norm_point("(3,1001)").is_err());
    }

    fn screen_and_point() -> impl Strategy<Value = (ScreenshotMeta, PixelPoint)> {
        (1u32..5000, 1u32..5000).prop_flat_map(|(w, h)| {
            (Just(screen(w, h)), 0..=w as i32, 0..=h as i32)
                .prop_map(|(s, x, y)| (s, PixelPoint::new(x, y)))
        })
    }

    proptest! {
        #[test]
        fn round_trip_error_is_bounded((s, p) in screen_and_point()) {
            let back = denormalize_point(normalize_point(p, &s).unwrap(), &s);
            let bound_x = i64::from(s.width_px.div_ceil(2000)) + 1;
            let bound_y = i64::from(s.height_px.div_ceil(2000)) + 1;
            prop_assert!((i64::from(back.x) - i64::from(p.x)).abs() <= bound_x);
            prop_assert!((i64::from(back.y) - i64::from(p.y)).abs() <= bound_y);
        }

        #[test]
        fn normalize_is_monotone((s, p) in screen_and_point(), dx in 0i32..50, dy in 0i32..50) {
            let q = PixelPoint::new((p.x + dx).min(s.width_px as i32), (p.y + dy).min(s.height_px as i32));
            let np = normalize_point(p, &s).unwrap();
            let nq = normalize_point(q, &s).unwrap();
            prop_assert!(nq.x >= np.x && nq.y >= np.y);
        }

        #[test]
        fn center_is_inside(l in -500i32..500, t in -500i32..500, w in 1i32..500, h in 1i32..500) {
            let b = BBox::new(l, t, l + w, t + h).unwrap();
            prop_assert!(point_in_bbox(bbox_center(&b), &b));
        }

        #[test]
        fn containment_is_scale_invariant(
            l in -300i32..300, t in -300i32..300, w in 1i32..300, h in 1i32..300,
            x in -700i32..700, y in -700i32..700, k in 1i32..20,
        ) {
            let b = BBox::new(l, t, l + w, t + h).unwrap();
            let p = PixelPoint::new(x, y);
            let scaled = PixelPoint::new(x * k, y * k);
            prop_assert_eq!(point_in_bbox(p, &b), point_in_bbox(scaled, &b.scaled(k)));
        }
    }
}
