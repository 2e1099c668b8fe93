//! Data engineering for GUI agents: a unified action space with a stable string
//! grammar, converters from heterogeneous trajectory datasets, an annotation
//! denoiser, grounding/referring task generation and offline metrics.

pub mod action;
pub mod adapters;
pub mod denoise;
pub mod eval;
pub mod model;
pub mod report;
pub mod taskgen;
pub mod text;

pub use action::{
    parse_action, serialize_action, validate_action, ActionError, DesktopAction, Direction,
    GoalStatus, MobileAction, SerializeMode, SwipeDistance, UnifiedAction, Violation, WebAction,
};
pub use model::{
    bbox_center, denormalize_point, normalize_point, point_in_bbox, BBox, ElementRecord, Episode,
    GroundingTriplet, ModelError, NormPoint, PixelPoint, Platform, ReKind, ReferringExpression,
    ScreenRecord, ScreenshotMeta, Step,
};
pub use adapters::{
    classify_dual_point, convert_episode, derive_enclosing_bbox, AdapterConfig, ConversionError,
    DualPointKind, Manifest, Registry, Source, SourceEpisode,
};
pub use denoise::{
    denoise_elements, denoise_episode, denoise_screen, AuditReport, DenoiseConfig, DenoiseVerdict,
    KeywordTable, NoiseRule, Providers, RuleMask,
};
pub use eval::{
    emit_report, grounding_accuracy, match_step, op_f1, step_sr, MatchPolicy, MetricsReport,
    PredictionRecord, ReportFormat, StepOutcome,
};
pub use taskgen::{
    format_agent_sample, gen_grounding, gen_referring, gen_widget_listing, TaskKind, TaskSample,
    TemplateSet,
};
