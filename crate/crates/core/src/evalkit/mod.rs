//! Event-level post-processing and scoring.

mod annotation;
mod metrics;
mod postprocess;

pub use annotation::{read_annotations, write_annotations, EventAnnotation};
pub use metrics::{event_metrics, Counts, MetricsReport, DEFAULT_COLLAR};
pub use postprocess::{
    argmax_label, block_span, drop_short, frames_to_events, label_runs, merge_gaps, mode_filter, stream_end,
    vocal_events, vocal_reference, MEDIAN_WINDOW, MERGE_GAP, MIN_DURATION, VISUAL_THRESHOLD,
};
