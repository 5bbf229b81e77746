use crate::class::EventClass;
use crate::dsp::{BLOCK_HOP_SECONDS, BLOCK_SECONDS};

use super::EventAnnotation;

pub const MEDIAN_WINDOW: usize = 5;
pub const MERGE_GAP: f64 = 0.2;
pub const MIN_DURATION: f64 = 0.1;
pub const VISUAL_THRESHOLD: f32 = 0.5;

/// Index of the largest entry; ties go to the lower index.
pub fn argmax_label(p: &[f32; 4]) -> EventClass {
    let mut best = 0;
    for i in 1..4 {
        if p[i] > p[best] {
            best = i;
        }
    }
    EventClass::TARGETS[best]
}

/// Sliding majority vote over a categorical stream. The window is truncated at
/// the ends; a tie keeps the center label if it is among the winners,
/// otherwise the earliest winner in the window.
pub fn mode_filter<T: Copy + PartialEq>(labels: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    (0..labels.len())
        .map(|i| {
            let span = &labels[i.saturating_sub(half)..(i + half + 1).min(labels.len())];
            let count = |v: T| span.iter().filter(|&&x| x == v).count();
            let center = count(labels[i]);
            let mut best = (labels[i], center);
            for &v in span {
                let c = count(v);
                if c > best.1 {
                    best = (v, c);
                }
            }
            best.0
        })
        .collect()
}

/// Time span attributed to block `i` of `n`: the middle half-second of its
/// one-second window, stretched to 0 for the first block and to `end` for the
/// last.
pub fn block_span(i: usize, n: usize, end: f64) -> (f64, f64) {
    let margin = (BLOCK_SECONDS - BLOCK_HOP_SECONDS) / 2.0;
    let start = if i == 0 { 0.0 } else { i as f64 * BLOCK_HOP_SECONDS + margin };
    let stop = if i + 1 == n { end } else { (i + 1) as f64 * BLOCK_HOP_SECONDS + margin };
    (start, stop)
}

/// End of the last block of an `n`-block stream.
pub fn stream_end(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n - 1) as f64 * BLOCK_HOP_SECONDS + BLOCK_SECONDS
    }
}

/// Collapses runs of equal labels into events; `None` blocks emit nothing.
pub fn label_runs(labels: &[Option<EventClass>], end: f64) -> Vec<EventAnnotation> {
    let n = labels.len();
    let mut events: Vec<EventAnnotation> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && labels[j + 1] == labels[i] {
            j += 1;
        }
        if let Some(label) = labels[i] {
            let onset = block_span(i, n, end).0;
            let offset = block_span(j, n, end).1;
            if onset < offset {
                events.push(EventAnnotation { onset, offset, label });
            }
        }
        i = j + 1;
    }
    events
}

/// Joins same-label events separated by less than `gap` seconds.
pub fn merge_gaps(events: &[EventAnnotation], gap: f64) -> Vec<EventAnnotation> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.onset.total_cmp(&b.onset));
    let mut out: Vec<EventAnnotation> = Vec::new();
    for e in sorted {
        match out.iter_mut().rev().find(|o| o.label == e.label) {
            Some(prev) if e.onset - prev.offset < gap => prev.offset = prev.offset.max(e.offset),
            _ => out.push(e),
        }
    }
    out
}

pub fn drop_short(events: &[EventAnnotation], min_duration: f64) -> Vec<EventAnnotation> {
    events.iter().copied().filter(|e| e.duration() >= min_duration).collect()
}

fn finish(labels: Vec<Option<EventClass>>, end: f64) -> Vec<EventAnnotation> {
    let smoothed = mode_filter(&labels, MEDIAN_WINDOW);
    drop_short(&merge_gaps(&label_runs(&smoothed, end), MERGE_GAP), MIN_DURATION)
}

/// Four-class events from per-block probabilities at a half-second hop.
/// `end` is the scene end time; the stream's natural end if `None`.
pub fn frames_to_events(probs: &[[f32; 4]], end: Option<f64>) -> Vec<EventAnnotation> {
    let end = end.unwrap_or(stream_end(probs.len()));
    finish(probs.iter().map(|p| Some(argmax_label(p))).collect(), end)
}

/// Vocal / non-vocal events from a single vocalization probability per block.
/// Only vocal spans are emitted.
pub fn vocal_events(probs: &[f32], threshold: f32, end: Option<f64>) -> Vec<EventAnnotation> {
    let end = end.unwrap_or(stream_end(probs.len()));
    finish(
        probs.iter().map(|&p| (p >= threshold).then_some(EventClass::Vocal)).collect(),
        end,
    )
}

/// Reference events as seen by a vocal / non-vocal detector: speech and
/// singing become `Vocal`, everything else is kept.
pub fn vocal_reference(events: &[EventAnnotation]) -> Vec<EventAnnotation> {
    events
        .iter()
        .map(|e| EventAnnotation {
            label: if e.label.is_vocal() { EventClass::Vocal } else { e.label },
            ..*e
        })
        .collect()
}
