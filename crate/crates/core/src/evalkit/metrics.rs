use std::fmt;

use crate::class::EventClass;
use crate::error::Result;

use super::EventAnnotation;

pub const DEFAULT_COLLAR: f64 = 0.2;

const CLASSES: [EventClass; 5] = [
    EventClass::Silence,
    EventClass::Speech,
    EventClass::Singing,
    EventClass::Others,
    EventClass::Vocal,
];

/// Raw event counts; all ratios are derived from these so reports merge by
/// summation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub reference: usize,
    pub detected: usize,
    pub correct: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.reference += o.reference;
        self.detected += o.detected;
        self.correct += o.correct;
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
    }

    /// Percent.
    pub fn precision(&self) -> f64 {
        if self.detected == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.detected as f64
        }
    }

    /// Percent.
    pub fn recall(&self) -> f64 {
        if self.reference == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.reference as f64
        }
    }

    /// Percent.
    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn error_rate(&self) -> f64 {
        (self.substitutions + self.insertions + self.deletions) as f64 / self.reference.max(1) as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub overall: Counts,
    /// Silence, speech, singing, others, vocal. Class-wise counts carry no
    /// substitutions: a mislabeled event is a deletion of its reference class
    /// and an insertion of its detected class.
    pub per_class: [Counts; 5],
}

impl MetricsReport {
    pub fn merge(&mut self, other: &MetricsReport) {
        self.overall.add(&other.overall);
        for (a, b) in self.per_class.iter_mut().zip(&other.per_class) {
            a.add(b);
        }
    }

    pub fn class(&self, c: EventClass) -> &Counts {
        &self.per_class[CLASSES.iter().position(|&x| x == c).unwrap()]
    }

    pub fn f_score(&self) -> f64 {
        self.overall.f_score()
    }

    pub fn error_rate(&self) -> f64 {
        self.overall.error_rate()
    }

    /// Tab-separated rows: scope, N, detected, C, S, I, D, P, R, F, ER.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("scope\tN\tdetected\tC\tS\tI\tD\tP\tR\tF\tER\n");
        let mut row = |name: &str, c: &Counts| {
            s.push_str(&format!(
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\n",
                c.reference,
                c.detected,
                c.correct,
                c.substitutions,
                c.insertions,
                c.deletions,
                c.precision(),
                c.recall(),
                c.f_score(),
                c.error_rate()
            ));
        };
        row("overall", &self.overall);
        for (c, counts) in CLASSES.iter().zip(&self.per_class) {
            if counts.reference + counts.detected > 0 {
                row(c.as_str(), counts);
            }
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}{:>6}{:>6}{:>6}{:>6}{:>6}{:>9}{:>9}{:>9}{:>8}", "", "N", "C", "S", "I", "D", "P%", "R%", "F%", "ER")?;
        let mut row = |name: &str, c: &Counts| {
            writeln!(
                f,
                "{:<10}{:>6}{:>6}{:>6}{:>6}{:>6}{:>9.2}{:>9.2}{:>9.2}{:>8.4}",
                name,
                c.reference,
                c.correct,
                c.substitutions,
                c.insertions,
                c.deletions,
                c.precision(),
                c.recall(),
                c.f_score(),
                c.error_rate()
            )
        };
        row("overall", &self.overall)?;
        for (c, counts) in CLASSES.iter().zip(&self.per_class) {
            if counts.reference + counts.detected > 0 {
                row(c.as_str(), counts)?;
            }
        }
        Ok(())
    }
}

fn within_collars(r: &EventAnnotation, d: &EventAnnotation, collar: f64) -> bool {
    (d.onset - r.onset).abs() <= collar + 1e-9
        && (d.offset - r.offset).abs() <= collar.max(0.5 * r.duration()) + 1e-9
}

fn sorted(events: &[EventAnnotation]) -> Vec<EventAnnotation> {
    let mut v = events.to_vec();
    v.sort_by(|a, b| {
        a.onset
            .total_cmp(&b.onset)
            .then(a.offset.total_cmp(&b.offset))
            .then(a.label.cmp(&b.label))
    });
    v
}

/// Greedy pairing in onset order: each detection takes the admissible
/// unmatched reference with the closest onset, then the closest offset.
fn pair(
    refs: &[EventAnnotation],
    dets: &[EventAnnotation],
    ref_used: &mut [bool],
    det_used: &mut [bool],
    collar: f64,
    same_label: bool,
) -> usize {
    let mut n = 0;
    for (j, d) in dets.iter().enumerate() {
        if det_used[j] {
            continue;
        }
        let best = refs
            .iter()
            .enumerate()
            .filter(|(i, r)| !ref_used[*i] && (r.label == d.label) == same_label && within_collars(r, d, collar))
            .min_by(|(_, a), (_, b)| {
                (a.onset - d.onset)
                    .abs()
                    .total_cmp(&(b.onset - d.onset).abs())
                    .then((a.offset - d.offset).abs().total_cmp(&(b.offset - d.offset).abs()))
            })
            .map(|(i, _)| i);
        if let Some(i) = best {
            ref_used[i] = true;
            det_used[j] = true;
            n += 1;
        }
    }
    n
}

/// Event-based scoring of one scene. Onsets must fall within `collar` of the
/// reference; offsets within `max(collar, half the reference duration)`.
pub fn event_metrics(reference: &[EventAnnotation], detected: &[EventAnnotation], collar: f64) -> Result<MetricsReport> {
    for e in reference.iter().chain(detected) {
        e.validate()?;
    }
    let refs = sorted(reference);
    let dets = sorted(detected);
    let mut ref_used = vec![false; refs.len()];
    let mut det_used = vec![false; dets.len()];
    let correct = pair(&refs, &dets, &mut ref_used, &mut det_used, collar, true);
    let mut per_class = [Counts::default(); 5];
    for (i, c) in CLASSES.iter().enumerate() {
        let pc = &mut per_class[i];
        pc.reference = refs.iter().filter(|r| r.label == *c).count();
        pc.detected = dets.iter().filter(|d| d.label == *c).count();
        pc.correct = refs.iter().zip(&ref_used).filter(|(r, &u)| u && r.label == *c).count();
        pc.deletions = pc.reference - pc.correct;
        pc.insertions = pc.detected - pc.correct;
    }
    let substitutions = pair(&refs, &dets, &mut ref_used, &mut det_used, collar, false);
    let overall = Counts {
        reference: refs.len(),
        detected: dets.len(),
        correct,
        substitutions,
        insertions: dets.len() - correct - substitutions,
        deletions: refs.len() - correct - substitutions,
    };
    Ok(MetricsReport { overall, per_class })
}
