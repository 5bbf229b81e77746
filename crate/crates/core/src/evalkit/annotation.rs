use std::fs;
use std::path::Path;

use crate::class::EventClass;
use crate::error::{Error, Result};

/// A labeled time span in seconds, `onset < offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventAnnotation {
    pub onset: f64,
    pub offset: f64,
    pub label: EventClass,
}

impl EventAnnotation {
    pub fn new(onset: f64, offset: f64, label: EventClass) -> Result<Self> {
        let e = EventAnnotation { onset, offset, label };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.onset.is_finite() && self.offset.is_finite() && self.onset < self.offset) {
            return Err(Error::InvalidArgument(format!(
                "malformed event {} [{}, {}): onset must precede offset",
                self.label, self.onset, self.offset
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

/// One event per line: `onset<TAB>offset<TAB>label`, seconds with three
/// decimals.
pub fn write_annotations(path: &Path, events: &[EventAnnotation]) -> Result<()> {
    let mut text = String::new();
    for e in events {
        text.push_str(&format!("{:.3}\t{:.3}\t{}\n", e.onset, e.offset, e.label));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_annotations(path: &Path) -> Result<Vec<EventAnnotation>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text).map_err(|e| Error::format(path, e))
}

pub(crate) fn parse_annotations(text: &str) -> Result<Vec<EventAnnotation>> {
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected onset<TAB>offset<TAB>label",
                n + 1
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("line {}: bad time {s:?}", n + 1)))
        };
        let label: EventClass = fields[2].parse()?;
        if label.target_index().is_none() {
            return Err(Error::InvalidArgument(format!(
                "line {}: label must be silence, speech, singing or others",
                n + 1
            )));
        }
        events.push(EventAnnotation::new(num(fields[0])?, num(fields[1])?, label)?);
    }
    Ok(events)
}
