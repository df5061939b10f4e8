//! Decimated sample matrix plus discrete event list.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::converters::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    ModeChange {
        converter: String,
        from: Mode,
        to: Mode,
    },
    MpptUpdate {
        converter: String,
        duty: f64,
        power: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Row-major trace. Column 0 of the exported CSV is time, which is kept
/// apart from the signal columns here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    signals: Vec<String>,
    times: Vec<f64>,
    data: Vec<f64>,
    pub events: Vec<Event>,
}

impl TraceLog {
    pub fn new(signals: Vec<String>) -> Self {
        TraceLog {
            signals,
            times: Vec::new(),
            data: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Appends one sample. Panics if the row width is wrong or time does
    /// not increase.
    pub fn push_row(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.signals.len(), "row width mismatch");
        if let Some(&last) = self.times.last() {
            assert!(t > last, "trace time must increase");
        }
        self.times.push(t);
        self.data.extend_from_slice(row);
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == name)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.signals.len();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(move |k| (self.times[k], self.row(k)))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some(self.rows().map(|(_, r)| r[c]).collect())
    }

    pub fn first(&self, name: &str) -> Option<f64> {
        let c = self.column_index(name)?;
        (!self.is_empty()).then(|| self.row(0)[c])
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let c = self.column_index(name)?;
        (!self.is_empty()).then(|| self.row(self.len() - 1)[c])
    }
}
