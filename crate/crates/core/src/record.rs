//! Observed semi-competing-risks records.

use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// One subject: `times[k] = min(T_k, D, C)` with indicator `events[k]`, follow-up
/// `followup = min(D, C)` with terminal indicator `death`.
///
/// Invariants (checked by [`ObservedRecord::validate`]): all times finite and
/// non-negative, `times[k] <= followup`, and `times[k] == followup` whenever
/// `events[k]` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub id: String,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub followup: f64,
    pub death: bool,
}

impl ObservedRecord {
    pub fn num_events(&self) -> usize {
        self.times.len()
    }

    /// Number of observed intermediate events.
    pub fn num_observed(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    /// Time of the latest observed intermediate event, 0 when none.
    pub fn landmark(&self) -> f64 {
        self.times
            .iter()
            .zip(&self.events)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .fold(0.0, f64::max)
    }

    /// Observed intermediate events as `(k, time)`.
    pub fn history(&self) -> Vec<(usize, f64)> {
        self.times
            .iter()
            .zip(&self.events)
            .enumerate()
            .filter(|(_, (_, &e))| e)
            .map(|(k, (&t, _))| (k, t))
            .collect()
    }

    pub fn validate(&self, row: usize) -> Result<(), DataError> {
        let bad = |message: String| Err(DataError::InvalidRecord { row, message });
        if self.times.len() != self.events.len() {
            return bad("event times and indicators differ in length".into());
        }
        if !self.followup.is_finite() || self.followup < 0.0 {
            return bad(format!("follow-up time {} is not a finite non-negative number", self.followup));
        }
        for (k, (&t, &e)) in self.times.iter().zip(&self.events).enumerate() {
            if !t.is_finite() || t < 0.0 {
                return bad(format!("t{} = {} is not a finite non-negative number", k + 1, t));
            }
            if t > self.followup {
                return bad(format!("t{} = {} exceeds follow-up y = {}", k + 1, t, self.followup));
            }
            if !e && t != self.followup {
                return bad(format!(
                    "t{} = {} is censored but differs from follow-up y = {}",
                    k + 1,
                    t,
                    self.followup
                ));
            }
        }
        Ok(())
    }
}

/// Validated collection of records sharing the number of intermediate events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<ObservedRecord>,
    num_events: usize,
}

impl Dataset {
    pub fn new(records: Vec<ObservedRecord>) -> Result<Self, DataError> {
        let first = records.first().ok_or(DataError::Empty)?;
        let num_events = first.num_events();
        if num_events == 0 {
            return Err(DataError::InvalidRecord { row: 1, message: "no intermediate events".into() });
        }
        for (i, r) in records.iter().enumerate() {
            if r.num_events() != num_events {
                return Err(DataError::RaggedEvents { row: i + 1, expected: num_events, found: r.num_events() });
            }
            r.validate(i + 1)?;
        }
        Ok(Dataset { records, num_events })
    }

    pub fn records(&self) -> &[ObservedRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ObservedRecord> {
        self.records
    }

    pub fn num_events(&self) -> usize {
        self.num_events
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            num_events: self.num_events,
        }
    }

    pub fn followups(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.followup).collect()
    }

    pub fn deaths(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.death).collect()
    }

    pub fn event_times(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.times[k]).collect()
    }

    pub fn event_flags(&self, k: usize) -> Vec<bool> {
        self.records.iter().map(|r| r.events[k]).collect()
    }

    /// Largest follow-up time.
    pub fn horizon(&self) -> f64 {
        self.records.iter().map(|r| r.followup).fold(0.0, f64::max)
    }
}
