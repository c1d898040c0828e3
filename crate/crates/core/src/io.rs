//! File formats.
//!
//! * Data CSV: `id,t1..tK,d1..dK,y,dtilde`.
//! * Latent CSV: `id,death,e1..eK`; an empty cell is an event that never occurs.
//! * Query CSV: `id,t1..tK`; an empty cell is an event not observed.
//! * Prediction CSV: `id,method,t,survival`.
//! * Summary CSV: `id,method,landmark,cmst,cqst_025,cqst_500,cqst_975,pi_lower,pi_upper,pi_upper_censored`.
//! * Model JSON: a provenance object and the fitted model.
//!
//! Lines starting with `#` are provenance comments; readers skip them. Numbers are
//! written in shortest round-trip form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::fit::FittedJointModel;
use crate::prediction::{PredictionQuery, PredictionSummary, SurvivalPrediction};
use crate::record::{Dataset, ObservedRecord};
use crate::simulation::LatentTruth;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

/// Header comment identifying what produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: Option<String>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: Option<u64>, config_sha256: Option<String>) -> Self {
        Provenance { command: command.into(), version: env!("CARGO_PKG_VERSION").into(), seed, config_sha256 }
    }

    pub fn line(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        let hash = self.config_sha256.as_deref().unwrap_or("none");
        format!("# dynsurv {} command={} seed={} config_sha256={}", self.version, self.command, seed, hash)
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_f64(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, IoError> {
    let cell = rec.get(i).unwrap_or("");
    cell.parse::<f64>().map_err(|_| IoError::Format {
        line: line_of(rec),
        message: format!("column {name}: cannot parse '{cell}' as a number"),
    })
}

fn parse_opt_f64(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>, IoError> {
    if rec.get(i).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        parse_f64(rec, i, name).map(Some)
    }
}

fn parse_flag(rec: &csv::StringRecord, i: usize, name: &str) -> Result<bool, IoError> {
    match rec.get(i).unwrap_or("") {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(IoError::Format {
            line: line_of(rec),
            message: format!("column {name}: indicator must be 0 or 1, found '{other}'"),
        }),
    }
}

/// Number of events implied by a header `id, <prefix>1..<prefix>K, <rest...>`.
fn count_prefixed(header: &csv::StringRecord, prefix: &str) -> usize {
    header.iter().skip(1).take_while(|h| h.strip_prefix(prefix).is_some_and(|d| d.parse::<usize>().is_ok())).count()
}

fn check_header(header: &csv::StringRecord, expected: &[String]) -> Result<(), IoError> {
    let found: Vec<&str> = header.iter().collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(IoError::Format {
            line: 1,
            message: format!("expected header '{}', found '{}'", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn data_header(k: usize) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((1..=k).map(|j| format!("t{j}")));
    h.extend((1..=k).map(|j| format!("d{j}")));
    h.push("y".into());
    h.push("dtilde".into());
    h
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset, IoError> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    let k = count_prefixed(&header, "t");
    check_header(&header, &data_header(k))?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let times = (0..k).map(|j| parse_f64(&row, 1 + j, &format!("t{}", j + 1))).collect::<Result<Vec<_>, _>>()?;
        let events =
            (0..k).map(|j| parse_flag(&row, 1 + k + j, &format!("d{}", j + 1))).collect::<Result<Vec<_>, _>>()?;
        let rec = ObservedRecord {
            id: row.get(0).unwrap_or("").to_string(),
            times,
            events,
            followup: parse_f64(&row, 1 + 2 * k, "y")?,
            death: parse_flag(&row, 2 + 2 * k, "dtilde")?,
        };
        rec.validate(line_of(&row) as usize).map_err(IoError::Data)?;
        records.push(rec);
    }
    Ok(Dataset::new(records)?)
}

pub fn write_dataset<W: Write>(out: W, data: &Dataset, provenance: Option<&Provenance>) -> Result<(), IoError> {
    let mut out = out;
    if let Some(p) = provenance {
        writeln!(out, "{}", p.line())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(data_header(data.num_events()))?;
    for r in data.records() {
        let mut row = vec![r.id.clone()];
        row.extend(r.times.iter().map(|t| t.to_string()));
        row.extend(r.events.iter().map(|&d| u8::from(d).to_string()));
        row.push(r.followup.to_string());
        row.push(u8::from(r.death).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_latent<W: Write>(out: W, latent: &[LatentTruth], provenance: Option<&Provenance>) -> Result<(), IoError> {
    let mut out = out;
    if let Some(p) = provenance {
        writeln!(out, "{}", p.line())?;
    }
    let k = latent.first().map_or(0, |l| l.events.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "death".to_string()];
    header.extend((1..=k).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for l in latent {
        let mut row = vec![l.id.clone(), l.death.to_string()];
        row.extend(l.events.iter().map(|&e| fmt_opt(e.is_finite().then_some(e))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_latent<R: Read>(input: R) -> Result<Vec<LatentTruth>, IoError> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    let k = header.len().saturating_sub(2);
    let mut expected = vec!["id".to_string(), "death".to_string()];
    expected.extend((1..=k).map(|j| format!("e{j}")));
    check_header(&header, &expected)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let events = (0..k)
            .map(|j| parse_opt_f64(&row, 2 + j, &format!("e{}", j + 1)).map(|e| e.unwrap_or(f64::INFINITY)))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(LatentTruth { id: row.get(0).unwrap_or("").to_string(), death: parse_f64(&row, 1, "death")?, events });
    }
    Ok(out)
}

pub fn read_queries<R: Read>(input: R) -> Result<Vec<PredictionQuery>, IoError> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    let k = count_prefixed(&header, "t");
    let mut expected = vec!["id".to_string()];
    expected.extend((1..=k).map(|j| format!("t{j}")));
    check_header(&header, &expected)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut events = Vec::new();
        for j in 0..k {
            if let Some(t) = parse_opt_f64(&row, 1 + j, &format!("t{}", j + 1))? {
                events.push((j, t));
            }
        }
        out.push(PredictionQuery::new(row.get(0).unwrap_or(""), events));
    }
    Ok(out)
}

pub fn write_queries<W: Write>(out: W, queries: &[PredictionQuery], num_events: usize) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend((1..=num_events).map(|j| format!("t{j}")));
    w.write_record(&header)?;
    for q in queries {
        let mut row = vec![q.id.clone()];
        row.extend((0..num_events).map(|j| fmt_opt(q.event_time(j))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions<W: Write>(
    out: W,
    predictions: &[SurvivalPrediction],
    provenance: Option<&Provenance>,
) -> Result<(), IoError> {
    let mut out = out;
    if let Some(p) = provenance {
        writeln!(out, "{}", p.line())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "method", "t", "survival"])?;
    for p in predictions {
        let method = p.method.to_string();
        for (t, s) in p.times.iter().zip(&p.values) {
            w.write_record([p.id.as_str(), method.as_str(), &t.to_string(), &s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summaries<W: Write>(
    out: W,
    summaries: &[PredictionSummary],
    provenance: Option<&Provenance>,
) -> Result<(), IoError> {
    let mut out = out;
    if let Some(p) = provenance {
        writeln!(out, "{}", p.line())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id",
        "method",
        "landmark",
        "cmst",
        "cqst_025",
        "cqst_500",
        "cqst_975",
        "pi_lower",
        "pi_upper",
        "pi_upper_censored",
    ])?;
    for s in summaries {
        w.write_record([
            s.id.clone(),
            s.method.to_string(),
            s.landmark.to_string(),
            s.cmst.to_string(),
            fmt_opt(s.cqst_lower),
            fmt_opt(s.cqst_median),
            fmt_opt(s.cqst_upper),
            fmt_opt(s.interval.map(|i| i.lower)),
            fmt_opt(s.interval.map(|i| i.upper)),
            s.interval.map_or_else(String::new, |i| u8::from(i.upper_censored).to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub provenance: Provenance,
    pub model: FittedJointModel,
}

pub fn write_model<W: Write>(out: W, model: &FittedJointModel, provenance: &Provenance) -> Result<(), IoError> {
    let mut out = out;
    let file = ModelFile { provenance: provenance.clone(), model: model.clone() };
    serde_json::to_writer_pretty(&mut out, &file)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<FittedJointModel, IoError> {
    let file: ModelFile = serde_json::from_reader(input)?;
    Ok(file.model)
}
