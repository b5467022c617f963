//! FactorScores CSV: one row per evaluated rule.
//!
//! ```text
//! #schema:v1
//! run,gen,social,F_Dist,F_Dry,F_Qual,F_Yield,F_Water,F_Soc,F_HAge,F_HAgri,F_Mig,rmse,rule,sim_seed,param_seed
//! ```
//!
//! Presence columns must equal the presence of the `rule` text.

use std::io::Write;

use emd_core::rule::Presence;
use emd_core::{parse_presence, Factor, SocialConfig, FACTOR_COUNT};
use emd_gp::EvaluatedIndividual;

use crate::CliError;

pub const SCHEMA_LINE: &str = "#schema:v1";

pub fn header() -> Vec<String> {
    let mut h: Vec<String> = ["run", "gen", "social"].iter().map(|s| s.to_string()).collect();
    h.extend(Factor::ALL.iter().map(|f| f.name().to_string()));
    h.extend(["rmse", "rule", "sim_seed", "param_seed"].iter().map(|s| s.to_string()));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresenceRecordRow {
    pub run: u64,
    pub generation: u64,
    pub social: SocialConfig,
    pub presence: Presence,
    pub rmse: f64,
    pub rule: String,
    pub sim_seed: u64,
    pub param_seed: u64,
}

impl From<&EvaluatedIndividual> for PresenceRecordRow {
    fn from(e: &EvaluatedIndividual) -> Self {
        Self {
            run: e.run_id,
            generation: e.generation,
            social: e.rule.social,
            presence: e.presence.counts,
            rmse: e.fitness,
            rule: e.rule.to_string(),
            sim_seed: e.sim_seed,
            param_seed: e.param_seed,
        }
    }
}

impl PresenceRecordRow {
    fn fields(&self) -> Vec<String> {
        let mut v = vec![self.run.to_string(), self.generation.to_string(), self.social.to_string()];
        v.extend(self.presence.0.iter().map(|c| c.to_string()));
        v.push(self.rmse.to_string());
        v.push(self.rule.clone());
        v.push(self.sim_seed.to_string());
        v.push(self.param_seed.to_string());
        v
    }
}

/// Appends rows; the schema line and header are written by [`RecordWriter::create`].
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn create(mut out: W) -> Result<Self, CliError> {
        writeln!(out, "{SCHEMA_LINE}").map_err(|e| CliError::Io(e.to_string()))?;
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header()).map_err(csv_err)?;
        Ok(Self { inner })
    }

    /// Continue a file whose schema line and header already exist.
    pub fn append(out: W) -> Self {
        Self { inner: csv::WriterBuilder::new().has_headers(false).from_writer(out) }
    }

    pub fn write(&mut self, row: &PresenceRecordRow) -> Result<(), CliError> {
        self.inner.write_record(row.fields()).map_err(csv_err)
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn row_err(line: u64, msg: impl Into<String>) -> CliError {
    CliError::Csv { line, msg: msg.into() }
}

/// Parse a whole FactorScores file. Line numbers in errors are 1-based and
/// count the schema line.
pub fn parse_records(text: &str) -> Result<Vec<PresenceRecordRow>, CliError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end_matches('\r') != SCHEMA_LINE {
        return Err(row_err(1, format!("expected `{SCHEMA_LINE}`")));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let head = reader.headers().map_err(|e| row_err(2, e.to_string()))?.clone();
    if head.iter().ne(header().iter().map(String::as_str)) {
        return Err(row_err(2, "column header does not match the v1 schema"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() + 1);
            row_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() + 1);
        let get = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize, name: &str| -> Result<u64, CliError> {
            get(i).parse().map_err(|_| row_err(line, format!("bad {name} `{}`", get(i))))
        };
        let social: SocialConfig = get(2).parse().map_err(|e: String| row_err(line, e))?;
        let mut presence = Presence::default();
        for (k, f) in Factor::ALL.iter().enumerate() {
            let v = get(3 + k);
            presence.set(*f, v.parse().map_err(|_| row_err(line, format!("bad {} `{v}`", f.name())))?);
        }
        let base = 3 + FACTOR_COUNT;
        let rmse: f64 = get(base).parse().map_err(|_| row_err(line, format!("bad rmse `{}`", get(base))))?;
        if !(rmse.is_finite() && rmse >= 0.0) {
            return Err(row_err(line, "rmse must be finite and non-negative"));
        }
        let rule = get(base + 1).to_string();
        let parsed = parse_presence(&rule).map_err(|e| row_err(line, e.to_string()))?;
        if parsed.social != social || parsed.counts != presence {
            return Err(row_err(line, "presence columns disagree with the rule text"));
        }
        rows.push(PresenceRecordRow {
            run: int(0, "run")?,
            generation: int(1, "gen")?,
            social,
            presence,
            rmse,
            rule,
            sim_seed: int(base + 2, "sim_seed")?,
            param_seed: int(base + 3, "param_seed")?,
        });
    }
    Ok(rows)
}
