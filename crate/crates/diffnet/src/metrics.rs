//! Per-epoch metrics as line-delimited `key=value` records.

use std::path::Path;

use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub learning_rate: f64,
    pub temperature: f64,
}

impl MetricRecord {
    pub fn to_line(&self) -> String {
        let mut line = format!("epoch={} split={}", self.epoch, self.split);
        if let Some(loss) = self.loss {
            line.push_str(&format!(" loss={loss}"));
        }
        if let Some(acc) = self.accuracy {
            line.push_str(&format!(" accuracy={acc}"));
        }
        line.push_str(&format!(
            " lr={} t={}",
            self.learning_rate, self.temperature
        ));
        line
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let mut epoch = None;
        let mut split = None;
        let mut loss = None;
        let mut accuracy = None;
        let mut lr = None;
        let mut temperature = None;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad metrics field `{field}`")))?;
            match key {
                "epoch" => {
                    epoch = Some(value.parse::<usize>().map_err(|_| {
                        Error::Config(format!("bad epoch `{value}` in metrics line"))
                    })?)
                }
                "split" => split = Some(value.to_string()),
                "loss" => loss = Some(parse_float(value)?),
                "accuracy" => accuracy = Some(parse_float(value)?),
                "lr" => lr = Some(parse_float(value)?),
                "t" => temperature = Some(parse_float(value)?),
                other => return Err(Error::Config(format!("unknown metrics key `{other}`"))),
            }
        }
        Ok(Self {
            epoch: epoch.ok_or_else(|| Error::Config("metrics line missing epoch".into()))?,
            split: split.ok_or_else(|| Error::Config("metrics line missing split".into()))?,
            loss,
            accuracy,
            learning_rate: lr.ok_or_else(|| Error::Config("metrics line missing lr".into()))?,
            temperature: temperature
                .ok_or_else(|| Error::Config("metrics line missing t".into()))?,
        })
    }
}

fn parse_float(value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("bad float `{value}` in metrics line")))
}

/// Write the whole metrics file atomically (records are cheap to rewrite
/// and a rename can never leave a half-written line).
pub fn write_metrics(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(MetricRecord::parse_line)
        .collect()
}
