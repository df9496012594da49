//! Line-delimited `record=<kind> key=value ...` output.

use std::fmt;

use crate::training::{EpochRecord, TrainReport};

/// One output line. Values containing whitespace, quotes or `=` are quoted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Record {
            kind: kind.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num(self, key: &str, value: f64) -> Self {
        self.field(key, fmt_num(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parses a line produced by `Display`; `None` if it is not a record.
    pub fn parse(line: &str) -> Option<Record> {
        let tokens = tokenize(line)?;
        let mut it = tokens.into_iter();
        let (k, kind) = it.next()?;
        if k != "record" {
            return None;
        }
        Some(Record {
            kind,
            fields: it.collect(),
        })
    }
}

fn needs_quotes(v: &str) -> bool {
    v.is_empty()
        || v.chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '=' || c == '\\')
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record={}", self.kind)?;
        for (k, v) in &self.fields {
            if needs_quotes(v) {
                write!(
                    f,
                    " {k}=\"{}\"",
                    v.replace('\\', "\\\\").replace('"', "\\\"")
                )?;
            } else {
                write!(f, " {k}={v}")?;
            }
        }
        Ok(())
    }
}

fn tokenize(line: &str) -> Option<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut chars = line.trim().chars().peekable();
    while chars.peek().is_some() {
        let key: String = chars.by_ref().take_while(|&c| c != '=').collect();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return None;
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next()? {
                    '\\' => value.push(chars.next()?),
                    '"' => break,
                    c => value.push(c),
                }
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace()) {
                return None;
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        out.push((key, value));
    }
    Some(out)
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn epoch_record(stage: &str, e: &EpochRecord) -> Record {
    let mut r = Record::new("epoch")
        .field("stage", stage)
        .field("epoch", e.epoch)
        .num("loss", e.loss);
    for (name, v) in e.terms.named() {
        r = r.num(name, v);
    }
    r.num("val_loss", e.val_loss)
        .num("train_acc", e.train_acc)
        .num("val_acc", e.val_acc)
}

/// Outcome of one stage; wall-clock time is deliberately absent.
pub fn summary_record(report: &TrainReport) -> Record {
    let r = Record::new("summary")
        .field("stage", report.stage.name())
        .field("seed", report.seed)
        .field("epochs", report.epochs.len())
        .field("best_epoch", report.best_epoch)
        .num("best_val_acc", report.best_val_acc);
    match report.test_acc {
        Some(a) => r.num("test_acc", a),
        None => r.field("test_acc", "none"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        let r = Record::new("config")
            .field("dataset", "/data/my cora")
            .field("q", "a\"b=c")
            .field("empty", "")
            .num("acc", 0.5);
        let line = r.to_string();
        assert_eq!(Record::parse(&line), Some(r));
    }

    #[test]
    fn non_records_are_rejected() {
        assert_eq!(Record::parse("hello world"), None);
        assert_eq!(Record::parse("kind=x a=1"), None);
        assert_eq!(Record::parse("record=x a=\"open"), None);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
