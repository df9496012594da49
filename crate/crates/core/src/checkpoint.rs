//! Plain-text parameter checkpoints.
//!
//! ```text
//! sdss-checkpoint 1
//! seed 42
//! hidden 64
//! dropout 0.5
//! config 3f2a...
//! w0 16 64
//! <16 rows of 64 decimals>
//! w1 64 5
//! ...
//! w_hat 64 5
//! ...
//! ```
//!
//! Decimals use the shortest representation that round-trips, so a loaded
//! checkpoint is bit-identical to the saved one.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dense::Matrix;
use crate::error::{Result, SdssError};
use crate::model::ModelParams;

const MAGIC: &str = "sdss-checkpoint 1";
const MATRIX_NAMES: [&str; 3] = ["w0", "w1", "w_hat"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// Hex digest of the effective run configuration.
    pub config_hash: String,
}

/// First 16 hex digits of the SHA-256 of a configuration's canonical text.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8]
        .iter()
        .fold(String::with_capacity(16), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn to_text(params: &ModelParams, meta: &CheckpointMeta) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "seed {}", meta.seed);
    let _ = writeln!(s, "hidden {}", params.hidden());
    let _ = writeln!(s, "dropout {}", params.dropout);
    let _ = writeln!(s, "config {}", meta.config_hash);
    for (name, m) in MATRIX_NAMES.iter().zip(params.matrices()) {
        let _ = writeln!(s, "{name} {} {}", m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}

/// Parses checkpoint text; `origin` names the source in error messages.
pub fn from_text(text: &str, origin: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let err = |line: usize, msg: String| SdssError::parse(origin, line, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| {
            SdssError::parse(
                origin,
                0,
                format!("unexpected end of file, expected {what}"),
            )
        })
    };

    let (ln, magic) = next("header")?;
    if magic != MAGIC {
        return Err(err(ln, format!("expected '{MAGIC}'")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (ln, l) = next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((ln, v.trim().to_string())),
            _ => Err(SdssError::parse(
                origin,
                ln,
                format!("expected '{key} <value>'"),
            )),
        }
    };
    let (ln, seed) = field("seed")?;
    let seed: u64 = seed
        .parse()
        .map_err(|_| err(ln, format!("bad seed '{seed}'")))?;
    let (ln, hidden) = field("hidden")?;
    let hidden: usize = hidden
        .parse()
        .map_err(|_| err(ln, format!("bad hidden dim '{hidden}'")))?;
    let (ln, dropout) = field("dropout")?;
    let dropout: f64 = dropout
        .parse()
        .map_err(|_| err(ln, format!("bad dropout '{dropout}'")))?;
    let (_, config_hash) = field("config")?;

    let mut mats = Vec::with_capacity(3);
    for name in MATRIX_NAMES {
        let (ln, head) = next(name)?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let dims = match parts.as_slice() {
            [n, r, c] if *n == name => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
            _ => None,
        };
        let (rows, cols) =
            dims.ok_or_else(|| err(ln, format!("expected '{name} <rows> <cols>'")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, l) = next("matrix row")?;
            let before = data.len();
            for tok in l.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| err(ln, format!("cannot parse '{tok}'")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(err(ln, format!("expected {cols} values")));
            }
        }
        mats.push(Matrix::from_vec(rows, cols, data)?);
    }
    let w_hat = mats.pop().expect("three matrices");
    let w1 = mats.pop().expect("three matrices");
    let w0 = mats.pop().expect("three matrices");
    if w0.cols() != hidden || w1.rows() != hidden || w_hat.rows() != hidden {
        return Err(err(
            0,
            format!("matrix shapes disagree with hidden dim {hidden}"),
        ));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(err(0, format!("dropout {dropout} outside [0, 1)")));
    }
    Ok((
        ModelParams {
            w0,
            w1,
            w_hat,
            dropout,
        },
        CheckpointMeta { seed, config_hash },
    ))
}

pub fn save(path: &Path, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    fs::write(path, to_text(params, meta)).map_err(|e| SdssError::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let text = fs::read_to_string(path).map_err(|e| SdssError::io(path, e))?;
    from_text(&text, path)
}
