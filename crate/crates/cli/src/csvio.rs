//! CSV emission and parsing. Dialect: comma separators, '.' decimals,
//! '#'-prefixed header lines carrying the resolved configuration and
//! seed. Bodies are byte-identical for identical config and seed.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use mfdlab_core::analytics::{MfdBand, MfdEstimate};
use mfdlab_core::Real;

/// Accumulates one output file: comment header, column line, data rows.
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new(tool: &str, command: &str, config_echo: &str, seed: u64) -> Self {
        let mut text = String::new();
        writeln!(text, "# {tool} {command}").unwrap();
        writeln!(text, "# config {config_echo}").unwrap();
        writeln!(text, "# seed {seed}").unwrap();
        CsvDoc { text }
    }

    pub fn comment(&mut self, line: &str) -> &mut Self {
        writeln!(self.text, "# {line}").unwrap();
        self
    }

    pub fn columns(&mut self, cols: &str) -> &mut Self {
        writeln!(self.text, "{cols}").unwrap();
        self
    }

    pub fn row(&mut self, fields: &[String]) -> &mut Self {
        writeln!(self.text, "{}", fields.join(",")).unwrap();
        self
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Append one MFD's raw samples to a document:
/// `policy,lambda,delta,p,k,rep,flow`.
pub fn mfd_samples_rows(doc: &mut CsvDoc, est: &MfdEstimate<Real>) {
    doc.columns("policy,lambda,delta,p,k,rep,flow");
    for (k, samples) in est.densities.iter().zip(&est.samples) {
        for (rep, flow) in samples.iter().enumerate() {
            doc.row(&[
                est.policy.clone(),
                fmt_f64(est.lambda),
                fmt_f64(est.delta),
                fmt_f64(est.turn_prob),
                fmt_f64(*k),
                rep.to_string(),
                fmt_f64(*flow),
            ]);
        }
    }
}

/// Append one MFD's aggregates: `policy,lambda,delta,p,k,mean,p5,p95`.
pub fn mfd_aggregate_rows(doc: &mut CsvDoc, est: &MfdEstimate<Real>) {
    doc.columns("policy,lambda,delta,p,k,mean,p5,p95");
    for (k, band) in est.densities.iter().zip(&est.aggregates) {
        doc.row(&[
            est.policy.clone(),
            fmt_f64(est.lambda),
            fmt_f64(est.delta),
            fmt_f64(est.turn_prob),
            fmt_f64(*k),
            fmt_f64(band.mean),
            fmt_f64(band.p5),
            fmt_f64(band.p95),
        ]);
    }
}

/// Parse an aggregate CSV back into an estimate (samples are not stored
/// in the file and come back empty).
pub fn read_aggregate_csv(path: &Path) -> Result<MfdEstimate<Real>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "policy,lambda,delta,p,k,mean,p5,p95" {
                bail!(
                    "{}: expected aggregate MFD columns, found `{line}`",
                    path.display()
                );
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("{}: malformed row `{line}`", path.display());
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .with_context(|| format!("bad number `{}` in {}", fields[i], path.display()))
        };
        rows.push((
            fields[0].to_string(),
            num(1)?,
            num(2)?,
            num(3)?,
            num(4)?,
            num(5)?,
            num(6)?,
            num(7)?,
        ));
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let (policy, lambda, delta, p) = (rows[0].0.clone(), rows[0].1, rows[0].2, rows[0].3);
    Ok(MfdEstimate {
        policy,
        lambda,
        delta,
        turn_prob: p,
        densities: rows.iter().map(|r| r.4).collect(),
        samples: vec![Vec::new(); rows.len()],
        aggregates: rows
            .iter()
            .map(|r| MfdBand {
                mean: r.5,
                p5: r.6,
                p95: r.7,
            })
            .collect(),
    })
}

/// The non-comment portion of a CSV file, for reproducibility checks.
pub fn body_of(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}
