//! Test sensor by variant comparison of run reports.

use serde::Serialize;

use super::experiment::{RunReport, Variant};
use crate::error::{Error, Result};
use crate::representation::EncodingMode;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    /// Test sensor, suffixed with the encoding when a table mixes encodings.
    pub key: String,
    /// Pooled micro-F1 per column variant; `None` where no report exists.
    pub scores: Vec<Option<f64>>,
    /// Column of the best score; ties go to the earlier variant.
    pub best: Option<usize>,
    /// `(score - Trad) * 100` per column, when the row has a Trad score.
    pub delta_pp: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub dataset: String,
    pub variants: Vec<Variant>,
    pub rows: Vec<ComparisonRow>,
}

/// Builds the comparison matrix. Columns follow the canonical variant order;
/// rows follow first appearance. Reports must share dataset, class set and
/// window settings, and each (row, variant) cell may appear only once.
pub fn compare_runs(reports: &[RunReport]) -> Result<ComparisonTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Empty("no reports to compare".into()))?;
    for r in reports {
        if r.dataset != first.dataset || r.class_set != first.class_set || r.config.window != first.config.window {
            return Err(Error::Config(format!(
                "cannot compare reports of different setups: {}/{} vs {}/{}",
                first.dataset, first.test_sensor, r.dataset, r.test_sensor
            )));
        }
    }
    let mixed_encodings = reports.iter().any(|r| r.encoding != first.encoding);
    let key_of = |r: &RunReport| {
        if mixed_encodings {
            let enc = match r.encoding {
                EncodingMode::Hard => "hard",
                EncodingMode::Soft => "soft",
            };
            format!("{} [{enc}]", r.test_sensor)
        } else {
            r.test_sensor.clone()
        }
    };
    let variants: Vec<Variant> = Variant::ALL
        .into_iter()
        .filter(|v| reports.iter().any(|r| r.variant == *v))
        .collect();
    let mut keys: Vec<String> = Vec::new();
    for r in reports {
        let k = key_of(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let trad_col = variants.iter().position(|v| *v == Variant::Trad);
    let mut rows = Vec::with_capacity(keys.len());
    for key in keys {
        let mut scores = vec![None; variants.len()];
        for r in reports.iter().filter(|r| key_of(r) == key) {
            let col = variants.iter().position(|v| *v == r.variant).expect("collected above");
            if scores[col].is_some() {
                return Err(Error::Config(format!("duplicate report for {key} / {}", r.variant)));
            }
            scores[col] = Some(r.pooled_micro_f1);
        }
        let mut best: Option<usize> = None;
        for (c, s) in scores.iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|b| *s > scores[b].expect("best has a score")) {
                    best = Some(c);
                }
            }
        }
        let trad = trad_col.and_then(|c| scores[c]);
        let delta_pp = scores
            .iter()
            .map(|s| match (s, trad) {
                (Some(s), Some(t)) => Some((s - t) * 100.0),
                _ => None,
            })
            .collect();
        rows.push(ComparisonRow {
            key,
            scores,
            best,
            delta_pp,
        });
    }
    Ok(ComparisonTable {
        dataset: first.dataset.clone(),
        variants,
        rows,
    })
}

fn fmt_delta(d: f64) -> String {
    // avoid printing "-0.0" for equal scores
    let d = if d.abs() < 5e-10 { 0.0 } else { d };
    format!("{d:+.1}")
}

impl ComparisonTable {
    /// One line per row: sensor, a score column per variant, a delta column per
    /// non-Trad variant, and the best variant's name.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["test_sensor".to_string()];
        header.extend(self.variants.iter().map(|v| v.name().to_string()));
        let delta_cols: Vec<usize> = (0..self.variants.len())
            .filter(|&c| self.variants[c] != Variant::Trad)
            .collect();
        header.extend(delta_cols.iter().map(|&c| format!("{}_delta_pp", self.variants[c])));
        header.push("best".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.key.clone()];
            rec.extend(row.scores.iter().map(|s| s.map_or(String::new(), |v| format!("{v:.4}"))));
            rec.extend(
                delta_cols
                    .iter()
                    .map(|&c| row.delta_pp[c].map_or(String::new(), fmt_delta)),
            );
            rec.push(row.best.map_or(String::new(), |b| self.variants[b].name().to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text table. Best score per row is marked with `*`;
    /// deltas versus Trad follow in percentage points.
    pub fn to_text(&self) -> String {
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["sensor".to_string()];
        header.extend(self.variants.iter().map(|v| v.name().to_string()));
        cells.push(header);
        for row in &self.rows {
            let mut line = vec![row.key.clone()];
            for (c, s) in row.scores.iter().enumerate() {
                let text = match s {
                    None => "-".to_string(),
                    Some(v) => {
                        let mut t = format!("{v:.3}");
                        if self.variants[c] != Variant::Trad {
                            if let Some(d) = row.delta_pp[c] {
                                t.push_str(&format!(" ({}pp)", fmt_delta(d)));
                            }
                        }
                        if row.best == Some(c) {
                            t.push('*');
                        }
                        t
                    }
                };
                line.push(text);
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("dataset: {}\n", self.dataset);
        for r in &cells {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, t)| if c == 0 { format!("{t:<w$}", w = widths[c]) } else { format!("{t:>w$}", w = widths[c]) })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
