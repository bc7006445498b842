//! Result tables and their CSV encoding.
//!
//! Floats are written with 17 significant digits so a table read back
//! reproduces the computed values exactly.

use std::io::Write;

use crate::error::Result;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: Write>(out: W, headers: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Prediction, sample mean and its standard error for one statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatValues {
    pub prediction: f64,
    pub sample: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub sweep: f64,
    pub values: Vec<StatValues>,
    /// Runs dropped because estimation failed.
    pub excluded: usize,
}

/// One row per sweep point; for every statistic `<name>_prediction`,
/// `<name>_sample` and `<name>_stderr`, then `excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub sweep_name: String,
    pub stats: Vec<String>,
    pub rows: Vec<FigureRow>,
}

impl FigureTable {
    pub fn headers(&self) -> Vec<String> {
        let mut h = vec![self.sweep_name.clone()];
        for s in &self.stats {
            h.extend([format!("{s}_prediction"), format!("{s}_sample"), format!("{s}_stderr")]);
        }
        h.push("excluded".into());
        h
    }

    pub fn stat_index(&self, name: &str) -> Option<usize> {
        self.stats.iter().position(|s| s == name)
    }

    /// `(sweep, values)` for the named statistic.
    pub fn series(&self, name: &str) -> Option<Vec<(f64, StatValues)>> {
        let s = self.stat_index(name)?;
        Some(self.rows.iter().map(|r| (r.sweep, r.values[s])).collect())
    }

    pub fn total_excluded(&self) -> usize {
        self.rows.iter().map(|r| r.excluded).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &self.headers(),
            self.rows.iter().map(|r| {
                let mut rec = vec![fmt_float(r.sweep)];
                for v in &r.values {
                    rec.extend([fmt_float(v.prediction), fmt_float(v.sample), fmt_float(v.stderr)]);
                }
                rec.push(r.excluded.to_string());
                rec
            }),
        )
    }
}

/// One covariance entry of a closed-form report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Sweep value, if the config sweeps a parameter.
    pub sweep: Option<f64>,
    pub quantity: String,
    pub omega: Option<f64>,
    /// One-based row index (module, or parameter for `param_cov`).
    pub i: usize,
    pub j: usize,
    pub re: f64,
    pub im: f64,
}

/// Columns `sweep, quantity, omega, i, j, re, im`; absent values are empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub const HEADERS: [&'static str; 7] = ["sweep", "quantity", "omega", "i", "j", "re", "im"];

    pub fn select<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        write_rows(
            out,
            &Self::HEADERS.map(String::from),
            self.rows.iter().map(|r| {
                vec![
                    opt(r.sweep),
                    r.quantity.clone(),
                    opt(r.omega),
                    r.i.to_string(),
                    r.j.to_string(),
                    fmt_float(r.re),
                    fmt_float(r.im),
                ]
            }),
        )
    }
}

/// Columns `quantity, index, value`; `index` is one based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizeTable {
    pub rows: Vec<(String, usize, f64)>,
}

impl OptimizeTable {
    pub fn push(&mut self, quantity: &str, index: usize, value: f64) {
        self.rows.push((quantity.to_string(), index, value));
    }

    pub fn value(&self, quantity: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == quantity).map(|r| r.2)
    }

    pub fn vector(&self, quantity: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.0 == quantity).map(|r| r.2).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &["quantity", "index", "value"].map(String::from),
            self.rows
                .iter()
                .map(|(q, i, v)| vec![q.clone(), i.to_string(), fmt_float(*v)]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0e-300, -7.25e12, std::f64::consts::PI] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn figure_csv_layout() {
        let t = FigureTable {
            sweep_name: "beta".into(),
            stats: vec!["a".into()],
            rows: vec![FigureRow {
                sweep: 0.5,
                values: vec![StatValues {
                    prediction: 1.0,
                    sample: 1.1,
                    stderr: 0.1,
                }],
                excluded: 0,
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "beta,a_prediction,a_sample,a_stderr,excluded");
        assert!(lines.next().unwrap().ends_with(",0"));
    }
}
