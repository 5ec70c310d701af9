//! Score model backed by a table of precomputed noise predictions.
//!
//! The CSV has a header `t,label,x,eps` and one row per grid point; labels
//! are `z0`, `z1`, `null` or `c<k>`. Predictions between grid points are
//! linearly interpolated and held constant beyond the ends of the grid.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::error::{Error, Result};
use crate::mixture::Label;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: usize,
    label: String,
    x: f64,
    eps: f64,
}

#[derive(Debug, Clone, Default)]
struct Table {
    xs: Vec<f64>,
    eps: Vec<f64>,
}

impl Table {
    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.eps[0];
        }
        if x >= self.xs[n - 1] {
            return self.eps[n - 1];
        }
        let j = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let w = (x - x0) / (x1 - x0);
        self.eps[j - 1] * (1.0 - w) + self.eps[j] * w
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayScoreModel {
    tables: HashMap<(usize, Label), Table>,
}

impl ReplayScoreModel {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut raw: HashMap<(usize, Label), Vec<(f64, f64)>> = HashMap::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let label: Label = row
                .label
                .parse()
                .map_err(|_| Error::Config(format!("unknown replay label `{}`", row.label)))?;
            if !row.x.is_finite() || !row.eps.is_finite() {
                return Err(Error::Config(format!(
                    "non-finite replay entry at t = {}, label = {}",
                    row.t, row.label
                )));
            }
            raw.entry((row.t, label)).or_default().push((row.x, row.eps));
        }
        if raw.is_empty() {
            return Err(Error::Config("replay table is empty".into()));
        }
        let mut tables = HashMap::with_capacity(raw.len());
        for (key, mut pts) in raw {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.dedup_by(|a, b| a.0 == b.0);
            tables.insert(
                key,
                Table {
                    xs: pts.iter().map(|p| p.0).collect(),
                    eps: pts.iter().map(|p| p.1).collect(),
                },
            );
        }
        Ok(Self { tables })
    }

    /// Tabulates `model` at every step `1..=steps`, for each label, on `xs`.
    pub fn tabulate<M: ScoreModel>(
        model: &M,
        steps: usize,
        labels: &[Label],
        xs: &[f64],
    ) -> Result<Self> {
        let mut tables = HashMap::new();
        for t in 1..=steps {
            for &label in labels {
                let eps = xs
                    .iter()
                    .map(|&x| model.predict_noise(x, t, label))
                    .collect::<Result<Vec<_>>>()?;
                tables.insert(
                    (t, label),
                    Table {
                        xs: xs.to_vec(),
                        eps,
                    },
                );
            }
        }
        Ok(Self { tables })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut keys: Vec<_> = self.tables.keys().copied().collect();
        keys.sort_by_key(|(t, l)| (*t, l.to_string()));
        let mut wtr = csv::Writer::from_writer(writer);
        for key in keys {
            let table = &self.tables[&key];
            for (&x, &eps) in table.xs.iter().zip(&table.eps) {
                wtr.serialize(Row {
                    t: key.0,
                    label: key.1.to_string(),
                    x,
                    eps,
                })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

impl ScoreModel for ReplayScoreModel {
    fn predict_noise(&self, x: f64, t: usize, label: Label) -> Result<f64> {
        self.tables
            .get(&(t, label))
            .map(|table| table.eval(x))
            .ok_or_else(|| Error::ModelEvaluation {
                x,
                t,
                label: label.to_string(),
                value: f64::NAN,
            })
    }
}
