use std::io::Write;

use ndarray::{concatenate, Axis};

use crate::error::{Error, Result};
use crate::tabular::{format_significant, Dataset, Encoder, Scaling};

use super::tsne::{tsne_project, TsneConfig};

/// 2-D coordinates with the origin of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `real` or `synthetic`.
    pub origin: Vec<&'static str>,
    pub kl_log: Vec<f64>,
}

/// Embeds `real`, and `joint` alongside it when given, in one t-SNE run.
/// Both are encoded with z-scores and one-hot vectors fitted on `real`.
pub fn project_datasets(real: &Dataset, joint: Option<&Dataset>, config: &TsneConfig, seed: u64) -> Result<Projection> {
    let encoder = Encoder::fit(real, Scaling::Zscore)?;
    let mut matrix = encoder.transform(real)?.matrix;
    let mut origin = vec!["real"; real.n_rows()];
    if let Some(syn) = joint {
        if !syn.schema().compatible_with(real.schema()) {
            return Err(Error::Schema("joint dataset schema differs from the real one".into()));
        }
        let other = encoder.transform(syn)?.matrix;
        matrix = concatenate(Axis(0), &[matrix.view(), other.view()]).expect("same width");
        origin.extend(std::iter::repeat_n("synthetic", syn.n_rows()));
    }
    let result = tsne_project(matrix.view(), config, seed)?;
    Ok(Projection {
        x: result.coords.column(0).to_vec(),
        y: result.coords.column(1).to_vec(),
        origin,
        kl_log: result.kl_log,
    })
}

impl Projection {
    /// `x,y,origin` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["x", "y", "origin"])?;
        for i in 0..self.x.len() {
            w.write_record([format_significant(self.x[i]), format_significant(self.y[i]), self.origin[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `iteration,kl` rows, iterations counted from 1.
    pub fn write_kl_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["iteration", "kl"])?;
        for (i, kl) in self.kl_log.iter().enumerate() {
            w.write_record([(i + 1).to_string(), kl.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
