use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::RMatrix;

/// Real `n × p` observation matrix, one row per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    data: RMatrix,
    centered: bool,
    names: Vec<String>,
}

impl TimeSeriesMatrix {
    pub fn new(data: RMatrix) -> Result<Self> {
        let p = data.ncols();
        let names = (1..=p).map(|i| format!("x{i}")).collect();
        Self::with_names(data, names)
    }

    pub fn with_names(data: RMatrix, names: Vec<String>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::param(format!(
                "time series needs at least 2 rows, got {}",
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::param("time series needs at least one channel"));
        }
        if names.len() != data.ncols() {
            return Err(Error::param("channel name count does not match column count"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::param(format!("non-finite value at row {r}, column {c}")));
        }
        Ok(Self {
            data,
            centered: false,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &RMatrix {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Whether the data are treated as mean zero.
    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Subtracts column means and records the data as centered.
    pub fn center(mut self) -> Self {
        if !self.centered {
            self.data = centered_copy(&self.data);
            self.centered = true;
        }
        self
    }

    /// Marks the data as mean zero without modifying them.
    pub fn assume_centered(mut self) -> Self {
        self.centered = true;
        self
    }

    /// The matrix used by the Fourier transforms: centered unless the caller
    /// asserted mean-zero input.
    pub fn analysis_data(&self) -> Cow<'_, RMatrix> {
        if self.centered {
            Cow::Borrowed(&self.data)
        } else {
            Cow::Owned(centered_copy(&self.data))
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: &self.data * c,
            centered: self.centered,
            names: self.names.clone(),
        }
    }
}

fn centered_copy(data: &RMatrix) -> RMatrix {
    let mut out = data.clone();
    let n = data.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}
