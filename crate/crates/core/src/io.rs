//! CSV ingestion and the JSON model format.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gaussian::{GammaIndex, GaussianComponent};
use crate::model::{ClusterModel, MixtureSpec, Partition};

fn reader<R: Read>(source: R, has_header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Numeric CSV, one observation per row. Header names, when present, become
/// feature names.
pub fn read_data<R: Read>(source: R, has_header: bool) -> Result<DataSet> {
    let mut rdr = reader(source, has_header);
    let names = if has_header {
        Some(rdr.headers()?.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, expected {width}",
                i + 1,
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!("row {}, column {}: not a number: {field:?}", i + 1, j + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    let p = p.ok_or_else(|| Error::InvalidInput("no data rows".into()))?;
    let data = DataSet::from_row_major(n, p, values)?;
    match names {
        Some(names) if names.len() == p => data.with_feature_names(names),
        Some(names) => Err(Error::DimensionMismatch {
            expected: p,
            found: names.len(),
        }),
        None => Ok(data),
    }
}

/// One category identifier per row; identifiers are relabeled `0..k` in
/// order of first appearance.
pub fn read_labels<R: Read>(source: R, has_header: bool) -> Result<Partition> {
    let mut rdr = reader(source, has_header);
    let mut ids = Vec::new();
    for record in rdr.records() {
        let record = record?;
        match record.len() {
            0 => continue,
            1 if record[0].is_empty() => continue,
            1 => ids.push(record[0].to_owned()),
            m => {
                return Err(Error::InvalidInput(format!(
                    "label rows must have one field (found {m})"
                )))
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::InvalidInput("no labels".into()));
    }
    Ok(Partition::from_identifiers(&ids))
}

/// A normal component with its covariance as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl ComponentJson {
    pub fn from_component(c: &GaussianComponent) -> Self {
        let s = c.sigma();
        Self {
            mu: c.mu().iter().copied().collect(),
            sigma: (0..s.nrows())
                .map(|i| (0..s.ncols()).map(|j| s[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn to_component(&self) -> Result<GaussianComponent> {
        let p = self.mu.len();
        if self.sigma.len() != p || self.sigma.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "covariance must be {p} x {p} to match the mean"
            )));
        }
        GaussianComponent::new(
            DVector::from_vec(self.mu.clone()),
            DMatrix::from_fn(p, p, |i, j| self.sigma[i][j]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureJson {
    pub components: Vec<ComponentJson>,
    /// Equal proportions when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<Vec<f64>>,
}

impl MixtureJson {
    pub fn from_spec(spec: &MixtureSpec) -> Self {
        Self {
            components: spec.components().iter().map(ComponentJson::from_component).collect(),
            proportions: Some(spec.proportions().to_vec()),
        }
    }

    pub fn to_spec(&self) -> Result<MixtureSpec> {
        let components = self
            .components
            .iter()
            .map(ComponentJson::to_component)
            .collect::<Result<Vec<_>>>()?;
        match &self.proportions {
            Some(p) => MixtureSpec::new(components, p.clone()),
            None => MixtureSpec::equal_weights(components),
        }
    }
}

impl TryFrom<MixtureJson> for MixtureSpec {
    type Error = Error;
    fn try_from(m: MixtureJson) -> Result<Self> {
        m.to_spec()
    }
}

impl From<MixtureSpec> for MixtureJson {
    fn from(spec: MixtureSpec) -> Self {
        Self::from_spec(&spec)
    }
}

/// Serialized clustering model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub gamma_mu: f64,
    pub gamma_sigma: f64,
    pub components: Vec<ComponentJson>,
    pub proportions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl ModelJson {
    pub fn new(model: &ClusterModel, partition: Option<&Partition>) -> Self {
        Self {
            gamma_mu: model.gamma_mu().value(),
            gamma_sigma: model.gamma_sigma().value(),
            components: model.components().iter().map(ComponentJson::from_component).collect(),
            proportions: model.proportions().to_vec(),
            labels: partition.map(|p| p.labels().to_vec()),
        }
    }

    pub fn to_model(&self) -> Result<ClusterModel> {
        ClusterModel::new(
            self.components
                .iter()
                .map(ComponentJson::to_component)
                .collect::<Result<_>>()?,
            self.proportions.clone(),
            GammaIndex::new(self.gamma_mu)?,
            GammaIndex::new(self.gamma_sigma)?,
        )
    }

    pub fn partition(&self) -> Result<Option<Partition>> {
        self.labels
            .as_ref()
            .map(|l| Partition::new(l.clone(), self.components.len()))
            .transpose()
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }

    pub fn write<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }
}

/// Two whitespace-separated columns per line, suitable for plotting.
pub fn write_columns<W: Write>(mut sink: W, rows: &[(f64, f64)]) -> Result<()> {
    for (x, y) in rows {
        writeln!(sink, "{x} {y}")?;
    }
    Ok(())
}
