//! JSON file formats for plants, gains, networks and datasets.
//!
//! Matrices are nested row-major arrays. Floats are written in the shortest
//! form that parses back to the same `f64`, so every file round-trips
//! exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sparse_lqr_core::systems::{Dataset, LabeledExample};
use sparse_lqr_core::unrolled::{LayerParams, SparsityOp, UnrolledNet};
use sparse_lqr_core::{BlockPartition, Gain, Mat, Plant};

use crate::error::{CliError, Result};

pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &Mat) -> Rows {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Convert nested rows to a matrix of the expected shape, naming `field` in
/// any error.
pub fn from_rows(rows: &Rows, field: &str, shape: Option<(usize, usize)>) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Input(format!("{field}: matrix is empty")));
    }
    if let Some(r) = rows.iter().position(|row| row.len() != ncols) {
        return Err(CliError::Input(format!(
            "{field}: row {r} has {} entries, expected {ncols}",
            rows[r].len()
        )));
    }
    if let Some((er, ec)) = shape {
        if (nrows, ncols) != (er, ec) {
            return Err(CliError::Input(format!(
                "{field}: expected {er}x{ec}, found {nrows}x{ncols}"
            )));
        }
    }
    Ok(Mat::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B1")]
    pub b1: Rows,
    #[serde(rename = "B2")]
    pub b2: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    pub partition: PartitionFile,
}

impl PlantFile {
    pub fn from_plant(p: &Plant) -> Self {
        Self {
            name: p.name().map(str::to_owned),
            n: p.n(),
            m: p.m(),
            l: p.l(),
            a: to_rows(p.a()),
            b1: to_rows(p.b1()),
            b2: to_rows(p.b2()),
            q: to_rows(p.q()),
            r: to_rows(p.r()),
            partition: PartitionFile {
                row_sizes: p.partition().row_sizes().to_vec(),
                col_sizes: p.partition().col_sizes().to_vec(),
            },
        }
    }

    pub fn to_plant(&self) -> Result<Plant> {
        let (n, m, l) = (self.n, self.m, self.l);
        let a = from_rows(&self.a, "A", Some((n, n)))?;
        let b1 = from_rows(&self.b1, "B1", Some((n, m)))?;
        let b2 = from_rows(&self.b2, "B2", Some((n, l)))?;
        let q = from_rows(&self.q, "Q", Some((n, n)))?;
        let r = from_rows(&self.r, "R", Some((m, m)))?;
        let partition = BlockPartition::new(self.partition.row_sizes.clone(), self.partition.col_sizes.clone())
            .map_err(|e| CliError::Input(format!("partition: {e}")))?;
        let plant = Plant::new(a, b1, b2, q, r, partition)?;
        Ok(match &self.name {
            Some(name) => plant.with_name(name.clone()),
            None => plant,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFile {
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub nnz: usize,
    pub gamma_or_radius: f64,
    pub algorithm: String,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
    pub abscissa: f64,
}

/// Starting gain for a solve: any JSON object with a `K` field, so a
/// previous `gain.json` can be passed directly.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StartGainFile {
    #[serde(rename = "K")]
    pub k: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Elementwise,
    Block,
}

impl From<SparsityOp> for OpName {
    fn from(op: SparsityOp) -> Self {
        match op {
            SparsityOp::Elementwise => OpName::Elementwise,
            SparsityOp::Block => OpName::Block,
        }
    }
}

impl From<OpName> for SparsityOp {
    fn from(op: OpName) -> Self {
        match op {
            OpName::Elementwise => SparsityOp::Elementwise,
            OpName::Block => SparsityOp::Block,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetFile {
    pub l: usize,
    pub sparsity_op: OpName,
    pub layers: Vec<LayerFile>,
}

impl NetFile {
    pub fn from_net(net: &UnrolledNet) -> Self {
        Self {
            l: net.depth(),
            sparsity_op: net.op().into(),
            layers: net
                .layers()
                .iter()
                .map(|p| LayerFile {
                    w1: p.w1,
                    w2: p.w2,
                    w3: p.w3,
                })
                .collect(),
        }
    }

    pub fn to_net(&self) -> Result<UnrolledNet> {
        if self.layers.len() != self.l {
            return Err(CliError::Input(format!(
                "layers: expected {} entries, found {}",
                self.l,
                self.layers.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .map(|p| LayerParams {
                w1: p.w1,
                w2: p.w2,
                w3: p.w3,
            })
            .collect();
        Ok(UnrolledNet::new(layers, self.sparsity_op.into())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Targets {
    /// Nonzeros of A only.
    A,
    /// Nonzeros of A, B1 and B2.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub count: usize,
    pub sigma: f64,
    pub seed: u64,
    pub targets: Targets,
    /// Regularization weight of the ISTA reference solves.
    pub gamma: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleFile {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B1")]
    pub b1: Rows,
    #[serde(rename = "B2")]
    pub b2: Rows,
    #[serde(rename = "K0")]
    pub k0: Rows,
    #[serde(rename = "K_star")]
    pub k_star: Rows,
    #[serde(rename = "J_star")]
    pub j_star: Option<f64>,
    pub abscissa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub base: PlantFile,
    pub examples: Vec<ExampleFile>,
}

impl DatasetFile {
    pub fn from_dataset(header: DatasetHeader, base: &Plant, ds: &Dataset) -> Self {
        let examples = ds
            .examples
            .iter()
            .map(|ex| ExampleFile {
                a: to_rows(ex.plant.a()),
                b1: to_rows(ex.plant.b1()),
                b2: to_rows(ex.plant.b2()),
                k0: to_rows(&ex.k0),
                k_star: to_rows(&ex.reference.k),
                j_star: ex.reference.cost,
                abscissa: ex.reference.abscissa,
            })
            .collect();
        Self {
            header,
            base: PlantFile::from_plant(base),
            examples,
        }
    }

    pub fn to_examples(&self) -> Result<Vec<LabeledExample>> {
        let base = self.base.to_plant()?;
        let (n, m, l) = (base.n(), base.m(), base.l());
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                let field = |name: &str| format!("examples[{i}].{name}");
                let plant = base
                    .with_dynamics(
                        from_rows(&ex.a, &field("A"), Some((n, n)))?,
                        from_rows(&ex.b1, &field("B1"), Some((n, m)))?,
                        from_rows(&ex.b2, &field("B2"), Some((n, l)))?,
                    )
                    .map_err(|e| CliError::Input(format!("{}: {e}", field("plant"))))?;
                Ok(LabeledExample {
                    plant,
                    k0: from_rows(&ex.k0, &field("K0"), Some((m, n)))?,
                    reference: Gain {
                        k: from_rows(&ex.k_star, &field("K_star"), Some((m, n)))?,
                        abscissa: ex.abscissa,
                        cost: ex.j_star,
                    },
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesFile {
    pub estimates: Vec<Rows>,
}

/// Parse JSON text, reporting the failing field path with line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let at = e.path().to_string();
        let message = if at == "." {
            e.inner().to_string()
        } else {
            format!("{at}: {}", e.inner())
        };
        CliError::Parse {
            path: path.to_owned(),
            message,
        }
    })?;
    de.end().map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text, path)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|e| CliError::io(path, e))
}

pub fn load_plant(path: &Path) -> Result<Plant> {
    read_json::<PlantFile>(path)?.to_plant().map_err(|e| match e {
        CliError::Input(message) => CliError::Parse {
            path: path.to_owned(),
            message,
        },
        other => other,
    })
}

pub fn save_plant(plant: &Plant, path: &Path) -> Result<()> {
    write_json(path, &PlantFile::from_plant(plant))
}

pub fn load_net(path: &Path) -> Result<UnrolledNet> {
    read_json::<NetFile>(path)?.to_net()
}

pub fn save_net(net: &UnrolledNet, path: &Path) -> Result<()> {
    write_json(path, &NetFile::from_net(net))
}
