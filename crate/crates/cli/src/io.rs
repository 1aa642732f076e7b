//! On-disk formats: matrix payloads, maps, paired bases, subspace bases and
//! scenario configs.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use rdlab::assignment::{OperatorSubspace, PairedBasis};
use rdlab::experiments::{ThetaGrid, TwoQubitScenario};
use rdlab::operator::{c, ComplexMatrix, DensityMatrix};
use rdlab::qmap::QMap;

/// Row-major complex matrix: `{"dims": [...], "re": [[...]], "im": [[...]]}`.
///
/// `dims` lists the tensor factors; their product must equal the matrix
/// order. It is omitted for rectangular operators such as Kraus terms.
/// A missing `im` means a real matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixPayload {
    pub fn from_matrix(m: &ComplexMatrix, dims: Option<Vec<usize>>) -> Self {
        let rows = |imag: bool| -> Vec<Vec<f64>> {
            m.row_iter()
                .map(|row| row.iter().map(|z| if imag { z.im } else { z.re }).collect())
                .collect()
        };
        MatrixPayload {
            dims,
            re: rows(false),
            im: Some(rows(true)),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n_rows = self.re.len();
        let n_cols = self.re.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            bail!("matrix payload is empty");
        }
        if self.re.iter().any(|r| r.len() != n_cols) {
            bail!("ragged rows in \"re\"");
        }
        if let Some(im) = &self.im {
            if im.len() != n_rows || im.iter().any(|r| r.len() != n_cols) {
                bail!("\"im\" shape differs from \"re\" shape {n_rows}x{n_cols}");
            }
        }
        let m = ComplexMatrix::from_fn(n_rows, n_cols, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |im| im[i][j]);
            c(self.re[i][j], im)
        });
        if let Some(dims) = &self.dims {
            let order: usize = dims.iter().product();
            if dims.is_empty() || order != n_rows || n_rows != n_cols {
                bail!("dims {dims:?} do not match a {n_rows}x{n_cols} matrix");
            }
        }
        Ok(m)
    }

    /// Square matrix with its factor dims (a single factor if none given).
    pub fn to_operator(&self) -> Result<(ComplexMatrix, Vec<usize>)> {
        let m = self.to_matrix()?;
        if m.nrows() != m.ncols() {
            bail!("expected a square matrix, got {}x{}", m.nrows(), m.ncols());
        }
        let dims = self.dims.clone().unwrap_or_else(|| vec![m.nrows()]);
        Ok((m, dims))
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        let (m, dims) = self.to_operator()?;
        Ok(DensityMatrix::new(m, dims)?)
    }
}

/// `{"d_in": n, "d_out_dims": [...], "transfer": {re, im}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QMapPayload {
    pub d_in: usize,
    pub d_out_dims: Vec<usize>,
    pub transfer: MatrixPayload,
}

impl QMapPayload {
    pub fn from_qmap(map: &QMap) -> Self {
        QMapPayload {
            d_in: map.d_in(),
            d_out_dims: map.d_out_dims().to_vec(),
            transfer: MatrixPayload::from_matrix(map.transfer(), None),
        }
    }

    pub fn to_qmap(&self) -> Result<QMap> {
        Ok(QMap::from_transfer(self.d_in, self.d_out_dims.clone(), self.transfer.to_matrix()?)?)
    }
}

/// `{"system": [matrix...], "joint": [matrix...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairedBasisPayload {
    pub system: Vec<MatrixPayload>,
    pub joint: Vec<MatrixPayload>,
}

impl PairedBasisPayload {
    pub fn to_paired_basis(&self) -> Result<PairedBasis> {
        let load = |kind: &str, items: &[MatrixPayload]| {
            items
                .iter()
                .enumerate()
                .map(|(l, p)| p.to_state().with_context(|| format!("{kind} state at index {l}")))
                .collect::<Result<Vec<_>>>()
        };
        let sys = load("system", &self.system)?;
        let joint = load("joint", &self.joint)?;
        Ok(PairedBasis::new(sys, joint)?)
    }
}

/// `{"basis": [matrix...]}`; every element carries dims `[d_S, d_E]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspacePayload {
    pub basis: Vec<MatrixPayload>,
}

impl SubspacePayload {
    pub fn to_subspace(&self) -> Result<OperatorSubspace> {
        let mut ops = Vec::new();
        let mut dims: Option<Vec<usize>> = None;
        for (k, p) in self.basis.iter().enumerate() {
            let (m, d) = p.to_operator().with_context(|| format!("basis element {k}"))?;
            match &dims {
                Some(prev) if *prev != d => bail!("basis element {k} has dims {d:?}, expected {prev:?}"),
                _ => dims = Some(d),
            }
            ops.push(m);
        }
        let dims = dims.ok_or_else(|| anyhow!("basis is empty"))?;
        Ok(OperatorSubspace::new(ops, dims)?)
    }
}

/// Scenario config; every field except `a` falls back to the defaults of
/// [`TwoQubitScenario::new`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub a: f64,
    pub alphas: Option<[f64; 3]>,
    pub theta_grid: Option<GridConfig>,
    pub seed: Option<u64>,
}

/// Partial θ grid; missing fields come from [`ThetaGrid::default`].
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<TwoQubitScenario> {
        let mut sc = TwoQubitScenario::new(self.a)?;
        if let Some(alphas) = self.alphas {
            sc = sc.with_alphas(alphas);
        }
        if let Some(partial) = self.theta_grid {
            let d = ThetaGrid::default();
            let grid = ThetaGrid {
                start: partial.start.unwrap_or(d.start),
                stop: partial.stop.unwrap_or(d.stop),
                count: partial.count.unwrap_or(d.count),
            };
            if grid.count == 0 || !grid.start.is_finite() || !grid.stop.is_finite() {
                bail!("theta_grid needs count >= 1 and finite endpoints");
            }
            sc.theta_grid = grid;
        }
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("cannot parse {}", path.display()))
}

/// TOML for `.toml` files, JSON otherwise.
pub fn read_scenario(path: &Path) -> Result<TwoQubitScenario> {
    let text = read(path)?;
    let cfg: ScenarioConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?
    };
    cfg.to_scenario()
}
