//! JSON documents for fitted models.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use warpcost_core::ais::AisEstimate;
use warpcost_core::gmm::GmmModel;
use warpcost_core::models::BaselineModel;
use warpcost_core::patches::PatchSet;
use warpcost_core::{DensityModel, Family};

use crate::formats::{read_file, write_file, FormatError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AisDoc {
    ess: f64,
    acceptance: f64,
    n_chains: usize,
    n_temps: usize,
    leapfrog_steps: usize,
    warning: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineDoc {
    family: String,
    dim: usize,
    lambda: f64,
    epsilon: f64,
    log_z: Option<f64>,
    log_z_stderr: Option<f64>,
    a_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ais: Option<AisDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmDoc {
    family: String,
    k: usize,
    dim: usize,
    weights: Vec<f64>,
    covariances: Vec<Vec<Vec<f64>>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(FormatError::Malformed(format!("model json: every {what} row needs {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn model_to_json(model: &DensityModel) -> String {
    let text = match model {
        DensityModel::Baseline(m) => {
            let doc = BaselineDoc {
                family: m.family().as_str().to_string(),
                dim: m.dim(),
                lambda: m.lambda(),
                epsilon: m.epsilon(),
                log_z: m.log_z(),
                log_z_stderr: m.log_z().map(|_| m.log_z_stderr()),
                a_matrix: m.operator().map(|op| rows(&op.to_dense())),
                ais: m.ais().map(|a| AisDoc {
                    ess: a.ess,
                    acceptance: a.acceptance,
                    n_chains: a.n_chains,
                    n_temps: a.n_temps,
                    leapfrog_steps: a.leapfrog_steps,
                    warning: a.warning.clone(),
                }),
            };
            serde_json::to_string_pretty(&doc)
        }
        DensityModel::Gmm(g) => {
            let doc = GmmDoc {
                family: "GMM".into(),
                k: g.k(),
                dim: g.dim(),
                weights: g.weights().to_vec(),
                covariances: g.covariances().iter().map(rows).collect(),
            };
            serde_json::to_string_pretty(&doc)
        }
    };
    let mut text = text.expect("model documents serialize");
    text.push('\n');
    text
}

pub fn model_from_json(text: &str) -> Result<DensityModel> {
    let bad = |e: serde_json::Error| FormatError::Malformed(format!("model json: {e}"));
    let value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    let family = value
        .get("family")
        .and_then(|f| f.as_str())
        .ok_or_else(|| FormatError::Malformed("model json: missing family".into()))?;
    let family = Family::parse(family)?;
    if family == Family::Gmm {
        let doc: GmmDoc = serde_json::from_value(value).map_err(bad)?;
        if doc.weights.len() != doc.k || doc.covariances.len() != doc.k {
            return Err(FormatError::Malformed(format!("model json: GMM declares k={} but lists other counts", doc.k)));
        }
        let covs = doc.covariances.iter().map(|c| from_rows(c, doc.dim, "covariance")).collect::<Result<Vec<_>>>()?;
        if covs.iter().any(|c| c.nrows() != doc.dim) {
            return Err(FormatError::Malformed("model json: covariance is not dim x dim".into()));
        }
        return Ok(GmmModel::new(doc.weights, covs)?.into());
    }
    let doc: BaselineDoc = serde_json::from_value(value).map_err(bad)?;
    let p = PatchSet::side_for_dim(doc.dim)?;
    let model = match (&doc.a_matrix, family.has_operator()) {
        (Some(a), true) => BaselineModel::with_matrix(family, p, doc.lambda, doc.epsilon, &from_rows(a, doc.dim, "a_matrix")?)?,
        (None, true) => BaselineModel::new(family, p, doc.lambda, doc.epsilon)?,
        (Some(_), false) => return Err(FormatError::Malformed(format!("model json: {family} takes no a_matrix"))),
        (None, false) => BaselineModel::new(family, p, doc.lambda, doc.epsilon)?,
    };
    if !family.needs_ais() {
        return Ok(model.into());
    }
    Ok(match doc.log_z {
        None => model.into(),
        Some(log_z) => {
            let stderr = doc.log_z_stderr.unwrap_or(f64::NAN);
            let est = match doc.ais {
                Some(a) => AisEstimate {
                    log_z,
                    stderr,
                    ess: a.ess,
                    acceptance: a.acceptance,
                    n_chains: a.n_chains,
                    n_temps: a.n_temps,
                    leapfrog_steps: a.leapfrog_steps,
                    warning: a.warning,
                },
                None => AisEstimate {
                    log_z,
                    stderr,
                    ess: f64::NAN,
                    acceptance: f64::NAN,
                    n_chains: 0,
                    n_temps: 0,
                    leapfrog_steps: 0,
                    warning: None,
                },
            };
            model.with_log_z(est).into()
        }
    })
}

pub fn save_model(model: &DensityModel, path: &Path) -> Result<()> {
    write_file(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<DensityModel> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::Malformed(format!("{}: not UTF-8", path.display())))?;
    model_from_json(&text).map_err(|e| match e {
        FormatError::Malformed(m) => FormatError::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}
