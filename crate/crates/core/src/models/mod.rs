//! Classifiers: logistic regression and gradient-boosted trees.

mod gbt;
mod logistic;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use gbt::{
    feature_importance, leaf_weight, predict_gbt, split_gain, train_gbt, GbtConfig, GbtModel,
    Tree, TreeNode,
};
pub use logistic::{predict_logistic, train_logistic, LogisticModel};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Gbt(GbtModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    model: Model,
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Logistic(m) => &m.feature_names,
            Model::Gbt(m) => &m.feature_names,
        }
    }

    /// Positive-class probability per row. Columns are matched by name, so
    /// the dataset may carry extra features or a different order.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let aligned;
        let ds = if ds.feature_names() == self.feature_names() {
            ds
        } else {
            aligned = ds.select_features(self.feature_names())?;
            &aligned
        };
        match self {
            Model::Logistic(m) => predict_logistic(m, ds),
            Model::Gbt(m) => predict_gbt(m, ds),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let env = Envelope {
            format_version: FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(BufWriter::new(f), &env)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let env: Envelope = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if env.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {}",
                env.format_version
            )));
        }
        Ok(env.model)
    }
}
