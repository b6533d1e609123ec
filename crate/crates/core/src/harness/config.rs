use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Family, ParamGrid};
use crate::error::{Error, Result};
use crate::generators::{BaselineKind, CtganConfig};
use crate::tabular::{load_csv, ColumnKind, Dataset, Schema};

/// Classifier families of the utility experiment.
pub const UTILITY_FAMILIES: [Family; 4] = [Family::DecisionTree, Family::RandomForest, Family::Gbt, Family::Knn];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub path: PathBuf,
    pub schema: PathBuf,
    /// Optional uniform subsample applied once, before any repetition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorModel {
    Ctgan {
        #[serde(default)]
        config: CtganConfig,
    },
    Bootstrap,
    Independence,
    /// Pre-generated synthetic CSVs keyed by dataset id; datasets without an
    /// entry get no cell for this generator.
    External {
        paths: BTreeMap<String, PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub id: String,
    pub model: GeneratorModel,
}

impl GeneratorEntry {
    pub fn baseline_kind(&self) -> Option<BaselineKind> {
        match self.model {
            GeneratorModel::Bootstrap => Some(BaselineKind::Bootstrap),
            GeneratorModel::Independence => Some(BaselineKind::Independence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyGrid {
    pub family: Family,
    /// Defaults to the family's standard grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
}

impl FamilyGrid {
    pub fn resolved(&self) -> ParamGrid {
        self.grid.clone().unwrap_or_else(|| self.family.default_grid())
    }
}

fn default_classifiers() -> Vec<FamilyGrid> {
    UTILITY_FAMILIES.iter().map(|&family| FamilyGrid { family, grid: None }).collect()
}

fn default_repetitions() -> usize {
    2
}

fn default_folds() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetEntry>,
    pub generators: Vec<GeneratorEntry>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<FamilyGrid>,
    pub target: String,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Cross-validation folds of the utility grid search.
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Split each real dataset with the target's class proportions kept.
    #[serde(default)]
    pub stratify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Wall-clock timings make reports differ between otherwise identical runs,
    /// so they are off unless asked for.
    #[serde(default)]
    pub record_timings: bool,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a schema document and the CSV it describes.
pub fn read_dataset(data: &Path, schema: &Path) -> Result<Dataset> {
    let schema = read_schema(schema)?;
    load_csv(File::open(data).map_err(|e| with_path(e, data))?, &schema)
}

pub fn read_schema(path: &Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    Schema::parse(&text)
}

pub(crate) fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks every invariant that does not need the data itself. Relative
    /// paths are taken against `base_dir`.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if self.repetitions == 0 {
            return Err(config_error("repetitions must be at least 1"));
        }
        if self.folds < 2 {
            return Err(config_error("folds must be at least 2"));
        }
        if self.datasets.is_empty() || self.generators.is_empty() {
            return Err(config_error("at least one dataset and one generator are required"));
        }
        let mut ids = HashSet::new();
        for d in &self.datasets {
            if d.id.is_empty() || !ids.insert(d.id.as_str()) {
                return Err(config_error(format!("dataset id {:?} is empty or repeated", d.id)));
            }
            if let Some(f) = d.sample_fraction {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(config_error(format!("dataset {}: sample_fraction must lie in (0, 1]", d.id)));
                }
            }
            for p in [&d.path, &d.schema] {
                let full = resolve(base_dir, p);
                if !full.is_file() {
                    return Err(config_error(format!("dataset {}: file {} not found", d.id, full.display())));
                }
            }
            let schema = read_schema(&resolve(base_dir, &d.schema))?;
            let t = schema
                .index_of(&self.target)
                .ok_or_else(|| Error::Schema(format!("dataset {}: no target column {:?}", d.id, self.target)))?;
            if schema.column(t).kind != ColumnKind::Categorical {
                return Err(Error::Schema(format!("dataset {}: target {:?} is not categorical", d.id, self.target)));
            }
        }
        let mut gen_ids = HashSet::new();
        for g in &self.generators {
            if g.id.is_empty() || !gen_ids.insert(g.id.as_str()) {
                return Err(config_error(format!("generator id {:?} is empty or repeated", g.id)));
            }
            match &g.model {
                GeneratorModel::Ctgan { config } => config.validate()?,
                GeneratorModel::External { paths, .. } => {
                    for (ds, p) in paths {
                        if !ids.contains(ds.as_str()) {
                            return Err(config_error(format!("generator {}: unknown dataset {ds:?}", g.id)));
                        }
                        let full = resolve(base_dir, p);
                        if !full.is_file() {
                            return Err(config_error(format!("generator {}: file {} not found", g.id, full.display())));
                        }
                    }
                }
                GeneratorModel::Bootstrap | GeneratorModel::Independence => {}
            }
        }
        let mut families = HashSet::new();
        for fg in &self.classifiers {
            if !families.insert(fg.family) {
                return Err(config_error(format!("classifier family {} listed twice", fg.family)));
            }
            fg.resolved().specs(fg.family)?;
        }
        Ok(())
    }
}
