//! Classifier families, their hyperparameters and search grids.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    RandomForest,
    Gbt,
    Knn,
    Linear,
    Mlp,
    GmmDensity,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::DecisionTree,
        Family::RandomForest,
        Family::Gbt,
        Family::Knn,
        Family::Linear,
        Family::Mlp,
        Family::GmmDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::Gbt => "gbt",
            Family::Knn => "knn",
            Family::Linear => "linear",
            Family::Mlp => "mlp",
            Family::GmmDensity => "gmm_density",
        }
    }

    pub fn default_spec(self) -> ClassifierSpec {
        match self {
            Family::DecisionTree => ClassifierSpec::DecisionTree(TreeParams::default()),
            Family::RandomForest => ClassifierSpec::RandomForest(ForestParams::default()),
            Family::Gbt => ClassifierSpec::Gbt(GbtParams::default()),
            Family::Knn => ClassifierSpec::Knn(KnnParams::default()),
            Family::Linear => ClassifierSpec::Linear(LinearParams::default()),
            Family::Mlp => ClassifierSpec::Mlp(MlpParams::default()),
            Family::GmmDensity => ClassifierSpec::GmmDensity(GmmDensityParams::default()),
        }
    }

    /// Grid used when a configuration does not supply one.
    pub fn default_grid(self) -> ParamGrid {
        let g = |pairs: &[(&str, Vec<Value>)]| ParamGrid(pairs.iter().cloned().map(|(k, v)| (k.to_string(), v)).collect());
        let ints = |v: &[u64]| v.iter().map(|&i| Value::from(i)).collect::<Vec<_>>();
        let floats = |v: &[f64]| v.iter().map(|&f| Value::from(f)).collect::<Vec<_>>();
        match self {
            Family::DecisionTree => g(&[("max_depth", ints(&[3, 5, 8]))]),
            Family::RandomForest => g(&[("n_trees", ints(&[50])), ("max_depth", ints(&[5, 8]))]),
            Family::Gbt => g(&[
                ("n_rounds", ints(&[50, 100])),
                ("learning_rate", floats(&[0.1, 0.3])),
                ("max_depth", ints(&[3])),
            ]),
            Family::Knn => g(&[("k", ints(&[3, 5, 11]))]),
            Family::Linear => g(&[("l2", floats(&[0.0, 1e-2]))]),
            Family::Mlp => g(&[
                ("hidden", vec![serde_json::json!([32]), serde_json::json!([64, 32])]),
                ("epochs", ints(&[100])),
            ]),
            Family::GmmDensity => g(&[("components", ints(&[1, 3]))]),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown classifier family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 5, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 50, max_depth: 8, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_rounds: 100, learning_rate: 0.1, max_depth: 3, l2: 1.0, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { l2: 0.0, epochs: 300, lr: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: vec![64, 32], epochs: 100, lr: 1e-3, batch_size: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmDensityParams {
    pub components: usize,
}

impl Default for GmmDensityParams {
    fn default() -> Self {
        Self { components: 3 }
    }
}

/// A classifier family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierSpec {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Gbt(GbtParams),
    Knn(KnnParams),
    Linear(LinearParams),
    Mlp(MlpParams),
    GmmDensity(GmmDensityParams),
}

impl ClassifierSpec {
    pub fn family(&self) -> Family {
        match self {
            ClassifierSpec::DecisionTree(_) => Family::DecisionTree,
            ClassifierSpec::RandomForest(_) => Family::RandomForest,
            ClassifierSpec::Gbt(_) => Family::Gbt,
            ClassifierSpec::Knn(_) => Family::Knn,
            ClassifierSpec::Linear(_) => Family::Linear,
            ClassifierSpec::Mlp(_) => Family::Mlp,
            ClassifierSpec::GmmDensity(_) => Family::GmmDensity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| if v == 0 { invalid(format!("{name} must be at least 1")) } else { Ok(()) };
        let rate = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() { Ok(()) } else { invalid(format!("{name} must be positive and finite")) }
        };
        let penalty = |v: f64| if v >= 0.0 && v.is_finite() { Ok(()) } else { invalid("l2 must be non-negative") };
        match self {
            ClassifierSpec::DecisionTree(p) => positive("min_leaf", p.min_leaf),
            ClassifierSpec::RandomForest(p) => {
                positive("n_trees", p.n_trees)?;
                positive("min_leaf", p.min_leaf)
            }
            ClassifierSpec::Gbt(p) => {
                positive("n_rounds", p.n_rounds)?;
                positive("min_leaf", p.min_leaf)?;
                rate("learning_rate", p.learning_rate)?;
                if p.learning_rate > 1.0 {
                    return invalid("learning_rate must not exceed 1");
                }
                penalty(p.l2)
            }
            ClassifierSpec::Knn(p) => positive("k", p.k),
            ClassifierSpec::Linear(p) => {
                positive("epochs", p.epochs)?;
                rate("lr", p.lr)?;
                penalty(p.l2)
            }
            ClassifierSpec::Mlp(p) => {
                positive("epochs", p.epochs)?;
                positive("batch_size", p.batch_size)?;
                rate("lr", p.lr)?;
                p.hidden.iter().try_for_each(|&h| positive("hidden layer size", h))
            }
            ClassifierSpec::GmmDensity(p) => positive("components", p.components),
        }
    }
}

/// Candidate values per hyperparameter name. Combinations are enumerated
/// with names in sorted order and the last name varying fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid(pub BTreeMap<String, Vec<Value>>);

impl ParamGrid {
    pub fn single() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<Value>) -> Self {
        self.0.insert(name.to_string(), values);
        self
    }

    pub fn size(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }

    /// All specs of `family` in enumeration order, each starting from the
    /// family defaults.
    pub fn specs(&self, family: Family) -> Result<Vec<ClassifierSpec>> {
        if let Some((name, _)) = self.0.iter().find(|(_, v)| v.is_empty()) {
            return invalid(format!("grid entry {name:?} has no candidates"));
        }
        let base = serde_json::to_value(family.default_spec())?;
        let entries: Vec<(&String, &Vec<Value>)> = self.0.iter().collect();
        let mut digits = vec![0usize; entries.len()];
        let mut out = Vec::with_capacity(self.size());
        loop {
            let mut doc = base.clone();
            let obj = doc.as_object_mut().expect("specs serialize to objects");
            for ((name, values), &d) in entries.iter().zip(&digits) {
                if name.as_str() == "family" {
                    return invalid("grid may not vary the family");
                }
                obj.insert((*name).clone(), values[d].clone());
            }
            let spec: ClassifierSpec = serde_json::from_value(doc)
                .map_err(|e| Error::InvalidInput(format!("invalid {family} grid: {e}")))?;
            spec.validate()?;
            out.push(spec);
            // odometer increment, last entry fastest
            let mut pos = entries.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < entries[pos].1.len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn spec_json_round_trip() {
        for fam in Family::ALL {
            let spec = fam.default_spec();
            let text = serde_json::to_string(&spec).unwrap();
            assert!(text.contains(&format!("\"family\":\"{fam}\"")));
            assert_eq!(serde_json::from_str::<ClassifierSpec>(&text).unwrap(), spec);
            assert_eq!(fam.name().parse::<Family>().unwrap(), fam);
        }
        let partial: ClassifierSpec = serde_json::from_str(r#"{"family":"knn","k":7}"#).unwrap();
        assert_eq!(partial, ClassifierSpec::Knn(KnnParams { k: 7 }));
    }

    #[test]
    fn grid_enumeration_order() {
        let grid = ParamGrid::single().with("n_rounds", vec![json!(50), json!(100)]).with("learning_rate", vec![json!(0.1), json!(0.3)]);
        let specs = grid.specs(Family::Gbt).unwrap();
        let pairs: Vec<(f64, usize)> = specs
            .iter()
            .map(|s| match s {
                ClassifierSpec::Gbt(p) => (p.learning_rate, p.n_rounds),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pairs, vec![(0.1, 50), (0.1, 100), (0.3, 50), (0.3, 100)]);
    }

    #[test]
    fn default_grid_sizes() {
        let sizes: Vec<usize> = Family::ALL.iter().map(|f| f.default_grid().specs(*f).unwrap().len()).collect();
        assert_eq!(sizes, vec![3, 2, 4, 3, 2, 2, 2]);
        assert_eq!(ParamGrid::single().specs(Family::Knn).unwrap(), vec![Family::Knn.default_spec()]);
    }

    #[test]
    fn grid_rejects_bad_entries() {
        assert!(ParamGrid::single().with("k", vec![]).specs(Family::Knn).is_err());
        assert!(ParamGrid::single().with("depth", vec![json!(3)]).specs(Family::DecisionTree).is_err());
        assert!(ParamGrid::single().with("k", vec![json!(0)]).specs(Family::Knn).is_err());
    }
}
