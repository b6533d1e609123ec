use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// One column of a [`Schema`].
///
/// Categorical columns declared without a category list are *open*: their
/// categories are appended in order of first appearance when data is loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub categories: Vec<String>,
    pub open: bool,
    pub target: bool,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
            open: false,
            target: false,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            open: false,
            target: false,
        }
    }

    /// A categorical column whose categories will be inferred from data.
    pub fn open_categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: Vec::new(),
            open: true,
            target: false,
        }
    }

    pub fn as_target(mut self) -> Self {
        self.target = true;
        self
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == ColumnKind::Categorical
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Width of this column after one-hot encoding.
    pub fn encoded_width(&self) -> usize {
        match self.kind {
            ColumnKind::Continuous => 1,
            ColumnKind::Categorical => self.categories.len(),
        }
    }
}

/// Validated, ordered list of column specifications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    columns: Vec<ColumnDoc>,
}

#[derive(Serialize, Deserialize)]
struct ColumnDoc {
    name: String,
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    target: bool,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut targets = 0;
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", col.name)));
            }
            if col.target {
                targets += 1;
            }
            if col.is_categorical() {
                if col.categories.is_empty() && !col.open {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} has an empty category list",
                        col.name
                    )));
                }
                let distinct: HashSet<_> = col.categories.iter().collect();
                if distinct.len() != col.categories.len() {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} lists a category twice",
                        col.name
                    )));
                }
            } else if !col.categories.is_empty() || col.open {
                return Err(Error::Schema(format!(
                    "continuous column {:?} cannot declare categories",
                    col.name
                )));
            }
        }
        if targets > 1 {
            return Err(Error::Schema("multiple targets".into()));
        }
        Ok(Self { columns })
    }

    /// Parses a JSON schema document `{"columns": [{name, kind, categories?, target?}]}`.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(text)?;
        let columns = doc
            .columns
            .into_iter()
            .map(|c| {
                let open = c.kind == ColumnKind::Categorical && c.categories.is_none();
                ColumnSpec {
                    name: c.name,
                    kind: c.kind,
                    categories: c.categories.unwrap_or_default(),
                    open,
                    target: c.target,
                }
            })
            .collect();
        Self::new(columns)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialization is infallible")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &ColumnSpec {
        &self.columns[idx]
    }

    pub(crate) fn column_mut(&mut self, idx: usize) -> &mut ColumnSpec {
        &mut self.columns[idx]
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn target_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.target)
    }

    /// Returns a copy with `name` flagged as the only target column.
    pub fn with_target(&self, name: &str) -> Result<Self> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("target column {name:?} not in schema")))?;
        let mut out = self.clone();
        for (i, c) in out.columns.iter_mut().enumerate() {
            c.target = i == idx;
        }
        Ok(out)
    }

    /// Returns a copy in which every categorical column is closed.
    pub fn closed(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.columns {
            c.open = false;
        }
        out
    }

    pub fn has_open_columns(&self) -> bool {
        self.columns.iter().any(|c| c.open)
    }

    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(ColumnSpec::encoded_width).sum()
    }

    pub fn n_continuous(&self) -> usize {
        self.columns.iter().filter(|c| !c.is_categorical()).count()
    }

    pub fn n_categorical(&self) -> usize {
        self.columns.iter().filter(|c| c.is_categorical()).count()
    }

    /// Same column names, kinds and category lists (target flags and
    /// open/closed state are ignored).
    pub fn compatible_with(&self, other: &Schema) -> bool {
        self.len() == other.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name && a.kind == b.kind && a.categories == b.categories
            })
    }
}

impl Serialize for Schema {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = SchemaDoc {
            columns: self
                .columns
                .iter()
                .map(|c| ColumnDoc {
                    name: c.name.clone(),
                    kind: c.kind,
                    categories: (c.is_categorical() && !(c.open && c.categories.is_empty()))
                        .then(|| c.categories.clone()),
                    target: c.target,
                })
                .collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        Schema::parse(&value.to_string()).map_err(serde::de::Error::custom)
    }
}
