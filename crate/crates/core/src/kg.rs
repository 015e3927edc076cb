//! Triplet store with a per-entity category path, used to look up reference
//! values: the values other entities in the same most-specific category hold
//! for the queried attribute.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `<entity, attribute, value>` fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub entity: String,
    pub attribute: String,
    pub value: String,
}

impl Triplet {
    pub fn new(
        entity: impl Into<String>,
        attribute: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Self {
            entity: entity.into(),
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

/// One line of the category file. Categories run most-general first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub entity: String,
    pub categories: Vec<String>,
}

/// Deduplicated sibling values for one attribute, in store order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub attribute: String,
    pub values: Vec<String>,
}

impl ReferenceSet {
    pub fn empty(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            values: Vec::new(),
        }
    }

    pub fn from_values<I, S>(attribute: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = Self::empty(attribute);
        for v in values {
            set.insert(v.into());
        }
        set
    }

    fn insert(&mut self, value: String) {
        if !self.values.contains(&value) {
            self.values.push(value);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Set of triplets hidden from reference lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletMask(HashSet<Triplet>);

impl TripletMask {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, triplet: Triplet) {
        self.0.insert(triplet);
    }

    pub fn contains(&self, triplet: &Triplet) -> bool {
        self.0.contains(triplet)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<Triplet> for TripletMask {
    fn from_iter<I: IntoIterator<Item = Triplet>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    triplets: Vec<Triplet>,
    by_attribute: HashMap<String, Vec<usize>>,
    by_entity_attribute: HashMap<(String, String), Vec<usize>>,
    categories: HashMap<String, Vec<String>>,
}

impl KnowledgeStore {
    pub fn new(triplets: Vec<Triplet>, categories: Vec<CategoryRecord>) -> Result<Self> {
        let mut store = Self::default();
        for (i, t) in triplets.iter().enumerate() {
            if t.entity.is_empty() || t.attribute.is_empty() {
                return Err(Error::usage(format!(
                    "triplet {i} has an empty entity or attribute"
                )));
            }
            store
                .by_attribute
                .entry(t.attribute.clone())
                .or_default()
                .push(i);
            store
                .by_entity_attribute
                .entry((t.entity.clone(), t.attribute.clone()))
                .or_default()
                .push(i);
        }
        store.triplets = triplets;
        for record in categories {
            if record.categories.is_empty() {
                return Err(Error::usage(format!(
                    "entity {:?} has no categories",
                    record.entity
                )));
            }
            store.categories.insert(record.entity, record.categories);
        }
        Ok(store)
    }

    /// Loads the triplet and category JSONL files.
    pub fn load(triplets: &Path, categories: &Path) -> Result<Self> {
        let t = read_jsonl::<Triplet>(triplets)?;
        for (line, triplet) in t.iter().enumerate() {
            if triplet.entity.is_empty() || triplet.attribute.is_empty() {
                return Err(Error::Parse {
                    path: triplets.to_path_buf(),
                    line: line + 1,
                    message: "entity and attribute must be nonempty".into(),
                });
            }
        }
        let c = read_jsonl::<CategoryRecord>(categories)?;
        for (line, record) in c.iter().enumerate() {
            if record.categories.is_empty() {
                return Err(Error::Parse {
                    path: categories.to_path_buf(),
                    line: line + 1,
                    message: "categories must be nonempty".into(),
                });
            }
        }
        Self::new(t, c)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// Values stored for `(entity, attribute)`; duplicates are kept.
    pub fn values(&self, entity: &str, attribute: &str) -> Vec<&str> {
        self.by_entity_attribute
            .get(&(entity.to_string(), attribute.to_string()))
            .map(|ids| {
                ids.iter()
                    .map(|&i| self.triplets[i].value.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn most_specific_category(&self, entity: &str) -> Option<&str> {
        self.categories
            .get(entity)
            .and_then(|c| c.last())
            .map(String::as_str)
    }

    pub fn masked<'a>(&'a self, mask: &'a TripletMask) -> MaskedStore<'a> {
        MaskedStore { store: self, mask }
    }

    /// Reference values with nothing masked.
    pub fn reference_values(&self, entity: &str, attribute: &str) -> ReferenceSet {
        self.reference_values_masked(entity, attribute, &TripletMask::default())
    }

    pub fn reference_values_masked(
        &self,
        entity: &str,
        attribute: &str,
        mask: &TripletMask,
    ) -> ReferenceSet {
        let mut refs = ReferenceSet::empty(attribute);
        let Some(category) = self.most_specific_category(entity) else {
            return refs;
        };
        let Some(ids) = self.by_attribute.get(attribute) else {
            return refs;
        };
        for &i in ids {
            let t = &self.triplets[i];
            if t.entity == entity || mask.contains(t) {
                continue;
            }
            if self.most_specific_category(&t.entity) == Some(category) {
                refs.insert(t.value.clone());
            }
        }
        refs
    }
}

/// Read-only view of a store with some triplets hidden. The store itself is
/// never modified.
#[derive(Debug, Clone, Copy)]
pub struct MaskedStore<'a> {
    store: &'a KnowledgeStore,
    mask: &'a TripletMask,
}

impl MaskedStore<'_> {
    pub fn reference_values(&self, entity: &str, attribute: &str) -> ReferenceSet {
        self.store
            .reference_values_masked(entity, attribute, self.mask)
    }

    pub fn store(&self) -> &KnowledgeStore {
        self.store
    }
}

/// Reads one JSON object per line. Blank lines are skipped; line numbers in
/// errors are 1-based and count blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}
