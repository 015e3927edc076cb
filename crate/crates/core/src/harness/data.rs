//! Loading a dataset directory (or an in-memory [`Dataset`]) into prepared
//! train and test episodes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EpisodeRecord, PreparedEpisode};
use crate::error::{Error, Result};
use crate::kg::{read_jsonl, KnowledgeStore, TripletMask};
use crate::parallel;
use crate::synth::{
    Dataset, DatasetManifest, CATEGORY_FILE, KG_FILE, MANIFEST_FILE, TEST_FILE, TRAIN_FILE,
};

/// What a run manifest records about its input data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    /// SHA-256 over the episode, KG and category files, in that order.
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<DatasetManifest>,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Vec<PreparedEpisode>,
    pub test: Vec<PreparedEpisode>,
    pub reference: Option<DatasetRef>,
}

/// Every triplet whose value is a label. Reference lookups never see them,
/// so sibling references come only from background knowledge.
pub fn label_mask<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>) -> TripletMask {
    records
        .into_iter()
        .filter_map(EpisodeRecord::triplet)
        .collect()
}

fn prepare(
    records: Vec<EpisodeRecord>,
    store: &KnowledgeStore,
    mask: &TripletMask,
    max_answers: usize,
) -> Vec<PreparedEpisode> {
    parallel::map(&records, |r| {
        PreparedEpisode::from_store(r.clone(), store, mask, max_answers)
    })
}

pub fn prepare_split(
    train: Vec<EpisodeRecord>,
    test: Vec<EpisodeRecord>,
    store: &KnowledgeStore,
    max_answers: usize,
) -> (Vec<PreparedEpisode>, Vec<PreparedEpisode>) {
    let mask = label_mask(train.iter().chain(&test));
    (
        prepare(train, store, &mask, max_answers),
        prepare(test, store, &mask, max_answers),
    )
}

impl LoadedData {
    pub fn from_dataset(dataset: &Dataset, max_answers: usize) -> Result<Self> {
        let store = KnowledgeStore::new(dataset.triplets.clone(), dataset.categories.clone())?;
        let (train, test) = prepare_split(
            dataset.train.clone(),
            dataset.test.clone(),
            &store,
            max_answers,
        );
        Ok(Self {
            train,
            test,
            reference: None,
        })
    }

    pub fn load(dir: &Path, max_answers: usize) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::usage(format!(
                "data directory {} does not exist",
                dir.display()
            )));
        }
        let train: Vec<EpisodeRecord> = read_jsonl(&dir.join(TRAIN_FILE))?;
        let test: Vec<EpisodeRecord> = read_jsonl(&dir.join(TEST_FILE))?;
        let store = KnowledgeStore::load(&dir.join(KG_FILE), &dir.join(CATEGORY_FILE))?;
        let (train, test) = prepare_split(train, test, &store, max_answers);
        Ok(Self {
            train,
            test,
            reference: Some(dataset_ref(dir)?),
        })
    }
}

pub fn fingerprint(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in [TRAIN_FILE, TEST_FILE, KG_FILE, CATEGORY_FILE] {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn dataset_ref(dir: &Path) -> Result<DatasetRef> {
    let path = std::fs::canonicalize(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = path.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok(DatasetRef {
        fingerprint: fingerprint(&path)?,
        path,
        manifest,
    })
}
