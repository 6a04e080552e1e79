//! In-memory store of datasets and indexes with optional JSON snapshots.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use trendsketch_core::model::Dataset;
use trendsketch_core::search::Index;

/// An index plus the dataset it was built from. Never mutated once stored.
#[derive(Debug)]
pub struct StoredIndex {
    pub id: String,
    pub dataset: Arc<Dataset>,
    pub index: Index,
}

/// A different dataset is already stored under this id.
#[derive(Debug, thiserror::Error)]
#[error("dataset `{0}` already exists with different contents")]
pub struct DatasetConflict(pub String);

#[derive(Serialize, Deserialize)]
struct IndexSnapshot {
    id: String,
    index: Index,
}

#[derive(Debug, Default)]
pub struct Registry {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    indexes: RwLock<HashMap<String, Arc<StoredIndex>>>,
    next_index: AtomicU64,
    data_dir: Option<PathBuf>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Registry::default()
    }

    /// Loads any snapshots found under `dir` and writes new entries there.
    pub fn persistent(dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("datasets"))?;
        fs::create_dir_all(dir.join("indexes"))?;
        let reg = Registry {
            data_dir: Some(dir.clone()),
            ..Registry::default()
        };
        for path in json_files(&dir.join("datasets"))? {
            let bytes = fs::read(&path)?;
            let ds: Dataset =
                serde_json::from_slice(&bytes).with_context(|| format!("reading {}", path.display()))?;
            reg.datasets
                .write()
                .expect("registry lock")
                .insert(ds.id().to_string(), Arc::new(ds));
        }
        let mut highest = 0;
        for path in json_files(&dir.join("indexes"))? {
            let bytes = fs::read(&path)?;
            let snap: IndexSnapshot =
                serde_json::from_slice(&bytes).with_context(|| format!("reading {}", path.display()))?;
            let dataset = reg
                .dataset(&snap.index.dataset_id)
                .with_context(|| format!("{}: dataset {} missing", path.display(), snap.index.dataset_id))?;
            if let Some(n) = snap.id.strip_prefix("ix-").and_then(|n| n.parse::<u64>().ok()) {
                highest = highest.max(n);
            }
            let stored = StoredIndex {
                id: snap.id.clone(),
                dataset,
                index: snap.index,
            };
            reg.indexes
                .write()
                .expect("registry lock")
                .insert(snap.id, Arc::new(stored));
        }
        reg.next_index.store(highest, Ordering::SeqCst);
        Ok(reg)
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.datasets.read().expect("registry lock").get(id).cloned()
    }

    pub fn index(&self, id: &str) -> Option<Arc<StoredIndex>> {
        self.indexes.read().expect("registry lock").get(id).cloned()
    }

    /// Stores a dataset. Ids are content-derived, so re-uploading the same
    /// data returns the existing entry; a different dataset under a taken id
    /// fails with [`DatasetConflict`].
    pub fn insert_dataset(&self, dataset: Dataset) -> anyhow::Result<Arc<Dataset>> {
        // held across the snapshot write so two uploads cannot interleave
        let mut map = self.datasets.write().expect("registry lock");
        if let Some(existing) = map.get(dataset.id()) {
            if **existing != dataset {
                return Err(DatasetConflict(dataset.id().to_string()).into());
            }
            return Ok(existing.clone());
        }
        if let Some(dir) = &self.data_dir {
            let path = dir
                .join("datasets")
                .join(format!("{}.json", file_stem(dataset.id())));
            write_atomically(&path, &serde_json::to_vec(&dataset)?)?;
        }
        let stored = Arc::new(dataset);
        map.insert(stored.id().to_string(), stored.clone());
        Ok(stored)
    }

    /// Stores an index under a fresh id.
    pub fn insert_index(&self, dataset: Arc<Dataset>, index: Index) -> anyhow::Result<Arc<StoredIndex>> {
        let n = self.next_index.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("ix-{n:06}");
        if let Some(dir) = &self.data_dir {
            let snap = IndexSnapshot {
                id: id.clone(),
                index: index.clone(),
            };
            let path = dir.join("indexes").join(format!("{id}.json"));
            write_atomically(&path, &serde_json::to_vec(&snap)?)?;
        }
        let stored = Arc::new(StoredIndex {
            id: id.clone(),
            dataset,
            index,
        });
        self.indexes
            .write()
            .expect("registry lock")
            .insert(id, stored.clone());
        Ok(stored)
    }
}

fn json_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_atomically(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
