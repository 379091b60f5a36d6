use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use roadwatch_core::pipeline::{append_labels, parse_labels, Label, LabelRow, PipelineError};

/// Latest label per crop id, folded over the file rows in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelIndex {
    pub latest: HashMap<String, LabelRow>,
    pub rows: usize,
}

impl LabelIndex {
    pub fn from_rows(rows: impl IntoIterator<Item = LabelRow>) -> Self {
        let mut index = LabelIndex::default();
        for row in rows {
            index.insert(row);
        }
        index
    }

    fn insert(&mut self, row: LabelRow) {
        self.rows += 1;
        self.latest.insert(row.crop_id.clone(), row);
    }

    pub fn label_of(&self, crop_id: &str) -> Option<Label> {
        self.latest.get(crop_id).map(|r| r.label)
    }
}

/// Append-only labels file plus an in-memory index. The file is the
/// source of truth; the index is rebuilt from it on open.
///
/// Writes go through one mutex: append, fsync, then publish a new index
/// snapshot. Readers clone the current snapshot and never wait on a write
/// in progress.
#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    writer: Mutex<()>,
    snapshot: RwLock<Arc<LabelIndex>>,
}

impl LabelStore {
    /// Opens `path`, which may not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let path = path.into();
        let index = match std::fs::read_to_string(&path) {
            Ok(text) if text.trim().is_empty() => LabelIndex::default(),
            Ok(text) => LabelIndex::from_rows(parse_labels(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => LabelIndex::default(),
            Err(source) => return Err(PipelineError::Io { path, source }),
        };
        Ok(LabelStore {
            path,
            writer: Mutex::new(()),
            snapshot: RwLock::new(Arc::new(index)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<LabelIndex> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Durably appends `row`; returns once it is on disk and visible.
    pub fn append(&self, row: LabelRow) -> Result<(), PipelineError> {
        let _guard = self.writer.lock().expect("writer lock");
        append_labels(&self.path, std::slice::from_ref(&row))?;
        let mut next = (*self.snapshot()).clone();
        next.insert(row);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(())
    }
}
