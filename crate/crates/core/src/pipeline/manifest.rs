use std::path::{Path, PathBuf};

use super::{csv_rows, field, read_text, PipelineError};

pub const MANIFEST_HEADER: &str = "frame,timestamp_ms";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEntry {
    /// Frame file name, relative to the manifest's directory.
    pub frame: String,
    pub timestamp_ms: i64,
}

/// Frame list in file order. Timestamps may go backwards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameManifest {
    pub rows: Vec<FrameEntry>,
    /// Directory frame names are resolved against.
    pub base_dir: PathBuf,
}

impl FrameManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let file = "frame manifest";
        let mut rows = Vec::new();
        for (line, f) in csv_rows(text, file, MANIFEST_HEADER)? {
            let frame = f[0].trim();
            if frame.is_empty() || frame.contains(char::is_whitespace) {
                return Err(PipelineError::parse(
                    file,
                    line,
                    format!("frame name {frame:?} is empty or contains whitespace"),
                ));
            }
            rows.push(FrameEntry {
                frame: frame.to_string(),
                timestamp_ms: field(file, line, "timestamp_ms", f[1])?,
            });
        }
        Ok(FrameManifest {
            rows,
            base_dir: base_dir.into(),
        })
    }

    /// Reads the manifest and checks every listed frame exists.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let m = Self::parse(&read_text(path)?, base)?;
        for row in &m.rows {
            let p = m.frame_path(row);
            if !p.is_file() {
                return Err(PipelineError::Io {
                    path: p,
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "frame listed in manifest not found"),
                });
            }
        }
        Ok(m)
    }

    pub fn frame_path(&self, row: &FrameEntry) -> PathBuf {
        self.base_dir.join(&row.frame)
    }

    pub fn timestamp_of(&self, frame: &str) -> Option<i64> {
        self.rows.iter().find(|r| r.frame == frame).map(|r| r.timestamp_ms)
    }
}

/// `f001.ppm` -> `f001`; the stem pairs a frame with `<stem>.txt` predictions.
pub(crate) fn frame_stem(frame: &str) -> &str {
    Path::new(frame)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(frame)
}
