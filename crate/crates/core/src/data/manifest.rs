//! Tab-separated manifests: `id<TAB>relative_audio_path<TAB>label1|label2|…`.
//! Blank lines and lines starting with `#` are skipped.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{combine_labels, DataError, LabelMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    /// Manifest file name inside a corpus directory.
    pub fn file_name(self) -> String {
        format!("{}.tsv", self.name())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| DataError::Invalid(format!("unknown split `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    /// Path as written in the manifest (relative to the manifest's folder
    /// unless absolute).
    pub audio_path: PathBuf,
    pub raw_labels: Vec<String>,
}

impl ManifestEntry {
    pub fn label(&self) -> String {
        combine_labels(&self.raw_labels).expect("validated non-empty")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    /// Folder that relative audio paths are resolved against.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self, DataError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |msg: &str| DataError::Malformed {
                line: line_no,
                message: msg.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(malformed(&format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let (id, path, labels) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if id.is_empty() {
                return Err(malformed("empty utterance id"));
            }
            if path.is_empty() {
                return Err(malformed("empty audio path"));
            }
            let raw_labels: Vec<String> = labels
                .split('|')
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            if raw_labels.is_empty() {
                return Err(malformed("no labels"));
            }
            if !seen.insert(id.to_string()) {
                return Err(DataError::DuplicateId(id.to_string()));
            }
            entries.push(ManifestEntry {
                id: id.to_string(),
                audio_path: PathBuf::from(path),
                raw_labels,
            });
        }
        Ok(Self {
            root: root.into(),
            entries,
        })
    }

    /// Reads and validates a manifest, including that every audio file
    /// exists.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let manifest = Self::load_unchecked(path)?;
        let missing: Vec<String> = manifest
            .entries
            .iter()
            .filter(|e| !manifest.resolve(e).is_file())
            .map(|e| e.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(DataError::MissingAudio(missing));
        }
        Ok(manifest)
    }

    /// Reads a manifest without touching the audio files.
    pub fn load_unchecked(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.audio_path)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}\n",
                    e.id,
                    e.audio_path.display(),
                    e.raw_labels.join("|")
                )
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_tsv()).map_err(|e| DataError::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(ManifestEntry::label).collect()
    }
}

/// The three split manifests of a corpus directory and the label map of its
/// training split.
#[derive(Clone, Debug)]
pub struct CorpusManifests {
    pub train: Manifest,
    pub validation: Manifest,
    pub test: Manifest,
    pub label_map: LabelMap,
}

impl CorpusManifests {
    pub fn split(&self, split: Split) -> &Manifest {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Labels of `split` that the training split never produced.
    pub fn unknown_labels(&self, split: Split) -> Vec<String> {
        let mut out: Vec<String> = self
            .split(split)
            .labels()
            .into_iter()
            .filter(|l| self.label_map.index(l).is_none())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Loads `train.tsv`, `validation.tsv` and `test.tsv` from `dir`.
pub fn load_manifest(dir: &Path) -> Result<CorpusManifests, DataError> {
    let load = |s: Split| Manifest::load(&dir.join(s.file_name()));
    let train = load(Split::Train)?;
    let labels = train.labels();
    let label_map = LabelMap::from_labels(labels.iter().map(String::as_str));
    Ok(CorpusManifests {
        validation: load(Split::Validation)?,
        test: load(Split::Test)?,
        train,
        label_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_lines() {
        let m = Manifest::parse("a\ta.wav\tack\nb\tb.wav\trequest|ack\n\nc\tc.wav\tbye\n", "/x").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[1].label(), "ack+request");
        assert_eq!(m.resolve(&m.entries[0]), PathBuf::from("/x/a.wav"));
    }

    #[test]
    fn duplicate_id_is_named() {
        let err = Manifest::parse("a\ta.wav\tack\na\tb.wav\tack\n", ".").unwrap_err();
        assert!(err.to_string().contains("`a`"), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = Manifest::parse("a\ta.wav\tack\nbroken line\n", ".").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn round_trips_through_tsv() {
        let m = Manifest::parse("a\tx/a.wav\tb|a\n", ".").unwrap();
        assert_eq!(Manifest::parse(&m.to_tsv(), ".").unwrap(), m);
    }
}
