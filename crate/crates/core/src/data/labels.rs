use serde::{Deserialize, Serialize};

use super::DataError;

/// Reserved name for labels never seen in training.
pub const UNKNOWN_LABEL: &str = "<unk>";

/// Canonical single label for a multi-act utterance: the raw labels sorted
/// and joined with `+`.
pub fn combine_labels<S: AsRef<str>>(raw: &[S]) -> Result<String, DataError> {
    if raw.is_empty() {
        return Err(DataError::EmptyLabels);
    }
    let mut parts: Vec<&str> = raw.iter().map(AsRef::as_ref).collect();
    parts.sort_unstable();
    Ok(parts.join("+"))
}

/// Combined label → class index, built from the training split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    labels: Vec<String>,
}

impl LabelMap {
    /// Sorted, de-duplicated label set.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut labels: Vec<String> = labels.into_iter().map(str::to_string).collect();
        labels.sort();
        labels.dedup();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `None` means the label maps to `<unk>`.
    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(combine_labels(&["affirm"]).unwrap(), "affirm");
        assert_eq!(combine_labels(&["request", "ack"]).unwrap(), "ack+request");
        assert_eq!(
            combine_labels(&["bye", "ack", "thankyou"]).unwrap(),
            "ack+bye+thankyou"
        );
        assert!(matches!(combine_labels::<&str>(&[]), Err(DataError::EmptyLabels)));
    }

    #[test]
    fn map_is_sorted_and_bijective() {
        let m = LabelMap::from_labels(["b", "a", "c", "a"]);
        assert_eq!(m.names(), ["a", "b", "c"]);
        for i in 0..m.len() {
            assert_eq!(m.index(m.name(i)), Some(i));
        }
        assert_eq!(m.index("zzz"), None);
    }
}
