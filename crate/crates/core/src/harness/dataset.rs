use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ingest::{parse_document, Document, SourceFormat};
use crate::typing::ChartType;

/// One benchmark item. `document_path` is relative to the manifest in the
/// file and absolute once loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub intent: String,
    pub document_path: PathBuf,
    /// Index into the document's tables in reading order.
    #[serde(default)]
    pub reference_table_index: Option<usize>,
    pub gt_chart_types: Vec<ChartType>,
    #[serde(default)]
    pub center_page: Option<u32>,
}

impl Sample {
    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.intent.trim().is_empty() {
            return Err("intent is empty".into());
        }
        if self.gt_chart_types.is_empty() || self.gt_chart_types.len() > 3 {
            return Err("gt_chart_types needs 1 to 3 entries".into());
        }
        let distinct: HashSet<_> = self.gt_chart_types.iter().collect();
        if distinct.len() != self.gt_chart_types.len() {
            return Err("gt_chart_types has duplicates".into());
        }
        if self.center_page == Some(0) {
            return Err("center_page starts at 1".into());
        }
        Ok(())
    }
}

/// Read a JSON-lines manifest. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<Sample>, HarnessError> {
    let text =
        fs::read_to_string(manifest_path).map_err(|e| HarnessError::Io(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let manifest_err = |message: String| HarnessError::Manifest { line: i + 1, message };
        let mut sample: Sample = serde_json::from_str(line).map_err(|e| manifest_err(e.to_string()))?;
        sample.check().map_err(manifest_err)?;
        if !seen.insert(sample.id.clone()) {
            return Err(manifest_err(format!("duplicate sample id {}", sample.id)));
        }
        let path = base.join(&sample.document_path);
        if !path.is_file() {
            return Err(HarnessError::MissingDocument(path));
        }
        sample.document_path = path;
        samples.push(sample);
    }
    Ok(samples)
}

/// Parse a document file, choosing the format from its extension.
pub fn load_document(path: &Path) -> Result<Document, HarnessError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let format = SourceFormat::from_extension(ext)
        .ok_or_else(|| HarnessError::Io(format!("{}: unsupported extension {ext:?}", path.display())))?;
    let raw = fs::read(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_document(&raw, format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(dir: &Path, lines: &[&str]) -> PathBuf {
        fs::write(dir.join("doc.md"), "# T\n\ntext\n").unwrap();
        let p = dir.join("m.jsonl");
        fs::write(&p, lines.join("\n")).unwrap();
        p
    }

    #[test]
    fn loads_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let p = manifest(
            dir.path(),
            &[r#"{"id":"a","intent":"x","document_path":"doc.md","gt_chart_types":["line","bar"]}"#, ""],
        );
        let s = load_dataset(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].document_path, dir.path().join("doc.md"));
    }

    #[test]
    fn rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let ok = r#"{"id":"a","intent":"x","document_path":"doc.md","gt_chart_types":["line"]}"#;
        let dup = r#"{"id":"b","intent":"x","document_path":"doc.md","gt_chart_types":["line","line"]}"#;
        let p = manifest(dir.path(), &[ok, dup]);
        assert!(matches!(load_dataset(&p), Err(HarnessError::Manifest { line: 2, .. })));
        let missing = r#"{"id":"c","intent":"x","document_path":"nope.md","gt_chart_types":["bar"]}"#;
        let p = manifest(dir.path(), &[missing]);
        assert!(matches!(load_dataset(&p), Err(HarnessError::MissingDocument(_))));
        let p = manifest(dir.path(), &[ok, ok]);
        assert!(matches!(load_dataset(&p), Err(HarnessError::Manifest { line: 2, .. })));
    }
}
