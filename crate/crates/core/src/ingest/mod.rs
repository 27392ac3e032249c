//! Document ingestion: a paged block model for HTML and Markdown sources.
//!
//! Documents are normalized into an ordered list of [`Block`]s (headings,
//! paragraphs, tables), each tagged with the page it appears on. Markdown has
//! no native pagination, so pages come from `<!-- page: N -->` comment
//! sentinels; the same sentinels are honored in HTML. Without sentinels the
//! whole source is page 1.

mod html;
mod markdown;
mod render;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use render::{render_blocks, render_context, render_table};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("input is not valid UTF-8: {0}")]
    Decode(String),
    #[error("no parseable blocks in input")]
    Structure,
    #[error("page {page} outside document range 1..={page_count}")]
    PageOutOfRange { page: u32, page_count: u32 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Html,
    Markdown,
}

impl SourceFormat {
    /// Guess the format from a file extension (`.html`, `.htm`, `.md`, `.markdown`).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "html" | "htm" | "xhtml" => Some(Self::Html),
            "md" | "markdown" => Some(Self::Markdown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "level")]
pub enum BlockKind {
    Paragraph,
    Heading(u8),
    Table,
}

/// A table with a rectangular cell grid.
///
/// Ragged rows are padded with empty strings so every row has the header's
/// width; a row wider than the header widens the header instead. The header
/// row counts as the table's first row, so a header-only table is valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub caption: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub page: u32,
}

impl Table {
    pub fn new(
        caption: Option<String>,
        mut header: Vec<String>,
        mut rows: Vec<Vec<String>>,
        page: u32,
    ) -> Result<Self, IngestError> {
        let width = rows.iter().map(Vec::len).chain(std::iter::once(header.len())).max().unwrap_or(0);
        if width == 0 {
            return Err(IngestError::InvalidTable("table has no columns".into()));
        }
        if page == 0 {
            return Err(IngestError::InvalidTable("page numbers start at 1".into()));
        }
        header.resize(width, String::new());
        for row in &mut rows {
            row.resize(width, String::new());
        }
        let caption = caption.map(|c| c.trim().to_string()).filter(|c| !c.is_empty());
        Ok(Self { caption, header, rows, page })
    }

    pub fn width(&self) -> usize {
        self.header.len()
    }

    /// Cells of the body rows, row-major.
    pub fn body_cells(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().flat_map(|r| r.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: String,
    pub page: u32,
    pub kind: BlockKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl Block {
    pub fn paragraph(id: impl Into<String>, page: u32, text: impl Into<String>) -> Self {
        Self { id: id.into(), page, kind: BlockKind::Paragraph, text: text.into(), table: None }
    }

    pub fn heading(id: impl Into<String>, page: u32, level: u8, text: impl Into<String>) -> Self {
        Self { id: id.into(), page, kind: BlockKind::Heading(level.clamp(1, 6)), text: text.into(), table: None }
    }

    pub fn table(id: impl Into<String>, table: Table) -> Self {
        Self { id: id.into(), page: table.page, kind: BlockKind::Table, text: String::new(), table: Some(table) }
    }

    pub fn heading_level(&self) -> Option<u8> {
        match self.kind {
            BlockKind::Heading(level) => Some(level),
            _ => None,
        }
    }

    /// Content equality ignoring ids and page numbers.
    pub fn same_content(&self, other: &Block) -> bool {
        self.kind == other.kind
            && self.text == other.text
            && match (&self.table, &other.table) {
                (Some(a), Some(b)) => a.caption == b.caption && a.header == b.header && a.rows == b.rows,
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub blocks: Vec<Block>,
    pub page_count: u32,
}

impl Document {
    /// Build a document, checking page order, page range, id uniqueness and
    /// the table-kind invariant.
    pub fn new(id: impl Into<String>, blocks: Vec<Block>, page_count: u32) -> Result<Self, IngestError> {
        if page_count == 0 {
            return Err(IngestError::InvalidDocument("page_count must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut last_page = 1;
        for block in &blocks {
            if block.page == 0 || block.page > page_count {
                return Err(IngestError::InvalidDocument(format!(
                    "block {} on page {} outside 1..={page_count}",
                    block.id, block.page
                )));
            }
            if block.page < last_page {
                return Err(IngestError::InvalidDocument(format!("block {} out of page order", block.id)));
            }
            last_page = block.page;
            if !seen.insert(block.id.as_str()) {
                return Err(IngestError::InvalidDocument(format!("duplicate block id {}", block.id)));
            }
            let is_table = block.kind == BlockKind::Table;
            if is_table != (block.table.is_some() && block.text.is_empty()) {
                return Err(IngestError::InvalidDocument(format!(
                    "block {} violates the table/text invariant",
                    block.id
                )));
            }
        }
        Ok(Self { id: id.into(), blocks, page_count })
    }

    /// Content equality of the block sequences, ignoring ids and pages.
    pub fn structurally_eq(&self, other: &Document) -> bool {
        self.blocks.len() == other.blocks.len() && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.same_content(b))
    }
}

/// Parse raw HTML or Markdown bytes into a [`Document`].
///
/// The document id is the first 12 hex digits of the SHA-256 of the input.
pub fn parse_document(raw: &[u8], format: SourceFormat) -> Result<Document, IngestError> {
    let text = std::str::from_utf8(raw).map_err(|e| IngestError::Decode(e.to_string()))?;
    let digest = Sha256::digest(raw);
    let id = hex::encode(&digest[..6]);
    parse_document_with_id(text, format, id)
}

pub fn parse_document_with_id(
    text: &str,
    format: SourceFormat,
    id: impl Into<String>,
) -> Result<Document, IngestError> {
    let raw_blocks = match format {
        SourceFormat::Html => html::parse(text)?,
        SourceFormat::Markdown => markdown::parse(text)?,
    };
    if raw_blocks.is_empty() {
        return Err(IngestError::Structure);
    }
    let page_count = raw_blocks.iter().map(|b| b.page()).max().unwrap_or(1).max(1);
    let blocks = raw_blocks.into_iter().enumerate().map(|(i, raw)| raw.into_block(format!("b{i}"))).collect();
    Document::new(id, blocks, page_count)
}

/// Intermediate block produced by the format-specific parsers.
#[derive(Debug)]
pub(crate) enum RawBlock {
    Heading { level: u8, text: String, page: u32 },
    Paragraph { text: String, page: u32 },
    Table(Table),
}

impl RawBlock {
    fn page(&self) -> u32 {
        match self {
            RawBlock::Heading { page, .. } | RawBlock::Paragraph { page, .. } => *page,
            RawBlock::Table(t) => t.page,
        }
    }

    fn into_block(self, id: String) -> Block {
        match self {
            RawBlock::Heading { level, text, page } => Block::heading(id, page, level, text),
            RawBlock::Paragraph { text, page } => Block::paragraph(id, page, text),
            RawBlock::Table(table) => Block::table(id, table),
        }
    }
}

/// Pages are monotone in reading order; a sentinel going backwards is ignored.
pub(crate) fn page_sentinel(comment: &str) -> Option<u32> {
    let body = comment.trim();
    let body = body.strip_prefix("<!--").unwrap_or(body);
    let body = body.strip_suffix("-->").unwrap_or(body).trim();
    let rest = body.strip_prefix("page:").or_else(|| body.strip_prefix("page :"))?;
    rest.trim().parse().ok().filter(|&p: &u32| p > 0)
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// All tables in document order.
pub fn extract_tables(doc: &Document) -> Vec<Table> {
    doc.blocks.iter().filter_map(|b| b.table.clone()).collect()
}

/// Restrict a document to pages `[center - radius, center + radius]`, clamped
/// to the document's page range. Block ids and order are preserved.
pub fn window_pages(doc: &Document, center_page: u32, radius: u32) -> Result<Document, IngestError> {
    if center_page == 0 || center_page > doc.page_count {
        return Err(IngestError::PageOutOfRange { page: center_page, page_count: doc.page_count });
    }
    let lo = center_page.saturating_sub(radius).max(1);
    let hi = center_page.saturating_add(radius).min(doc.page_count);
    let blocks = doc.blocks.iter().filter(|b| (lo..=hi).contains(&b.page)).cloned().collect();
    Ok(Document { id: doc.id.clone(), blocks, page_count: doc.page_count })
}

pub const DEFAULT_WINDOW_RADIUS: u32 = 5;

#[cfg(test)]
mod tests {
    use super::*;

    fn paged_doc(pages: u32) -> Document {
        let blocks = (1..=pages).map(|p| Block::paragraph(format!("b{p}"), p, format!("page {p}"))).collect();
        Document::new("d", blocks, pages).unwrap()
    }

    fn pages_of(doc: &Document) -> Vec<u32> {
        doc.blocks.iter().map(|b| b.page).collect()
    }

    #[test]
    fn window_centered() {
        let doc = paged_doc(103);
        let w = window_pages(&doc, 50, 5).unwrap();
        assert_eq!(pages_of(&w), (45..=55).collect::<Vec<_>>());
    }

    #[test]
    fn window_clamps_low() {
        let doc = paged_doc(20);
        assert_eq!(pages_of(&window_pages(&doc, 2, 5).unwrap()), (1..=7).collect::<Vec<_>>());
    }

    #[test]
    fn window_radius_zero() {
        let doc = paged_doc(9);
        assert_eq!(pages_of(&window_pages(&doc, 4, 0).unwrap()), vec![4]);
    }

    #[test]
    fn window_out_of_range() {
        let doc = paged_doc(3);
        assert_eq!(window_pages(&doc, 4, 1), Err(IngestError::PageOutOfRange { page: 4, page_count: 3 }));
        assert!(window_pages(&doc, 0, 1).is_err());
    }

    #[test]
    fn table_pads_ragged_rows() {
        let t = Table::new(
            None,
            vec!["a".into(), "b".into()],
            vec![vec!["1".into()], vec!["1".into(), "2".into(), "3".into()]],
            1,
        )
        .unwrap();
        assert_eq!(t.header, vec!["a", "b", ""]);
        assert_eq!(t.rows[0], vec!["1", "", ""]);
        assert!(Table::new(None, vec![], vec![], 1).is_err());
    }

    #[test]
    fn document_rejects_duplicate_ids_and_bad_pages() {
        let dup = vec![Block::paragraph("x", 1, "a"), Block::paragraph("x", 1, "b")];
        assert!(Document::new("d", dup, 1).is_err());
        assert!(Document::new("d", vec![Block::paragraph("x", 2, "a")], 1).is_err());
        let backwards = vec![Block::paragraph("x", 2, "a"), Block::paragraph("y", 1, "b")];
        assert!(Document::new("d", backwards, 2).is_err());
    }

    #[test]
    fn sentinel_parsing() {
        assert_eq!(page_sentinel("<!-- page: 12 -->"), Some(12));
        assert_eq!(page_sentinel("<!--page:3-->"), Some(3));
        assert_eq!(page_sentinel("<!-- note -->"), None);
        assert_eq!(page_sentinel("<!-- page: 0 -->"), None);
    }

    #[test]
    fn empty_input_is_structure_error() {
        assert_eq!(parse_document(b"", SourceFormat::Markdown), Err(IngestError::Structure));
        assert_eq!(parse_document(b"  \n", SourceFormat::Html), Err(IngestError::Structure));
        assert!(matches!(parse_document(&[0xff, 0xfe], SourceFormat::Markdown), Err(IngestError::Decode(_))));
    }
}
