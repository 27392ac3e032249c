use super::{Block, BlockKind, Document, Table};

/// Plain-text rendering of a document for prompt context.
///
/// Headings get a `#` run for their level, paragraphs are verbatim and tables
/// become pipe-delimited rows with a header separator. Blocks are separated by
/// a blank line. The output re-parses as Markdown into the same block
/// structure (pages aside).
pub fn render_context(doc: &Document) -> String {
    render_blocks(&doc.blocks)
}

/// [`render_context`] over a run of blocks.
pub fn render_blocks(blocks: &[Block]) -> String {
    let mut parts = Vec::with_capacity(blocks.len());
    for block in blocks {
        match block.kind {
            BlockKind::Heading(level) => {
                parts.push(format!("{} {}", "#".repeat(level as usize), block.text));
            }
            BlockKind::Paragraph => parts.push(block.text.clone()),
            BlockKind::Table => {
                if let Some(table) = &block.table {
                    parts.push(render_table(table));
                }
            }
        }
    }
    parts.join("\n\n")
}

/// Pipe-table rendering, preceded by a `Table: <caption>` paragraph when captioned.
pub fn render_table(table: &Table) -> String {
    let mut out = String::new();
    if let Some(caption) = &table.caption {
        out.push_str("Table: ");
        out.push_str(caption);
        out.push_str("\n\n");
    }
    out.push_str(&render_row(&table.header));
    out.push('\n');
    out.push('|');
    for _ in &table.header {
        out.push_str(" --- |");
    }
    for row in &table.rows {
        out.push('\n');
        out.push_str(&render_row(row));
    }
    out
}

fn render_row(cells: &[String]) -> String {
    let mut line = String::from("|");
    for cell in cells {
        line.push(' ');
        line.push_str(&cell.replace('|', "\\|"));
        line.push_str(" |");
    }
    line
}

#[cfg(test)]
mod tests {
    use super::super::{parse_document, Block, Document, SourceFormat, Table};
    use super::*;

    #[test]
    fn header_only_table() {
        let t = Table::new(None, vec!["a".into(), "b".into()], vec![], 1).unwrap();
        assert_eq!(render_table(&t), "| a | b |\n| --- | --- |");
    }

    #[test]
    fn round_trip_three_blocks() {
        let md = "## Revenue\n\nRevenue grew.\n\n| Year | Revenue |\n|---|---|\n| 2021 | 10 |\n| 2022 | 12 |\n| 2023 | 15 |\n";
        let doc = parse_document(md.as_bytes(), SourceFormat::Markdown).unwrap();
        let rendered = render_context(&doc);
        let again = parse_document(rendered.as_bytes(), SourceFormat::Markdown).unwrap();
        assert!(doc.structurally_eq(&again));
        assert_eq!(render_context(&again), rendered);
    }

    #[test]
    fn pipes_in_cells_are_escaped() {
        let t = Table::new(Some("Cap".into()), vec!["a|b".into()], vec![vec!["x".into()]], 1).unwrap();
        let doc = Document::new("d", vec![Block::table("t", t)], 1).unwrap();
        let again = parse_document(render_context(&doc).as_bytes(), SourceFormat::Markdown).unwrap();
        assert!(doc.structurally_eq(&again), "{:?}", again);
    }

    #[test]
    fn identical_blocks_render_identically() {
        let a = Document::new("a", vec![Block::paragraph("x", 1, "hello")], 1).unwrap();
        let b = Document::new("b", vec![Block::paragraph("y", 1, "hello")], 1).unwrap();
        assert_eq!(render_context(&a), render_context(&b));
    }
}
