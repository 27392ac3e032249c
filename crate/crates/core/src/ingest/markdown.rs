use pulldown_cmark::{Event, HeadingLevel, Options, Parser, Tag, TagEnd};

use super::{collapse_whitespace, html, page_sentinel, IngestError, RawBlock, Table};

const CAPTION_PREFIX: &str = "Table:";

#[derive(Default)]
struct TableBuilder {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    current_row: Vec<String>,
    in_head: bool,
}

pub(crate) fn parse(text: &str) -> Result<Vec<RawBlock>, IngestError> {
    let mut blocks = Vec::new();
    let mut page = 1u32;
    let mut buf = String::new();
    let mut buf_page = 1u32;
    let mut heading: Option<u8> = None;
    let mut table: Option<TableBuilder> = None;
    let mut html_block: Option<String> = None;

    let flush = |buf: &mut String, page: u32, blocks: &mut Vec<RawBlock>| {
        let text = collapse_whitespace(buf);
        buf.clear();
        if !text.is_empty() {
            blocks.push(RawBlock::Paragraph { text, page });
        }
    };

    for event in Parser::new_ext(text, Options::ENABLE_TABLES) {
        match event {
            Event::Start(Tag::Heading { level, .. }) => {
                flush(&mut buf, buf_page, &mut blocks);
                heading = Some(heading_level(level));
                buf_page = page;
            }
            Event::End(TagEnd::Heading(_)) => {
                let text = collapse_whitespace(&buf);
                buf.clear();
                if let Some(level) = heading.take() {
                    if !text.is_empty() {
                        blocks.push(RawBlock::Heading { level, text, page: buf_page });
                    }
                }
            }
            Event::Start(Tag::Paragraph)
            | Event::Start(Tag::Item)
            | Event::Start(Tag::CodeBlock(_))
            | Event::Start(Tag::BlockQuote(_)) => {
                if table.is_none() {
                    flush(&mut buf, buf_page, &mut blocks);
                    buf_page = page;
                }
            }
            Event::End(TagEnd::Paragraph)
            | Event::End(TagEnd::Item)
            | Event::End(TagEnd::CodeBlock)
            | Event::End(TagEnd::BlockQuote(_)) => {
                if table.is_none() {
                    flush(&mut buf, buf_page, &mut blocks);
                }
            }
            Event::Start(Tag::Table(_)) => {
                flush(&mut buf, buf_page, &mut blocks);
                table = Some(TableBuilder::default());
            }
            Event::Start(Tag::TableHead) => {
                if let Some(t) = table.as_mut() {
                    t.in_head = true;
                }
            }
            Event::End(TagEnd::TableHead) => {
                if let Some(t) = table.as_mut() {
                    t.in_head = false;
                    t.header = std::mem::take(&mut t.current_row);
                }
            }
            Event::End(TagEnd::TableRow) => {
                if let Some(t) = table.as_mut() {
                    let row = std::mem::take(&mut t.current_row);
                    t.rows.push(row);
                }
            }
            Event::End(TagEnd::TableCell) => {
                if let Some(t) = table.as_mut() {
                    t.current_row.push(collapse_whitespace(&buf));
                    buf.clear();
                }
            }
            Event::End(TagEnd::Table) => {
                if let Some(t) = table.take() {
                    let caption = take_caption(&mut blocks);
                    blocks.push(RawBlock::Table(Table::new(caption, t.header, t.rows, page)?));
                }
            }
            Event::Start(Tag::HtmlBlock) => {
                flush(&mut buf, buf_page, &mut blocks);
                html_block = Some(String::new());
            }
            Event::End(TagEnd::HtmlBlock) => {
                if let Some(raw) = html_block.take() {
                    if raw.to_ascii_lowercase().contains("<table") {
                        let (mut parsed, last_page) = html::parse_fragment(&raw, page)?;
                        blocks.append(&mut parsed);
                        page = last_page;
                    } else {
                        for line in raw.lines() {
                            if let Some(p) = page_sentinel(line) {
                                page = page.max(p);
                            }
                        }
                    }
                    buf_page = page;
                }
            }
            Event::Html(raw) | Event::InlineHtml(raw) => {
                if let Some(acc) = html_block.as_mut() {
                    acc.push_str(&raw);
                } else if let Some(p) = page_sentinel(&raw) {
                    page = page.max(p);
                }
            }
            Event::Text(t) | Event::Code(t) => buf.push_str(&t),
            Event::SoftBreak | Event::HardBreak => buf.push(' '),
            _ => {}
        }
    }
    flush(&mut buf, buf_page, &mut blocks);
    Ok(blocks)
}

fn heading_level(level: HeadingLevel) -> u8 {
    match level {
        HeadingLevel::H1 => 1,
        HeadingLevel::H2 => 2,
        HeadingLevel::H3 => 3,
        HeadingLevel::H4 => 4,
        HeadingLevel::H5 => 5,
        HeadingLevel::H6 => 6,
    }
}

/// A `Table: ...` paragraph directly before a table is its caption.
fn take_caption(blocks: &mut Vec<RawBlock>) -> Option<String> {
    if let Some(RawBlock::Paragraph { text, .. }) = blocks.last() {
        if let Some(caption) = text.strip_prefix(CAPTION_PREFIX) {
            let caption = caption.trim().to_string();
            blocks.pop();
            return Some(caption);
        }
    }
    None
}
