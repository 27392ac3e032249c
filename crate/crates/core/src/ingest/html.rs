use ego_tree::NodeRef;
use scraper::{ElementRef, Html, Node};

use super::{collapse_whitespace, page_sentinel, IngestError, RawBlock, Table};

const SKIPPED: &[&str] = &["script", "style", "head", "noscript", "template", "svg"];
const PARAGRAPH_LIKE: &[&str] = &["p", "li", "blockquote", "pre", "dt", "dd", "figcaption", "address"];
const CONTAINERS: &[&str] = &[
    "html", "body", "div", "section", "article", "main", "header", "footer", "nav", "aside", "ul", "ol", "dl",
    "center", "form", "fieldset", "figure", "details", "summary",
];

struct Walker {
    blocks: Vec<RawBlock>,
    page: u32,
    inline: String,
}

pub(crate) fn parse(text: &str) -> Result<Vec<RawBlock>, IngestError> {
    let html = Html::parse_document(text);
    let mut walker = Walker { blocks: Vec::new(), page: 1, inline: String::new() };
    walker.walk(html.tree.root())?;
    walker.flush();
    Ok(walker.blocks)
}

/// Parse an HTML fragment starting on `page`; returns the blocks and the last page seen.
pub(crate) fn parse_fragment(text: &str, page: u32) -> Result<(Vec<RawBlock>, u32), IngestError> {
    let html = Html::parse_fragment(text);
    let mut walker = Walker { blocks: Vec::new(), page, inline: String::new() };
    walker.walk(html.tree.root())?;
    walker.flush();
    Ok((walker.blocks, walker.page))
}

impl Walker {
    fn flush(&mut self) {
        let text = collapse_whitespace(&self.inline);
        self.inline.clear();
        if !text.is_empty() {
            self.blocks.push(RawBlock::Paragraph { text, page: self.page });
        }
    }

    fn walk(&mut self, node: NodeRef<'_, Node>) -> Result<(), IngestError> {
        for child in node.children() {
            match child.value() {
                Node::Text(t) => self.inline.push_str(t),
                Node::Comment(c) => {
                    if let Some(p) = page_sentinel(c) {
                        self.flush();
                        self.page = self.page.max(p);
                    }
                }
                Node::Element(el) => {
                    let name = el.name();
                    let element = ElementRef::wrap(child).expect("element node");
                    if SKIPPED.contains(&name) {
                        continue;
                    }
                    if let Some(level) = heading_level(name) {
                        self.flush();
                        let text = collapse_whitespace(&element.text().collect::<String>());
                        if !text.is_empty() {
                            self.blocks.push(RawBlock::Heading { level, text, page: self.page });
                        }
                    } else if name == "table" {
                        self.flush();
                        if let Some(table) = parse_table(element, self.page)? {
                            self.blocks.push(RawBlock::Table(table));
                        }
                    } else if name == "br" {
                        self.inline.push(' ');
                    } else if PARAGRAPH_LIKE.contains(&name) && !has_block_descendant(child) {
                        self.flush();
                        self.inline.push_str(&element.text().collect::<String>());
                        self.flush();
                    } else if CONTAINERS.contains(&name) || PARAGRAPH_LIKE.contains(&name) {
                        self.flush();
                        self.walk(child)?;
                        self.flush();
                    } else {
                        // inline element: keep collecting text, but honor nested blocks
                        if has_block_descendant(child) {
                            self.walk(child)?;
                        } else {
                            self.inline.push_str(&element.text().collect::<String>());
                        }
                    }
                }
                _ => self.walk(child)?,
            }
        }
        Ok(())
    }
}

fn heading_level(name: &str) -> Option<u8> {
    match name {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

fn has_block_descendant(node: NodeRef<'_, Node>) -> bool {
    node.descendants().skip(1).any(|d| match d.value() {
        Node::Element(el) => {
            let n = el.name();
            n == "table" || heading_level(n).is_some() || PARAGRAPH_LIKE.contains(&n) || CONTAINERS.contains(&n)
        }
        Node::Comment(c) => page_sentinel(c).is_some(),
        _ => false,
    })
}

/// Rows of this table only; rows of nested tables are skipped.
fn own_rows<'a>(table: ElementRef<'a>) -> Vec<(ElementRef<'a>, bool)> {
    let mut rows = Vec::new();
    for child in table.children().filter_map(ElementRef::wrap) {
        match child.value().name() {
            "tr" => rows.push((child, false)),
            section @ ("thead" | "tbody" | "tfoot") => {
                for tr in child.children().filter_map(ElementRef::wrap) {
                    if tr.value().name() == "tr" {
                        rows.push((tr, section == "thead"));
                    }
                }
            }
            _ => {}
        }
    }
    rows
}

fn parse_table(table: ElementRef<'_>, page: u32) -> Result<Option<Table>, IngestError> {
    let caption = table
        .children()
        .filter_map(ElementRef::wrap)
        .find(|c| c.value().name() == "caption")
        .map(|c| collapse_whitespace(&c.text().collect::<String>()));

    let mut grid: Vec<(Vec<String>, bool, bool)> = Vec::new();
    for (tr, in_head) in own_rows(table) {
        let mut cells = Vec::new();
        let mut all_th = true;
        for cell in tr.children().filter_map(ElementRef::wrap) {
            let name = cell.value().name();
            if name != "td" && name != "th" {
                continue;
            }
            all_th &= name == "th";
            cells.push(collapse_whitespace(&cell.text().collect::<String>()));
            let span: usize =
                cell.value().attr("colspan").and_then(|s| s.trim().parse().ok()).unwrap_or(1).clamp(1, 64);
            cells.extend(std::iter::repeat_n(String::new(), span - 1));
        }
        if cells.iter().all(String::is_empty) {
            continue;
        }
        grid.push((cells, in_head, all_th));
    }
    if grid.is_empty() {
        return Ok(None);
    }
    let (header, _, _) = grid.remove(0);
    let rows = grid.into_iter().map(|(cells, _, _)| cells).collect();
    Table::new(caption, header, rows, page).map(Some)
}
