use doc2chart::harness::{run_pipeline, PipelineConfig};
use doc2chart::ingest::{extract_tables, parse_document, window_pages, SourceFormat};
use doc2chart::llm::{Gateway, ProviderConfig, Session};

fn sec_filing(tables: usize) -> String {
    let mut html = String::from("<html><body><h1>Form 10-K</h1>\n");
    for t in 0..tables {
        html.push_str(&format!(
            "<!-- page: {} -->\n<h2>Item {}</h2>\n<p>Discussion of item {}.</p>\n",
            t + 1,
            t + 1,
            t + 1
        ));
        html.push_str(&format!(
            "<table><caption>Schedule {}</caption><tr><th>Line</th><th>2022</th><th>2023</th></tr>",
            t + 1
        ));
        for r in 0..4 {
            html.push_str(&format!("<tr><td>Line {r}</td><td>{}</td><td>{}</td></tr>", 100 * t + r, 100 * t + r + 50));
        }
        html.push_str("</table>\n");
    }
    html.push_str("</body></html>\n");
    html
}

#[test]
fn sec_style_filing_yields_every_table() {
    let doc = parse_document(sec_filing(24).as_bytes(), SourceFormat::Html).unwrap();
    let tables = extract_tables(&doc);
    assert_eq!(tables.len(), 24);
    assert_eq!(doc.page_count, 24);
    for (i, t) in tables.iter().enumerate() {
        assert_eq!(t.caption.as_deref(), Some(format!("Schedule {}", i + 1).as_str()));
        assert_eq!((t.header.len(), t.rows.len(), t.page as usize), (3, 4, i + 1));
    }
}

/// 103 pages; a strongly matching table on page 20 and a weaker one on page 50.
fn long_report() -> String {
    let mut md = String::new();
    for page in 1..=103 {
        if page > 1 {
            md.push_str(&format!("\n<!-- page: {page} -->\n\n"));
        }
        md.push_str(&format!("## Section {page}\n\nNarrative text for page {page}.\n"));
        if page == 20 {
            md.push_str("\nTable: Freight volume by port\n\n| Port | Freight volume |\n| --- | --- |\n| Alder | 410 |\n| Birch | 385 |\n");
        }
        if page == 50 {
            md.push_str("\nTable: Volume by port\n\n| Port | Volume |\n| --- | --- |\n| Cedar | 212 |\n| Dogwood | 198 |\n| Elm | 175 |\n");
        }
    }
    md
}

#[test]
fn window_around_center_page() {
    let doc = parse_document(long_report().as_bytes(), SourceFormat::Markdown).unwrap();
    assert_eq!(doc.page_count, 103);
    let window = window_pages(&doc, 50, 5).unwrap();
    let pages: Vec<u32> = window.blocks.iter().map(|b| b.page).collect();
    assert_eq!((pages.first(), pages.last()), (Some(&45), Some(&55)));
    assert!(pages.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(window.blocks.iter().filter(|b| b.heading_level().is_some()).count(), 11);
    assert!(window_pages(&doc, 104, 5).is_err());
}

#[test]
fn pipeline_only_sees_the_window() {
    let doc = parse_document(long_report().as_bytes(), SourceFormat::Markdown).unwrap();
    let gw = Gateway::from_config(ProviderConfig::rule_based()).unwrap();
    let config = PipelineConfig::default();
    let intent = "freight volume by port";
    let whole = run_pipeline(intent, &doc, None, Session::new(&gw, None), &config).unwrap();
    assert_eq!(whole.data.values[0].x.to_string(), "Alder");
    let windowed = run_pipeline(intent, &doc, Some(50), Session::new(&gw, None), &config).unwrap();
    let xs: Vec<String> = windowed.data.values.iter().map(|p| p.x.to_string()).collect();
    assert_eq!(xs, ["Cedar", "Dogwood", "Elm"]);
}
