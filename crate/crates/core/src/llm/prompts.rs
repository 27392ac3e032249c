//! Prompt templates and slot substitution.
//!
//! Placeholders are `{name}` where `name` is one of the role's slots. Other
//! braces (JSON examples) pass through untouched.

use std::collections::BTreeMap;

use super::{LlmError, Prompt, RoleTag};

/// Output schema handed to the `output_format` slot.
pub const CHART_SCHEMA: &str = r#"{
  "values": [
    {
      "x": "[string or number]",
      "y": "[number or string representing number]",
      "category": "[string, optional]"
    }
  ],
  "x_axis_label": "[string]",
  "y_axis_label": "[string]",
  "title": "[string]"
}"#;

const EXTRACT: &str = r#"Task:
Extract structured chart data from the provided content based on the user's intent, adhering to the specified JSON format.

Input:
- User Intent: {intent}
- Content: {content}
- Optional Feedback (if available): {optional_feedback_section}
- Output Format Schema: {output_format}

Instructions:
1. Carefully read the User Intent.
2. Internal Thought Process (Mentally follow these steps):
   - Decompose: Break down the intent into specific data points, labels, categories, and title.
   - Locate: Scan the content for exact data matching the above.
   - Extract & Structure: Collect and format data strictly according to the schema.
3. Extract relevant data points: (x, y, category), axis labels, and chart title.
4. If feedback is provided: Focus on fixing issues like missing elements or ignored sections. Adjust your decomposition and extraction accordingly.
5. Output must follow the JSON schema exactly. Keep numeric formats consistent.
6. Output only the JSON object. Do not include explanations or markdown like ```json.

Example Output Format:
{
  "values": [
    {
      "x": "[string or number]",
      "y": "[number or string representing number]",
      "category": "[string, optional]"
    }
  ],
  "x_axis_label": "[string]",
  "y_axis_label": "[string]",
  "title": "[string]"
}"#;

const VALIDATE: &str = r#"Task: Validate the extracted chart data against the source content and user intent. Determine if re-extraction is necessary or if only minor refinements are needed.

Input:
- Original Intent: {intent}
- Source Content: {content}
- Extracted Chart Data: {extracted_data} // JSON object from the extraction step
- Expected Schema: {output_format}

Validation Checks to Perform:
1. Intent Fulfillment & Source Coverage: Does the extracted_data capture the key information requested in the intent that is present in the Source Content? Are there critical omissions?
2. Data Accuracy: Are the values (x, y, category) and labels/title in extracted_data accurately reflecting the Source Content?

Response Format:
{
  "needs_re_extraction": "[true/false]",
  "feedback_for_re_extraction": "[string]",
  "suggested_corrections_for_refinement": [
    {
      "field_path": "[JSON path, e.g., values[0].y or title]",
      "suggestion": "[Brief description of the fix, e.g., 'Convert to number']",
      "suggested_value": "[Optional: The corrected value if easily determined]"
    }
  ],
  "confidence_score": "[0-10 score reflecting confidence in the data]"
}

Focus on the primary decision: re-extract or refine/accept. Keep feedback concise.
Output only a valid JSON and no other text. Do not add prefix like ```json..."#;

const REFINE: &str = r#"Task: Apply the suggested minor corrections to the extracted chart data.

Input:
- Original Intent: {intent}
- Source Content: {content}
- Extracted Data (Pre-Refinement): {extracted_data}
- Suggested Corrections: {suggested_corrections}
- Expected Schema: {output_format}

Instructions:
1. Iterate through the Suggested Corrections.
2. Apply each correction to the corresponding field_path in the Extracted Data. Use suggested_value if provided, otherwise interpret the suggestion.
3. Ensure the final refined_data strictly follows the Expected Schema provided in the input.
4. Do not add new data or make changes beyond the Suggested Corrections.

Response Format:
{
  "refined_data": { /* The data structure with corrections applied, adhering to the Expected Schema */ },
  "refinement_summary": {
    "changes_applied_count": "[number]", // Count of corrections successfully applied
    "issues_applying_corrections": ["[List any suggestions that could not be applied and why]"]
  }
}

Output only a valid JSON and no other text. Do not add prefix like ```json...```"#;

const CHART_TYPE: &str = r#"Task:
Evaluate and recommend statistical chart visualizations based on the intent and the final, validated (and potentially refined) data.

Input:
- Intent: {intent}
- Final Chart Data: {data}

Heuristics Framework:
Consider these guidelines:
- Time-based: <=3 points -> Bar; 4+ points -> Line; Irregular spacing -> Grouped Bar
- Comparison: Few categories (2-5) -> Bar; Many (6+) -> Stacked Bar; Proportions -> Pie (<=6 segments)
- Intent: Magnitude -> Bar; Trend -> Line; Composition -> Pie/Stacked Bar
- Anti-Patterns: Avoid cluttered pies and sparse lines. Prioritize readability.

Requirements:
1. Analyze the structure and nature of the Final Chart Data (types of x/y values, number of points/categories).
2. Relate the data structure to the Intent.
3. Evaluate potential chart types based on the heuristics.
4. Recommend the most appropriate chart type with justification.

Response Format:
{
    "recommended_chart_type": "[Best-suited chart type]",
    "justification": "[Reason based on data structure, intent, and heuristics]",
    "confidence_score": "[0-10 score indicating recommendation strength]"
}
Output only a valid JSON and no other text. Do not add a prefix like ```json."#;

const RETRIEVE: &str = r#"Task:
Select the document segments that contain the information needed to build a chart for the user's intent.

User Intent: {intent}

Segments:
{segments}

Response Format:
{"selected_segments": [segment numbers, most relevant first]}
Output only a valid JSON and no other text."#;

const DECOMPOSE: &str = r#"Task:
Break the user's intent down into the (concept, attribute) pairs a reader would look up in a document to answer it.

User Intent: {intent}

Write one pair per line in the form <sub_c>concept:attribute</sub_c>. Output only the pairs."#;

const SINGLE_STEP: &str = r#"Task:
Create a chart for the user's intent from the document below.

User Intent: {intent}

Document:
{content}

Chart Data Schema: {output_format}

Response Format:
{"chart_data": <object following the Chart Data Schema>, "chart_type": "[a suitable chart type]"}
Output only a valid JSON and no other text."#;

/// Template text and slot names for a role.
pub fn template(role: RoleTag) -> (&'static str, &'static [&'static str]) {
    match role {
        RoleTag::Extract => (EXTRACT, &["intent", "content", "optional_feedback_section", "output_format"]),
        RoleTag::Validate => (VALIDATE, &["intent", "content", "extracted_data", "output_format"]),
        RoleTag::Refine => (REFINE, &["intent", "content", "extracted_data", "suggested_corrections", "output_format"]),
        RoleTag::ChartType => (CHART_TYPE, &["intent", "data"]),
        RoleTag::Retrieve => (RETRIEVE, &["intent", "segments"]),
        RoleTag::Decompose => (DECOMPOSE, &["intent"]),
        RoleTag::SingleStep => (SINGLE_STEP, &["intent", "content", "output_format"]),
    }
}

const OPTIONAL_SLOTS: &[&str] = &["optional_feedback_section"];

/// Substitute `slots` into the role's template in a single left-to-right pass,
/// so slot values containing `{...}` are never re-expanded.
pub fn render_prompt(role: RoleTag, slots: &BTreeMap<String, String>) -> Result<Prompt, LlmError> {
    let (template, names) = template(role);
    for name in names {
        if !slots.contains_key(*name) && !OPTIONAL_SLOTS.contains(name) {
            return Err(LlmError::MissingSlot((*name).to_string()));
        }
    }
    let mut text = String::with_capacity(template.len() + slots.values().map(String::len).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let placeholder = after.find('}').map(|close| &after[..close]).filter(|name| names.contains(name));
        match placeholder {
            Some(name) => {
                text.push_str(slots.get(name).map(String::as_str).unwrap_or(""));
                rest = &after[name.len() + 1..];
            }
            None => {
                text.push('{');
                rest = after;
            }
        }
    }
    text.push_str(rest);
    let kept = slots.iter().filter(|(k, _)| names.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
    Ok(Prompt { role_tag: role, text, sample_id: None, slots: kept })
}

/// Build a slot map from pairs.
pub fn slots<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_without_feedback() {
        let p = render_prompt(
            RoleTag::Extract,
            &slots([("intent", "oil prices"), ("content", "TEXT"), ("output_format", "SCHEMA")]),
        )
        .unwrap();
        assert!(p.text.contains("- Optional Feedback (if available): \n"));
        assert!(p.text.contains("- User Intent: oil prices\n"));
        assert!(!p.text.contains("{intent}"));
        assert!(p.text.contains("\"values\": ["));
    }

    #[test]
    fn missing_slot() {
        let err = render_prompt(RoleTag::Validate, &slots([("intent", "i")])).unwrap_err();
        assert_eq!(err, LlmError::MissingSlot("content".into()));
    }

    #[test]
    fn validate_and_refine_text() {
        let v = render_prompt(
            RoleTag::Validate,
            &slots([("intent", "i"), ("content", "c"), ("extracted_data", "{}"), ("output_format", "s")]),
        )
        .unwrap();
        assert!(v.text.contains("needs_re_extraction"));
        let r = render_prompt(
            RoleTag::Refine,
            &slots([
                ("intent", "i"),
                ("content", "c"),
                ("extracted_data", "{}"),
                ("suggested_corrections", "[]"),
                ("output_format", "s"),
            ]),
        )
        .unwrap();
        assert!(r.text.contains("Apply the suggested minor corrections"));
    }

    #[test]
    fn slot_values_are_not_reexpanded() {
        let p = render_prompt(RoleTag::Decompose, &slots([("intent", "{intent} twice")])).unwrap();
        assert_eq!(p.text.matches("{intent} twice").count(), 1);
    }

    #[test]
    fn every_placeholder_belongs_to_role() {
        for role in RoleTag::ALL {
            let (template, names) = template(role);
            for name in names {
                assert_eq!(template.matches(&format!("{{{name}}}")).count(), 1, "{role} {name}");
            }
        }
    }
}
