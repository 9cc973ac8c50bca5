use serde::{Deserialize, Serialize};

use super::LlmError;

pub const GENERATION_PLACEHOLDERS: [&str; 3] = ["{samples}", "{m_fmt}", "{m_cont}"];
pub const PROCESSING_PLACEHOLDERS: [&str; 3] = ["{attribute}", "{format_types}", "{content_types}"];

pub const SYSTEM_PROMPT: &str = "You are a careful data analyst who inspects node attributes of a graph \
and answers strictly with a single JSON object, without any surrounding prose.";

const DEFAULT_GENERATION: &str = r#"Below are attribute values of randomly chosen nodes from one graph. The nodes may describe different kinds of entities and the values may be written in very different styles.

Samples (one per line):
{samples}

Propose exactly {m_fmt} FORMAT types, which describe how a value is written (for example "noun", "numeric code" or "detailed description"), and exactly {m_cont} CONTENT types, which describe what a value is about (for example "paper concerning deep learning"). Names must be short, distinct and meaningful.

Answer with JSON of the form {"format_types": ["..."], "content_types": ["..."]}."#;

const DEFAULT_PROCESSING: &str = r#"Analyse the following node attribute.

Attribute:
{attribute}

Allowed format types: {format_types}
Allowed content types: {content_types}

Describe the attribute in as much detail as you can, pick exactly one format type and one content type from the allowed lists (copy the names verbatim), give a confidence between 0 and 1 for each choice, and explain the reasons for your choices.

Answer with JSON of the form {"description": "...", "format_type": "...", "format_confidence": 0.0, "content_type": "...", "content_confidence": 0.0, "reasoning": "..."}."#;

/// Prompt templates for type generation and per-node processing.
///
/// `version` is mixed into cache keys, so bump it whenever the wording changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub generation_template: String,
    pub processing_template: String,
    pub version: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            generation_template: DEFAULT_GENERATION.to_string(),
            processing_template: DEFAULT_PROCESSING.to_string(),
            version: "ghgrl-templates-v1".to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn validate(&self) -> Result<(), LlmError> {
        check_placeholders("generation_template", &self.generation_template, &GENERATION_PLACEHOLDERS)?;
        check_placeholders("processing_template", &self.processing_template, &PROCESSING_PLACEHOLDERS)?;
        if self.version.is_empty() {
            return Err(LlmError::Template("version must not be empty".into()));
        }
        Ok(())
    }

    pub fn render_generation(&self, samples: &[&str], m_fmt: usize, m_cont: usize) -> String {
        let samples = samples
            .iter()
            .map(|s| format!("- {}", s.replace('\n', " ")))
            .collect::<Vec<_>>()
            .join("\n");
        render(
            &self.generation_template,
            &[
                ("{samples}", samples.as_str()),
                ("{m_fmt}", &m_fmt.to_string()),
                ("{m_cont}", &m_cont.to_string()),
            ],
        )
    }

    pub fn render_processing(&self, attribute: &str, format_types: &[String], content_types: &[String]) -> String {
        render(
            &self.processing_template,
            &[
                ("{attribute}", attribute),
                ("{format_types}", &quoted_list(format_types)),
                ("{content_types}", &quoted_list(content_types)),
            ],
        )
    }
}

fn quoted_list(names: &[String]) -> String {
    serde_json::to_string(names).expect("string list serializes")
}

fn check_placeholders(which: &str, template: &str, placeholders: &[&str]) -> Result<(), LlmError> {
    for p in placeholders {
        let n = template.matches(p).count();
        if n != 1 {
            return Err(LlmError::Template(format!(
                "{which} must contain {p} exactly once (found {n})"
            )));
        }
    }
    Ok(())
}

/// Single-pass substitution: text inserted for one placeholder is never
/// re-scanned, so attribute values containing `{...}` are inserted verbatim.
fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    'outer: while !rest.is_empty() {
        if rest.starts_with('{') {
            for (key, value) in values {
                if let Some(tail) = rest.strip_prefix(key) {
                    out.push_str(value);
                    rest = tail;
                    continue 'outer;
                }
            }
        }
        let ch = rest.chars().next().expect("non-empty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}
