//! LLM-driven type generation, per-node annotation and feature construction.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`sample_attributes`] picks a seeded subset of node attributes that fits a
//!    character budget, and [`generate_type_schema`] asks the model for a list
//!    of format types and content types.
//! 2. [`annotate_node`] / [`annotate_all`] ask the model, node by node, for a
//!    description, the two type estimates with confidences, and a reasoning
//!    text. Responses must be JSON; malformed answers are retried and, when the
//!    fallback policy allows it, replaced by a neutral annotation.
//! 3. [`embed`] turns `description ‖ reasoning` into fixed-width vectors.

pub mod backend;
pub mod cache;
pub mod embed;
pub mod templates;

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use backend::{
    BackendError, ChatMessage, CountingBackend, LlmBackend, LlmRequest, MockLlm, OpenAiCompatibleBackend,
    PromptTask, Role, ScriptedBackend, SequenceBackend,
};
pub use cache::AnnotationCache;
pub use templates::PromptTemplates;

use crate::graph::HeteroGraph;
use backend::excerpt;

/// Characters per token used to turn a model's context length into a
/// character budget.
pub const CHARS_PER_TOKEN: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backend failed after {attempts} attempt(s): {source}")]
    Backend {
        attempts: usize,
        #[source]
        source: BackendError,
    },
    #[error("unparseable response after {attempts} attempt(s): {message}; response excerpt: {excerpt:?}")]
    Unparseable {
        attempts: usize,
        message: String,
        excerpt: String,
    },
    #[error("model proposed only {got} distinct {which} names, {wanted} requested")]
    TooFewNames {
        which: &'static str,
        got: usize,
        wanted: usize,
    },
    #[error("unknown {which} type '{name}' (allowed: {allowed:?})")]
    UnknownType {
        which: &'static str,
        name: String,
        allowed: Vec<String>,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LlmError {
    /// Whether the failure came from the backend transport rather than data.
    pub fn is_backend(&self) -> bool {
        matches!(self, LlmError::Backend { .. })
    }
}

/// The generated format-type and content-type name lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSchema {
    pub format_types: Vec<String>,
    pub content_types: Vec<String>,
}

impl TypeSchema {
    pub fn new(format_types: Vec<String>, content_types: Vec<String>) -> Result<Self, LlmError> {
        let s = Self {
            format_types,
            content_types,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        for (which, list) in [("format", &self.format_types), ("content", &self.content_types)] {
            if list.is_empty() {
                return Err(LlmError::Schema(format!("{which} type list is empty")));
            }
            let mut seen = HashSet::new();
            for name in list {
                if name.trim().is_empty() {
                    return Err(LlmError::Schema(format!("empty {which} type name")));
                }
                if !seen.insert(normalize_name(name)) {
                    return Err(LlmError::Schema(format!("duplicate {which} type '{name}'")));
                }
            }
        }
        Ok(())
    }

    pub fn format_count(&self) -> usize {
        self.format_types.len()
    }

    pub fn content_count(&self) -> usize {
        self.content_types.len()
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let s: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

/// A seeded subset of node ids whose attributes fit in a character budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSample {
    pub node_ids: Vec<usize>,
    pub total_char_budget: usize,
}

/// Shuffles node ids with `seed` and greedily keeps every attribute that still
/// fits in the remaining budget. Empty attributes are skipped.
pub fn sample_attributes(graph: &HeteroGraph, char_budget: usize, seed: u64) -> Result<AttributeSample, LlmError> {
    let candidates: Vec<usize> = (0..graph.node_count()).collect();
    sample_attributes_from(graph, &candidates, char_budget, seed)
}

/// Like [`sample_attributes`] but restricted to `candidates` (e.g. training nodes).
pub fn sample_attributes_from(
    graph: &HeteroGraph,
    candidates: &[usize],
    char_budget: usize,
    seed: u64,
) -> Result<AttributeSample, LlmError> {
    let len = |v: usize| graph.attribute(v).chars().count();
    let mut pool: Vec<usize> = candidates.iter().copied().filter(|&v| len(v) > 0).collect();
    let shortest = pool
        .iter()
        .map(|&v| len(v))
        .min()
        .ok_or_else(|| LlmError::InvalidArgument("no non-empty attributes to sample".into()))?;
    if char_budget == 0 || char_budget < shortest {
        return Err(LlmError::InvalidArgument(format!(
            "character budget {char_budget} cannot fit any attribute (shortest is {shortest})"
        )));
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut used = 0usize;
    let mut node_ids = Vec::new();
    for v in pool {
        let l = len(v);
        if used + l <= char_budget {
            used += l;
            node_ids.push(v);
        }
        if char_budget - used < shortest {
            break;
        }
    }
    Ok(AttributeSample {
        node_ids,
        total_char_budget: char_budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackPolicy {
    /// Replace unrecoverable per-node failures with the fallback annotation.
    pub enabled: bool,
    /// Confidence assigned to both type estimates of a fallback annotation.
    pub confidence: f64,
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            confidence: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    /// Extra attempts after the first for transport and parse failures.
    pub max_retries: usize,
    /// Base delay between attempts; doubled after each failure.
    #[serde(with = "duration_ms")]
    pub retry_delay: Duration,
    pub fallback: FallbackPolicy,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            max_retries: 3,
            retry_delay: Duration::ZERO,
            fallback: FallbackPolicy::default(),
        }
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

fn backoff(settings: &LlmSettings, attempt: usize) {
    if !settings.retry_delay.is_zero() {
        std::thread::sleep(settings.retry_delay * (1u32 << attempt.min(6)));
    }
}

/// Pulls the outermost `{...}` object out of a model response, tolerating code
/// fences and surrounding prose.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str::<Value>(&text[start..=end]) {
        Ok(v @ Value::Object(_)) => Some(v),
        _ => None,
    }
}

fn dedup_names(values: &[Value]) -> Vec<String> {
    let mut seen = HashSet::new();
    values
        .iter()
        .filter_map(Value::as_str)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty() && seen.insert(normalize_name(s)))
        .collect()
}

/// Asks the backend for `m_fmt` format types and `m_cont` content types based
/// on the sampled attributes.
pub fn generate_type_schema(
    graph: &HeteroGraph,
    sample: &AttributeSample,
    m_fmt: usize,
    m_cont: usize,
    templates: &PromptTemplates,
    backend: &dyn LlmBackend,
    settings: &LlmSettings,
) -> Result<TypeSchema, LlmError> {
    if m_fmt == 0 || m_cont == 0 {
        return Err(LlmError::InvalidArgument("m_fmt and m_cont must be at least 1".into()));
    }
    templates.validate()?;
    let samples: Vec<&str> = sample.node_ids.iter().map(|&v| graph.attribute(v)).collect();
    let prompt = templates.render_generation(&samples, m_fmt, m_cont);
    let task = PromptTask::GenerateTypes {
        samples: samples.iter().map(|s| s.to_string()).collect(),
        m_fmt,
        m_cont,
    };

    let attempts = settings.max_retries + 1;
    let mut last_err = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            backoff(settings, attempt - 1);
        }
        let request = LlmRequest {
            messages: vec![ChatMessage::system(templates::SYSTEM_PROMPT), ChatMessage::user(&prompt)],
            task: task.clone(),
            attempt,
        };
        let text = match backend.complete(&request) {
            Ok(t) => t,
            Err(source) => {
                last_err = Some(LlmError::Backend {
                    attempts: attempt + 1,
                    source,
                });
                continue;
            }
        };
        let lists = extract_json_object(&text).and_then(|obj| {
            let f = obj.get("format_types")?.as_array()?.clone();
            let c = obj.get("content_types")?.as_array()?.clone();
            Some((f, c))
        });
        let Some((fmt, cont)) = lists else {
            last_err = Some(LlmError::Unparseable {
                attempts: attempt + 1,
                message: "expected a JSON object with format_types and content_types arrays".into(),
                excerpt: excerpt(&text, 200),
            });
            continue;
        };
        let mut fmt = dedup_names(&fmt);
        let mut cont = dedup_names(&cont);
        if fmt.len() < m_fmt {
            last_err = Some(LlmError::TooFewNames {
                which: "format",
                got: fmt.len(),
                wanted: m_fmt,
            });
            continue;
        }
        if cont.len() < m_cont {
            last_err = Some(LlmError::TooFewNames {
                which: "content",
                got: cont.len(),
                wanted: m_cont,
            });
            continue;
        }
        fmt.truncate(m_fmt);
        cont.truncate(m_cont);
        return TypeSchema::new(fmt, cont);
    }
    Err(last_err.expect("at least one attempt"))
}

/// Per-node output of the processing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAnnotation {
    pub format_index: usize,
    pub format_confidence: f64,
    pub content_index: usize,
    pub content_confidence: f64,
    pub description: String,
    pub reasoning: String,
}

pub const EMPTY_ATTRIBUTE_DESCRIPTION: &str = "[empty attribute]";
pub const FALLBACK_REASONING: &str = "[fallback]";

impl NodeAnnotation {
    /// Neutral annotation used for empty attributes and unrecoverable failures.
    /// Non-empty attributes keep their raw text as the description.
    pub fn fallback(attribute: &str, confidence: f64) -> Self {
        let trimmed = attribute.trim();
        Self {
            format_index: 0,
            format_confidence: confidence.clamp(0.0, 1.0),
            content_index: 0,
            content_confidence: confidence.clamp(0.0, 1.0),
            description: if trimmed.is_empty() {
                EMPTY_ATTRIBUTE_DESCRIPTION.to_string()
            } else {
                trimmed.to_string()
            },
            reasoning: FALLBACK_REASONING.to_string(),
        }
    }

    pub fn validate(&self, schema: &TypeSchema) -> Result<(), LlmError> {
        if self.format_index >= schema.format_count() || self.content_index >= schema.content_count() {
            return Err(LlmError::Schema(format!(
                "annotation indices ({}, {}) out of range for schema ({}, {})",
                self.format_index,
                self.content_index,
                schema.format_count(),
                schema.content_count()
            )));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.format_confidence) || !unit.contains(&self.content_confidence) {
            return Err(LlmError::Schema("confidence outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Text handed to the sentence embedder.
    pub fn embedding_text(&self) -> String {
        format!("{}{}{}", self.description, embed::TEXT_SEPARATOR, self.reasoning)
    }
}

enum ParseFailure {
    Malformed(String),
    Unknown(LlmError),
}

fn parse_confidence(v: Option<&Value>, field: &str) -> Result<f64, ParseFailure> {
    let x = match v {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().trim_end_matches('%').parse::<f64>().ok().map(|x| {
            if s.trim().ends_with('%') {
                x / 100.0
            } else {
                x
            }
        }),
        _ => None,
    };
    match x {
        Some(x) if x.is_finite() => Ok(x.clamp(0.0, 1.0)),
        _ => Err(ParseFailure::Malformed(format!("field '{field}' is not a finite number"))),
    }
}

fn resolve_type(v: Option<&Value>, names: &[String], which: &'static str) -> Result<usize, ParseFailure> {
    let name = v
        .and_then(Value::as_str)
        .ok_or_else(|| ParseFailure::Malformed(format!("field '{which}_type' is not a string")))?;
    let wanted = normalize_name(name);
    names
        .iter()
        .position(|n| normalize_name(n) == wanted)
        .ok_or_else(|| {
            ParseFailure::Unknown(LlmError::UnknownType {
                which,
                name: name.to_string(),
                allowed: names.to_vec(),
            })
        })
}

fn non_empty_string(v: Option<&Value>, field: &str) -> Result<String, ParseFailure> {
    match v.and_then(Value::as_str).map(str::trim) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(ParseFailure::Malformed(format!("field '{field}' missing or empty"))),
    }
}

fn parse_annotation(text: &str, schema: &TypeSchema) -> Result<NodeAnnotation, ParseFailure> {
    let obj = extract_json_object(text).ok_or_else(|| ParseFailure::Malformed("no JSON object in response".into()))?;
    Ok(NodeAnnotation {
        description: non_empty_string(obj.get("description"), "description")?,
        format_index: resolve_type(obj.get("format_type"), &schema.format_types, "format")?,
        format_confidence: parse_confidence(obj.get("format_confidence"), "format_confidence")?,
        content_index: resolve_type(obj.get("content_type"), &schema.content_types, "content")?,
        content_confidence: parse_confidence(obj.get("content_confidence"), "content_confidence")?,
        reasoning: non_empty_string(obj.get("reasoning"), "reasoning")?,
    })
}

fn repair_message(schema: &TypeSchema) -> String {
    format!(
        "Your previous answer used a type name that is not allowed. Choose format_type from exactly \
         these names: {}. Choose content_type from exactly these names: {}. Answer again with the \
         same JSON object only.",
        serde_json::to_string(&schema.format_types).expect("serializes"),
        serde_json::to_string(&schema.content_types).expect("serializes"),
    )
}

/// Annotates one attribute without fallback handling.
fn annotate_strict(
    attribute: &str,
    schema: &TypeSchema,
    templates: &PromptTemplates,
    backend: &dyn LlmBackend,
    settings: &LlmSettings,
) -> Result<NodeAnnotation, LlmError> {
    let prompt = templates.render_processing(attribute, &schema.format_types, &schema.content_types);
    let task = PromptTask::Annotate {
        attribute: attribute.to_string(),
        format_types: schema.format_types.clone(),
        content_types: schema.content_types.clone(),
    };
    let mut messages = vec![ChatMessage::system(templates::SYSTEM_PROMPT), ChatMessage::user(prompt)];
    let mut repaired = false;
    let mut last_err = None;
    let mut attempt = 0;
    // The single repair round does not consume a retry.
    while attempt <= settings.max_retries {
        let request = LlmRequest {
            messages: messages.clone(),
            task: task.clone(),
            attempt,
        };
        let result = backend.complete(&request);
        let text = match result {
            Ok(t) => t,
            Err(source) => {
                last_err = Some(LlmError::Backend {
                    attempts: attempt + 1,
                    source,
                });
                backoff(settings, attempt);
                attempt += 1;
                continue;
            }
        };
        match parse_annotation(&text, schema) {
            Ok(a) => return Ok(a),
            Err(ParseFailure::Malformed(message)) => {
                last_err = Some(LlmError::Unparseable {
                    attempts: attempt + 1,
                    message,
                    excerpt: excerpt(&text, 200),
                });
                attempt += 1;
            }
            Err(ParseFailure::Unknown(err)) => {
                if repaired {
                    return Err(err);
                }
                repaired = true;
                messages.push(ChatMessage {
                    role: Role::Assistant,
                    content: text,
                });
                messages.push(ChatMessage::user(repair_message(schema)));
                last_err = Some(err);
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Annotates one attribute. Empty attributes short-circuit to the fallback
/// annotation without calling the backend; other failures fall back only when
/// the policy is enabled.
pub fn annotate_node(
    attribute: &str,
    schema: &TypeSchema,
    templates: &PromptTemplates,
    backend: &dyn LlmBackend,
    settings: &LlmSettings,
) -> Result<NodeAnnotation, LlmError> {
    if attribute.trim().is_empty() {
        return Ok(NodeAnnotation::fallback(attribute, settings.fallback.confidence));
    }
    match annotate_strict(attribute, schema, templates, backend, settings) {
        Ok(a) => Ok(a),
        Err(e) if settings.fallback.enabled => {
            log::warn!("annotation fell back: {e}");
            Ok(NodeAnnotation::fallback(attribute, settings.fallback.confidence))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("node {node} (id {original_id}): {source}")]
pub struct AnnotateAllError {
    pub node: usize,
    pub original_id: i64,
    #[source]
    pub source: LlmError,
}

/// Outcome counters for one [`annotate_all`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotateStats {
    pub cache_hits: usize,
    pub annotated: usize,
    pub fallbacks: usize,
}

/// Annotates every node with up to `max_in_flight` concurrent backend
/// requests. Successful backend answers are cached by content key; results are
/// returned in node-id order. On failure the error for the lowest node id is
/// returned, and every node that succeeded stays cached.
pub fn annotate_all(
    graph: &HeteroGraph,
    schema: &TypeSchema,
    templates: &PromptTemplates,
    backend: &dyn LlmBackend,
    cache: Option<&AnnotationCache>,
    settings: &LlmSettings,
    max_in_flight: usize,
) -> Result<(Vec<NodeAnnotation>, AnnotateStats), AnnotateAllError> {
    schema.validate().map_err(|source| AnnotateAllError {
        node: 0,
        original_id: graph.original_ids().first().copied().unwrap_or(0),
        source,
    })?;
    templates.validate().map_err(|source| AnnotateAllError {
        node: 0,
        original_id: graph.original_ids().first().copied().unwrap_or(0),
        source,
    })?;
    let n = graph.node_count();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<NodeAnnotation, LlmError>>>> = Mutex::new((0..n).map(|_| None).collect());
    let stats = Mutex::new(AnnotateStats::default());

    let worker = || loop {
        let v = next.fetch_add(1, Ordering::SeqCst);
        if v >= n {
            break;
        }
        let attribute = graph.attribute(v);
        let outcome = annotate_cached(attribute, schema, templates, backend, cache, settings);
        let result = outcome.map(|(a, kind)| {
            let mut s = stats.lock().expect("stats lock");
            match kind {
                Outcome::Cached => s.cache_hits += 1,
                Outcome::Fresh => s.annotated += 1,
                Outcome::Fallback => s.fallbacks += 1,
            }
            a
        });
        results.lock().expect("results lock")[v] = Some(result);
    };

    let workers = max_in_flight.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(worker);
        }
    });

    let mut out = Vec::with_capacity(n);
    for (v, r) in results.into_inner().expect("results lock").into_iter().enumerate() {
        match r.expect("every node processed") {
            Ok(a) => out.push(a),
            Err(source) => {
                return Err(AnnotateAllError {
                    node: v,
                    original_id: graph.original_ids()[v],
                    source,
                })
            }
        }
    }
    Ok((out, stats.into_inner().expect("stats lock")))
}

enum Outcome {
    Cached,
    Fresh,
    Fallback,
}

fn annotate_cached(
    attribute: &str,
    schema: &TypeSchema,
    templates: &PromptTemplates,
    backend: &dyn LlmBackend,
    cache: Option<&AnnotationCache>,
    settings: &LlmSettings,
) -> Result<(NodeAnnotation, Outcome), LlmError> {
    if attribute.trim().is_empty() {
        return Ok((NodeAnnotation::fallback(attribute, settings.fallback.confidence), Outcome::Fallback));
    }
    let key = cache.map(|_| AnnotationCache::key(templates, schema, attribute));
    if let (Some(cache), Some(key)) = (cache, &key) {
        if let Some(hit) = cache.get(key).filter(|a| a.validate(schema).is_ok()) {
            return Ok((hit, Outcome::Cached));
        }
    }
    match annotate_strict(attribute, schema, templates, backend, settings) {
        Ok(a) => {
            if let (Some(cache), Some(key)) = (cache, &key) {
                cache.put(key, &a)?;
            }
            Ok((a, Outcome::Fresh))
        }
        // Fallbacks are not cached: a later run may succeed.
        Err(e) if settings.fallback.enabled => {
            log::warn!("annotation fell back: {e}");
            Ok((NodeAnnotation::fallback(attribute, settings.fallback.confidence), Outcome::Fallback))
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    id: i64,
    #[serde(flatten)]
    annotation: NodeAnnotation,
}

/// Writes annotations as JSONL, one record per node with its original id.
pub fn write_annotations(graph: &HeteroGraph, annotations: &[NodeAnnotation], path: &Path) -> Result<(), LlmError> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (id, a) in graph.original_ids().iter().zip(annotations) {
        let rec = AnnotationRecord {
            id: *id,
            annotation: a.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an annotations JSONL file, ordering records by the graph's node order.
pub fn read_annotations(graph: &HeteroGraph, schema: Option<&TypeSchema>, path: &Path) -> Result<Vec<NodeAnnotation>, LlmError> {
    let index: std::collections::HashMap<i64, usize> =
        graph.original_ids().iter().enumerate().map(|(v, &id)| (id, v)).collect();
    let text = std::fs::read_to_string(path)?;
    let mut out: Vec<Option<NodeAnnotation>> = vec![None; graph.node_count()];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(line)
            .map_err(|e| LlmError::Schema(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let v = *index
            .get(&rec.id)
            .ok_or_else(|| LlmError::Schema(format!("{}:{}: unknown node id {}", path.display(), i + 1, rec.id)))?;
        if let Some(schema) = schema {
            rec.annotation.validate(schema)?;
        }
        out[v] = Some(rec.annotation);
    }
    out.into_iter()
        .enumerate()
        .map(|(v, a)| a.ok_or_else(|| LlmError::Schema(format!("missing annotation for node id {}", graph.original_ids()[v]))))
        .collect()
}
