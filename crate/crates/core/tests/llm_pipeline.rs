use std::time::Duration;

use ghgrl_core::graph::HeteroGraph;
use ghgrl_core::llm::embed::{build_feature_matrix, Embedder, FeatureMatrix, HashEmbedder};
use ghgrl_core::llm::*;
use ghgrl_core::synthetic::{synthetic_graph, SyntheticConfig};

fn fast_settings() -> LlmSettings {
    LlmSettings {
        retry_delay: Duration::ZERO,
        ..LlmSettings::default()
    }
}

fn small_graph() -> HeteroGraph {
    synthetic_graph(&SyntheticConfig {
        nodes: 40,
        seed: 3,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn mock_schema(graph: &HeteroGraph) -> TypeSchema {
    let sample = sample_attributes(graph, 1000, 0).unwrap();
    generate_type_schema(graph, &sample, 2, 3, &PromptTemplates::default(), &MockLlm, &fast_settings()).unwrap()
}

#[test]
fn mock_schema_has_requested_sizes() {
    let g = small_graph();
    let s = mock_schema(&g);
    assert_eq!(s.format_count(), 2);
    assert_eq!(s.content_count(), 3);
    s.validate().unwrap();
}

#[test]
fn second_run_is_served_from_cache() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let dir = tempfile::tempdir().unwrap();
    let cache = AnnotationCache::open(dir.path()).unwrap();
    let backend = CountingBackend::new(MockLlm);
    let tpl = PromptTemplates::default();
    let (first, stats) = annotate_all(&g, &schema, &tpl, &backend, Some(&cache), &fast_settings(), 4).unwrap();
    assert_eq!(stats.cache_hits, 0);
    assert!(backend.calls() > 0);
    backend.reset();
    let (second, stats) = annotate_all(&g, &schema, &tpl, &backend, Some(&cache), &fast_settings(), 4).unwrap();
    assert_eq!(backend.calls(), 0);
    assert_eq!(stats.cache_hits, g.node_count());
    assert_eq!(first, second);
    let (uncached, _) = annotate_all(&g, &schema, &tpl, &MockLlm, None, &fast_settings(), 4).unwrap();
    assert_eq!(first, uncached);
}

#[test]
fn concurrency_does_not_change_output_files() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let tpl = PromptTemplates::default();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for workers in [1, 8] {
        let (ann, _) = annotate_all(&g, &schema, &tpl, &MockLlm, None, &fast_settings(), workers).unwrap();
        let path = dir.path().join(format!("a{workers}.jsonl"));
        write_annotations(&g, &ann, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn one_malformed_node_falls_back_alone() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let bad = g.attribute(5).to_string();
    let backend = ScriptedBackend::new(move |req: &LlmRequest| match &req.task {
        PromptTask::Annotate { attribute, .. } if *attribute == bad => Ok("no json here".to_string()),
        _ => MockLlm.complete(req),
    });
    let tpl = PromptTemplates::default();
    let (ann, stats) = annotate_all(&g, &schema, &tpl, &backend, None, &fast_settings(), 3).unwrap();
    let (reference, _) = annotate_all(&g, &schema, &tpl, &MockLlm, None, &fast_settings(), 3).unwrap();
    let same_text: Vec<usize> = (0..g.node_count()).filter(|&v| g.attribute(v) == g.attribute(5)).collect();
    assert_eq!(stats.fallbacks, same_text.len());
    for v in 0..g.node_count() {
        if same_text.contains(&v) {
            assert_eq!(ann[v], NodeAnnotation::fallback(g.attribute(v), 0.5));
        } else {
            assert_eq!(ann[v], reference[v]);
        }
    }
}

#[test]
fn fallback_disabled_reports_lowest_failing_node() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let backend = ScriptedBackend::new(|_: &LlmRequest| Err(BackendError::Transport("connection refused".into())));
    let settings = LlmSettings {
        max_retries: 1,
        fallback: FallbackPolicy {
            enabled: false,
            ..FallbackPolicy::default()
        },
        ..fast_settings()
    };
    let err = annotate_all(&g, &schema, &PromptTemplates::default(), &backend, None, &settings, 4).unwrap_err();
    assert_eq!(err.node, 0);
    assert!(err.source.is_backend());
}

#[test]
fn annotations_round_trip_and_stay_valid() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let (ann, _) = annotate_all(&g, &schema, &PromptTemplates::default(), &MockLlm, None, &fast_settings(), 2).unwrap();
    for a in &ann {
        a.validate(&schema).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.jsonl");
    write_annotations(&g, &ann, &path).unwrap();
    assert_eq!(read_annotations(&g, Some(&schema), &path).unwrap(), ann);
}

#[test]
fn feature_matrix_shape_and_row_alignment() {
    let g = small_graph();
    let schema = mock_schema(&g);
    let (ann, _) = annotate_all(&g, &schema, &PromptTemplates::default(), &MockLlm, None, &fast_settings(), 2).unwrap();
    let emb = HashEmbedder::new(8);
    let three = build_feature_matrix(&ann[..3], &emb, 2).unwrap();
    assert_eq!((three.rows(), three.dim()), (3, 8));
    let reversed: Vec<NodeAnnotation> = ann[..3].iter().rev().cloned().collect();
    let rev = build_feature_matrix(&reversed, &emb, 2).unwrap();
    for r in 0..3 {
        assert_eq!(rev.row(r), three.row(2 - r));
    }
    let mut buf = Vec::new();
    three.write_to(&mut buf).unwrap();
    let back = FeatureMatrix::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, three);
}

#[test]
fn mock_pipeline_is_deterministic() {
    let run = || {
        let g = small_graph();
        let schema = mock_schema(&g);
        let (ann, _) =
            annotate_all(&g, &schema, &PromptTemplates::default(), &MockLlm, None, &fast_settings(), 4).unwrap();
        let f = build_feature_matrix(&ann, &HashEmbedder::new(16), 7).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        (schema, ann, buf)
    };
    assert_eq!(run(), run());
}

#[test]
fn embedder_reports_dimension() {
    assert_eq!(HashEmbedder::new(12).dim(), Some(12));
}
