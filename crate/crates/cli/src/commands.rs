use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::time::Duration;

use ghgrl_core::analysis::{
    linear_dependence_check, oversmoothing_profile, simplified_iterate, write_gnuplot_data, write_merged_csv,
    write_profile_csv, PagnnRunner, SimplifiedModelSpec, SimplifiedWeights,
};
use ghgrl_core::corruption::{corrupt, load_pool, CorruptionSpec};
use ghgrl_core::graph::{load_dataset, write_edges, write_nodes, HeteroGraph, Split};
use ghgrl_core::llm::cache::ENV_CACHE_DIR;
use ghgrl_core::llm::embed::{build_feature_matrix, Embedder, FeatureMatrix, HashEmbedder, RemoteEmbedder};
use ghgrl_core::llm::{
    annotate_all, generate_type_schema, read_annotations, sample_attributes, write_annotations, AnnotationCache,
    FallbackPolicy, LlmBackend, LlmSettings, MockLlm, NodeAnnotation, OpenAiCompatibleBackend, PromptTemplates,
    TypeSchema,
};
use ghgrl_core::pagnn::{init_params, pagnn_forward, read_checkpoint, write_checkpoint, PagnnConfig, TypedAdjacency};
use ghgrl_core::train::{evaluate, train, write_history, TrainConfig};
use serde_json::json;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

fn load_graph(g: &GraphArgs, m: &mut ManifestBuilder) -> Result<HeteroGraph, CliError> {
    m.input(&g.nodes)?;
    m.input(&g.edges)?;
    Ok(load_dataset(&g.nodes, &g.edges)?)
}

fn llm_backend(a: &LlmArgs) -> Result<Box<dyn LlmBackend>, CliError> {
    Ok(match a.backend {
        BackendKind::Mock => Box::new(MockLlm),
        BackendKind::Remote => Box::new(
            OpenAiCompatibleBackend::from_env(a.model.clone(), Duration::from_secs(a.timeout))
                .map_err(|e| CliError::Backend(e.to_string()))?,
        ),
    })
}

fn llm_settings(a: &LlmArgs) -> LlmSettings {
    LlmSettings {
        max_retries: a.max_retries,
        // Mock responses are deterministic, so waiting between attempts buys nothing.
        retry_delay: match a.backend {
            BackendKind::Mock => Duration::ZERO,
            BackendKind::Remote => Duration::from_millis(a.retry_delay_ms),
        },
        fallback: FallbackPolicy::default(),
    }
}

pub fn gen_types(a: &GenTypesArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("gen-types", a);
    m.seed("seed", a.seed);
    let graph = load_graph(&a.graph, &mut m)?;
    let backend = llm_backend(&a.llm)?;
    let sample = sample_attributes(&graph, a.char_budget, a.seed)?;
    let schema = generate_type_schema(
        &graph,
        &sample,
        a.m_fmt,
        a.m_cont,
        &PromptTemplates::default(),
        &backend,
        &llm_settings(&a.llm),
    )?;
    schema.save(&a.out)?;
    m.finish(&[&a.out])?;
    eprintln!(
        "{} format types, {} content types -> {}",
        schema.format_count(),
        schema.content_count(),
        a.out.display()
    );
    Ok(())
}

pub fn annotate(a: &AnnotateArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("annotate", a);
    let graph = load_graph(&a.graph, &mut m)?;
    m.schema(&a.schema)?;
    let schema = TypeSchema::load(&a.schema)?;
    let backend = llm_backend(&a.llm)?;
    let mut settings = llm_settings(&a.llm);
    settings.fallback = FallbackPolicy {
        enabled: !a.no_fallback,
        confidence: a.fallback_confidence,
    };
    let cache_dir = a
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(Into::into));
    let cache = cache_dir.map(AnnotationCache::open).transpose()?;
    let (annotations, stats) = annotate_all(
        &graph,
        &schema,
        &PromptTemplates::default(),
        &backend,
        cache.as_ref(),
        &settings,
        a.max_in_flight,
    )?;
    write_annotations(&graph, &annotations, &a.out)?;
    m.finish(&[&a.out])?;
    eprintln!(
        "annotated {} nodes ({} from cache, {} fallbacks) -> {}",
        graph.node_count(),
        stats.cache_hits,
        stats.fallbacks,
        a.out.display()
    );
    Ok(())
}

pub fn embed(a: &EmbedArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("embed", a);
    let graph = load_graph(&a.graph, &mut m)?;
    m.input(&a.annotations)?;
    let annotations = read_annotations(&graph, None, &a.annotations)?;
    let embedder: Box<dyn Embedder> = match a.backend {
        BackendKind::Mock => Box::new(HashEmbedder::new(a.dim)),
        BackendKind::Remote => Box::new(RemoteEmbedder::from_env(Duration::from_secs(a.timeout))?),
    };
    let features = build_feature_matrix(&annotations, embedder.as_ref(), a.batch)?;
    features.save(&a.out)?;
    m.finish(&[&a.out])?;
    eprintln!("{} x {} features -> {}", features.rows(), features.dim(), a.out.display());
    Ok(())
}

struct Inputs {
    graph: HeteroGraph,
    schema: TypeSchema,
    annotations: Vec<NodeAnnotation>,
    features: FeatureMatrix,
}

fn load_inputs(a: &InputArgs, seed: u64, m: &mut ManifestBuilder) -> Result<Inputs, CliError> {
    let mut graph = load_graph(&a.graph, m)?;
    m.schema(&a.schema)?;
    m.input(&a.annotations)?;
    m.input(&a.features)?;
    m.seed("split_seed", seed);
    if graph.splits().is_none() {
        let splits = graph.stratified_split(a.split.train_ratio, a.split.val_ratio, seed)?;
        graph = graph.with_splits(splits)?;
    }
    let schema = TypeSchema::load(&a.schema)?;
    let annotations = read_annotations(&graph, Some(&schema), &a.annotations)?;
    let features = FeatureMatrix::load(&a.features)?;
    if features.rows() != graph.node_count() {
        return Err(CliError::Data(format!(
            "feature file has {} rows but the graph has {} nodes",
            features.rows(),
            graph.node_count()
        )));
    }
    Ok(Inputs {
        graph,
        schema,
        annotations,
        features,
    })
}

fn model_config(a: &ModelArgs, inputs: &Inputs, seed: u64) -> Result<PagnnConfig, CliError> {
    let config = PagnnConfig {
        layers: a.layers,
        format_layers: a.format_layers,
        content_layers: a.content_layers,
        input_dim: inputs.features.dim(),
        hidden_dim: a.hidden,
        alpha: a.alpha,
        num_format_types: inputs.schema.format_count(),
        num_content_types: inputs.schema.content_count(),
        num_classes: inputs.graph.num_classes(),
        activation: a.activation.parse().map_err(CliError::Usage)?,
        use_input_projection: !a.no_input_projection,
        confidence_floor: a.confidence_floor,
        seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

pub fn train_cmd(a: &TrainArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("train", a);
    m.seed("seed", a.seed);
    let inputs = load_inputs(&a.input, a.seed, &mut m)?;
    let config = model_config(&a.model, &inputs, a.seed)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        early_stop_patience: a.patience,
        seed: a.seed,
        ..TrainConfig::default()
    };
    tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = train(&inputs.graph, &inputs.annotations, &inputs.features, &config, &tc)?;
    let mut w = BufWriter::new(File::create(&a.checkpoint)?);
    write_checkpoint(&mut w, &config, &outcome.params)?;
    drop(w);
    write_history(&outcome.history, &a.history)?;
    m.finish(&[&a.checkpoint, &a.history])?;
    eprintln!(
        "trained {} epochs, best epoch {} -> {}",
        outcome.history.len(),
        outcome.best_epoch,
        a.checkpoint.display()
    );
    Ok(())
}

pub fn eval_cmd(a: &EvalArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("eval", a);
    let split: Split = a.split.parse().map_err(CliError::Usage)?;
    if split == Split::None {
        return Err(CliError::Usage("--split must be train, val or test".into()));
    }
    let inputs = load_inputs(&a.input, a.seed, &mut m)?;
    m.input(&a.checkpoint)?;
    let (config, params) = read_checkpoint(BufReader::new(File::open(&a.checkpoint)?))?;
    let adj = TypedAdjacency::from_graph(&inputs.graph, &inputs.annotations)?;
    let logits = pagnn_forward(&inputs.features.to_matrix(), &adj, &config, &params)?;
    let labels = inputs
        .graph
        .labels()
        .ok_or_else(|| CliError::Data("the nodes file has no labels".into()))?;
    let report = evaluate(&logits, labels, &inputs.graph.labeled_in(split), split.as_str())?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&a.out, text)?;
    m.finish(&[&a.out])?;
    println!(
        "{}: macro-F1 {:.4} micro-F1 {:.4} ({} nodes)",
        report.split, report.macro_f1, report.micro_f1, report.support
    );
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("diagnose", a);
    m.seed("seed", a.seed);
    let inputs = load_inputs(&a.input, a.seed, &mut m)?;
    let (full_config, full_params) = match &a.checkpoint {
        Some(path) => {
            m.input(path)?;
            read_checkpoint(BufReader::new(File::open(path)?))?
        }
        None => {
            let c = model_config(&a.model, &inputs, a.seed)?;
            let p = init_params(&c)?;
            (c, p)
        }
    };
    let ablation_config = full_config.without_type_blocks();
    let ablation_params = init_params(&ablation_config)?;
    let adj = TypedAdjacency::from_graph(&inputs.graph, &inputs.annotations)?;
    let h0 = inputs.features.to_matrix();
    let content: Vec<usize> = inputs.annotations.iter().map(|x| x.content_index).collect();
    let types = inputs.schema.content_count();

    let profile = |config: &PagnnConfig, params| {
        let runner = PagnnRunner {
            features: &h0,
            adjacency: &adj,
            config,
            params,
        };
        oversmoothing_profile(&runner, &content, types, a.max_layer)
    };
    let full = profile(&full_config, &full_params)?;
    let ablation = profile(&ablation_config, &ablation_params)?;

    std::fs::create_dir_all(&a.out_dir)?;
    let merged = a.out_dir.join("profile.csv");
    let full_csv = a.out_dir.join("profile_full.csv");
    let ablation_csv = a.out_dir.join("profile_ablation.csv");
    let dat = a.out_dir.join("profile.dat");
    let dependence = a.out_dir.join("dependence.json");
    write_merged_csv(&[("full", &full), ("ablation", &ablation)], &merged)?;
    write_profile_csv(&full, &full_csv)?;
    write_profile_csv(&ablation, &ablation_csv)?;
    write_gnuplot_data(&[("full", &full), ("ablation", &ablation)], &dat)?;

    let neighbors = inputs.graph.neighbor_lists();
    let plain = simplified_iterate(
        &neighbors,
        &h0,
        &SimplifiedModelSpec::plain(a.simplified_layers, SimplifiedWeights::ScaledIdentity(1.0), a.seed),
    )?;
    let typed = simplified_iterate(
        &neighbors,
        &h0,
        &SimplifiedModelSpec::typed(a.simplified_layers, content.clone(), SimplifiedWeights::Random, a.seed),
    )?;
    let summary = |h| {
        let r = linear_dependence_check(h, a.tol);
        json!({ "dependent": r.dependent, "numerical_rank": r.numerical_rank, "max_abs_cosine": r.max_abs_cosine })
    };
    let report = json!({
        "layers": a.simplified_layers,
        "tol": a.tol,
        "plain": summary(&plain),
        "typed": summary(&typed),
    });
    std::fs::write(&dependence, serde_json::to_string_pretty(&report)? + "\n")?;
    m.finish(&[&merged, &full_csv, &ablation_csv, &dat, &dependence])?;

    let last = a.max_layer;
    println!(
        "layer {last}: full {:.4} ablation {:.4}",
        full.values[last], ablation.values[last]
    );
    Ok(())
}

pub fn corrupt_cmd(a: &CorruptArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("corrupt", a);
    m.seed("seed", a.seed);
    let graph = load_graph(&a.graph, &mut m)?;
    let spec = match a.kind {
        CorruptKind::Rid => CorruptionSpec::rid(a.ratio, a.deletion, a.seed),
        CorruptKind::Rir => {
            let pool_path = a
                .pool
                .as_deref()
                .ok_or_else(|| CliError::Usage("--kind rir requires --pool".into()))?;
            m.input(pool_path)?;
            CorruptionSpec::rir(a.ratio, load_pool(pool_path, &graph)?, a.seed)
        }
    };
    let out = corrupt(&graph, &spec)?;
    write_nodes(&out, &a.out)?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(edges) = &a.out_edges {
        write_edges(&out, edges)?;
        outputs.push(edges);
    }
    m.finish(&outputs)?;
    let changed = (0..graph.node_count())
        .filter(|&v| graph.attribute(v) != out.attribute(v))
        .count();
    eprintln!("{changed} of {} attributes changed -> {}", graph.node_count(), a.out.display());
    Ok(())
}
