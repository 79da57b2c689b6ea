use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use topicnet::community::Partition;
use topicnet::corpus::Corpus;
use topicnet::embedding::{load_embeddings, EmbeddingFormat, EmbeddingMatrix, Provenance};
use topicnet::evaluate::{evaluate, ReferenceGrouping};
use topicnet::graph::AdjacencyGraph;
use topicnet::pipeline::{
    build_graph, derive_seed, embed, parse_override, reduce, run_pipeline, sweep, PipelineConfig,
    SweepGrid,
};
use topicnet::plot::export_plot;
use topicnet::significance::{null_distribution, significance};
use topicnet::{Error, Result};

/// Document corpus to statistically validated topic network.
#[derive(Parser)]
#[command(name = "topicnet", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags are applied on top of the config file,
/// then `--set` pairs on top of the flags.
#[derive(Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set reduce.n_epochs=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corpus JSONL (`corpus`).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Pipeline output directory (`output_dir`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// `reduce.n_components`
    #[arg(long, global = true)]
    reduce_dims: Option<usize>,
    /// `reduce.n_neighbours`
    #[arg(long, global = true)]
    reduce_neighbours: Option<usize>,
    /// `reduce.min_dist`
    #[arg(long, global = true)]
    min_dist: Option<f64>,
    /// `graph.k`
    #[arg(long, global = true)]
    k: Option<usize>,
    /// `community.method`: louvain | leiden | label-propagation
    #[arg(long, global = true)]
    method: Option<String>,
    /// `community.quality`: newman | dugue | potts
    #[arg(long, global = true)]
    quality: Option<String>,
    /// `community.resolution` (potts only)
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// `significance.iterations`
    #[arg(long, global = true)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print per-book document counts.
    Ingest {
        /// Write the normalized corpus here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute document embeddings with `embedding.method`.
    Embed {
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce embeddings with UMAP.
    Reduce {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the kNN graph from reduced embeddings.
    Graph {
        #[arg(long)]
        reduced: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect communities.
    Detect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Permutation significance test of the detected structure.
    Significance {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match communities against reference groupings.
    Evaluate {
        #[arg(long)]
        partition: PathBuf,
        /// Reference grouping JSON; defaults to `references` from the config.
        #[arg(long = "reference")]
        references: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage and write artifacts plus `manifest.json` to `output_dir`.
    Pipeline,
    /// One pipeline run per grid point, e.g. `--grid reduce.n_neighbours=8,10`.
    Sweep {
        #[arg(long = "grid", value_name = "KEY=V1,V2,...", required = true)]
        grid: Vec<String>,
    },
    /// Write `<out>.csv` and `<out>.svg` from a 2-D layout.
    Plot {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long = "reference")]
        references: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Global {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut flag = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((key.to_string(), v));
            }
        };
        let quoted = |s: &Option<String>| s.as_ref().map(|s| format!("{s:?}"));
        let path =
            |p: &Option<PathBuf>| p.as_ref().map(|p| format!("{:?}", p.display().to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("corpus", path(&self.corpus));
        flag("output_dir", path(&self.output_dir));
        flag(
            "reduce.n_components",
            self.reduce_dims.map(|v| v.to_string()),
        );
        flag(
            "reduce.n_neighbours",
            self.reduce_neighbours.map(|v| v.to_string()),
        );
        flag("reduce.min_dist", self.min_dist.map(|v| format!("{v:?}")));
        flag("graph.k", self.k.map(|v| v.to_string()));
        flag("community.method", quoted(&self.method));
        flag("community.quality", quoted(&self.quality));
        flag(
            "community.resolution",
            self.resolution.map(|v| format!("{v:?}")),
        );
        flag(
            "significance.iterations",
            self.iterations.map(|v| v.to_string()),
        );
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }

    fn load(&self) -> Result<PipelineConfig> {
        let overrides = self.overrides()?;
        match &self.config {
            Some(path) => PipelineConfig::load(path, &overrides),
            None => PipelineConfig::default().with_overrides(&overrides),
        }
    }
}

fn print(v: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn labels(corpus: &Corpus) -> Vec<String> {
    corpus.ids().map(|id| id.to_string()).collect()
}

fn load_graph(path: &Path) -> Result<AdjacencyGraph> {
    AdjacencyGraph::load_json(path)
}

fn load_groupings(paths: &[PathBuf]) -> Result<Vec<ReferenceGrouping>> {
    paths.iter().map(ReferenceGrouping::load).collect()
}

fn save_matrix(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    m.export(path, EmbeddingFormat::from_path(path))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.global.load()?;
    let seed = |stage: &str| derive_seed(cfg.seed, stage);
    match cli.command {
        Command::Ingest { out } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            if let Some(out) = out {
                fs::write(&out, corpus.to_jsonl()).map_err(|e| Error::io(&out, e))?;
            }
            let books: serde_json::Map<String, serde_json::Value> = corpus
                .book_counts()
                .into_iter()
                .map(|(b, n)| (b.to_string(), json!(n)))
                .collect();
            print(json!({ "documents": corpus.len(), "books": books }))
        }
        Command::Embed { out } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            let m = embed(&corpus, &cfg.embedding, seed("embed"))?;
            save_matrix(&m, &out)?;
            print(json!({ "rows": m.nrows(), "dim": m.ncols(), "out": out }))
        }
        Command::Reduce { embeddings, out } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            let m = load_embeddings(&embeddings, &corpus, Provenance::Imported)?;
            let r = reduce(&m, &cfg.reduce, seed("reduce"))?;
            save_matrix(&r, &out)?;
            print(json!({ "rows": r.nrows(), "dim": r.ncols(), "out": out }))
        }
        Command::Graph { reduced, out } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            let m = load_embeddings(&reduced, &corpus, Provenance::Reduced)?;
            let g = build_graph(&m, &cfg.graph)?;
            g.save_json(&out)?;
            print(json!({ "nodes": g.n, "edges": g.edge_count(), "out": out }))
        }
        Command::Detect { graph, out } => {
            let g = load_graph(&graph)?;
            let p = cfg.community.detector()?.detect(&g, seed("detect"))?;
            p.save_json(&out, g.labels.as_deref())?;
            print(json!({ "Q": p.quality, "n_communities": p.n_communities(), "out": out }))
        }
        Command::Significance { graph, out } => {
            let g = load_graph(&graph)?;
            let detector = cfg.community.detector()?;
            let observed = detector.detect(&g, seed("detect"))?;
            let null = null_distribution(
                &g,
                &detector,
                cfg.significance.iterations,
                seed("significance"),
                cfg.significance.null_model,
            )?;
            let mut report = significance(observed.quality, &null)?;
            report.null_model = Some(cfg.significance.null_model);
            report.seed = Some(seed("significance"));
            write_json(&out, &report.to_json())?;
            print(report.to_json())
        }
        Command::Evaluate {
            partition,
            references,
            out,
        } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            let p = Partition::load_json(&partition, &labels(&corpus))?;
            let refs = if references.is_empty() {
                &cfg.references
            } else {
                &references
            };
            let report = evaluate(&p, &corpus, &load_groupings(refs)?)?;
            if let Some(out) = out {
                write_json(&out, &report.to_json())?;
            }
            print(report.to_json())
        }
        Command::Pipeline => {
            let run = run_pipeline(&cfg)?;
            print(run.manifest["summary"].clone())
        }
        Command::Sweep { grid } => {
            let mut g = SweepGrid::new();
            for axis in &grid {
                g.parse_axis(axis)?;
            }
            let rows = sweep(&cfg, &g)?;
            print(serde_json::to_value(rows)?)
        }
        Command::Plot {
            layout,
            partition,
            references,
            out,
        } => {
            let corpus = Corpus::load(&cfg.corpus)?;
            let m = load_embeddings(&layout, &corpus, Provenance::Reduced)?;
            let p = Partition::load_json(&partition, &labels(&corpus))?;
            let files = export_plot(&m, &p, &load_groupings(&references)?, &out)?;
            print(json!({ "csv": files.csv, "svg": files.svg }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
