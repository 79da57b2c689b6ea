//! End-to-end orchestration: configuration, the six-stage run, parameter sweeps.
//!
//! Configuration is a TOML file. Every key can be overridden with a dotted
//! `key=value` pair, e.g. `reduce.n_neighbours=10`. Example:
//!
//! ```toml
//! corpus = "hymns.jsonl"
//! output_dir = "out"
//! seed = 7
//! references = ["creation.json"]
//!
//! [embedding]
//! method = "mean-lsa"      # mean-lsa | dbow | import
//! format = "tsv"           # tsv | binary
//! lsa = { dim = 768 }
//!
//! [reduce]
//! n_neighbours = 8
//! n_components = 10
//! min_dist = 0.0
//!
//! [graph]
//! k = 4
//!
//! [community]
//! method = "leiden"        # louvain | leiden | label-propagation
//! quality = "dugue"        # newman | dugue | potts
//! starts = 4              # independent starts, best quality kept
//!
//! [significance]
//! iterations = 5000
//! ```
//!
//! Relative paths are resolved against the directory of the config file. Per-stage
//! seeds are derived from the top-level `seed`; the `seed` fields inside stage
//! tables are ignored by the pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::{Detector, Method, Partition, QualityVariant, DEFAULT_STARTS};
use crate::corpus::{Corpus, Tokenizer, Vocabulary};
use crate::dbow::{train_dbow, DbowParams};
use crate::embedding::{
    import_embeddings, parse_binary, parse_tsv, EmbeddingFormat, EmbeddingMatrix,
};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, EvaluationReport, ReferenceGrouping};
use crate::graph::{knn_graph, normalize_rows, AdjacencyGraph, GraphParams};
use crate::lsa::{fit_mean_lsa, LsaConfig};
use crate::plot::export_plot;
use crate::reduce::{umap_fit, ReduceParams};
use crate::significance::{null_distribution, significance, NullModel, SignificanceReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedMethod {
    #[default]
    MeanLsa,
    Dbow,
    Import,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub method: EmbedMethod,
    pub format: EmbeddingFormat,
    pub lsa: LsaConfig,
    pub dbow: DbowParams,
    /// Embedding file for `method = "import"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            method: EmbedMethod::MeanLsa,
            format: EmbeddingFormat::Tsv,
            lsa: LsaConfig::default(),
            dbow: DbowParams::default(),
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityConfig {
    pub method: Method,
    pub quality: String,
    /// Only read by the `potts` quality function.
    pub resolution: f64,
    /// Independent Louvain/Leiden starts; the best is kept.
    pub starts: usize,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        Self {
            method: Method::Leiden,
            quality: "dugue".into(),
            resolution: 1.0,
            starts: DEFAULT_STARTS,
        }
    }
}

impl CommunityConfig {
    pub fn detector(&self) -> Result<Detector> {
        Ok(Detector::new(
            self.method,
            QualityVariant::parse(&self.quality, self.resolution)?,
        )
        .with_starts(self.starts))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceConfig {
    pub iterations: usize,
    pub null_model: NullModel,
    /// Also write every null sample to `null_samples.json`.
    pub dump_null: bool,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            null_model: NullModel::Shuffle,
            dump_null: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub embedding: EmbedConfig,
    pub reduce: ReduceParams,
    pub graph: GraphParams,
    pub community: CommunityConfig,
    pub significance: SignificanceConfig,
    pub references: Vec<PathBuf>,
    /// Emit `plot.csv` / `plot.svg` from a 2-D layout.
    pub plot: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus.jsonl"),
            output_dir: PathBuf::from("out"),
            seed: 0,
            embedding: EmbedConfig::default(),
            reduce: ReduceParams::default(),
            graph: GraphParams::default(),
            community: CommunityConfig::default(),
            significance: SignificanceConfig::default(),
            references: Vec::new(),
            plot: false,
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets a dotted key, creating intermediate tables as needed.
pub fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?}: {part:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Applies `(key, value)` overrides on top of this config.
    pub fn with_overrides<K: AsRef<str>, V: AsRef<str>>(
        &self,
        overrides: &[(K, V)],
    ) -> Result<Self> {
        let mut table = self.to_table();
        for (k, v) in overrides {
            set_key(&mut table, k.as_ref(), v.as_ref())?;
        }
        Self::from_table(table)
    }

    /// Reads a config file, applies overrides, and resolves relative paths
    /// against the file's directory.
    pub fn load<K: AsRef<str>, V: AsRef<str>>(
        path: impl AsRef<Path>,
        overrides: &[(K, V)],
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for (k, v) in overrides {
            set_key(&mut table, k.as_ref(), v.as_ref())?;
        }
        let mut cfg = Self::from_table(table)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.embedding.path {
            fix(p);
        }
        self.references.iter_mut().for_each(fix);
    }
}

/// Stage seed: the first 8 bytes of `sha256(seed || stage)`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name}");
    f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub stage: String,
    /// File name inside the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
    pub partition: Partition,
    pub significance: SignificanceReport,
    pub evaluation: EvaluationReport,
    pub manifest: serde_json::Value,
}

impl RunReport {
    pub fn artifact(&self, stage: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.stage == stage)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Writer<'_> {
    fn write(&mut self, stage: &str, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            stage: stage.to_string(),
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json(&mut self, stage: &str, name: &str, v: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.write(stage, name, text.as_bytes())
    }

    /// Writes `m` and returns it as read back from the file, so later stages see
    /// exactly what a standalone run loading the artifact would see.
    fn write_matrix(
        &mut self,
        stage: &str,
        stem: &str,
        m: &EmbeddingMatrix,
        format: EmbeddingFormat,
    ) -> Result<EmbeddingMatrix> {
        let raw = match format {
            EmbeddingFormat::Tsv => {
                let text = m.to_tsv();
                self.write(stage, &format!("{stem}.tsv"), text.as_bytes())?;
                parse_tsv(&text)?
            }
            EmbeddingFormat::Binary => {
                let bytes = m.to_binary();
                self.write(stage, &format!("{stem}.bin"), &bytes)?;
                parse_binary(&bytes)?
            }
        };
        EmbeddingMatrix::new(m.provenance, m.ids.clone(), raw.data)
    }
}

/// Computes document embeddings for the configured method.
pub fn embed(corpus: &Corpus, cfg: &EmbedConfig, seed: u64) -> Result<EmbeddingMatrix> {
    match cfg.method {
        EmbedMethod::MeanLsa => {
            let tokens = corpus.tokenize(&Tokenizer::lsa());
            Ok(fit_mean_lsa(corpus, &tokens, &cfg.lsa, seed)?.documents)
        }
        EmbedMethod::Dbow => {
            let tokens = corpus.tokenize(&Tokenizer::doc2vec());
            let vocab = Vocabulary::build(&tokens, 1)?;
            let params = DbowParams {
                seed,
                ..cfg.dbow.clone()
            };
            Ok(train_dbow(corpus, &tokens, &vocab, &params)?.embeddings)
        }
        EmbedMethod::Import => {
            let path = cfg.path.as_ref().ok_or_else(|| {
                Error::Config("embedding.path is required for method \"import\"".into())
            })?;
            import_embeddings(path, corpus)
        }
    }
}

/// Row-normalizes, then reduces with UMAP.
pub fn reduce(
    embeddings: &EmbeddingMatrix,
    params: &ReduceParams,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    umap_fit(
        &normalize_rows(embeddings),
        &ReduceParams {
            seed,
            ..params.clone()
        },
    )
}

/// kNN graph on row-normalized reduced embeddings.
pub fn build_graph(reduced: &EmbeddingMatrix, params: &GraphParams) -> Result<AdjacencyGraph> {
    knn_graph(&normalize_rows(reduced), params)
}

/// Runs ingest, embed, reduce, graph, detect, significance and evaluate in order,
/// writing each artifact and a `manifest.json` into `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Writer {
        dir: &dir,
        artifacts: Vec::new(),
    };
    let seeds: BTreeMap<&str, u64> = ["embed", "reduce", "detect", "significance", "plot"]
        .into_iter()
        .map(|s| (s, derive_seed(cfg.seed, s)))
        .collect();
    let detector = stage("detect", || cfg.community.detector())?;

    let corpus = stage("ingest", || Corpus::load(&cfg.corpus))?;
    log::info!("{} documents", corpus.len());

    let embeddings = stage("embed", || {
        let m = embed(&corpus, &cfg.embedding, seeds["embed"])?;
        out.write_matrix("embed", "embeddings", &m, cfg.embedding.format)
    })?;

    let reduced = stage("reduce", || {
        let r = reduce(&embeddings, &cfg.reduce, seeds["reduce"])?;
        out.write_matrix("reduce", "reduced", &r, cfg.embedding.format)
    })?;

    let graph = stage("graph", || {
        let g = build_graph(&reduced, &cfg.graph)?;
        out.write(
            "graph",
            "graph.json",
            format!("{}\n", g.to_json()).as_bytes(),
        )?;
        Ok(g)
    })?;
    log::info!("graph: {} nodes, {} edges", graph.n, graph.edge_count());

    let partition = stage("detect", || {
        let p = detector.detect(&graph, seeds["detect"])?;
        out.write_json("detect", "partition.json", &p.to_json(Some(&reduced.ids)))?;
        Ok(p)
    })?;
    log::info!(
        "{} communities, Q = {:.4}",
        partition.n_communities(),
        partition.quality
    );

    let sig = stage("significance", || {
        let null = null_distribution(
            &graph,
            &detector,
            cfg.significance.iterations,
            seeds["significance"],
            cfg.significance.null_model,
        )?;
        let mut report = significance(partition.quality, &null)?;
        report.null_model = Some(cfg.significance.null_model);
        report.seed = Some(seeds["significance"]);
        out.write_json("significance", "significance.json", &report.to_json())?;
        if cfg.significance.dump_null {
            out.write_json(
                "significance",
                "null_samples.json",
                &serde_json::json!(null),
            )?;
        }
        Ok(report)
    })?;
    log::info!("z = {:?}, p = {}", sig.z, sig.p);

    let (evaluation, groupings) = stage("evaluate", || {
        let groupings = cfg
            .references
            .iter()
            .map(ReferenceGrouping::load)
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&partition, &corpus, &groupings)?;
        out.write_json("evaluate", "evaluation.json", &report.to_json())?;
        Ok((report, groupings))
    })?;

    if cfg.plot {
        stage("plot", || {
            let layout = if reduced.ncols() == 2 {
                reduced.clone()
            } else {
                let params = ReduceParams {
                    n_components: 2,
                    ..cfg.reduce.clone()
                };
                reduce(&embeddings, &params, seeds["plot"])?
            };
            let files = export_plot(&layout, &partition, &groupings, dir.join("plot"))?;
            for f in [files.csv, files.svg] {
                let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
                out.artifacts.push(Artifact {
                    stage: "plot".into(),
                    path: PathBuf::from(f.file_name().expect("file name")),
                    sha256: sha256_hex(&bytes),
                });
            }
            Ok(())
        })?;
    }

    let manifest = serde_json::json!({
        "config": cfg,
        "seeds": seeds,
        "stages": ["ingest", "embed", "reduce", "graph", "detect", "significance", "evaluate"],
        "artifacts": out.artifacts,
        "summary": {
            "documents": corpus.len(),
            "edges": graph.edge_count(),
            "Q": partition.quality,
            "n_communities": partition.n_communities(),
            "z": sig.z,
            "p": sig.p,
            "significant": sig.significant,
            "selection_rate": evaluation.selection_rate,
        },
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    Ok(RunReport {
        output_dir: dir.clone(),
        artifacts: out.artifacts,
        partition,
        significance: sig,
        evaluation,
        manifest,
    })
}

/// Parameter axes of a sweep, e.g. `reduce.n_neighbours = [8, 10]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl SweepGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis<S: ToString>(mut self, key: &str, values: impl IntoIterator<Item = S>) -> Self {
        self.axes.push((
            key.to_string(),
            values.into_iter().map(|v| v.to_string()).collect(),
        ));
        self
    }

    /// Parses `key=v1,v2,...`.
    pub fn parse_axis(&mut self, spec: &str) -> Result<()> {
        let (k, v) = parse_override(spec)?;
        self.axes
            .push((k, v.split(',').map(|s| s.trim().to_string()).collect()));
        Ok(())
    }

    /// Cartesian product of the axes, duplicate values dropped with a warning.
    pub fn points(&self) -> Result<Vec<Vec<(String, String)>>> {
        if self.axes.is_empty() || self.axes.iter().any(|(_, v)| v.is_empty()) {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
        let mut seen_keys = Vec::new();
        for (key, values) in &self.axes {
            if seen_keys.contains(key) {
                return Err(Error::Config(format!("sweep axis {key:?} given twice")));
            }
            seen_keys.push(key.clone());
            let mut distinct: Vec<(&String, toml::Value)> = Vec::new();
            for v in values {
                let parsed = parse_value(v);
                if distinct.iter().any(|(_, p)| *p == parsed) {
                    log::warn!("duplicate sweep value {key}={v} ignored");
                } else {
                    distinct.push((v, parsed));
                }
            }
            points = points
                .into_iter()
                .flat_map(|p| {
                    distinct.iter().map(move |(v, _)| {
                        let mut q = p.clone();
                        q.push((key.clone(), (*v).clone()));
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: BTreeMap<String, String>,
    #[serde(rename = "Q")]
    pub q: f64,
    pub n_communities: usize,
    pub z: Option<f64>,
    pub p: f64,
    pub significant: bool,
    pub best: bool,
    pub output_dir: PathBuf,
}

/// One full pipeline run per grid point, rows sorted by Q (best first) and written
/// to `sweep.json` in the base output directory.
pub fn sweep(base: &PipelineConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let points = grid.points()?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, point) in points.iter().enumerate() {
        let mut cfg = base.with_overrides(point)?;
        cfg.output_dir = base.output_dir.join(format!("point-{i:03}"));
        log::info!("sweep point {i}: {point:?}");
        let run = run_pipeline(&cfg)?;
        rows.push(SweepRow {
            params: point.iter().cloned().collect(),
            q: run.partition.quality,
            n_communities: run.partition.n_communities(),
            z: run.significance.z,
            p: run.significance.p,
            significant: run.significance.significant,
            best: false,
            output_dir: cfg.output_dir,
        });
    }
    rows.sort_by(|a, b| b.q.total_cmp(&a.q));
    rows[0].best = true;
    let path = base.output_dir.join("sweep.json");
    fs::create_dir_all(&base.output_dir).map_err(|e| Error::io(&base.output_dir, e))?;
    fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")
        .map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
