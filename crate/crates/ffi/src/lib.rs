//! C ABI for topicnet.
//!
//! Objects are opaque handles created by `tn_*_load` / `tn_*_new` style functions
//! and released with the matching `tn_*_free`. Every fallible function returns a
//! [`TnStatus`]; on failure, [`tn_last_error`] describes the error on the calling
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use topicnet::community::{modularity, Detector, Method, Partition, QualityVariant};
use topicnet::corpus::Corpus;
use topicnet::embedding::{EmbeddingMatrix, Provenance};
use topicnet::graph::{knn_graph, AdjacencyGraph, GraphParams};
use topicnet::pipeline::{parse_override, run_pipeline, PipelineConfig};
use topicnet::significance::{test_structure, NullModel};
use topicnet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    NoEdges = 6,
    Stage = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnMethod {
    Louvain = 0,
    Leiden = 1,
    LabelPropagation = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnQuality {
    Newman = 0,
    Dugue = 1,
    Potts = 2,
}

/// Outcome of a permutation significance test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TnSignificance {
    pub observed_q: f64,
    /// NaN when the null distribution has zero variance.
    pub z: f64,
    pub p: f64,
    pub iterations: usize,
    pub significant: bool,
}

pub struct TnCorpus(Corpus);
pub struct TnGraph(AdjacencyGraph);
pub struct TnPartition(Partition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TnStatus {
    match e {
        Error::Io { .. } => TnStatus::Io,
        Error::MalformedRecord { .. }
        | Error::InvalidId(_)
        | Error::Format(_)
        | Error::Json(_)
        | Error::Config(_) => TnStatus::Parse,
        Error::NoEdges => TnStatus::NoEdges,
        Error::Stage { .. } => TnStatus::Stage,
        _ => TnStatus::InvalidArgument,
    }
}

struct Fail(TnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TnStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TnStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(TnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TnStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn detector(method: TnMethod, quality: TnQuality, resolution: f64) -> Result<Detector, Fail> {
    let method = match method {
        TnMethod::Louvain => Method::Louvain,
        TnMethod::Leiden => Method::Leiden,
        TnMethod::LabelPropagation => Method::LabelPropagation,
    };
    Ok(Detector::new(method, variant(quality, resolution)?))
}

fn variant(quality: TnQuality, resolution: f64) -> Result<QualityVariant, Fail> {
    let name = match quality {
        TnQuality::Newman => "newman",
        TnQuality::Dugue => "dugue",
        TnQuality::Potts => "potts",
    };
    Ok(QualityVariant::parse(name, resolution)?)
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL corpus.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_corpus_load(path: *const c_char, out: *mut *mut TnCorpus) -> TnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, TnCorpus(Corpus::load(path)?))
    })
}

/// Number of documents; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_corpus_len(corpus: *const TnCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_corpus_free(corpus: *mut TnCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Builds an undirected graph on `n` nodes from `n_edges` pairs stored flat in
/// `pairs` (`2 * n_edges` entries).
///
/// # Safety
/// `pairs` must point to `2 * n_edges` values (or be null when `n_edges` is 0).
#[no_mangle]
pub unsafe extern "C" fn tn_graph_from_edges(
    n: usize,
    pairs: *const usize,
    n_edges: usize,
    out: *mut *mut TnGraph,
) -> TnStatus {
    guard(|| {
        let flat = if n_edges == 0 {
            &[][..]
        } else if pairs.is_null() {
            return Err(null("pairs"));
        } else {
            std::slice::from_raw_parts(pairs, 2 * n_edges)
        };
        let edges = flat.chunks_exact(2).map(|p| (p[0], p[1]));
        put(out, TnGraph(AdjacencyGraph::from_edges(n, edges)?))
    })
}

/// Builds the `k`-nearest-neighbour graph of the row-normalized `rows x cols`
/// row-major matrix `data`.
///
/// # Safety
/// `data` must point to `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_knn(
    data: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    out: *mut *mut TnGraph,
) -> TnStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let values = std::slice::from_raw_parts(data, rows * cols).to_vec();
        let array = ndarray::Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Fail(TnStatus::InvalidArgument, e.to_string()))?;
        let ids = (0..rows).map(|i| i.to_string()).collect();
        let m = topicnet::graph::normalize_rows(&EmbeddingMatrix::new(
            Provenance::Imported,
            ids,
            array,
        )?);
        put(
            out,
            TnGraph(knn_graph(
                &m,
                &GraphParams {
                    k,
                    ..Default::default()
                },
            )?),
        )
    })
}

/// Loads a graph written by the pipeline (`graph.json`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_load(path: *const c_char, out: *mut *mut TnGraph) -> TnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, TnGraph(AdjacencyGraph::load_json(path)?))
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_node_count(graph: *const TnGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n)
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_edge_count(graph: *const TnGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_free(graph: *mut TnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Detects communities. `resolution` is only read for [`TnQuality::Potts`].
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_detect(
    graph: *const TnGraph,
    method: TnMethod,
    quality: TnQuality,
    resolution: f64,
    seed: u64,
    out: *mut *mut TnPartition,
) -> TnStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let p = detector(method, quality, resolution)?.detect(&g.0, seed)?;
        put(out, TnPartition(p))
    })
}

/// Quality of an arbitrary assignment of `len` nodes.
///
/// # Safety
/// `assignment` must point to `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_modularity(
    graph: *const TnGraph,
    assignment: *const usize,
    len: usize,
    quality: TnQuality,
    resolution: f64,
    out: *mut f64,
) -> TnStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        if assignment.is_null() || out.is_null() {
            return Err(null("assignment or out"));
        }
        let a = std::slice::from_raw_parts(assignment, len);
        *out = modularity(&g.0, a, variant(quality, resolution)?)?;
        Ok(())
    })
}

/// # Safety
/// `partition` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_len(partition: *const TnPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.0.assignment.len())
}

/// # Safety
/// `partition` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_n_communities(partition: *const TnPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.0.n_communities())
}

/// Quality of the partition; NaN for a null handle.
///
/// # Safety
/// `partition` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_quality(partition: *const TnPartition) -> f64 {
    partition.as_ref().map_or(f64::NAN, |p| p.0.quality)
}

/// Copies the community of each node into `buf`, which must hold
/// `tn_partition_len(partition)` values.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_assignment(
    partition: *const TnPartition,
    buf: *mut usize,
    len: usize,
) -> TnStatus {
    guard(|| {
        let p = handle(partition, "partition")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let a = &p.0.assignment;
        if len != a.len() {
            return Err(Fail(
                TnStatus::InvalidArgument,
                format!("buffer holds {len} values, partition has {}", a.len()),
            ));
        }
        ptr::copy_nonoverlapping(a.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `partition` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_free(partition: *mut TnPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}

/// Detects on `graph`, then compares against `iterations` detections on
/// edge-shuffled copies.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_significance(
    graph: *const TnGraph,
    method: TnMethod,
    quality: TnQuality,
    resolution: f64,
    iterations: usize,
    seed: u64,
    out: *mut TnSignificance,
) -> TnStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let det = detector(method, quality, resolution)?;
        let r = test_structure(&g.0, &det, iterations, seed, NullModel::Shuffle)?;
        *out = TnSignificance {
            observed_q: r.observed_q,
            z: r.z.unwrap_or(f64::NAN),
            p: r.p,
            iterations: r.n,
            significant: r.significant,
        };
        Ok(())
    })
}

/// Runs the full pipeline from a TOML config file with `n_overrides` optional
/// `key=value` overrides. On success `*summary_json` receives the run summary,
/// to be released with [`tn_string_free`].
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `overrides` must point to
/// `n_overrides` NUL-terminated strings (or be null when 0), and `summary_json`
/// must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_run_pipeline(
    config_path: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    summary_json: *mut *mut c_char,
) -> TnStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let mut pairs = Vec::with_capacity(n_overrides);
        if n_overrides > 0 {
            if overrides.is_null() {
                return Err(null("overrides"));
            }
            for &s in std::slice::from_raw_parts(overrides, n_overrides) {
                pairs.push(parse_override(str_arg(s, "override")?)?);
            }
        }
        let cfg = PipelineConfig::load(&path, &pairs)?;
        let run = run_pipeline(&cfg)?;
        if !summary_json.is_null() {
            let text = serde_json::to_string(&run.manifest["summary"]).expect("summary serializes");
            *summary_json = CString::new(text).expect("json has no NUL").into_raw();
        }
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
