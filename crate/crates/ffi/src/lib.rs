//! C ABI over the `ssra` core crate.
//!
//! Conventions:
//! * Every fallible function returns an [`SsraStatus`]; on anything but
//!   `SSRA_STATUS_OK` a message is available from [`ssra_last_error`] on the
//!   same thread until the next failing call.
//! * Corpora are opaque [`SsraCorpus`] handles owned by the caller and
//!   released with [`ssra_corpus_free`].
//! * Panics never cross the boundary; they surface as `SSRA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ssra::corpus::{
    compute_stats, dedup_for_query_model, load_corpus, make_balanced_testset, make_binary_subset, save_corpus, CorpusError, LengthUnit, Schema,
};
use ssra::loss::{weight_default, weighted_infonce, EmbeddingBatch, LossError};
use ssra::metrics::{average_precision_at_threshold, consistency_rate, duplicate_rate, ndcg_at_k, Gain, MetricError, NdcgOptions, Qrels, RunRanking};
use ssra::{Corpus, RelevanceLabel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    InvalidData = 5,
    Insufficient = 6,
    Metric = 7,
    Loss = 8,
    Panic = 99,
}

/// Which records a corpus file may contain.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsraSchema {
    Labeled = 0,
    Unlabeled = 1,
    Mixed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsraGain {
    Linear = 0,
    Exponential = 1,
}

/// Opaque corpus handle.
pub struct SsraCorpus {
    inner: Corpus,
}

/// Size and label distribution of a corpus. Proportions are percentages over
/// labeled records, NaN when no record is labeled.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsraCorpusStats {
    pub size: usize,
    pub label_counts: [usize; 4],
    pub label_proportions: [f64; 4],
    pub n_queries: usize,
    pub n_docs: usize,
}

struct FfiError {
    status: SsraStatus,
    message: String,
}

impl FfiError {
    fn new(status: SsraStatus, message: impl Into<String>) -> Self {
        FfiError {
            status,
            message: message.into(),
        }
    }
}

impl From<CorpusError> for FfiError {
    fn from(e: CorpusError) -> Self {
        let status = match &e {
            CorpusError::Io { .. } => SsraStatus::Io,
            CorpusError::InsufficientRecords { .. } => SsraStatus::Insufficient,
            _ => SsraStatus::InvalidData,
        };
        FfiError::new(status, e.to_string())
    }
}

impl From<MetricError> for FfiError {
    fn from(e: MetricError) -> Self {
        let status = match &e {
            MetricError::Io { .. } => SsraStatus::Io,
            _ => SsraStatus::Metric,
        };
        FfiError::new(status, e.to_string())
    }
}

impl From<LossError> for FfiError {
    fn from(e: LossError) -> Self {
        FfiError::new(SsraStatus::Loss, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', "\\0")).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> SsraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsraStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            SsraStatus::Panic
        }
    }
}

fn non_null<T>(ptr: *const T, what: &str) -> Result<*const T, FfiError> {
    if ptr.is_null() {
        Err(FfiError::new(SsraStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(ptr)
    }
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, FfiError> {
    let ptr = non_null(ptr, what)?;
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| FfiError::new(SsraStatus::InvalidUtf8, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(ptr, what)?, len))
}

fn label_arg(value: u8) -> Result<RelevanceLabel, FfiError> {
    RelevanceLabel::new(i64::from(value)).map_err(|e| FfiError::new(SsraStatus::InvalidArgument, e.to_string()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::new(SsraStatus::NullPointer, format!("{what} is NULL")));
    }
    out.write(value);
    Ok(())
}

unsafe fn corpus_ref<'a>(handle: *const SsraCorpus) -> Result<&'a Corpus, FfiError> {
    Ok(&(*non_null(handle, "corpus")?).inner)
}

fn into_handle(corpus: Corpus) -> *mut SsraCorpus {
    Box::into_raw(Box::new(SsraCorpus { inner: corpus }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssra_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads a JSONL corpus.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_load(path: *const c_char, schema: SsraSchema, out: *mut *mut SsraCorpus) -> SsraStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let schema = match schema {
            SsraSchema::Labeled => Schema::Labeled,
            SsraSchema::Unlabeled => Schema::Unlabeled,
            SsraSchema::Mixed => Schema::Mixed,
        };
        let corpus = load_corpus(&path, schema)?;
        write_out(out, into_handle(corpus), "out")
    })
}

/// Releases a corpus handle. NULL is ignored.
///
/// # Safety
/// `corpus` must be NULL or a handle returned by this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_free(corpus: *mut SsraCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_len(corpus: *const SsraCorpus) -> usize {
    corpus_ref(corpus).map_or(0, Corpus::len)
}

/// Writes the corpus as JSONL.
///
/// # Safety
/// `corpus` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_save(corpus: *const SsraCorpus, path: *const c_char) -> SsraStatus {
    guard(|| {
        let corpus = corpus_ref(corpus)?;
        let path = path_arg(path, "path")?;
        Ok(save_corpus(corpus, &path)?)
    })
}

/// # Safety
/// `corpus` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_stats(corpus: *const SsraCorpus, out: *mut SsraCorpusStats) -> SsraStatus {
    guard(|| {
        let stats = compute_stats(corpus_ref(corpus)?, None, LengthUnit::Chars);
        let value = SsraCorpusStats {
            size: stats.size,
            label_counts: stats.label_counts,
            label_proportions: stats.label_proportions.unwrap_or([f64::NAN; 4]),
            n_queries: stats.n_queries,
            n_docs: stats.n_docs,
        };
        write_out(out, value, "out")
    })
}

/// New handle with the first record per (normalized query, label).
///
/// # Safety
/// `corpus` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_dedup(corpus: *const SsraCorpus, out: *mut *mut SsraCorpus) -> SsraStatus {
    guard(|| {
        let result = dedup_for_query_model(corpus_ref(corpus)?);
        write_out(out, into_handle(result), "out")
    })
}

/// New handle holding only label-0 and label-3 records.
///
/// # Safety
/// `corpus` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_binary_subset(corpus: *const SsraCorpus, out: *mut *mut SsraCorpus) -> SsraStatus {
    guard(|| {
        let result = make_binary_subset(corpus_ref(corpus)?);
        write_out(out, into_handle(result), "out")
    })
}

/// New handle with exactly `n_per_label` records of each label, sampled
/// with `seed`. Fails with `SSRA_STATUS_INSUFFICIENT` on a short pool.
///
/// # Safety
/// `corpus` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_corpus_balanced_subset(
    corpus: *const SsraCorpus,
    n_per_label: usize,
    seed: u64,
    out: *mut *mut SsraCorpus,
) -> SsraStatus {
    guard(|| {
        let result = make_balanced_testset(corpus_ref(corpus)?, n_per_label, seed)?;
        write_out(out, into_handle(result), "out")
    })
}

/// Mean nDCG@k of a TSV run against TSV qrels, unjudged documents as 0 and
/// all-zero queries counted as 0.
///
/// # Safety
/// `qrels_path` and `run_path` must be NUL-terminated strings and `out_mean`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssra_ndcg_files(
    qrels_path: *const c_char,
    run_path: *const c_char,
    k: usize,
    gain: SsraGain,
    out_mean: *mut f64,
) -> SsraStatus {
    guard(|| {
        let qrels = Qrels::load(&path_arg(qrels_path, "qrels_path")?)?;
        let run = RunRanking::load(&path_arg(run_path, "run_path")?)?;
        let options = NdcgOptions {
            gain: match gain {
                SsraGain::Linear => Gain::Linear,
                SsraGain::Exponential => Gain::Exponential,
            },
            ..NdcgOptions::default()
        };
        let result = ndcg_at_k(&qrels, &run, k, options)?;
        write_out(out_mean, result.mean.unwrap_or(0.0), "out_mean")
    })
}

/// Average precision with positives defined as `label >= threshold`.
///
/// # Safety
/// `scores` and `labels` must point to `n` elements and `out_ap` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ssra_average_precision(scores: *const f64, labels: *const u8, n: usize, threshold: u8, out_ap: *mut f64) -> SsraStatus {
    guard(|| {
        let scores = slice_arg(scores, n, "scores")?;
        let labels = slice_arg(labels, n, "labels")?;
        let pairs = scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| Ok((s, label_arg(l)?)))
            .collect::<Result<Vec<_>, FfiError>>()?;
        let result = average_precision_at_threshold(&pairs, threshold)?;
        write_out(out_ap, result.ap, "out_ap")
    })
}

/// Exact-match duplicate rate over normalized query strings.
///
/// # Safety
/// `queries` must point to `n` NUL-terminated strings; the out pointers must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn ssra_duplicate_rate(queries: *const *const c_char, n: usize, out_rate: *mut f64, out_unique: *mut usize) -> SsraStatus {
    guard(|| {
        let ptrs = slice_arg(queries, n, "queries")?;
        let texts = ptrs
            .iter()
            .map(|&p| {
                let p = non_null(p, "query")?;
                CStr::from_ptr(p)
                    .to_str()
                    .map_err(|_| FfiError::new(SsraStatus::InvalidUtf8, "query is not UTF-8"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let report = duplicate_rate(&texts);
        write_out(out_rate, report.duplicate_rate, "out_rate")?;
        write_out(out_unique, report.unique, "out_unique")
    })
}

/// Overall fraction of `targets[i] == judged[i]`; 0 for `n == 0`.
///
/// # Safety
/// `targets` and `judged` must point to `n` elements and `out_rate` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ssra_consistency_rate(targets: *const u8, judged: *const u8, n: usize, out_rate: *mut f64) -> SsraStatus {
    guard(|| {
        let targets = slice_arg(targets, n, "targets")?;
        let judged = slice_arg(judged, n, "judged")?;
        let pairs = targets
            .iter()
            .zip(judged)
            .map(|(&t, &j)| Ok((label_arg(t)?, label_arg(j)?)))
            .collect::<Result<Vec<_>, FfiError>>()?;
        let report = consistency_rate(&pairs);
        write_out(out_rate, report.overall.rate().unwrap_or(0.0), "out_rate")
    })
}

/// Label-weighted InfoNCE (cosine similarity, w(s) = s/3) over row-major
/// `n x dim` matrices. Gradient outputs may be NULL; otherwise they must hold
/// `n * dim` doubles.
///
/// # Safety
/// Input pointers must reference `n * dim` (vectors) or `n` (labels)
/// elements; non-NULL outputs must be writable for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn ssra_weighted_infonce(
    queries: *const f64,
    documents: *const f64,
    labels: *const u8,
    n: usize,
    dim: usize,
    temperature: f64,
    out_loss: *mut f64,
    grad_queries: *mut f64,
    grad_documents: *mut f64,
) -> SsraStatus {
    guard(|| {
        if n == 0 || dim == 0 {
            return Err(FfiError::new(SsraStatus::InvalidArgument, "n and dim must be positive"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| FfiError::new(SsraStatus::InvalidArgument, "n * dim overflows"))?;
        let rows = |flat: &[f64]| flat.chunks(dim).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let q = rows(slice_arg(queries, len, "queries")?);
        let d = rows(slice_arg(documents, len, "documents")?);
        let labels = slice_arg(labels, n, "labels")?
            .iter()
            .map(|&l| label_arg(l))
            .collect::<Result<Vec<_>, _>>()?;
        let result = weighted_infonce(&EmbeddingBatch::new(q, d, labels, temperature), weight_default)?;
        write_out(out_loss, result.loss, "out_loss")?;
        for (out, grad) in [(grad_queries, &result.grad_queries), (grad_documents, &result.grad_documents)] {
            if !out.is_null() {
                let dst = std::slice::from_raw_parts_mut(out, len);
                for (chunk, row) in dst.chunks_mut(dim).zip(grad) {
                    chunk.copy_from_slice(row);
                }
            }
        }
        Ok(())
    })
}
