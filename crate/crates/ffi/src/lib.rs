//! C ABI over the `peaksync` library.
//!
//! Conventions:
//! - every fallible call returns a [`PsStatus`]; details of the most recent
//!   failure on the calling thread are available from
//!   [`ps_last_error_message`];
//! - objects are opaque handles created by `*_new`/`*_build`/`*_read`
//!   functions and released with the matching `*_free` (null is accepted);
//! - caller-owned buffers are passed as pointer plus length, and outputs
//!   are written only on success;
//! - peak trains are `uint8_t` arrays of 0/1, multichannel data is
//!   row-major (`channel * n_samples + t`);
//! - panics never cross the boundary; they surface as `PS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use peaksync::correlate::{corr_matrix, symmetric_eigenvalues};
use peaksync::surrogate::{significance_threshold, SurrogateConfig};
use peaksync::sync::compound_values;
use peaksync::{
    build_weights, detect_peaks, multi_sync, pairwise_sync, DensitySpec, DetectorConfig, Error,
    FilterSpec, MultiChannelRecord, PeakTrain, Pipeline, Polarity, WeightVector,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments violate a documented precondition.
    Validation = 2,
    /// Input data could not be parsed.
    Parse = 3,
    /// A file could not be read or written.
    Io = 4,
    /// A string argument was not valid UTF-8.
    InvalidString = 5,
    /// An output buffer is too small.
    BufferTooSmall = 6,
    /// Internal failure; the library state is unaffected.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsDensity {
    Gaussian = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsPolarity {
    Positive = 0,
    Negative = 1,
    Both = 2,
}

impl From<PsPolarity> for Polarity {
    fn from(p: PsPolarity) -> Self {
        match p {
            PsPolarity::Positive => Polarity::Positive,
            PsPolarity::Negative => Polarity::Negative,
            PsPolarity::Both => Polarity::Both,
        }
    }
}

/// Opaque weight vector.
pub struct PsWeights(WeightVector);

/// Opaque multichannel record.
pub struct PsRecord(MultiChannelRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Status(PsStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn fail(status: PsStatus, msg: impl Into<String>) -> Failure {
    Failure::Status(status, msg.into())
}

fn guard(f: impl FnOnce() -> Outcome) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PsStatus::Ok
        }
        Ok(Err(Failure::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Ok(Err(Failure::Lib(e))) => {
            let status = match e {
                Error::Parse { .. } => PsStatus::Parse,
                Error::Validation(_) => PsStatus::Validation,
                Error::Io { .. } => PsStatus::Io,
            };
            set_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            PsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> std::result::Result<(), Failure> {
    if p.is_null() {
        Err(fail(PsStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be valid for `len` reads when non-null.
unsafe fn input<'a, T>(
    p: *const T,
    len: usize,
    name: &str,
) -> std::result::Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be valid for `len` writes when non-null.
unsafe fn output<'a, T>(
    p: *mut T,
    len: usize,
    name: &str,
) -> std::result::Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

fn trains_from(data: &[u8], r: usize, n: usize) -> std::result::Result<Vec<PeakTrain>, Failure> {
    data.chunks_exact(n.max(1))
        .take(r)
        .enumerate()
        .map(|(k, row)| Ok(PeakTrain::new(format!("ch{}", k + 1), row.to_vec())?))
        .collect()
}

fn checked_area(r: usize, n: usize) -> std::result::Result<usize, Failure> {
    r.checked_mul(n)
        .ok_or_else(|| fail(PsStatus::Validation, "dimensions overflow"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or null after a
/// success. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds the lag weight vector for a symmetric density. `scale` is the
/// Gaussian sigma or the uniform half-width.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ps_weights_build(
    a0: f64,
    tau: f64,
    density: PsDensity,
    scale: f64,
    out: *mut *mut PsWeights,
) -> PsStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = match density {
            PsDensity::Gaussian => DensitySpec::Gaussian { sigma: scale },
            PsDensity::Uniform => DensitySpec::Uniform { half_width: scale },
        };
        let w = build_weights(a0, tau, &d)?;
        *out = Box::into_raw(Box::new(PsWeights(w)));
        Ok(())
    })
}

/// Half-support `n`; the vector has `2n + 1` entries. Returns 0 for null.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_weights_half_support(w: *const PsWeights) -> usize {
    w.as_ref().map_or(0, |w| w.0.n())
}

/// Number of coefficients (`2n + 1`). Returns 0 for null.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_weights_len(w: *const PsWeights) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Copies `a_{-n} .. a_n` into `buf`, which must hold `ps_weights_len`
/// values.
///
/// # Safety
/// `w` must be a live handle and `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn ps_weights_copy(
    w: *const PsWeights,
    buf: *mut f64,
    cap: usize,
) -> PsStatus {
    guard(|| {
        non_null(w, "w")?;
        let coeffs = (*w).0.coefficients();
        if cap < coeffs.len() {
            return Err(fail(
                PsStatus::BufferTooSmall,
                format!("buffer holds {cap} values, need {}", coeffs.len()),
            ));
        }
        output(buf, coeffs.len(), "buf")?.copy_from_slice(coeffs);
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_weights_free(w: *mut PsWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Loads a CSV or binary record.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_record_read(
    path: *const c_char,
    sample_rate_hz: f64,
    out: *mut *mut PsRecord,
) -> PsStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(PsStatus::InvalidString, "path is not UTF-8"))?;
        let rec = peaksync::ingest::read_record(path, sample_rate_hz)?;
        *out = Box::into_raw(Box::new(PsRecord(rec)));
        Ok(())
    })
}

/// Wraps row-major samples; channels are labelled `ch1`, `ch2`, ...
///
/// # Safety
/// `samples` must be valid for `n_channels * n_samples` reads and `out`
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_record_from_samples(
    samples: *const f64,
    n_channels: usize,
    n_samples: usize,
    sample_rate_hz: f64,
    out: *mut *mut PsRecord,
) -> PsStatus {
    guard(|| {
        non_null(out, "out")?;
        let data = input(samples, checked_area(n_channels, n_samples)?, "samples")?;
        let rows: Vec<Vec<f64>> = data
            .chunks_exact(n_samples.max(1))
            .map(<[f64]>::to_vec)
            .collect();
        let labels = (1..=n_channels).map(|k| format!("ch{k}")).collect();
        let rec = MultiChannelRecord::new(labels, rows, sample_rate_hz)?;
        *out = Box::into_raw(Box::new(PsRecord(rec)));
        Ok(())
    })
}

/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_record_n_channels(rec: *const PsRecord) -> usize {
    rec.as_ref().map_or(0, |r| r.0.n_channels())
}

/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_record_n_samples(rec: *const PsRecord) -> usize {
    rec.as_ref().map_or(0, |r| r.0.n_samples())
}

/// # Safety
/// `rec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_record_free(rec: *mut PsRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Marks threshold-crossing local maxima of one channel in `out` (0/1).
///
/// # Safety
/// `samples` and `out` must each be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ps_detect_peaks(
    samples: *const f64,
    len: usize,
    window_len: usize,
    multiplier: f64,
    polarity: PsPolarity,
    out: *mut u8,
) -> PsStatus {
    guard(|| {
        let x = input(samples, len, "samples")?;
        let cfg = DetectorConfig {
            window_len,
            multiplier,
            polarity: polarity.into(),
        };
        let train = detect_peaks(x, &cfg)?;
        output(out, len, "out")?.copy_from_slice(train.indicators());
        Ok(())
    })
}

/// Pairwise synchronization series of two 0/1 trains of length `len`.
///
/// # Safety
/// `p1`, `p2` and `out` must each be valid for `len` elements; `w` must be
/// a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_pairwise_sync(
    p1: *const u8,
    p2: *const u8,
    len: usize,
    w: *const PsWeights,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(w, "w")?;
        let a = PeakTrain::new("a", input(p1, len, "p1")?.to_vec())?;
        let b = PeakTrain::new("b", input(p2, len, "p2")?.to_vec())?;
        let s = pairwise_sync(&a, &b, &(*w).0)?;
        output(out, len, "out")?.copy_from_slice(s.values());
        Ok(())
    })
}

/// Group synchronization series of `r` row-major 0/1 trains of length
/// `len`.
///
/// # Safety
/// `trains` must be valid for `r * len` reads, `out` for `len` writes and
/// `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_multi_sync(
    trains: *const u8,
    r: usize,
    len: usize,
    w: *const PsWeights,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(w, "w")?;
        let data = input(trains, checked_area(r, len)?, "trains")?;
        let s = multi_sync(&trains_from(data, r, len)?, &(*w).0)?;
        output(out, len, "out")?.copy_from_slice(s.values());
        Ok(())
    })
}

/// Mean of `values[t0 .. t0 + span]`.
///
/// # Safety
/// `values` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_compound(
    values: *const f64,
    len: usize,
    t0: usize,
    span: usize,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = compound_values(input(values, len, "values")?, t0, span)?;
        Ok(())
    })
}

fn pipeline(rec: &MultiChannelRecord, filter: bool, w: &WeightVector) -> Pipeline {
    Pipeline {
        filter: filter.then(FilterSpec::default),
        detector: DetectorConfig::for_sample_rate(rec.sample_rate_hz()),
        weights: w.clone(),
    }
}

/// Full pipeline over every channel of `rec`: optional default filtering
/// (25-100 Hz band-pass, 49-51 Hz notch), default detection, then the
/// group series, written to `out` (`ps_record_n_samples` values).
///
/// # Safety
/// `rec` and `w` must be live handles; `out` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn ps_record_sync(
    rec: *const PsRecord,
    apply_filter: bool,
    w: *const PsWeights,
    out: *mut f64,
    cap: usize,
) -> PsStatus {
    guard(|| {
        non_null(rec, "rec")?;
        non_null(w, "w")?;
        let rec = &(*rec).0;
        if cap < rec.n_samples() {
            return Err(fail(
                PsStatus::BufferTooSmall,
                format!("buffer holds {cap} values, need {}", rec.n_samples()),
            ));
        }
        let s = pipeline(rec, apply_filter, &(*w).0).run(rec)?;
        output(out, s.len(), "out")?.copy_from_slice(s.values());
        Ok(())
    })
}

/// Surrogate significance threshold over all channels of `rec` using the
/// same pipeline as [`ps_record_sync`].
///
/// # Safety
/// `rec` and `w` must be live handles and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_significance_threshold(
    rec: *const PsRecord,
    apply_filter: bool,
    w: *const PsWeights,
    count: usize,
    percentile: f64,
    seed: u64,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        non_null(rec, "rec")?;
        non_null(w, "w")?;
        non_null(out, "out")?;
        let rec = &(*rec).0;
        let cfg = SurrogateConfig {
            count,
            percentile,
            seed,
            block: None,
        };
        *out = significance_threshold(
            rec,
            rec.labels(),
            &pipeline(rec, apply_filter, &(*w).0),
            &cfg,
        )?;
        Ok(())
    })
}

/// Descending eigenvalues of the correlation matrix of `r` row-major
/// channels of `m` samples, written to `out` (`r` values).
///
/// # Safety
/// `window` must be valid for `r * m` reads and `out` for `r` writes.
#[no_mangle]
pub unsafe extern "C" fn ps_corr_eigenvalues(
    window: *const f64,
    r: usize,
    m: usize,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        let data = input(window, checked_area(r, m)?, "window")?;
        let rows: Vec<&[f64]> = data.chunks_exact(m.max(1)).take(r).collect();
        if rows.len() != r {
            return Err(fail(
                PsStatus::Validation,
                "window needs at least one sample per channel",
            ));
        }
        let eig = symmetric_eigenvalues(&corr_matrix(&rows)?);
        output(out, r, "out")?.copy_from_slice(&eig);
        Ok(())
    })
}
