//! C interface to scalestat.
//!
//! Every fallible function returns an [`SsStatus`]. On failure a message is
//! stored per thread and can be read with [`ss_last_error`]. Objects are
//! passed as opaque handles that the caller releases with the matching
//! `*_free` function. Square matrices are flat arrays in column-major order;
//! dense outputs of low-rank estimates are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use scalestat::bench::evaluate_body;
use scalestat::convex::{
    self, project_elliptope, project_nuclear_ball, project_polytope, ConeOptions, ConvexBody, Elliptope, FullSpace,
    NuclearBall, Polytope, SignalSpec,
};
use scalestat::dfc::{dfc_proj, DfcConfig};
use scalestat::estimators::{EstimatorKind, EstimatorSpec, QualityFunctional};
use scalestat::matcomp::{complete, CompletionConfig, LowRankEstimate};
use scalestat::resampling::{blb, bootstrap, m_out_of_n, BlbConfig, Weighting};
use scalestat::{Dataset, Error, ObservedMatrix, RngStream};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SingularDesign = 3,
    NonConvergence = 4,
    Numerical = 5,
    UndefinedMetric = 6,
    InfeasibleScale = 7,
    AllFailed = 8,
    Parse = 9,
    Config = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::InvalidArgument(_) => SsStatus::InvalidArgument,
            Error::SingularDesign(_) => SsStatus::SingularDesign,
            Error::NonConvergence { .. } => SsStatus::NonConvergence,
            Error::Numerical(_) => SsStatus::Numerical,
            Error::UndefinedMetric(_) => SsStatus::UndefinedMetric,
            Error::InfeasibleScale { .. } => SsStatus::InfeasibleScale,
            Error::AllFailed { .. } => SsStatus::AllFailed,
            Error::Parse(_) => SsStatus::Parse,
            Error::Config(_) => SsStatus::Config,
            Error::Io(_) => SsStatus::Io,
            Error::Resample { .. } => SsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SsStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure(SsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn output<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> FfiResult<&'a mut [T]> {
    non_null(p, what)?;
    if len < needed {
        return Err(Failure(
            SsStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

/// # Safety
/// `out` must be null or writable.
unsafe fn publish<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    non_null(out, "output handle")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus
/// one, or 0 when there is no message. `buf` may be null to query the size.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Version string of the library; static, do not free.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------- datasets

pub struct SsDataset(Dataset);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsEstimator {
    Mean,
    LinearRegression,
    LogisticRegression,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsWeighting {
    Poisson,
    Multinomial,
}

fn estimator(kind: SsEstimator, d: usize) -> EstimatorSpec {
    let kind = match kind {
        SsEstimator::Mean => EstimatorKind::Mean,
        SsEstimator::LinearRegression => EstimatorKind::LinearRegression,
        SsEstimator::LogisticRegression => EstimatorKind::LogisticRegression,
    };
    EstimatorSpec::new(kind, d)
}

/// Builds a dataset from `n x d` row-major features and an optional
/// response of length `n` (may be null).
///
/// # Safety
/// `features` must point to `n * d` values, `response` to `n` values or be
/// null, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_new(
    features: *const f64,
    n: usize,
    d: usize,
    response: *const f64,
    out: *mut *mut SsDataset,
) -> SsStatus {
    guard(|| {
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let x = input(features, len, "features")?.to_vec();
        let y = if response.is_null() {
            None
        } else {
            Some(input(response, n, "response")?.to_vec())
        };
        publish(out, SsDataset(Dataset::new(x, d, y)?))
    })
}

/// # Safety
/// `ds` must be null or a handle from [`ss_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_free(ds: *mut SsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live dataset handle.
unsafe fn dataset<'a>(ds: *const SsDataset) -> FfiResult<&'a Dataset> {
    non_null(ds, "dataset")?;
    Ok(&(*ds).0)
}

/// Percentile confidence-interval widths from the bootstrap with
/// `resamples` resamples. `out` receives one width per coordinate.
///
/// # Safety
/// `ds` must be a live handle and `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ss_bootstrap_ci_widths(
    ds: *const SsDataset,
    kind: SsEstimator,
    resamples: usize,
    alpha: f64,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> SsStatus {
    guard(|| {
        let data = dataset(ds)?;
        let spec = estimator(kind, data.d());
        let res = bootstrap(data, &spec, resamples, QualityFunctional::CiWidth { alpha }, &RngStream::from_seed(seed))?;
        let v = &res.quality.values;
        output(out, out_len, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Widths from resamples of size `m`, rescaled by `sqrt(m / n)`. Draws are
/// with replacement when `with_replacement` is set, subsampling otherwise.
///
/// # Safety
/// As for [`ss_bootstrap_ci_widths`].
#[no_mangle]
pub unsafe extern "C" fn ss_m_out_of_n_ci_widths(
    ds: *const SsDataset,
    kind: SsEstimator,
    m: usize,
    resamples: usize,
    with_replacement: bool,
    alpha: f64,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> SsStatus {
    guard(|| {
        let data = dataset(ds)?;
        let spec = estimator(kind, data.d());
        let res = m_out_of_n(
            data,
            &spec,
            m,
            resamples,
            with_replacement,
            QualityFunctional::CiWidth { alpha },
            &RngStream::from_seed(seed),
        )?;
        let v = &res.quality.values;
        output(out, out_len, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsBlbOptions {
    /// Subsample size is `ceil(n^gamma)`.
    pub gamma: f64,
    pub s: usize,
    pub r: usize,
    pub weighting: SsWeighting,
    pub alpha: f64,
}

#[no_mangle]
pub extern "C" fn ss_blb_options_default() -> SsBlbOptions {
    SsBlbOptions {
        gamma: 0.7,
        s: 10,
        r: 50,
        weighting: SsWeighting::Poisson,
        alpha: 0.05,
    }
}

/// Bag of little bootstraps. `dropped`, when not null, receives the number
/// of subsamples whose assessment could not be formed.
///
/// # Safety
/// `ds` and `opts` must be valid, `out` must hold `out_len` values and
/// `dropped` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ss_blb_ci_widths(
    ds: *const SsDataset,
    kind: SsEstimator,
    opts: *const SsBlbOptions,
    seed: u64,
    out: *mut f64,
    out_len: usize,
    dropped: *mut usize,
) -> SsStatus {
    guard(|| {
        let data = dataset(ds)?;
        non_null(opts, "options")?;
        let o = *opts;
        let mut cfg = BlbConfig::new(o.gamma, o.s, o.r);
        cfg.weighting = match o.weighting {
            SsWeighting::Poisson => Weighting::Poisson,
            SsWeighting::Multinomial => Weighting::Multinomial,
        };
        cfg.functional = QualityFunctional::CiWidth { alpha: o.alpha };
        let res = blb(data, &estimator(kind, data.d()), &cfg, &RngStream::from_seed(seed))?;
        let v = &res.quality.values;
        output(out, out_len, v.len(), "out")?.copy_from_slice(v);
        if !dropped.is_null() {
            *dropped = res.dropped.len();
        }
        Ok(())
    })
}

// ------------------------------------------------------- matrix completion

pub struct SsObserved(ObservedMatrix);

pub struct SsLowRank(LowRankEstimate);

/// Observed entries `(rows[k], cols[k]) -> values[k]`, zero-based.
///
/// # Safety
/// `rows`, `cols` and `values` must each point to `len` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_observed_new(
    nrows: usize,
    ncols: usize,
    rows: *const usize,
    cols: *const usize,
    values: *const f64,
    len: usize,
    out: *mut *mut SsObserved,
) -> SsStatus {
    guard(|| {
        let r = input(rows, len, "rows")?;
        let c = input(cols, len, "cols")?;
        let v = input(values, len, "values")?;
        let omega = r.iter().copied().zip(c.iter().copied()).collect();
        publish(out, SsObserved(ObservedMatrix::new(nrows, ncols, omega, v.to_vec())?))
    })
}

/// # Safety
/// `obs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_observed_free(obs: *mut SsObserved) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsCompletionMode {
    Penalized,
    Constrained,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsCompletionOptions {
    pub mode: SsCompletionMode,
    /// Used in penalized mode.
    pub lambda: f64,
    /// Residual budget, used in constrained mode.
    pub delta: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// 0 leaves the rank uncapped.
    pub rank_cap: usize,
    pub seed: u64,
}

/// Constrained mode with `delta = 0` (interpolate the observations).
#[no_mangle]
pub extern "C" fn ss_completion_options_default() -> SsCompletionOptions {
    let c = CompletionConfig::constrained(0.0);
    SsCompletionOptions {
        mode: SsCompletionMode::Constrained,
        lambda: 1.0,
        delta: 0.0,
        max_iters: c.max_iters,
        tol: c.tol,
        rank_cap: 0,
        seed: c.seed,
    }
}

fn completion_config(o: &SsCompletionOptions) -> CompletionConfig {
    let mut c = match o.mode {
        SsCompletionMode::Penalized => CompletionConfig::penalized(o.lambda),
        SsCompletionMode::Constrained => CompletionConfig::constrained(o.delta),
    };
    c.max_iters = o.max_iters;
    c.tol = o.tol;
    c.rank_cap = (o.rank_cap > 0).then_some(o.rank_cap);
    c.seed = o.seed;
    c
}

/// # Safety
/// `obs` and `opts` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_complete(
    obs: *const SsObserved,
    opts: *const SsCompletionOptions,
    out: *mut *mut SsLowRank,
) -> SsStatus {
    guard(|| {
        non_null(obs, "observed matrix")?;
        non_null(opts, "options")?;
        let res = complete(&(*obs).0, &completion_config(&*opts))?;
        publish(out, SsLowRank(res.estimate))
    })
}

/// DFC-Proj with `t` column blocks completed on up to `parallelism` threads.
///
/// # Safety
/// As for [`ss_complete`].
#[no_mangle]
pub unsafe extern "C" fn ss_dfc(
    obs: *const SsObserved,
    opts: *const SsCompletionOptions,
    t: usize,
    ensemble: bool,
    parallelism: usize,
    seed: u64,
    out: *mut *mut SsLowRank,
) -> SsStatus {
    guard(|| {
        non_null(obs, "observed matrix")?;
        non_null(opts, "options")?;
        let mut cfg = DfcConfig::new(t, completion_config(&*opts));
        cfg.ensemble = ensemble;
        cfg.parallelism = parallelism;
        cfg.seed = seed;
        let res = dfc_proj(&(*obs).0, &cfg)?;
        publish(out, SsLowRank(res.estimate))
    })
}

/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_lowrank_free(est: *mut SsLowRank) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Rows, columns and rank of an estimate. Any output may be null.
///
/// # Safety
/// `est` must be a live handle; the outputs must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ss_lowrank_shape(
    est: *const SsLowRank,
    nrows: *mut usize,
    ncols: *mut usize,
    rank: *mut usize,
) -> SsStatus {
    guard(|| {
        non_null(est, "estimate")?;
        let e = &(*est).0;
        for (p, v) in [(nrows, e.nrows()), (ncols, e.ncols()), (rank, e.rank())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Writes the dense estimate in row-major order.
///
/// # Safety
/// `est` must be a live handle and `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ss_lowrank_dense(est: *const SsLowRank, out: *mut f64, out_len: usize) -> SsStatus {
    guard(|| {
        non_null(est, "estimate")?;
        let e = &(*est).0;
        let dense = e.to_dense()?;
        let buf = output(out, out_len, e.nrows() * e.ncols(), "out")?;
        for i in 0..e.nrows() {
            for j in 0..e.ncols() {
                buf[i * e.ncols() + j] = dense[(i, j)];
            }
        }
        Ok(())
    })
}

// ------------------------------------------------------------ projections

/// Projection of a `q x q` matrix onto the nuclear-norm ball of `radius`.
///
/// # Safety
/// `x` and `out` must each hold `q * q` values.
#[no_mangle]
pub unsafe extern "C" fn ss_project_nuclear_ball(x: *const f64, q: usize, radius: f64, out: *mut f64) -> SsStatus {
    guard(|| {
        let m = DMatrix::from_column_slice(q, q, input(x, q * q, "x")?);
        let p = project_nuclear_ball(&m, radius)?;
        output(out, q * q, q * q, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Nearest correlation matrix to a `q x q` matrix. `converged` may be null.
///
/// # Safety
/// `x` and `out` must each hold `q * q` values.
#[no_mangle]
pub unsafe extern "C" fn ss_project_elliptope(
    x: *const f64,
    q: usize,
    tol: f64,
    max_iters: usize,
    out: *mut f64,
    converged: *mut bool,
) -> SsStatus {
    guard(|| {
        let m = DMatrix::from_column_slice(q, q, input(x, q * q, "x")?);
        let p = project_elliptope(&m, tol, max_iters)?;
        output(out, q * q, q * q, "out")?.copy_from_slice(&p.point);
        if !converged.is_null() {
            *converged = p.converged;
        }
        Ok(())
    })
}

/// Nearest point of the convex hull of `count` vertices of dimension `dim`
/// (stored one after another). `converged` may be null.
///
/// # Safety
/// `vertices` must hold `count * dim` values, `y` and `out` `dim` values.
#[no_mangle]
pub unsafe extern "C" fn ss_project_polytope(
    vertices: *const f64,
    count: usize,
    dim: usize,
    y: *const f64,
    gap_tol: f64,
    max_iters: usize,
    out: *mut f64,
    converged: *mut bool,
) -> SsStatus {
    guard(|| {
        if count == 0 || dim == 0 {
            return Err(invalid("a polytope needs at least one vertex of positive dimension"));
        }
        let v = DMatrix::from_column_slice(dim, count, input(vertices, count * dim, "vertices")?);
        let p = project_polytope(&v, input(y, dim, "y")?, gap_tol, max_iters);
        output(out, dim, dim, "out")?.copy_from_slice(&p.point);
        if !converged.is_null() {
            *converged = p.converged;
        }
        Ok(())
    })
}

// ------------------------------------------------------- denoising tables

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsSignal {
    CutMatrix,
    SparsePca,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsBody {
    FullSpace,
    /// Convex hull of the signal family.
    Hull,
    Elliptope,
    NuclearBall,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SsBodyReport {
    pub complexity: f64,
    pub complexity_se: f64,
    pub n_unit_risk: u64,
    pub risk: f64,
    pub risk_se: f64,
    pub risk_bound: f64,
    pub risk_bound_se: f64,
    pub unconverged: usize,
    pub projection_seconds: f64,
}

/// Complexity of the tangent cone at a random signal, the sample size for
/// unit risk, and the risk attained at that size. `k` is ignored for cut
/// matrices.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_body_report(
    signal: SsSignal,
    p: usize,
    k: usize,
    body: SsBody,
    sigma: f64,
    trials: usize,
    seed: u64,
    out: *mut SsBodyReport,
) -> SsStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = match signal {
            SsSignal::CutMatrix => SignalSpec::CutMatrix { p },
            SsSignal::SparsePca => SignalSpec::SparsePca { p, k },
        };
        let q = spec.side()?;
        let root = RngStream::from_seed(seed);
        let x_star = spec.sample(&root.derive(0))?;
        let b: Box<dyn ConvexBody> = match body {
            SsBody::FullSpace => Box::new(FullSpace { p }),
            SsBody::Hull => Box::new(spec.hull()?),
            SsBody::Elliptope => Box::new(Elliptope::new(q)),
            SsBody::NuclearBall => Box::new(NuclearBall::for_signals(p)?),
        };
        let r = evaluate_body(
            b.as_ref(),
            &x_star,
            sigma,
            trials,
            &ConeOptions::default(),
            &root.derive(1),
            &root.derive(2),
            &root.derive(3),
        )?;
        *out = SsBodyReport {
            complexity: r.complexity,
            complexity_se: r.complexity_se,
            n_unit_risk: r.n_unit_risk,
            risk: r.risk,
            risk_se: r.risk_se,
            risk_bound: r.risk_bound,
            risk_bound_se: r.risk_bound_se,
            unconverged: r.unconverged,
            projection_seconds: r.projection_seconds,
        };
        Ok(())
    })
}

/// Number of vertices of the cut polytope for `p = q^2`, or
/// `SS_STATUS_INFEASIBLE_SCALE` past the enumeration cap.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_cut_polytope_vertex_count(p: usize, out: *mut usize) -> SsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Polytope::cut(p)?.vertex_count();
        Ok(())
    })
}

// ------------------------------------------------------------------ bounds

/// Sample size from the noisy matrix-completion guarantee.
#[no_mangle]
pub extern "C" fn ss_theorem1_sample_bound(m: f64, n: f64, mu: f64, r: f64) -> f64 {
    scalestat::matcomp::theorem1_sample_bound(m, n, mu, r)
}

/// Columns per DFC block sufficient for the projection guarantee.
#[no_mangle]
pub extern "C" fn ss_theorem2_column_bound(m: f64, n: f64, s: f64, mu: f64, r: f64, eps: f64, c: f64) -> f64 {
    scalestat::dfc::theorem2_column_bound(m, n, s, mu, r, eps, c)
}

/// `ceil(sigma^2 * complexity)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_sample_size_for_unit_risk(sigma: f64, complexity: f64, out: *mut u64) -> SsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = convex::sample_size_for_unit_risk(sigma, complexity)?;
        Ok(())
    })
}
