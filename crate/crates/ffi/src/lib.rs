//! C ABI over `nesy-dcsp`.
//!
//! Tasks and solution spaces are opaque heap handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns an
//! [`NdStatus`]; on failure [`nd_last_error_message`] describes what went wrong
//! on the calling thread. Strings handed out by the library are released with
//! [`nd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use nesy_dcsp::dcsp::{self, SolutionSpace, SolveOptions};
use nesy_dcsp::{ensemble, simulate, AbductionIndex, ConceptDistribution, Error, KnowledgeBase, TaskSpec};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Arity or concept-range violation.
    Domain = 3,
    /// An enumeration cap fired; results are partial.
    CapExceeded = 4,
    NoSolution = 5,
    /// Malformed task file or table.
    TaskFile = 6,
    Io = 7,
    /// The output buffer or index is out of range.
    OutOfRange = 8,
    Internal = 99,
}

/// Built-in knowledge bases.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdBuiltin {
    Add = 0,
    Mul = 1,
    Xor = 2,
    ModAdd = 3,
}

/// Task-level learnability verdict.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NdReport {
    pub learnable: bool,
    pub d: usize,
    pub concepts: usize,
    pub error_bound: f64,
    pub num_solutions: usize,
}

/// Outcome of one seeded sampling + ERM trial.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NdTrial {
    pub num_solutions: usize,
    /// NaN when the sampled problem had no solution.
    pub concept_error: f64,
    pub nesy_error: f64,
    pub covered: bool,
    pub complete: bool,
}

/// A knowledge base with its candidate pool and sampling distribution.
pub struct NdTask {
    index: AbductionIndex,
    distribution: ConceptDistribution,
    options: SolveOptions,
}

/// Enumerated solution space of a derived CSP.
pub struct NdSpace {
    space: SolutionSpace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> NdStatus {
    match err {
        Error::Arity { .. } | Error::Domain { .. } | Error::ConceptMismatch { .. } | Error::UnknownLabel(_) => {
            NdStatus::Domain
        }
        Error::BudgetExceeded { .. } | Error::IncompleteEnumeration { .. } => NdStatus::CapExceeded,
        Error::NoSolution | Error::AbductionFailure(_) => NdStatus::NoSolution,
        Error::TaskFile { .. }
        | Error::IncompleteTable { .. }
        | Error::ConflictingTable { .. }
        | Error::UnknownBuiltin(_) => NdStatus::TaskFile,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Manifest(_) => NdStatus::Io,
        Error::ParameterOutOfRange(_)
        | Error::InvalidPredictor(_)
        | Error::InvalidDistribution(_)
        | Error::EmptyEnsemble => NdStatus::InvalidArgument,
        #[allow(unreachable_patterns)]
        _ => NdStatus::Internal,
    }
}

/// Runs `f`, recording its error and converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), NdStatus>) -> NdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NdStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            NdStatus::Internal
        }
    }
}

fn fail(err: Error) -> NdStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> NdStatus {
    set_error(format!("{what} is null"));
    NdStatus::NullPointer
}

unsafe fn task_ref<'a>(task: *const NdTask) -> Result<&'a NdTask, NdStatus> {
    task.as_ref().ok_or_else(|| null("task"))
}

unsafe fn space_ref<'a>(space: *const NdSpace) -> Result<&'a NdSpace, NdStatus> {
    space.as_ref().ok_or_else(|| null("space"))
}

fn new_task(kb: KnowledgeBase) -> Result<NdTask, NdStatus> {
    let index = AbductionIndex::build(Arc::new(kb), nesy_dcsp::kb::DEFAULT_POOL_CAP).map_err(fail)?;
    let distribution = ConceptDistribution::uniform(&index);
    Ok(NdTask { index, distribution, options: SolveOptions::default() })
}

fn report_of(space: &SolutionSpace) -> Result<NdReport, NdStatus> {
    let r = dcsp::verdict(space).map_err(fail)?;
    Ok(NdReport {
        learnable: r.learnable,
        d: r.d,
        concepts: r.concepts,
        error_bound: r.error_bound,
        num_solutions: r.num_solutions,
    })
}

/// Creates a task from a built-in knowledge base with a uniform distribution
/// over its full candidate pool. `k` is only read for `ModAdd`; `concepts` and
/// `digits` are ignored for `Xor`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nd_task_new_builtin(
    builtin: NdBuiltin,
    k: u32,
    concepts: usize,
    digits: usize,
    out: *mut *mut NdTask,
) -> NdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kb = match builtin {
            NdBuiltin::Add => KnowledgeBase::addition(concepts, digits),
            NdBuiltin::Mul => KnowledgeBase::multiplication(concepts, digits),
            NdBuiltin::Xor => Ok(KnowledgeBase::xor()),
            NdBuiltin::ModAdd => KnowledgeBase::mod_add(k, concepts, digits),
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(new_task(kb)?));
        Ok(())
    })
}

/// Creates a task from task-file TOML text (NUL-terminated UTF-8).
///
/// # Safety
/// `toml` must be a valid C string and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nd_task_from_toml(toml: *const c_char, out: *mut *mut NdTask) -> NdStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|_| {
            set_error("task text is not UTF-8");
            NdStatus::InvalidArgument
        })?;
        let spec = TaskSpec::parse(text, "<ffi>").map_err(fail)?;
        let options = spec.options;
        let task = spec.build().map_err(fail)?;
        *out = Box::into_raw(Box::new(NdTask { index: task.index, distribution: task.distribution, options }));
        Ok(())
    })
}

/// Releases a task. Null is ignored.
///
/// # Safety
/// `task` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nd_task_free(task: *mut NdTask) {
    if !task.is_null() {
        drop(Box::from_raw(task));
    }
}

/// Overrides the solver settings used by later calls on this task.
///
/// # Safety
/// `task` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nd_task_set_options(task: *mut NdTask, injective: bool, solution_cap: usize) -> NdStatus {
    guard(|| {
        let task = task.as_mut().ok_or_else(|| null("task"))?;
        if solution_cap == 0 {
            set_error("solution_cap must be at least 1");
            return Err(NdStatus::InvalidArgument);
        }
        task.options = SolveOptions { injective, solution_cap };
        Ok(())
    })
}

/// Evaluates the knowledge base on `len` concepts.
///
/// # Safety
/// `task` must be a live handle, `z` must point to `len` readable values and
/// `out` to one writable label.
#[no_mangle]
pub unsafe extern "C" fn nd_task_forward(task: *const NdTask, z: *const u32, len: usize, out: *mut i64) -> NdStatus {
    guard(|| {
        let task = task_ref(task)?;
        if (z.is_null() && len > 0) || out.is_null() {
            return Err(null("z or out"));
        }
        let seq = if len == 0 { &[][..] } else { std::slice::from_raw_parts(z, len) };
        *out = task.index.kb().forward(seq).map_err(fail)?;
        Ok(())
    })
}

/// Candidate-pool size `|B|`.
///
/// # Safety
/// `task` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_task_pool_size(task: *const NdTask, out: *mut usize) -> NdStatus {
    guard(|| {
        let task = task_ref(task)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = task.index.pool_size();
        Ok(())
    })
}

/// Enumerates the task-level derived CSP.
///
/// # Safety
/// `task` must be a live handle and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nd_analyze(task: *const NdTask, out: *mut *mut NdSpace) -> NdStatus {
    guard(|| {
        let task = task_ref(task)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let space = dcsp::solve_task(&task.index, &task.options).map_err(fail)?;
        *out = Box::into_raw(Box::new(NdSpace { space }));
        Ok(())
    })
}

/// Enumerates the merged CSP of `count` tasks over the same concepts, using
/// the first task's solver settings.
///
/// # Safety
/// `tasks` must point to `count` live handles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn nd_ensemble_analyze(
    tasks: *const *const NdTask,
    count: usize,
    out: *mut *mut NdSpace,
) -> NdStatus {
    guard(|| {
        if tasks.is_null() || out.is_null() {
            return Err(null("tasks or out"));
        }
        let handles = std::slice::from_raw_parts(tasks, count);
        let members = handles.iter().map(|&t| task_ref(t).map(|t| t.index.clone())).collect::<Result<Vec<_>, _>>()?;
        let options = match handles.first() {
            Some(&t) => task_ref(t)?.options,
            None => return Err(fail(Error::EmptyEnsemble)),
        };
        let space = ensemble::solve_ensemble(&members, &options).map_err(fail)?;
        *out = Box::into_raw(Box::new(NdSpace { space }));
        Ok(())
    })
}

/// Releases a space. Null is ignored.
///
/// # Safety
/// `space` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nd_space_free(space: *mut NdSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Number of enumerated solutions (at most the cap when incomplete).
///
/// # Safety
/// `space` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nd_space_num_solutions(space: *const NdSpace) -> usize {
    space.as_ref().map_or(0, |s| s.space.num_solutions())
}

/// Whether enumeration finished below the cap.
///
/// # Safety
/// `space` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nd_space_is_complete(space: *const NdSpace) -> bool {
    space.as_ref().is_some_and(|s| s.space.is_complete())
}

/// Disagreement `d`: variables not fixed across all solutions.
///
/// # Safety
/// `space` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_space_disagreement(space: *const NdSpace, out: *mut usize) -> NdStatus {
    guard(|| {
        let space = space_ref(space)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = dcsp::disagreement(&space.space).map_err(fail)?.0;
        Ok(())
    })
}

/// Copies solution `i` into `buf` (capacity `len`, which must be at least `L`).
///
/// # Safety
/// `space` must be a live handle and `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn nd_space_solution(space: *const NdSpace, i: usize, buf: *mut u32, len: usize) -> NdStatus {
    guard(|| {
        let space = space_ref(space)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let Some(solution) = space.space.solutions().get(i) else {
            set_error(format!("solution index {i} out of range ({})", space.space.num_solutions()));
            return Err(NdStatus::OutOfRange);
        };
        if len < solution.len() {
            set_error(format!("buffer holds {len} values, need {}", solution.len()));
            return Err(NdStatus::OutOfRange);
        }
        ptr::copy_nonoverlapping(solution.as_ptr(), buf, solution.len());
        Ok(())
    })
}

/// Learnability verdict; fails with `CapExceeded` or `NoSolution` when none applies.
///
/// # Safety
/// `space` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_report(space: *const NdSpace, out: *mut NdReport) -> NdStatus {
    guard(|| {
        let space = space_ref(space)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = report_of(&space.space)?;
        Ok(())
    })
}

/// JSON summary of the space; listing at most `list_limit` solutions. Free
/// the result with [`nd_string_free`].
///
/// # Safety
/// `space` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_space_to_json(space: *const NdSpace, list_limit: usize, out: *mut *mut c_char) -> NdStatus {
    guard(|| {
        let space = space_ref(space)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = space.space.to_json(list_limit).to_string();
        *out = CString::new(text).map_err(|_| NdStatus::Internal)?.into_raw();
        Ok(())
    })
}

/// `(1/kappa) ln(|B|/epsilon)` for the task's distribution.
///
/// # Safety
/// `task` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_sample_complexity_bound(task: *const NdTask, epsilon: f64, out: *mut f64) -> NdStatus {
    guard(|| {
        let task = task_ref(task)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = simulate::sample_complexity_bound(&task.index, &task.distribution, epsilon).map_err(fail)?.bound;
        Ok(())
    })
}

/// Draws `samples` labelled sequences with `seed` and picks a consistent
/// solution uniformly at random.
///
/// # Safety
/// `task` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nd_erm_trial(task: *const NdTask, samples: usize, seed: u64, out: *mut NdTrial) -> NdStatus {
    guard(|| {
        let task = task_ref(task)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = simulate::erm_trial(&task.index, &task.distribution, samples, seed, &task.options).map_err(fail)?;
        *out = NdTrial {
            num_solutions: t.num_solutions,
            concept_error: t.concept_error,
            nesy_error: t.nesy_error,
            covered: t.covered,
            complete: t.complete,
        };
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn nd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
