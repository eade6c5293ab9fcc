//! C interface to the `incell` library.
//!
//! Models and datasets cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! function returns an [`IncellStatus`]; on failure a description is kept per
//! thread and can be read with [`incell_last_error`].
//!
//! Tensors are passed as row-major `double` buffers of `steps * features`
//! values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use incell::cells::{Architecture, Model, ModelSpec};
use incell::data::synthetic::{self, BoxKind, DatasetConfig};
use incell::data::{icts, Dataset, Splits};
use incell::train::{self, TrainConfig};
use incell::{checkpoint, metrics, saliency, Error, Tensor};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncellStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, configuration or broken contract.
    Invalid = 2,
    /// Buffer or tensor dimensions disagree.
    Shape = 3,
    /// Malformed checkpoint or dataset file.
    Format = 4,
    /// NaN or infinity in a computation, or training diverged.
    NonFinite = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary. Indicates a bug.
    Internal = 7,
}

/// Trained (or loaded) classifier.
pub struct IncellModel(Model);

/// Labelled set of `steps x features` series.
pub struct IncellDataset(Dataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IncellStatus {
    match e {
        Error::Shape { .. } => IncellStatus::Shape,
        Error::Contract(_) | Error::Validation(_) => IncellStatus::Invalid,
        Error::Format { .. } => IncellStatus::Format,
        Error::NonFinite { .. } | Error::NonFiniteGradient { .. } | Error::Divergence { .. } => IncellStatus::NonFinite,
        Error::File { .. } | Error::Io(_) => IncellStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> IncellStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IncellStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is NULL"));
            IncellStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            IncellStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::Validation(format!("{what} is not valid UTF-8"))))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn check_len(what: &'static str, got: usize, want: usize) -> FfiResult {
    if got != want {
        return Err(Fail::Core(Error::Shape {
            op: what,
            left: vec![got],
            right: vec![want],
        }));
    }
    Ok(())
}

fn series(model: &Model, values: &[f64]) -> Result<Tensor, Fail> {
    let (t, n) = (model.spec.steps, model.spec.features);
    check_len("series length", values.len(), t * n)?;
    Ok(Tensor::matrix(t, n, values.to_vec())?)
}

/// Message describing the most recent failure on this thread, or NULL if
/// none. The string stays valid until the next failing call on the same
/// thread.
#[no_mangle]
pub extern "C" fn incell_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates the training and test splits of a synthetic box dataset.
/// `kind` is a name such as `"earlier"`, `"three-latter"` or `"moving-40"`.
/// Zero for `steps`, `features`, `train` or `test` keeps the default
/// (100, 100, 1000, 300).
///
/// # Safety
/// `kind` must be a NUL-terminated string; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_generate(
    kind: *const c_char,
    steps: usize,
    features: usize,
    train: usize,
    test: usize,
    seed: u64,
    out_train: *mut *mut IncellDataset,
    out_test: *mut *mut IncellDataset,
) -> IncellStatus {
    guard(|| {
        let kind: BoxKind = text(kind, "kind")?.parse()?;
        let (out_train, out_test) = (out(out_train, "out_train")?, out(out_test, "out_test")?);
        let mut config = DatasetConfig::new(kind, seed);
        for (slot, v) in [
            (&mut config.steps, steps),
            (&mut config.features, features),
            (&mut config.train, train),
            (&mut config.test, test),
        ] {
            if v > 0 {
                *slot = v;
            }
        }
        let Splits { train, test } = synthetic::generate(&config)?;
        *out_train = Box::into_raw(Box::new(IncellDataset(train)));
        *out_test = Box::into_raw(Box::new(IncellDataset(test)));
        Ok(())
    })
}

/// Reads a dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_dataset` valid.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_load(path: *const c_char, out_dataset: *mut *mut IncellDataset) -> IncellStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let slot = out(out_dataset, "out_dataset")?;
        *slot = Box::into_raw(Box::new(IncellDataset(icts::load(&path)?)));
        Ok(())
    })
}

/// Writes a dataset file.
///
/// # Safety
/// `dataset` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_save(dataset: *const IncellDataset, path: *const c_char) -> IncellStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        icts::save(&d.0, &PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_free(dataset: *mut IncellDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_len(dataset: *const IncellDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Sequence length, feature count and class count of a dataset.
///
/// # Safety
/// `dataset` must come from this library; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_dims(
    dataset: *const IncellDataset,
    steps: *mut usize,
    features: *mut usize,
    classes: *mut usize,
) -> IncellStatus {
    guard(|| {
        let d = &deref(dataset, "dataset")?.0;
        *out(steps, "steps")? = d.steps;
        *out(features, "features")? = d.features;
        *out(classes, "classes")? = d.classes;
        Ok(())
    })
}

/// Copies sample `index` into `values` (`len` must equal steps * features)
/// and its class into `label`. `mask` may be NULL; otherwise it receives the
/// ground-truth importance mask, or all zeros if the dataset has none.
///
/// # Safety
/// `dataset` must come from this library; buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn incell_dataset_sample(
    dataset: *const IncellDataset,
    index: usize,
    values: *mut f64,
    mask: *mut f64,
    len: usize,
    label: *mut usize,
) -> IncellStatus {
    guard(|| {
        let d = &deref(dataset, "dataset")?.0;
        let s = d
            .samples
            .get(index)
            .ok_or_else(|| Error::Validation(format!("sample {index} of {}", d.len())))?;
        check_len("sample buffer", len, s.x.len())?;
        output(values, len, "values")?.copy_from_slice(s.x.data());
        if !mask.is_null() {
            let m = output(mask, len, "mask")?;
            match &s.mask {
                Some(t) => m.copy_from_slice(t.data()),
                None => m.fill(0.0),
            }
        }
        *out(label, "label")? = s.label;
        Ok(())
    })
}

/// Trains a classifier on `train`, selecting the epoch with the best accuracy
/// on `test`. `arch` is a name such as `"lstm"` or `"lstm-incell"`. Zero for
/// `hidden`, `max_epochs` or a non-positive `learning_rate` keeps the
/// defaults (64, 200, 0.001).
///
/// # Safety
/// Handles must come from this library; pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_train(
    arch: *const c_char,
    train: *const IncellDataset,
    test: *const IncellDataset,
    hidden: usize,
    max_epochs: usize,
    learning_rate: f64,
    seed: u64,
    out_model: *mut *mut IncellModel,
    out_test_accuracy: *mut f64,
) -> IncellStatus {
    guard(|| {
        let arch: Architecture = text(arch, "arch")?.parse()?;
        let (train, test) = (&deref(train, "train")?.0, &deref(test, "test")?.0);
        let slot = out(out_model, "out_model")?;
        if (train.steps, train.features, train.classes) != (test.steps, test.features, test.classes) {
            return Err(Error::Validation("training and test sets have different dimensions".into()).into());
        }
        let mut spec = ModelSpec::new(arch, train.features, train.steps, train.classes);
        if hidden > 0 {
            spec.hidden = hidden;
        }
        let mut config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        if max_epochs > 0 {
            config.max_epochs = max_epochs;
        }
        if learning_rate > 0.0 {
            config.learning_rate = learning_rate;
        }
        let splits = Splits {
            train: train.clone(),
            test: test.clone(),
        };
        let result = train::train(spec, &splits, &config)?;
        if let Some(acc) = out_test_accuracy.as_mut() {
            *acc = result.test_accuracy;
        }
        *slot = Box::into_raw(Box::new(IncellModel(result.model)));
        Ok(())
    })
}

/// Reads a checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out_model` valid.
#[no_mangle]
pub unsafe extern "C" fn incell_model_load(path: *const c_char, out_model: *mut *mut IncellModel) -> IncellStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let slot = out(out_model, "out_model")?;
        *slot = Box::into_raw(Box::new(IncellModel(checkpoint::load(&path)?)));
        Ok(())
    })
}

/// Writes a checkpoint.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn incell_model_save(model: *const IncellModel, path: *const c_char) -> IncellStatus {
    guard(|| {
        let m = deref(model, "model")?;
        checkpoint::save(&m.0, &PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn incell_model_free(model: *mut IncellModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input length, feature count and class count the model expects.
///
/// # Safety
/// `model` must come from this library; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_model_dims(
    model: *const IncellModel,
    steps: *mut usize,
    features: *mut usize,
    classes: *mut usize,
) -> IncellStatus {
    guard(|| {
        let s = &deref(model, "model")?.0.spec;
        *out(steps, "steps")? = s.steps;
        *out(features, "features")? = s.features;
        *out(classes, "classes")? = s.classes;
        Ok(())
    })
}

/// Class scores (pre-softmax) for one series of `len` = steps * features
/// values, written to `scores` of length `n_scores` = classes.
///
/// # Safety
/// `model` must come from this library; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn incell_model_scores(
    model: *const IncellModel,
    values: *const f64,
    len: usize,
    scores: *mut f64,
    n_scores: usize,
) -> IncellStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let x = series(m, input(values, len, "values")?)?;
        check_len("score buffer", n_scores, m.spec.classes)?;
        output(scores, n_scores, "scores")?.copy_from_slice(&m.run_sequence(&x)?);
        Ok(())
    })
}

/// Absolute gradient of the score of `class` with respect to each input cell
/// of one series. `values` and `saliency` both hold `len` = steps * features
/// doubles.
///
/// # Safety
/// `model` must come from this library; buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn incell_model_saliency(
    model: *const IncellModel,
    values: *const f64,
    len: usize,
    class: usize,
    saliency: *mut f64,
) -> IncellStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let x = series(m, input(values, len, "values")?)?;
        if class >= m.spec.classes {
            return Err(Error::Validation(format!("class {class} of {}", m.spec.classes)).into());
        }
        let map = saliency::saliency_map(m, &x, class)?;
        output(saliency, len, "saliency")?.copy_from_slice(map.values.data());
        Ok(())
    })
}

/// Fraction of correctly classified samples of `dataset`.
///
/// # Safety
/// Handles must come from this library; `accuracy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_model_accuracy(
    model: *const IncellModel,
    dataset: *const IncellDataset,
    accuracy: *mut f64,
) -> IncellStatus {
    guard(|| {
        let (m, d) = (&deref(model, "model")?.0, &deref(dataset, "dataset")?.0);
        if (d.steps, d.features) != (m.spec.steps, m.spec.features) {
            return Err(Fail::Core(Error::Shape {
                op: "model_accuracy",
                left: vec![d.steps, d.features],
                right: vec![m.spec.steps, m.spec.features],
            }));
        }
        *out(accuracy, "accuracy")? = train::accuracy(m, d)?;
        Ok(())
    })
}

/// Weighted Jaccard similarity of two nonnegative arrays of `len` values.
///
/// # Safety
/// `a` and `b` must hold `len` doubles; `result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_weighted_jaccard(a: *const f64, b: *const f64, len: usize, result: *mut f64) -> IncellStatus {
    guard(|| {
        let a = Tensor::row(input(a, len, "a")?.to_vec())?;
        let b = Tensor::row(input(b, len, "b")?.to_vec())?;
        *out(result, "result")? = metrics::weighted_jaccard(&a, &b)?;
        Ok(())
    })
}

/// Mask-normalised L1 distance between a reference mask and a saliency map,
/// both of `len` values.
///
/// # Safety
/// `reference` and `saliency` must hold `len` doubles; `result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn incell_euclidean_distance(
    reference: *const f64,
    saliency: *const f64,
    len: usize,
    result: *mut f64,
) -> IncellStatus {
    guard(|| {
        let r = Tensor::row(input(reference, len, "reference")?.to_vec())?;
        let s = Tensor::row(input(saliency, len, "saliency")?.to_vec())?;
        *out(result, "result")? = metrics::euclidean_distance(&r, &s)?;
        Ok(())
    })
}
