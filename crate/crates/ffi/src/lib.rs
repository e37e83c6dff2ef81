//! C ABI over `villani-net`.
//!
//! A [`VnProblem`] owns a dataset, an activation, a fixed outer layer and `λ`.
//! Weight matrices cross the boundary as row-major `p × d` buffers of `double`.
//! Every function returns a [`VnStatus`]; on failure the message is available
//! from [`vn_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array1, Array2};
use villani_net::activation::ActivationProfile;
use villani_net::bounds::{self, BoundInputs, GlipForm, LambdaCVariant, VerifyOptions};
use villani_net::error::Error;
use villani_net::net::{LabeledDataset, LossSpec, NetState};
use villani_net::sgd::{run_sgd_from, InitSpec, SgdConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    UnboundedActivation = 4,
    Diverged = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque problem handle.
pub struct VnProblem {
    spec: LossSpec,
    outer: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VnStatus {
    match e {
        Error::InvalidArgument(_) | Error::EmptyBatch | Error::IndexOutOfRange { .. } | Error::Config(_) => {
            VnStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => VnStatus::DimensionMismatch,
        Error::UnboundedActivation { .. } => VnStatus::UnboundedActivation,
        Error::Diverged { .. } => VnStatus::Diverged,
        _ => VnStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VnStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            VnStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            VnStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(what))
}

unsafe fn problem<'a>(ptr: *const VnProblem) -> Result<&'a VnProblem, Failure> {
    ptr.as_ref().ok_or(Failure::Null("problem"))
}

unsafe fn activation(name: *const c_char) -> Result<ActivationProfile, Failure> {
    if name.is_null() {
        return Err(Failure::Null("activation"));
    }
    let s = CStr::from_ptr(name)
        .to_str()
        .map_err(|_| Error::InvalidArgument("activation name is not UTF-8".into()))?;
    Ok(s.parse()?)
}

impl VnProblem {
    fn net(&self, w: &[f64]) -> Result<NetState, Error> {
        let (p, d) = (self.outer.len(), self.spec.data.d());
        let inner = Array2::from_shape_vec((p, d), w.to_vec()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        NetState::new(Array1::from(self.outer.clone()), inner)
    }

    fn weights_len(&self) -> usize {
        self.outer.len() * self.spec.data.d()
    }
}

/// Builds a problem from row-major `n × d` features, `n` labels in {−1, +1},
/// `p` outer weights and an activation such as `"sigmoid:1.0"`, `"tanh"` or `"softplus:4.0"`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out_problem` receives a handle to
/// release with [`vn_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn vn_problem_new(
    features: *const f64,
    labels: *const f64,
    n: usize,
    d: usize,
    outer: *const f64,
    p: usize,
    activation_name: *const c_char,
    lambda: f64,
    out_problem: *mut *mut VnProblem,
) -> VnStatus {
    guard(|| {
        let slot = out(out_problem, "out_problem")?;
        *slot = ptr::null_mut();
        let x = slice(features, n * d, "features")?;
        let y = slice(labels, n, "labels")?;
        let a = slice(outer, p, "outer")?;
        let act = activation(activation_name)?;
        let x = Array2::from_shape_vec((n, d), x.to_vec()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let data = LabeledDataset::new(x, Array1::from(y.to_vec()))?;
        if p == 0 {
            return Err(Error::InvalidArgument("width p must be at least 1".into()).into());
        }
        let spec = LossSpec::new(data, act, lambda)?;
        *slot = Box::into_raw(Box::new(VnProblem { spec, outer: a.to_vec() }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`vn_problem_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vn_problem_free(problem: *mut VnProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vn_problem_dims(problem: *const VnProblem, n: *mut usize, d: *mut usize, p: *mut usize) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        *out(n, "n")? = pr.spec.data.n();
        *out(d, "d")? = pr.spec.data.d();
        *out(p, "p")? = pr.outer.len();
        Ok(())
    })
}

/// Regularized risk at `w` (`p × d`, row-major).
///
/// # Safety
/// `w` must hold `p·d` doubles.
#[no_mangle]
pub unsafe extern "C" fn vn_risk(problem: *const VnProblem, w: *const f64, risk: *mut f64) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let net = pr.net(slice(w, pr.weights_len(), "w")?)?;
        *out(risk, "risk")? = pr.spec.risk(&net)?;
        Ok(())
    })
}

/// Full gradient at `w`, written to `grad` (`p·d` doubles).
///
/// # Safety
/// `w` and `grad` must hold `p·d` doubles and not overlap.
#[no_mangle]
pub unsafe extern "C" fn vn_gradient(problem: *const VnProblem, w: *const f64, grad: *mut f64) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let net = pr.net(slice(w, pr.weights_len(), "w")?)?;
        if grad.is_null() {
            return Err(Failure::Null("grad"));
        }
        let g = pr.spec.full_grad(&net)?;
        let dst = std::slice::from_raw_parts_mut(grad, pr.weights_len());
        dst.iter_mut().zip(g.iter()).for_each(|(o, v)| *o = *v);
        Ok(())
    })
}

/// Exact Laplacian with respect to `W` at `w`.
///
/// # Safety
/// `w` must hold `p·d` doubles.
#[no_mangle]
pub unsafe extern "C" fn vn_laplacian(problem: *const VnProblem, w: *const f64, lap: *mut f64) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let net = pr.net(slice(w, pr.weights_len(), "w")?)?;
        *out(lap, "lap")? = pr.spec.exact_laplacian(&net)?;
        Ok(())
    })
}

/// Threshold `λ_c`; `proof_variant` selects the factor-4 form.
///
/// # Safety
/// `activation_name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vn_lambda_c(
    activation_name: *const c_char,
    a_norm: f64,
    b_x: f64,
    proof_variant: bool,
    lambda_c: *mut f64,
) -> VnStatus {
    guard(|| {
        let act = activation(activation_name)?;
        let variant = if proof_variant { LambdaCVariant::Proof } else { LambdaCVariant::Lemma };
        *out(lambda_c, "lambda_c")? = bounds::lambda_c(&act, a_norm, b_x, variant);
        Ok(())
    })
}

/// Gradient-Lipschitz bound for the problem; fails for unbounded activations.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_glip_bound(problem: *const VnProblem, glip: *mut f64) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let net = pr.net(&vec![0.0; pr.weights_len()])?;
        *out(glip, "glip")? = BoundInputs::new(&pr.spec, &net)?.glip_bound(GlipForm::Concluding)?;
        Ok(())
    })
}

/// Villani divergence check with default options at temperature `temp_s`.
/// The full report is returned as JSON in `report_json` (free with
/// [`vn_string_free`]); pass null to skip it.
///
/// # Safety
/// `problem` must be a live handle; `verified` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vn_verify_villani(
    problem: *const VnProblem,
    temp_s: f64,
    seed: u64,
    verified: *mut bool,
    report_json: *mut *mut c_char,
) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let flag = out(verified, "verified")?;
        let net = pr.net(&vec![0.0; pr.weights_len()])?;
        let opts = VerifyOptions {
            temp_s,
            seed,
            ..VerifyOptions::default()
        };
        let report = bounds::verify_villani(&pr.spec, &net, &opts)?;
        *flag = report.divergence_verified;
        if let Some(slot) = report_json.as_mut() {
            let text = serde_json::to_string(&report).map_err(Error::from)?;
            *slot = CString::new(text).unwrap().into_raw();
        }
        Ok(())
    })
}

/// Constant-step SGD from `w` (updated in place) for `num_steps` steps.
///
/// # Safety
/// `w` must hold `p·d` doubles.
#[no_mangle]
pub unsafe extern "C" fn vn_run_sgd(
    problem: *const VnProblem,
    w: *mut f64,
    step_s: f64,
    batch_b: usize,
    num_steps: usize,
    seed: u64,
    final_risk: *mut f64,
) -> VnStatus {
    guard(|| {
        let pr = self::problem(problem)?;
        let len = pr.weights_len();
        let net = pr.net(slice(w, len, "w")?)?;
        let risk_out = out(final_risk, "final_risk")?;
        let cfg = SgdConfig {
            step_s,
            batch_b,
            num_steps,
            seed,
            init: InitSpec::GaussianStd,
            record_every: num_steps.max(1),
        };
        let traj = run_sgd_from(&pr.spec, net, &cfg)?;
        std::slice::from_raw_parts_mut(w, len).copy_from_slice(traj.final_net.inner_slice());
        *risk_out = traj.final_risk();
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn vn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn vn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::EmptyBatch), VnStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::Diverged {
                step: 3,
                reason: String::new()
            }),
            VnStatus::Diverged
        );
        assert_eq!(status_of(&Error::Eigen("x".into())), VnStatus::Numerical);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), VnStatus::Panic);
        let msg = unsafe { CStr::from_ptr(vn_last_error_message()) }.to_str().unwrap().to_owned();
        assert!(msg.contains("boom"));
    }
}
