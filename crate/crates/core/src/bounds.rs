//! Regularization threshold, gradient/Laplacian bounds, the gradient-Lipschitz
//! bound and a sampling check that `V_s(W) = ‖∇L̃‖²/s − ΔL̃` diverges.
//!
//! All bounds use `‖c‖₂ = |σ(0)|·√p`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};
use crate::net::{LossSpec, NetState};
use crate::potential::{villani_functional, LossPotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaCVariant {
    /// `M_D L B_x² ‖a‖² / 2`
    #[default]
    Lemma,
    /// `2 M_D L B_x² ‖a‖²`, four times the lemma value
    Proof,
}

/// Critical regularization.
pub fn lambda_c(profile: &ActivationProfile, a_norm: f64, b_x: f64, variant: LambdaCVariant) -> f64 {
    let base = profile.m_d * profile.lipschitz * b_x * b_x * a_norm * a_norm;
    match variant {
        LambdaCVariant::Lemma => base / 2.0,
        LambdaCVariant::Proof => 2.0 * base,
    }
}

/// Which form of the gradient-Lipschitz bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GlipForm {
    /// The closing bound, linear in `B_x`.
    #[default]
    Concluding,
    /// `√p` times the per-row constant, which carries `B_x²` and an extra `‖a‖`.
    PerRow,
}

/// Scalar summaries of a `(spec, a)` pair that every bound consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub activation: ActivationProfile,
    pub a_norm: f64,
    pub b_x: f64,
    pub p: usize,
    pub d: usize,
    pub lambda: f64,
}

impl BoundInputs {
    pub fn new(spec: &LossSpec, net: &NetState) -> Result<Self> {
        spec.check(net)?;
        Ok(BoundInputs {
            activation: spec.activation,
            a_norm: net.a_norm(),
            b_x: spec.data.b_x(),
            p: net.p(),
            d: net.d(),
            lambda: spec.lambda,
        })
    }

    fn c_norm(&self) -> f64 {
        self.activation.c_norm(self.p)
    }

    /// `(quadratic, linear)` coefficients of the gradient lower bound in `‖W‖_F`.
    pub fn grad_lb_coeffs(&self) -> (f64, f64) {
        let act = &self.activation;
        let (lam, a, bx) = (self.lambda, self.a_norm, self.b_x);
        let quad = lam * lam - lam * a * a * act.m_d * bx * bx * act.lipschitz / 2.0;
        let lin = lam * a * act.m_d * bx * (1.0 + a * self.c_norm() / 2.0);
        (quad, lin)
    }

    /// `‖∇L̃‖² ≥ quad·w² − lin·w` at `‖W‖_F = w`.
    pub fn grad_lower_bound(&self, w_fro: f64) -> f64 {
        let (quad, lin) = self.grad_lb_coeffs();
        quad * w_fro * w_fro - lin * w_fro
    }

    /// `(constant, linear)` coefficients of the Laplacian upper bound in `‖W‖_F`.
    pub fn lap_ub_coeffs(&self) -> (f64, f64) {
        let act = &self.activation;
        let (a, bx, p) = (self.a_norm, self.b_x, self.p as f64);
        let constant = p
            * ((2.0 + self.c_norm()) / 4.0 * bx * bx * act.m_d_prime * a
                + act.m_d * act.m_d * bx * bx * a * a / 4.0
                + self.lambda * self.d as f64);
        let linear = p * a * act.lipschitz * bx / 4.0 * bx * bx * act.m_d_prime * a;
        (constant, linear)
    }

    pub fn laplacian_upper_bound(&self, w_fro: f64) -> f64 {
        let (c, l) = self.lap_ub_coeffs();
        c + l * w_fro
    }

    pub fn glip_bound(&self, form: GlipForm) -> Result<f64> {
        let act = &self.activation;
        if !act.is_bounded() {
            return Err(Error::UnboundedActivation {
                quantity: "gradient-Lipschitz bound",
                activation: act.name(),
            });
        }
        let (a, bx, lam) = (self.a_norm, self.b_x, self.lambda);
        let p = self.p as f64;
        let sp = p.sqrt();
        let c = self.c_norm();
        let inner = match form {
            GlipForm::Concluding => {
                sp * a * act.m_d * act.m_d * bx / 4.0
                    + (2.0 + c + a * act.b_sigma) / 4.0 * act.m_d_prime * bx * p
                    + lam
            }
            GlipForm::PerRow => {
                a * a * act.m_d * act.m_d * bx * bx * sp / 4.0
                    + ((2.0 + c) / 4.0 + a * act.b_sigma / 4.0) * act.m_d_prime * bx * bx * a * p
                    + lam
            }
        };
        Ok(sp * inner)
    }

    pub fn lambda_c(&self, variant: LambdaCVariant) -> f64 {
        lambda_c(&self.activation, self.a_norm, self.b_x, variant)
    }

    /// `λ² − 2λ M_D L B_x² ‖a‖²`.
    pub fn g1_proof(&self) -> f64 {
        self.lambda * self.lambda - self.lambda * self.lambda_c(LambdaCVariant::Proof)
    }

    /// `λ² − λ ‖a‖² M_D B_x² L / 2`.
    pub fn g1_grad_bound(&self) -> f64 {
        self.grad_lb_coeffs().0
    }

    /// Analytic minorant `GLB(r)/s − LUB(r)` of `V_s` on the sphere `‖W‖_F = r`.
    pub fn v_s_minorant(&self, s: f64, r: f64) -> f64 {
        self.grad_lower_bound(r) / s - self.laplacian_upper_bound(r)
    }
}

/// `‖∇L̃‖²_F / s − ΔL̃` at `net`.
pub fn v_s(spec: &LossSpec, net: &NetState, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("temperature s must be positive, got {s}")));
    }
    spec.check(net)?;
    let pot = LossPotential::from_net(spec, net)?;
    let mut scratch = vec![0.0; net.p() * net.d()];
    Ok(villani_functional(&pot, net.inner_slice(), s, &mut scratch))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub temp_s: f64,
    /// Radii `‖W‖_F` sampled along each ray.
    pub radii: Vec<f64>,
    pub directions: usize,
    pub high_water: f64,
    pub seed: u64,
    pub variant: LambdaCVariant,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            temp_s: 1e-3,
            radii: (0..=10).map(|k| 2f64.powi(k)).collect(),
            directions: 10,
            high_water: 1e6,
            seed: 0,
            variant: LambdaCVariant::Lemma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillaniReport {
    pub lambda: f64,
    pub temp_s: f64,
    pub lambda_c_lemma: f64,
    pub lambda_c_proof: f64,
    pub variant: LambdaCVariant,
    pub g1_proof: f64,
    pub g1_grad_bound: f64,
    /// `None` for unbounded activations.
    pub glip_bound: Option<f64>,
    pub glip_bound_per_row: Option<f64>,
    pub grad_lb_coeffs: (f64, f64),
    pub lap_ub_coeffs: (f64, f64),
    pub radius_schedule: Vec<f64>,
    pub directions: usize,
    pub high_water: f64,
    /// Smallest sampled `V_s` at the largest radius.
    pub min_v_at_max_radius: f64,
    /// Samples where `V_s` fell below the analytic minorant.
    pub dominance_violations: usize,
    pub divergence_verified: bool,
    /// The concluding gLip bound is linear in `B_x`, the per-row constant quadratic.
    pub glip_bx_power_mismatch: bool,
}

/// Evaluates `V_s` along random rays and the analytic minorant.
///
/// `divergence_verified` holds iff the selected `g1 > 0`, every sample
/// dominates the minorant, and every ray reaches `high_water`.
pub fn verify_villani(spec: &LossSpec, net: &NetState, opts: &VerifyOptions) -> Result<VillaniReport> {
    if !(opts.temp_s > 0.0) {
        return Err(Error::invalid(format!("temperature s must be positive, got {}", opts.temp_s)));
    }
    if opts.radii.is_empty() || opts.directions == 0 {
        return Err(Error::invalid("radius schedule and direction count must be non-empty"));
    }
    let inputs = BoundInputs::new(spec, net)?;
    let pot = LossPotential::from_net(spec, net)?;
    let dim = net.p() * net.d();
    let s = opts.temp_s;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut scratch = vec![0.0; dim];
    let mut violations = 0;
    let mut min_at_max = f64::INFINITY;
    let mut all_cross = true;
    let r_max = opts.radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..opts.directions {
        let dir = random_unit(&mut rng, dim);
        let mut crossed = false;
        for &r in &opts.radii {
            let w: Vec<f64> = dir.iter().map(|u| u * r).collect();
            let v = villani_functional(&pot, &w, s, &mut scratch);
            let bound = inputs.v_s_minorant(s, r);
            if v < bound - 1e-9 * bound.abs().max(1.0) {
                violations += 1;
            }
            crossed |= v >= opts.high_water;
            if r == r_max {
                min_at_max = min_at_max.min(v);
            }
        }
        all_cross &= crossed;
    }

    let g1 = match opts.variant {
        LambdaCVariant::Lemma => inputs.g1_grad_bound(),
        LambdaCVariant::Proof => inputs.g1_proof(),
    };
    Ok(VillaniReport {
        lambda: spec.lambda,
        temp_s: s,
        lambda_c_lemma: inputs.lambda_c(LambdaCVariant::Lemma),
        lambda_c_proof: inputs.lambda_c(LambdaCVariant::Proof),
        variant: opts.variant,
        g1_proof: inputs.g1_proof(),
        g1_grad_bound: inputs.g1_grad_bound(),
        glip_bound: inputs.glip_bound(GlipForm::Concluding).ok(),
        glip_bound_per_row: inputs.glip_bound(GlipForm::PerRow).ok(),
        grad_lb_coeffs: inputs.grad_lb_coeffs(),
        lap_ub_coeffs: inputs.lap_ub_coeffs(),
        radius_schedule: opts.radii.clone(),
        directions: opts.directions,
        high_water: opts.high_water,
        min_v_at_max_radius: min_at_max,
        dominance_violations: violations,
        divergence_verified: g1 > 0.0 && violations == 0 && all_cross,
        glip_bx_power_mismatch: true,
    })
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::LabeledDataset;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};

    fn sig() -> ActivationProfile {
        ActivationProfile::sigmoid(1.0).unwrap()
    }

    fn inputs(act: ActivationProfile, a: f64, bx: f64, p: usize, d: usize, lambda: f64) -> BoundInputs {
        BoundInputs {
            activation: act,
            a_norm: a,
            b_x: bx,
            p,
            d,
            lambda,
        }
    }

    #[test]
    fn lambda_c_values() {
        assert_eq!(lambda_c(&sig(), 1.0, 1.0, LambdaCVariant::Lemma), 0.03125);
        assert_eq!(lambda_c(&sig(), 1.0, 1.0, LambdaCVariant::Proof), 0.125);
        assert_eq!(lambda_c(&sig(), 0.5, 2.0, LambdaCVariant::Lemma), 0.03125);
        let sp = ActivationProfile::softplus(1.0).unwrap();
        assert_eq!(lambda_c(&sp, 1.0, 1.0, LambdaCVariant::Lemma), 0.5);
        // β²/32 for sigmoid_β with ‖a‖B_x = 1
        let s3 = ActivationProfile::sigmoid(3.0).unwrap();
        assert_abs_diff_eq!(lambda_c(&s3, 1.0, 1.0, LambdaCVariant::Lemma), 9.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_lower_bound_arithmetic() {
        let unit = ActivationProfile {
            c0: 0.0,
            m_d: 1.0,
            lipschitz: 1.0,
            ..ActivationProfile::tanh()
        };
        let b = inputs(unit, 1.0, 1.0, 1, 1, 1.0);
        assert_eq!(b.grad_lower_bound(0.0), 0.0);
        assert_eq!(b.grad_lower_bound(2.0), 0.0);
        assert_eq!(b.grad_lower_bound(4.0), 0.5 * 16.0 - 4.0);
    }

    #[test]
    fn laplacian_upper_bound_arithmetic() {
        let flat = ActivationProfile {
            m_d: 0.0,
            m_d_prime: 0.0,
            ..sig()
        };
        let b = inputs(flat, 1.3, 2.0, 3, 4, 0.7);
        assert_abs_diff_eq!(b.laplacian_upper_bound(5.0), 3.0 * 0.7 * 4.0, epsilon = 1e-12);

        let b = inputs(sig(), 1.0, 1.0, 1, 1, 0.03125);
        let expected = 2.5 / 4.0 * sig().m_d_prime + 0.0625 / 4.0 + 0.03125;
        assert_abs_diff_eq!(b.laplacian_upper_bound(0.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(b.laplacian_upper_bound(0.0), 0.1070, epsilon = 1e-4);
    }

    #[test]
    fn glip_arithmetic() {
        let b = inputs(sig(), 1.0, 1.0, 1, 1, 0.03125);
        let g = b.glip_bound(GlipForm::Concluding).unwrap();
        assert_abs_diff_eq!(g, 0.0625 / 4.0 + 3.5 / 4.0 * sig().m_d_prime + 0.03125, epsilon = 1e-15);
        assert_abs_diff_eq!(g, 0.13108, epsilon = 1e-4);

        let b4 = inputs(sig(), 0.8, 0.9, 4, 3, 0.1);
        let shifted = BoundInputs { lambda: 0.35, ..b4 };
        let delta = shifted.glip_bound(GlipForm::Concluding).unwrap() - b4.glip_bound(GlipForm::Concluding).unwrap();
        assert_abs_diff_eq!(delta, 2.0 * 0.25, epsilon = 1e-12);
        // the two forms coincide when ‖a‖ = B_x = 1
        let unit = inputs(sig(), 1.0, 1.0, 5, 2, 0.2);
        assert_abs_diff_eq!(
            unit.glip_bound(GlipForm::Concluding).unwrap(),
            unit.glip_bound(GlipForm::PerRow).unwrap(),
            epsilon = 1e-12
        );

        let sp = inputs(ActivationProfile::softplus(1.0).unwrap(), 1.0, 1.0, 1, 1, 0.5);
        assert!(matches!(sp.glip_bound(GlipForm::Concluding), Err(Error::UnboundedActivation { .. })));
    }

    #[test]
    fn v_s_of_pure_regularizer() {
        let data = LabeledDataset::new(array![[0.0]], array![1.0]).unwrap();
        let spec = LossSpec::new(data, sig(), 1.0).unwrap();
        let net = NetState::new(array![1.0], array![[2.0]]).unwrap();
        assert_eq!(v_s(&spec, &net, 1.0).unwrap(), 3.0);
        assert!(v_s(&spec, &net, 0.0).is_err());

        let data = LabeledDataset::new(Array2::zeros((2, 3)), array![1.0, -1.0]).unwrap();
        let spec = LossSpec::new(data, ActivationProfile::tanh(), 0.4).unwrap();
        let w = array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        let net = NetState::new(array![0.3, -0.2], w.clone()).unwrap();
        let wf2: f64 = w.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(v_s(&spec, &net, 0.5).unwrap(), 0.16 * wf2 / 0.5 - 0.4 * 6.0, epsilon = 1e-12);
    }

    fn small_instance(lambda: f64) -> (LossSpec, NetState) {
        let x = array![[0.6, -0.8], [0.1, 0.9], [-0.7, 0.2], [0.3, 0.3]];
        let y = array![1.0, -1.0, 1.0, -1.0];
        let data = LabeledDataset::new(x, y).unwrap();
        let a = Array1::from(vec![0.6, -0.8]);
        (LossSpec::new(data, sig(), lambda).unwrap(), NetState::new(a, Array2::zeros((2, 2))).unwrap())
    }

    #[test]
    fn verify_reports() {
        let (spec, net) = small_instance(0.0);
        let lc_proof = lambda_c(&sig(), 1.0, spec.data.b_x(), LambdaCVariant::Proof);
        let report = verify_villani(&spec.with_lambda(2.0 * lc_proof).unwrap(), &net, &VerifyOptions::default()).unwrap();
        assert!(report.divergence_verified, "{report:?}");
        assert_eq!(report.lambda_c_proof / report.lambda_c_lemma, 4.0);

        let report = verify_villani(&spec, &net, &VerifyOptions::default()).unwrap();
        assert!(!report.divergence_verified);
        assert!(report.g1_grad_bound <= 0.0);
        assert_eq!(report.lambda_c_proof, 4.0 * report.lambda_c_lemma);

        let opts = VerifyOptions {
            temp_s: -1.0,
            ..VerifyOptions::default()
        };
        assert!(verify_villani(&spec, &net, &opts).is_err());
    }

    #[test]
    fn degenerate_inputs_still_report() {
        let data = LabeledDataset::new(Array2::zeros((3, 2)), array![1.0, 1.0, -1.0]).unwrap();
        let spec = LossSpec::new(data, sig(), 0.5).unwrap();
        let net = NetState::new(array![1.0, 0.0], Array2::zeros((2, 2))).unwrap();
        let r = verify_villani(&spec, &net, &VerifyOptions::default()).unwrap();
        assert_eq!(r.g1_grad_bound, 0.25);
        assert!(r.divergence_verified);
        let net0 = NetState::new(array![0.0, 0.0], Array2::zeros((2, 2))).unwrap();
        let r = verify_villani(&spec, &net0, &VerifyOptions::default()).unwrap();
        assert_eq!(r.lambda_c_lemma, 0.0);
        assert_eq!(r.g1_proof, 0.25);
    }

    #[test]
    fn v_s_grows_along_rays_above_threshold() {
        let (spec, net) = small_instance(0.0);
        let lc = lambda_c(&sig(), 1.0, spec.data.b_x(), LambdaCVariant::Proof);
        let spec = spec.with_lambda(1.5 * lc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = random_unit(&mut rng, 4);
            let vals: Vec<f64> = (0..=10)
                .map(|k| {
                    let r = 2f64.powi(k);
                    let w = Array2::from_shape_vec((2, 2), u.iter().map(|x| x * r).collect()).unwrap();
                    v_s(&spec, &net.with_inner(w).unwrap(), 0.01).unwrap()
                })
                .collect();
            // monotone over the last half of the schedule
            assert!(vals[5..].windows(2).all(|p| p[1] > p[0]), "{vals:?}");
            assert!(*vals.last().unwrap() > 1e4);
        }
    }
}
