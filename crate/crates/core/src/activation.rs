//! Smooth activations and the constants that the regularization threshold and
//! smoothness bounds are built from.
//!
//! Every profile carries `B_σ = sup|σ|`, the Lipschitz constant `L`,
//! `M_D = sup|σ'|`, `M_D' = sup|σ''|` and `c0 = σ(0)`. The vector `c = σ(0·x)`
//! appearing in the bounds is `c0·1_p`, so `‖c‖₂ = |c0|·√p`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Sigmoid { beta: f64 },
    Tanh,
    SoftPlus { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationProfile {
    pub kind: ActivationKind,
    /// `sup|σ|`; `f64::INFINITY` for SoftPlus.
    pub b_sigma: f64,
    pub lipschitz: f64,
    pub m_d: f64,
    pub m_d_prime: f64,
    pub c0: f64,
}

/// Logistic function `1/(1+e^{-x})` without overflow for any finite `x`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`, linear for large arguments.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl ActivationProfile {
    pub fn new(kind: ActivationKind) -> Result<Self> {
        let sqrt3 = 3f64.sqrt();
        let profile = match kind {
            ActivationKind::Sigmoid { beta } => {
                check_beta(beta)?;
                ActivationProfile {
                    kind,
                    b_sigma: 1.0,
                    lipschitz: beta / 4.0,
                    m_d: beta / 4.0,
                    m_d_prime: beta * beta / (6.0 * sqrt3),
                    c0: 0.5,
                }
            }
            ActivationKind::Tanh => ActivationProfile {
                kind,
                b_sigma: 1.0,
                lipschitz: 1.0,
                m_d: 1.0,
                m_d_prime: 4.0 / (3.0 * sqrt3),
                c0: 0.0,
            },
            ActivationKind::SoftPlus { beta } => {
                check_beta(beta)?;
                ActivationProfile {
                    kind,
                    b_sigma: f64::INFINITY,
                    lipschitz: 1.0,
                    m_d: 1.0,
                    m_d_prime: beta / 4.0,
                    c0: std::f64::consts::LN_2 / beta,
                }
            }
        };
        Ok(profile)
    }

    pub fn sigmoid(beta: f64) -> Result<Self> {
        Self::new(ActivationKind::Sigmoid { beta })
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh).expect("tanh has no parameters")
    }

    pub fn softplus(beta: f64) -> Result<Self> {
        Self::new(ActivationKind::SoftPlus { beta })
    }

    pub fn is_bounded(&self) -> bool {
        self.b_sigma.is_finite()
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid { beta } => logistic(beta * x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::SoftPlus { beta } => log1p_exp(beta * x) / beta,
        }
    }

    /// `(σ'(x), σ''(x))` in closed form.
    #[inline]
    pub fn derivs(&self, x: f64) -> (f64, f64) {
        match self.kind {
            ActivationKind::Sigmoid { beta } => {
                let s = logistic(beta * x);
                let ds = s * (1.0 - s);
                (beta * ds, beta * beta * ds * (1.0 - 2.0 * s))
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                let dt = 1.0 - t * t;
                (dt, -2.0 * t * dt)
            }
            ActivationKind::SoftPlus { beta } => {
                let s = logistic(beta * x);
                (s, beta * s * (1.0 - s))
            }
        }
    }

    /// `(σ(x), σ'(x), σ''(x))` sharing the exponential between the three.
    #[inline]
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        match self.kind {
            ActivationKind::Sigmoid { beta } => {
                let s = logistic(beta * x);
                let ds = s * (1.0 - s);
                (s, beta * ds, beta * beta * ds * (1.0 - 2.0 * s))
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                let dt = 1.0 - t * t;
                (t, dt, -2.0 * t * dt)
            }
            ActivationKind::SoftPlus { beta } => {
                let s = logistic(beta * x);
                (log1p_exp(beta * x) / beta, s, beta * s * (1.0 - s))
            }
        }
    }

    /// `‖c‖₂` for a width-`p` layer.
    pub fn c_norm(&self, p: usize) -> f64 {
        self.c0.abs() * (p as f64).sqrt()
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("activation beta must be positive, got {beta}")))
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Sigmoid { beta } => write!(f, "sigmoid:{beta:?}"),
            ActivationKind::Tanh => f.write_str("tanh"),
            ActivationKind::SoftPlus { beta } => write!(f, "softplus:{beta:?}"),
        }
    }
}

impl FromStr for ActivationProfile {
    type Err = Error;

    /// Accepts `sigmoid[:β]`, `tanh`, `softplus[:β]`; β defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let beta = match arg {
            Some(a) => a
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad activation parameter in {s:?}")))?,
            None => 1.0,
        };
        match name.to_ascii_lowercase().as_str() {
            "sigmoid" => Self::sigmoid(beta),
            "softplus" => Self::softplus(beta),
            "tanh" if arg.is_none() => Ok(Self::tanh()),
            "tanh" => Err(Error::invalid("tanh takes no parameter")),
            _ => Err(Error::invalid(format!("unknown activation {s:?}"))),
        }
    }
}

impl Serialize for ActivationProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ActivationProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn all_profiles() -> Vec<ActivationProfile> {
        vec![
            ActivationProfile::sigmoid(1.0).unwrap(),
            ActivationProfile::sigmoid(3.0).unwrap(),
            ActivationProfile::tanh(),
            ActivationProfile::softplus(1.0).unwrap(),
            ActivationProfile::softplus(4.0).unwrap(),
        ]
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(ActivationProfile::sigmoid(1.0).unwrap().eval(0.0), 0.5);
        assert_eq!(ActivationProfile::tanh().eval(0.0), 0.0);
        assert_abs_diff_eq!(
            ActivationProfile::softplus(1.0).unwrap().eval(0.0),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        for p in all_profiles() {
            assert_eq!(p.eval(0.0), p.c0, "{}", p.name());
        }
    }

    #[test]
    fn derivatives_at_known_points() {
        let sig = ActivationProfile::sigmoid(1.0).unwrap();
        assert_eq!(sig.derivs(0.0), (0.25, 0.0));
        let sp = ActivationProfile::softplus(1.0).unwrap();
        assert_eq!(sp.derivs(0.0), (0.5, 0.25));
        let x = (1.0 / 3f64.sqrt()).atanh();
        let (d1, d2) = ActivationProfile::tanh().derivs(x);
        assert_abs_diff_eq!(d1, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d2, -4.0 / (3.0 * 3f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn tanh_second_derivative_extremum_by_grid_search() {
        // grid over [-10, 10] at step 1e-5
        let tanh = ActivationProfile::tanh();
        let (mut best_x, mut best) = (0.0, 0.0f64);
        let n = 2_000_000;
        for k in 0..=n {
            let x = -10.0 + 20.0 * k as f64 / n as f64;
            let v = tanh.derivs(x).1.abs();
            if v > best {
                best = v;
                best_x = x;
            }
        }
        assert_abs_diff_eq!(best_x.abs(), (1.0 / 3f64.sqrt()).atanh(), epsilon = 2e-5);
        assert_abs_diff_eq!(best, tanh.m_d_prime, epsilon = 1e-9);
    }

    #[test]
    fn stable_at_large_arguments() {
        for p in all_profiles() {
            for &x in &[-1e3, -700.0, 700.0, 1e3] {
                let (v, d1, d2) = p.eval_all(x);
                assert!(v.is_finite() && d1.is_finite() && d2.is_finite(), "{} at {x}", p.name());
            }
        }
        let sp = ActivationProfile::softplus(1.0).unwrap();
        assert_eq!(sp.eval(1e3), 1e3);
        assert_eq!(sp.eval(-1e3), 0.0);
    }

    #[test]
    fn constants_are_tight_on_dense_grid() {
        let n = 1_000_000;
        for p in all_profiles() {
            let (mut m1, mut m2, mut b) = (0.0f64, 0.0f64, 0.0f64);
            for k in 0..=n {
                let x = -50.0 + 100.0 * k as f64 / n as f64;
                let (v, d1, d2) = p.eval_all(x);
                m1 = m1.max(d1.abs());
                m2 = m2.max(d2.abs());
                b = b.max(v.abs());
            }
            assert!((m1 - p.m_d).abs() <= 1e-6, "{} m_d {m1} vs {}", p.name(), p.m_d);
            assert!((m2 - p.m_d_prime).abs() <= 1e-6, "{} m_d' {m2} vs {}", p.name(), p.m_d_prime);
            assert!(m1 <= p.m_d + 1e-15 && m2 <= p.m_d_prime + 1e-15);
            if p.is_bounded() {
                assert!(b <= p.b_sigma);
            }
            assert_eq!(p.lipschitz, p.m_d);
        }
    }

    #[test]
    fn sigmoid_constants_for_unit_beta() {
        let p = ActivationProfile::sigmoid(1.0).unwrap();
        assert_eq!(p.m_d, 0.25);
        assert_eq!(p.lipschitz, 0.25);
        assert_abs_diff_eq!(p.m_d_prime, 0.096225, epsilon = 1e-6);
        let sp = ActivationProfile::softplus(1.0).unwrap();
        assert_eq!((sp.m_d, sp.lipschitz), (1.0, 1.0));
    }

    #[test]
    fn finite_differences_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for p in all_profiles() {
            for _ in 0..100 {
                let x: f64 = rng.random_range(-5.0..5.0);
                let (d1, d2) = p.derivs(x);
                let fd1 = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
                assert!((d1 - fd1).abs() <= 1e-6, "{} σ' at {x}", p.name());
                let fd2 = (p.derivs(x + h).0 - p.derivs(x - h).0) / (2.0 * h);
                assert!((d2 - fd2).abs() <= 1e-6, "{} σ'' at {x}", p.name());
                // second difference of σ itself is roundoff-limited at 1e-5
                let h2 = 1e-4;
                let sd = (p.eval(x + h2) - 2.0 * p.eval(x) + p.eval(x - h2)) / (h2 * h2);
                assert!((d2 - sd).abs() <= 1e-6, "{} σ'' (2nd diff) at {x}", p.name());
            }
        }
    }

    #[test]
    fn softplus_approaches_relu() {
        let p = ActivationProfile::softplus(50.0).unwrap();
        for k in 0..=20_000 {
            let x = -10.0 + k as f64 * 1e-3;
            assert!((p.eval(x) - x.max(0.0)).abs() <= std::f64::consts::LN_2 / 50.0 + 1e-15);
        }
    }

    #[test]
    fn parse_and_reject() {
        let p: ActivationProfile = "sigmoid:1.0".parse().unwrap();
        assert_eq!(p.kind, ActivationKind::Sigmoid { beta: 1.0 });
        let p: ActivationProfile = "softplus:4.0".parse().unwrap();
        assert_eq!(p.m_d_prime, 1.0);
        assert_eq!("tanh".parse::<ActivationProfile>().unwrap().c0, 0.0);
        assert!("sigmoid:0".parse::<ActivationProfile>().is_err());
        assert!("softplus:-1".parse::<ActivationProfile>().is_err());
        assert!("relu".parse::<ActivationProfile>().is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "\"softplus:4.0\"");
    }

    proptest! {
        #[test]
        fn lipschitz_on_pairs(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            for p in all_profiles() {
                prop_assert!((p.eval(x) - p.eval(y)).abs() <= p.lipschitz * (x - y).abs() + 1e-14);
            }
        }
    }
}
