//! Samplers and log-densities used by the Gibbs conditionals.
//!
//! The generalized inverse Gaussian (GIG) law here has density
//! `f(x) ∝ x^{ζ-1} exp(-(χ/x + τx)/2)` on `x > 0`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("GIG(zeta={zeta}, chi={chi}, tau={tau}) is not normalizable")]
    NonNormalizable { zeta: f64, chi: f64, tau: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("k = {k} lies outside the support 1..={k_max}")]
    OutOfSupport { k: usize, k_max: usize },
    #[error("every log-weight is -inf")]
    AllWeightsNegInfinite,
}

/// Below this χ the GIG is sampled through its Gamma limit.
pub const CHI_GAMMA_CUTOFF: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    /// Order ζ.
    pub zeta: f64,
    /// χ ≥ 0, the coefficient of 1/x.
    pub chi: f64,
    /// τ > 0, the coefficient of x.
    pub tau: f64,
}

impl GigParams {
    pub fn new(zeta: f64, chi: f64, tau: f64) -> Result<Self, DistributionError> {
        if !(zeta.is_finite() && chi.is_finite() && chi >= 0.0 && tau.is_finite() && tau > 0.0) {
            return Err(DistributionError::InvalidParameter(format!(
                "GIG requires finite zeta, chi >= 0 and tau > 0; got ({zeta}, {chi}, {tau})"
            )));
        }
        if chi < CHI_GAMMA_CUTOFF && zeta <= 0.0 {
            return Err(DistributionError::NonNormalizable { zeta, chi, tau });
        }
        Ok(Self { zeta, chi, tau })
    }
}

/// Draws from GIG(ζ, χ, τ).
///
/// ζ = ±1/2 goes through the inverse-Gaussian reciprocal identity, χ ≈ 0
/// through the Gamma(ζ, rate τ/2) limit, and everything else through the
/// Hörmann–Leydold family of ratio-of-uniforms / rejection samplers.
pub fn sample_gig<R: Rng + ?Sized>(
    params: &GigParams,
    rng: &mut R,
) -> Result<f64, DistributionError> {
    let GigParams { zeta, chi, tau } = GigParams::new(params.zeta, params.chi, params.tau)?;
    if chi < CHI_GAMMA_CUTOFF {
        return Ok(sample_gamma(zeta, 2.0 / tau, rng));
    }
    if zeta == 0.5 {
        return Ok(sample_gig_half(chi, tau, rng));
    }
    if zeta == -0.5 {
        // X ~ GIG(-1/2, χ, τ)  ⟺  1/X ~ GIG(1/2, τ, χ)
        return Ok(1.0 / sample_gig_half(tau, chi, rng));
    }
    Ok(sample_gig_general(zeta, chi, tau, rng))
}

/// GIG(1/2, χ, τ). Infallible for χ ≥ 0, τ > 0; used on the sampler's hot path.
pub fn sample_gig_half<R: Rng + ?Sized>(chi: f64, tau: f64, rng: &mut R) -> f64 {
    debug_assert!(chi >= 0.0 && tau > 0.0);
    if chi < CHI_GAMMA_CUTOFF {
        return sample_gamma(0.5, 2.0 / tau, rng);
    }
    // 1/X is inverse Gaussian with mean m = sqrt(τ/χ) and shape τ.
    let m = (tau / chi).sqrt();
    let shape = tau;
    let nu: f64 = rng.sample(StandardNormal);
    let a = m * nu * nu / (2.0 * shape);
    // Smaller root of the Michael–Schucany–Haas quadratic, m / (1 + a + sqrt(a² + 2a)),
    // written without cancellation.
    let denom = 1.0 + a + (a * (a + 2.0)).sqrt();
    let root = m / denom;
    let u: f64 = rng.random();
    let x = if u * (m + root) <= m {
        // 1/root
        denom / m
    } else {
        // 1/(m²/root)
        root / (m * m)
    };
    x.max(f64::MIN_POSITIVE)
}

fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, scale).expect("positive gamma parameters");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

/// Standardized form: Y with density ∝ y^{λ-1} exp(-ω(y + 1/y)/2), λ ≥ 0, then
/// X = η Y (or η / Y for negative order) with η = sqrt(χ/τ), ω = sqrt(χτ).
fn sample_gig_general<R: Rng + ?Sized>(zeta: f64, chi: f64, tau: f64, rng: &mut R) -> f64 {
    let lambda = zeta.abs();
    let eta = (chi / tau).sqrt();
    let omega = (chi * tau).sqrt();
    let y = if lambda > 2.0 || omega > 3.0 {
        rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(lambda, omega, rng)
    } else {
        concave_hat(lambda, omega, rng)
    };
    let x = if zeta < 0.0 { eta / y } else { eta * y };
    x.max(f64::MIN_POSITIVE)
}

fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    // Roots of the cubic bounding the shifted ratio-of-uniforms region.
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece hat; valid for 0 ≤ λ < 1 and small ω where the
/// density is not T-concave.
fn concave_hat<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let a = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * a).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Numerically stable `ln Σ exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unnormalized `ln(λ^k / k!)`.
fn log_poisson_kernel(k: usize, lambda: f64) -> f64 {
    let lnfact: f64 = (2..=k).map(|m| (m as f64).ln()).sum();
    k as f64 * lambda.ln() - lnfact
}

/// Log-pmf of the Poisson(λ) law truncated to {1, …, k_max}, indexed by `k - 1`.
pub fn log_trunc_poisson_table(lambda: f64, k_max: usize) -> Vec<f64> {
    let kernel: Vec<f64> = (1..=k_max).map(|k| log_poisson_kernel(k, lambda)).collect();
    let norm = logsumexp(&kernel);
    kernel.into_iter().map(|v| v - norm).collect()
}

/// `ln π(K = k)` under the Poisson(λ) prior truncated to {1, …, k_max}.
pub fn log_trunc_poisson_pmf(k: usize, lambda: f64, k_max: usize) -> Result<f64, DistributionError> {
    if k < 1 || k > k_max {
        return Err(DistributionError::OutOfSupport { k, k_max });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(DistributionError::InvalidParameter(format!(
            "Poisson rate must be positive, got {lambda}"
        )));
    }
    Ok(log_trunc_poisson_table(lambda, k_max)[k - 1])
}

/// Samples index `j` with probability `exp(lw_j - logsumexp(lw))`.
pub fn sample_categorical_log<R: Rng + ?Sized>(
    log_weights: &[f64],
    rng: &mut R,
) -> Result<usize, DistributionError> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| !w.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(DistributionError::AllWeightsNegInfinite);
    }
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (j, w) in log_weights.iter().enumerate() {
        let mass = (w - max).exp();
        if mass > 0.0 {
            last_positive = j;
            if target < mass {
                return Ok(j);
            }
            target -= mass;
        }
    }
    Ok(last_positive)
}
