//! Independent reference implementations used only by the tests. None of
//! these call into the library's numerics.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, StandardNormal};

/// Truncated Poisson weights `λ^k/k!` for k = 1..=k_max, normalized.
pub fn trunc_poisson(lambda: f64, k_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(k_max);
    let mut term = 1.0;
    for k in 1..=k_max {
        term *= lambda / k as f64;
        w.push(term);
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// `V_n(t) = Σ_{k=t}^{k_max} p(k) · k!/(k−t)! / Π_{m=0}^{n−1} (αk + m)`, by
/// plain products.
pub fn vn_bruteforce(n: usize, t: usize, alpha: f64, lambda: f64, k_max: usize) -> f64 {
    let pk = trunc_poisson(lambda, k_max);
    let mut total = 0.0;
    for k in t..=k_max {
        let mut falling = 1.0;
        for m in 0..t {
            falling *= (k - m) as f64;
        }
        let mut rising = 1.0;
        for m in 0..n {
            rising *= alpha * k as f64 + m as f64;
        }
        total += pk[k - 1] * falling / rising;
    }
    total
}

/// `E[X]` and `E[X²]` under the GIG density ∝ x^{ζ−1} exp(−(χ/x + τx)/2),
/// by the trapezoid rule in u = ln x.
pub fn gig_moments_quadrature(zeta: f64, chi: f64, tau: f64) -> (f64, f64) {
    let log_kernel = |u: f64| {
        let x = u.exp();
        zeta * u - 0.5 * (chi / x + tau * x)
    };
    let (lo, hi, steps) = (-60.0, 12.0, 400_000);
    let h = (hi - lo) / steps as f64;
    let peak = (0..=steps)
        .map(|s| log_kernel(lo + s as f64 * h))
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for s in 0..=steps {
        let u = lo + s as f64 * h;
        let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
        let f = w * (log_kernel(u) - peak).exp();
        let x = u.exp();
        m0 += f;
        m1 += f * x;
        m2 += f * x * x;
    }
    (m1 / m0, m2 / m0)
}

fn choose2(m: usize) -> f64 {
    (m * m.saturating_sub(1)) as f64 / 2.0
}

/// ARI from directly enumerated pairs.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut same_a, mut same_b) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            same_a += sa as usize;
            same_b += sb as usize;
            both += (sa && sb) as usize;
        }
    }
    let total = choose2(n);
    let expected = same_a as f64 * same_b as f64 / total;
    let max = (same_a + same_b) as f64 / 2.0;
    if max == expected {
        return 1.0;
    }
    (both as f64 - expected) / (max - expected)
}

fn entropy_of<K: std::hash::Hash + Eq>(items: impl Iterator<Item = K>, n: f64) -> f64 {
    let mut counts: HashMap<K, usize> = HashMap::new();
    for k in items {
        *counts.entry(k).or_default() += 1;
    }
    counts
        .values()
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// NMI as `(H(a) + H(b) − H(a, b)) / sqrt(H(a) H(b))`; `None` when either
/// entropy is zero.
pub fn nmi_entropy(a: &[usize], b: &[usize]) -> Option<f64> {
    let n = a.len() as f64;
    let ha = entropy_of(a.iter().copied(), n);
    let hb = entropy_of(b.iter().copied(), n);
    let hab = entropy_of(a.iter().copied().zip(b.iter().copied()), n);
    if ha == 0.0 || hb == 0.0 {
        return None;
    }
    Some((ha + hb - hab) / (ha * hb).sqrt())
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for perm in permutations(k - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

pub fn hamming_exhaustive(z: &[usize], zp: &[usize], k: usize) -> f64 {
    let best = permutations(k)
        .iter()
        .map(|tau| z.iter().zip(zp).filter(|(&a, &b)| a != tau[b]).count())
        .min()
        .unwrap();
    best as f64 / z.len() as f64
}

/// Global optimum of `‖Y − μLᵀ‖²` over every assignment to `k` labels and
/// every s-subset of rows, with μ the cluster means on the kept rows.
/// `obs[i]` is observation i.
pub fn cmle_exhaustive(obs: &[Vec<f64>], k: usize, s: usize) -> f64 {
    let n = obs.len();
    let p = obs[0].len();
    let subsets: Vec<Vec<usize>> = (0u32..1 << p)
        .filter(|m| m.count_ones() as usize == s)
        .map(|m| (0..p).filter(|&j| m & (1 << j) != 0).collect())
        .collect();
    let mut best = f64::INFINITY;
    let mut z = vec![0usize; n];
    loop {
        for rows in &subsets {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..p {
                    let fitted = if rows.contains(&j) {
                        let members: Vec<usize> = (0..n).filter(|&m| z[m] == z[i]).collect();
                        members.iter().map(|&m| obs[m][j]).sum::<f64>() / members.len() as f64
                    } else {
                        0.0
                    };
                    total += (obs[i][j] - fitted).powi(2);
                }
            }
            best = best.min(total);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            z[pos] += 1;
            if z[pos] < k {
                break;
            }
            z[pos] = 0;
            pos += 1;
        }
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (2.0 * var).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean of an autocorrelated series by batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&xs[b * size..(b + 1) * size]))
        .collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub fn iid_se(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// One draw from the joint prior of the joint-SSL model, returned as
/// (labels compacted by first appearance, means per occupied cluster,
/// scales per occupied cluster, indicators, θ).
pub struct PriorDraw {
    pub z: Vec<usize>,
    pub mu: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub xi: Vec<bool>,
    pub xi_columns: Vec<Vec<bool>>,
    pub theta: f64,
}

pub struct PriorSpec {
    pub p: usize,
    pub n: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub beta_theta: f64,
    pub alpha: f64,
    pub poisson_lambda: f64,
    pub k_max: usize,
}

pub fn draw_prior<R: Rng>(spec: &PriorSpec, rng: &mut R) -> PriorDraw {
    draw_prior_with(spec, false, rng)
}

/// Column-SSL forward draw: every cluster gets its own indicator column.
/// `xi` of the result is empty; the columns are in `xi_columns`.
pub fn draw_prior_column<R: Rng>(spec: &PriorSpec, rng: &mut R) -> PriorDraw {
    draw_prior_with(spec, true, rng)
}

fn draw_prior_with<R: Rng>(spec: &PriorSpec, column: bool, rng: &mut R) -> PriorDraw {
    let theta = Beta::new(1.0, spec.beta_theta).unwrap().sample(rng);
    let xi: Vec<bool> = if column {
        Vec::new()
    } else {
        (0..spec.p).map(|_| rng.random::<f64>() < theta).collect()
    };
    let pk = trunc_poisson(spec.poisson_lambda, spec.k_max);
    let mut u = rng.random::<f64>();
    let mut k = spec.k_max;
    for (idx, w) in pk.iter().enumerate() {
        if u < *w {
            k = idx + 1;
            break;
        }
        u -= w;
    }
    let gamma = Gamma::new(spec.alpha, 1.0).unwrap();
    let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    let mut raw = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut u = rng.random::<f64>() * total;
        let mut pick = k - 1;
        for (c, w) in g.iter().enumerate() {
            if u < *w {
                pick = c;
                break;
            }
            u -= w;
        }
        raw.push(pick);
    }
    let mut relabel: HashMap<usize, usize> = HashMap::new();
    let z: Vec<usize> = raw
        .iter()
        .map(|l| {
            let next = relabel.len();
            *relabel.entry(*l).or_insert(next)
        })
        .collect();
    let t = relabel.len();
    let exp = Exp::new(0.5).unwrap();
    let mut mu = Vec::with_capacity(t);
    let mut phi = Vec::with_capacity(t);
    let mut xi_columns = Vec::new();
    for _ in 0..t {
        let ph: Vec<f64> = (0..spec.p).map(|_| exp.sample(rng)).collect();
        let slab: Vec<bool> = if column {
            (0..spec.p).map(|_| rng.random::<f64>() < theta).collect()
        } else {
            xi.clone()
        };
        let m: Vec<f64> = (0..spec.p)
            .map(|j| {
                let rate = if slab[j] { spec.lambda1 } else { spec.lambda0 };
                let e: f64 = rng.sample(StandardNormal);
                e * ph[j].sqrt() / rate
            })
            .collect();
        mu.push(m);
        phi.push(ph);
        if column {
            xi_columns.push(slab);
        }
    }
    PriorDraw {
        z,
        mu,
        phi,
        xi,
        xi_columns,
        theta,
    }
}

/// Observations `Y_i ~ N(μ_{z_i}, I)`.
pub fn draw_data<R: Rng>(z: &[usize], mu: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
    z.iter()
        .map(|&c| {
            mu[c]
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}
