//! Shared numerical helpers: Gaussian densities, incomplete gamma,
//! noncentral chi-square, batch-means standard errors and seed derivation.

use alloc::vec::Vec;
use num_traits::Float;

/// ln(2*pi)
pub const LN_TAU: f64 = 1.8378770664093453;

/// Standard normal density in one dimension.
pub fn normal_pdf(w: f64) -> f64 {
    (-0.5 * w * w - 0.5 * LN_TAU).exp()
}

/// Log-density of the standard multivariate normal at `w`.
pub fn log_normal_pdf_nd(w: &[f64]) -> f64 {
    let sq: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * sq - 0.5 * (w.len() as f64) * LN_TAU
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// ln P(N > t) for a standard normal N, accurate far into the tail where
/// erfc underflows.
pub fn log_normal_sf(t: f64) -> f64 {
    if t <= 30.0 {
        Float::ln(0.5 * libm::erfc(t / core::f64::consts::SQRT_2))
    } else {
        // Asymptotic tail: P(N > t) = phi(t)/t * (1 - 1/t^2 + 3/t^4 - ...).
        let t2 = t * t;
        -0.5 * t2 - 0.5 * LN_TAU - Float::ln(t) + Float::ln(1.0 - 1.0 / t2 + 3.0 / (t2 * t2))
    }
}

/// ln(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + Float::ln_1p(Float::exp(lo - hi))
}

/// Series for the lower tail, valid for x < a + 1.
fn gamma_lower_series(a: f64, x: f64) -> f64 {
    let ln_prefactor = a * x.ln() - x - libm::lgamma(a);
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..500 {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    (ln_prefactor.exp() * sum).min(1.0)
}

/// Modified-Lentz continued fraction factor h with Q = prefactor * h,
/// valid for x >= a + 1.
fn gamma_upper_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized lower incomplete gamma function P(a, x).
///
/// Series expansion for x < a + 1, Lentz continued fraction otherwise.
pub fn gamma_lower_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_lower_series(a, x)
    } else {
        let ln_prefactor = a * x.ln() - x - libm::lgamma(a);
        (1.0 - ln_prefactor.exp() * gamma_upper_cf(a, x)).max(0.0)
    }
}

/// ln Q(a, x) for the regularized upper incomplete gamma function, accurate
/// far into the right tail where Q underflows.
pub fn log_gamma_upper_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        Float::ln_1p(-gamma_lower_series(a, x))
    } else {
        let ln_prefactor = a * x.ln() - x - libm::lgamma(a);
        ln_prefactor + Float::ln(gamma_upper_cf(a, x))
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    gamma_lower_regularized(0.5 * dof, 0.5 * x)
}

/// CDF of the noncentral chi-square distribution with `dof` degrees of
/// freedom and noncentrality `lambda`, via the Poisson mixture of central
/// chi-square CDFs.
pub fn noncentral_chi_square_cdf(x: f64, dof: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return chi_square_cdf(x, dof);
    }
    let half = 0.5 * lambda;
    // Poisson weights accumulated until the remaining tail is negligible.
    let mut log_w = -half; // ln weight at j = 0
    let mut acc = 0.0;
    let mut cum_w = 0.0;
    for j in 0..10_000 {
        let w = log_w.exp();
        if w > 0.0 {
            acc += w * chi_square_cdf(x, dof + 2.0 * j as f64);
            cum_w += w;
        }
        if cum_w > 1.0 - 1e-15 && j as f64 > half {
            break;
        }
        log_w += half.ln() - ((j + 1) as f64).ln();
    }
    acc.clamp(0.0, 1.0)
}

/// ln of the noncentral chi-square survival function
/// P(X > x; dof, lambda), computed as a log-space Poisson mixture of upper
/// gamma tails so deep right tails stay meaningful.
pub fn log_noncentral_chi_square_sf(x: f64, dof: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0; // ln 1
    }
    if lambda <= 0.0 {
        return log_gamma_upper_regularized(0.5 * dof, 0.5 * x);
    }
    let half = 0.5 * lambda;
    let mut log_w = -half;
    // Streaming log-sum-exp over mixture terms.
    let mut max_term = f64::NEG_INFINITY;
    let mut scaled_sum = 0.0;
    for j in 0..50_000u64 {
        let term = log_w + log_gamma_upper_regularized(0.5 * dof + j as f64, 0.5 * x);
        if term > max_term {
            scaled_sum = scaled_sum * Float::exp(max_term - term) + 1.0;
            max_term = term;
        } else {
            scaled_sum += Float::exp(term - max_term);
        }
        if j as f64 > half && term < max_term - 45.0 {
            break;
        }
        log_w += half.ln() - ((j + 1) as f64).ln();
    }
    (max_term + Float::ln(scaled_sum)).min(0.0)
}

/// Batch-means standard error of the mean of `series`, with `batches` equal
/// batches (remainder samples at the end are dropped).
pub fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let b = batches.max(2);
    let len = series.len() / b;
    if len == 0 {
        return f64::INFINITY;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| series[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

/// Mean of a slice.
pub fn mean(series: &[f64]) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    series.iter().sum::<f64>() / series.len() as f64
}

/// Greatest common divisor by Euclid's algorithm; `gcd(0, b) = b`.
pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// gcd over an iterator of positive integers; empty input yields 0.
pub fn gcd_of<I: IntoIterator<Item = u64>>(values: I) -> u64 {
    values.into_iter().fold(0, gcd)
}

/// Deterministic seed stream derivation: mixes a master seed with two
/// indices (splitmix64 finalizer), so independent sub-streams are
/// reproducible regardless of evaluation order.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Low-discrepancy Halton point set inside a box, one prime base per
/// coordinate. Deterministic; used to sample origins for certificates.
pub fn halton_box(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let dim = lo.len();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[d % PRIMES.len()]);
                    lo[d] + u * (hi[d] - lo[d])
                })
                .collect()
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut f = 1.0 / base as f64;
    while i > 0 {
        inv += f * (i % base) as f64;
        i /= base;
        f /= base as f64;
    }
    inv
}
