use crate::error::{Error, Result};

/// Search interval and tolerance for the λ fit.
pub const LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
pub const LAMBDA_TOL: f64 = 1e-4;

/// Yeo–Johnson power transform.
///
/// Written with `exp_m1`/`ln_1p` so it stays accurate (and continuous) as λ
/// approaches the special values 0 and 2.
pub fn yeo_johnson(x: f64, lambda: f64) -> Result<f64> {
    if !x.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "yeo_johnson needs finite input, got x={x}, lambda={lambda}"
        )));
    }
    Ok(transform(x, lambda))
}

pub(crate) fn transform(x: f64, lambda: f64) -> f64 {
    // both branches reduce to x; skip the rounding of exp_m1(ln_1p(x))
    if lambda == 1.0 {
        return x;
    }
    if x >= 0.0 {
        let l = x.ln_1p();
        if lambda == 0.0 {
            l
        } else {
            (lambda * l).exp_m1() / lambda
        }
    } else {
        let l = (-x).ln_1p();
        let a = 2.0 - lambda;
        if a == 0.0 {
            -l
        } else {
            -(a * l).exp_m1() / a
        }
    }
}

/// Profile log-likelihood of λ under a Gaussian model of the transformed data,
/// including the Jacobian term.
pub fn log_likelihood(xs: &[f64], lambda: f64) -> f64 {
    let n = xs.len() as f64;
    let ys: Vec<f64> = xs.iter().map(|&x| transform(x, lambda)).collect();
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = xs.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    /// Set when the input had fewer than two distinct values; λ is then 1.
    pub degenerate: bool,
}

/// Maximum-likelihood λ by golden-section search over [`LAMBDA_RANGE`].
pub fn fit_lambda(xs: &[f64]) -> LambdaFit {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) || xs.iter().any(|x| !x.is_finite()) {
        return LambdaFit {
            lambda: 1.0,
            degenerate: true,
        };
    }
    let f = |l: f64| log_likelihood(xs, l);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LAMBDA_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > LAMBDA_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // the optimum may sit on the boundary, which the bracket only approaches
    let (lo, hi) = LAMBDA_RANGE;
    let lambda = [(a + b) / 2.0, lo, hi]
        .into_iter()
        .map(|l| (l, f(l)))
        .fold(
            (1.0, f64::NEG_INFINITY),
            |best, (l, v)| if v > best.1 { (l, v) } else { best },
        )
        .0;
    LambdaFit {
        lambda,
        degenerate: false,
    }
}

/// Population skewness; zero for constant input.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}
