//! Float helpers routed through `libm` so the crate builds without `std`.

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(sum(exp(xs)))`, exact `-inf` when every term is `-inf`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Log density of independent Gaussians with diagonal variances.
pub(crate) fn ln_normal_diag(x: &[f64], mean: &[f64], var: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &mi)) in x.iter().zip(mean).enumerate() {
        let v = var(i);
        let d = xi - mi;
        acc += LN_2PI + ln(v) + d * d / v;
    }
    -0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_empty_mass() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[ln(0.25), ln(0.75)]);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_survives_large_offsets() {
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + ln(2.0))).abs() < 1e-12);
    }
}
