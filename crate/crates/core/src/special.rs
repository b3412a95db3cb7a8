//! Normal distribution functions and log-domain helpers.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Standard normal upper tail `P(Z > x)`, accurate in relative terms far into
/// the tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation (relative error about 1e-9) followed by
/// one Halley step against `erfc`, which brings it to near machine precision.
pub fn inv_norm_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let num = ((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5];
        let den = (((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0;
        num / den
    };
    let x = if p < P_LOW {
        tail(libm::sqrt(-2.0 * libm::log(p)))
    } else if p > 1.0 - P_LOW {
        -tail(libm::sqrt(-2.0 * libm::log1p(-p)))
    } else {
        let q = p - 0.5;
        let r = q * q;
        let num = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q;
        let den = ((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0;
        num / den
    };

    // Halley refinement; the residual is taken on whichever tail is smaller.
    let e = if p < 0.5 { norm_cdf(x) - p } else { (1.0 - p) - norm_sf(x) };
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// `log(sum(exp(v)))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Normal density with mean `m`, standard deviation `s`.
pub fn normal_pdf(x: f64, m: f64, s: f64) -> f64 {
    norm_pdf((x - m) / s) / s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_values() {
        // Reference values from high-precision evaluation of erfc.
        let cases = [
            (1.0, 0.158_655_253_931_457_05),
            (2.0, 0.022_750_131_948_179_21),
            (4.0, 3.167_124_183_311_992e-5),
            (8.0, 6.220_960_574_271_785e-16),
        ];
        for (x, want) in cases {
            let got = norm_sf(x);
            assert!(((got - want) / want).abs() < 1e-13, "x={x}: {got} vs {want}");
        }
        assert_eq!(norm_sf(0.0), 0.5);
        assert!((norm_cdf(-2.0) - norm_sf(2.0)).abs() < 1e-17);
    }

    #[test]
    fn inverse_cdf_quantiles() {
        assert!((inv_norm_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inv_norm_cdf(0.5)).abs() < 1e-15);
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.7, 0.99, 1.0 - 1e-9] {
            let x = inv_norm_cdf(p);
            let back = if p < 0.5 { norm_cdf(x) } else { 1.0 - norm_sf(x) };
            assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn lse_is_stable() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(v) - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp([-1e5, 0.0]) - 0.0).abs() < 1e-300);
    }
}
