//! Adaptive Gauss-Kronrod (7/15) quadrature with global error control.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use redps_core::Error;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let error = ((kron - gauss) * h).abs();
    Panel { a, b, value, error }
}

/// Integrate `f` over `[a, b]`, starting from `initial` equal panels and
/// bisecting the worst panel until the summed error estimate is at most
/// `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    initial: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature, Error> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidArgument(format!("bad integration interval [{a}, {b}]")));
    }
    let n0 = initial.max(1);
    let mut heap = BinaryHeap::with_capacity(max_panels + 2);
    let width = (b - a) / n0 as f64;
    for i in 0..n0 {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == n0 { b } else { lo + width };
        heap.push(gk15(&f, lo, hi));
    }
    let mut evaluations = 15 * n0;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite integrand"));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature { value, abs_error: error, evaluations });
        }
        if heap.len() >= max_panels {
            return Err(Error::Numerical("quadrature did not reach its tolerance"));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Numerical("quadrature panel underflow"));
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1, 1e-14, 1e-14, 10).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
        let q = integrate(f64::exp, 0.0, 1.0, 1, 0.0, 1e-13, 100).unwrap();
        assert!((q.value - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        assert!(q.abs_error < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        // Normal density with sd 1e-3 centred off-grid.
        let s = 1e-3;
        let f = |x: f64| (-(x - 0.3137) * (x - 0.3137) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let q = integrate(f, 0.0, 1.0, 8, 0.0, 1e-10, 10_000).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integrate(|x| x, 1.0, 0.0, 1, 1e-9, 1e-9, 10).is_err());
    }
}
