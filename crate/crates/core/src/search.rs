//! One-dimensional search used by the dual exponent and the outer loops.

use crate::scalar::Real;

/// Result of a bracketed scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOptimum<T> {
    pub arg: T,
    pub value: T,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_section_max<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> ScalarOptimum<T> {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evaluations = 2;
    // Guard against tolerances the scalar type cannot resolve.
    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        evaluations += 1;
        iterations += 1;
    }
    let (arg, value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    ScalarOptimum {
        arg,
        value,
        evaluations,
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    tol: T,
) -> ScalarOptimum<T> {
    let r = golden_section_max(|x| -f(x), lo, hi, tol);
    ScalarOptimum {
        value: -r.value,
        ..r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let r = golden_section_max(|x: f64| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-9);
        assert!((r.arg - 0.3).abs() < 1e-6);
        assert!((r.value - 2.0).abs() < 1e-15);
        let r = golden_section_min(|x: f64| (x - 0.75).powi(2), 0.0, 1.0, 1e-9);
        assert!((r.arg - 0.75).abs() < 1e-6);
    }

    #[test]
    fn converges_to_boundary_maximum() {
        let r = golden_section_max(|x: f64| x, 0.0, 1.0, 1e-9);
        assert!(r.arg > 1.0 - 1e-8);
    }
}
