use crate::prob::Pmf;
use crate::scalar::Real;

/// One rate of an exponent curve together with the solver's optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint<T> {
    pub rate: T,
    pub value: T,
    /// Maximizing Rényi order (achievability curves).
    pub alpha_star: Option<T>,
    /// Balancing slack (converse curves).
    pub s_star: Option<T>,
    /// Minimizing input distribution: `P_X*` for achievability, `Q_X*` for the converse.
    pub optimizer: Pmf<T>,
    pub evaluations: usize,
}

/// Exponent values over a rate grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExponentCurve<T> {
    pub points: Vec<CurvePoint<T>>,
}

impl<T: Real> ExponentCurve<T> {
    pub fn rates(&self) -> Vec<T> {
        self.points.iter().map(|p| p.rate).collect()
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Largest increase between consecutive rates (0 for a non-increasing curve).
    pub fn max_increase(&self) -> T {
        self.points
            .windows(2)
            .map(|w| w[1].value - w[0].value)
            .fold(T::zero(), T::max)
    }
}

/// `start, start + step, …` up to and including `stop` (within `step/1000`),
/// each rounded to 12 decimals so that e.g. `0.075` prints as such.
pub fn rate_grid<T: Real>(start: T, stop: T, step: T) -> Vec<T> {
    assert!(step > T::zero(), "rate step must be positive");
    let slack = step / T::lit(1000.0);
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let scale = T::lit(1e12);
        let r = ((start + step * T::from_usize_lossy(k)) * scale).round() / scale;
        if r > stop + slack {
            break;
        }
        out.push(r);
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g: Vec<f64> = rate_grid(0.0, 0.6, 0.025);
        assert_eq!(g.len(), 25);
        assert_eq!(g[24], 0.6);
        assert_eq!(g[3], 0.075);
        assert_eq!(rate_grid(0.0, 0.0, 0.1), vec![0.0]);
    }
}
