//! Bias metrics against the oracle and their empirical distributions.

use tvws_core::reuse::Mpep;

/// Per-grid comparison of derived and oracle MPEP values. Pairs where
/// exactly one side forbids transmission are counted rather than given
/// a dB value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MpepComparison {
    /// Derived minus oracle, dB; zero where both forbid transmission.
    pub bias_db: Vec<f64>,
    /// Derived transmits where the oracle forbids it.
    pub violations: usize,
    /// Derived forbids transmission where the oracle allows it.
    pub conservative: usize,
}

pub fn compare_mpep(derived: &[Mpep], oracle: &[Mpep]) -> MpepComparison {
    let mut out = MpepComparison::default();
    for (d, o) in derived.iter().zip(oracle) {
        match (d, o) {
            (Mpep::Dbm(d), Mpep::Dbm(o)) => out.bias_db.push(d - o),
            (Mpep::NoTransmission, Mpep::NoTransmission) => out.bias_db.push(0.0),
            (Mpep::Dbm(_), Mpep::NoTransmission) => out.violations += 1,
            (Mpep::NoTransmission, Mpep::Dbm(_)) => out.conservative += 1,
        }
    }
    out
}

/// Pooled biases over many seeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiasReport {
    pub mpep_bias_db: Vec<f64>,
    pub ip_bias: Vec<f64>,
    pub violations: usize,
    pub conservative: usize,
}

impl BiasReport {
    pub fn add(&mut self, mpep: &MpepComparison, ip_bias: &[f64]) {
        self.mpep_bias_db.extend_from_slice(&mpep.bias_db);
        self.ip_bias.extend_from_slice(ip_bias);
        self.violations += mpep.violations;
        self.conservative += mpep.conservative;
    }

    pub fn is_empty(&self) -> bool {
        self.mpep_bias_db.is_empty() && self.ip_bias.is_empty()
    }

    pub fn mpep_cdf(&self) -> Vec<(f64, f64)> {
        empirical_cdf(&self.mpep_bias_db)
    }

    pub fn ip_cdf(&self) -> Vec<(f64, f64)> {
        empirical_cdf(&self.ip_bias)
    }

    /// Fraction of grids whose achieved interference probability is within the threshold.
    pub fn ip_satisfied_fraction(&self) -> f64 {
        crate::pipeline::satisfied_fraction(&self.ip_bias)
    }
}

/// `(value, F(value))` pairs sorted by value; `F` steps by `1/n`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_pairs() {
        let d = [Mpep::Dbm(-12.0), Mpep::NoTransmission, Mpep::Dbm(-10.0), Mpep::NoTransmission];
        let o = [Mpep::Dbm(-10.0), Mpep::NoTransmission, Mpep::NoTransmission, Mpep::Dbm(-20.0)];
        let c = compare_mpep(&d, &o);
        assert_eq!(c.bias_db, vec![-2.0, 0.0]);
        assert_eq!((c.violations, c.conservative), (1, 1));
    }

    #[test]
    fn cdf_is_proper() {
        let cdf = empirical_cdf(&[0.3, -1.0, 0.3, 2.0]);
        assert_eq!(cdf.first().unwrap().0, -1.0);
        assert_eq!(cdf.last().unwrap().1, 1.0);
        assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert!(empirical_cdf(&[]).is_empty());
    }
}
