//! Improvement rate and Welch's one-tailed t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvaluationError;

/// `(after - before) / before` for scores in `[0, 100]`.
pub fn improvement_rate(before: f64, after: f64) -> Result<f64, EvaluationError> {
    for (name, value) in [("before", before), ("after", after)] {
        if !(0.0..=100.0).contains(&value) {
            return Err(EvaluationError::OutOfRange { name, value });
        }
    }
    if before == 0.0 {
        return Err(EvaluationError::ZeroBaseline);
    }
    Ok((after - before) / before)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// One-tailed p-value for the alternative `mean(a) < mean(b)`.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test of `mean(a) < mean(b)`.
pub fn one_tailed_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EvaluationError> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(EvaluationError::InsufficientData {
                needed: 2,
                got: g.len(),
            });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 {
        return Err(EvaluationError::ZeroVariance('a'));
    }
    if vb == 0.0 {
        return Err(EvaluationError::ZeroVariance('b'));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let p = if t == 0.0 {
        0.5
    } else {
        StudentsT::new(0.0, 1.0, df)
            .expect("positive degrees of freedom")
            .cdf(t)
    };
    Ok(TTestResult { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement() {
        assert!((improvement_rate(50.0, 60.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(improvement_rate(70.0, 70.0).unwrap(), 0.0);
        assert_eq!(
            improvement_rate(0.0, 50.0),
            Err(EvaluationError::ZeroBaseline)
        );
        assert!(improvement_rate(50.0, 101.0).is_err());
    }

    #[test]
    fn identical_groups_give_half() {
        let g = [1.0, 2.0, 3.5, 4.0];
        assert_eq!(one_tailed_t_test(&g, &g).unwrap().p, 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            one_tailed_t_test(&[1.0], &[1.0, 2.0]),
            Err(EvaluationError::InsufficientData { .. })
        ));
        assert_eq!(
            one_tailed_t_test(&[1.0, 2.0], &[3.0, 3.0]),
            Err(EvaluationError::ZeroVariance('b'))
        );
    }

    #[test]
    fn extreme_separation() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        assert!(one_tailed_t_test(&a, &b).unwrap().p < 1e-3);
    }
}
