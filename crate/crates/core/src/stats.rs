//! Replication statistics: sample mean and Student-t confidence half-widths.

use num_traits::Float;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided critical value of Student's t with `df` degrees of freedom.
pub fn t_critical(confidence: f64, df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    dist.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let n = T::from(xs.len())?;
    Some(xs.iter().fold(T::zero(), |acc, &x| acc + x) / n)
}

/// Unbiased sample standard deviation; zero for fewer than two samples.
pub fn sample_std<T: Float>(xs: &[T]) -> T {
    // Constant samples: the rounded mean would leave a residue.
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return T::zero();
    }
    let m = mean(xs).unwrap_or_else(T::zero);
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    let dof = T::from(xs.len() - 1).unwrap_or_else(T::one);
    (ss / dof).sqrt()
}

/// Mean and 95% confidence half-width over independent replication values.
/// A single replication has half-width zero.
pub fn mean_ci95<T: Float>(xs: &[T]) -> Option<(T, T)> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some((m, T::zero()));
    }
    let t = T::from(t_critical(0.95, xs.len() - 1))?;
    let n = T::from(xs.len())?;
    Some((m, t * sample_std(xs) / n.sqrt()))
}
