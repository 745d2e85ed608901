//! Flat-vector arithmetic and angle geometry.
//!
//! All reductions accumulate sequentially left to right in `f64`, so results
//! are bit-reproducible independent of how callers schedule work.

use std::f64::consts::PI;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Flat model parameter (or gradient, or delta) vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// `self - other`, coordinatewise.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        check_len("sub", self, other)?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scaled(&self, factor: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &ParamVector) -> Result<()> {
        check_len("axpy", self, other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(context: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context,
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("dot", a, b)?;
    Ok(a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y))
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

#[cfg(debug_assertions)]
static COSINE_CLAMPS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

/// Number of times a cosine fell outside [-1, 1] and was clamped. Always 0
/// in release builds.
pub fn cosine_clamp_count() -> usize {
    #[cfg(debug_assertions)]
    {
        COSINE_CLAMPS.load(std::sync::atomic::Ordering::Relaxed)
    }
    #[cfg(not(debug_assertions))]
    {
        0
    }
}

/// Angle in radians, in `[0, pi]`, between two nonzero vectors.
pub fn angle_between(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = dot(a, b)?;
    let aa = dot(a, a)?;
    let bb = dot(b, b)?;
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::DegenerateGeometry("angle with a zero-norm vector"));
    }
    // sqrt(aa * bb) rather than |a| |b|: identical inputs then give cos = 1 exactly
    let cos = d / (aa * bb).sqrt();
    if !cos.is_finite() {
        return Err(Error::NonFinite("angle_between"));
    }
    #[cfg(debug_assertions)]
    if !(-1.0..=1.0).contains(&cos) {
        COSINE_CLAMPS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    }
    let theta = cos.clamp(-1.0, 1.0).acos();
    debug_assert!((0.0..=PI).contains(&theta));
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    /// Neumaier compensated summation; independent of the sequential path.
    fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                c += (sum - t) + v;
            } else {
                c += (v - t) + sum;
            }
            sum = t;
        }
        sum + c
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 5.0);
        // 0.6 - 0.35 - 1.1
        let v = dot(&[0.3, -0.7, 1.1], &[2.0, 0.5, -1.0]).unwrap();
        assert!((v - (-0.85)).abs() < 1e-15, "{v}");
    }

    #[test]
    fn dot_rejects_length_mismatch() {
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(norm(&[1.0, 1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn angle_examples() {
        let v = [0.3, -1.2, 4.0];
        assert_eq!(angle_between(&v, &v).unwrap(), 0.0);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(angle_between(&v, &neg).unwrap(), PI);
        let a = angle_between(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((a - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn angle_rejects_zero_vector() {
        assert!(matches!(
            angle_between(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn dot_and_norm_agree_with_compensated_sum_on_large_vectors() {
        use rand::Rng;
        let mut rng = crate::seed::rng(11, crate::seed::Stream::ModelInit, &[]);
        let n = 1_000_000;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();

        let d = dot(&a, &b).unwrap();
        let d_ref = compensated_sum(a.iter().zip(&b).map(|(x, y)| x * y));
        // relative to sum |a_k b_k|, the conditioning scale of the reduction
        let scale = compensated_sum(a.iter().zip(&b).map(|(x, y)| (x * y).abs()));
        assert!((d - d_ref).abs() / scale < 1e-12, "{d} vs {d_ref}");

        let nr = norm(&a);
        let nr_ref = compensated_sum(a.iter().map(|x| x * x)).sqrt();
        assert!((nr - nr_ref).abs() / nr_ref < 1e-12);
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..16)
            .prop_filter("nonzero", |v| norm(v) > 1e-6)
    }

    proptest! {
        #[test]
        fn angle_is_symmetric(pair in (1usize..16).prop_flat_map(|n| (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )).prop_filter("nonzero", |(a, b)| norm(a) > 1e-6 && norm(b) > 1e-6)) {
            let (a, b) = pair;
            prop_assert_eq!(angle_between(&a, &b).unwrap(), angle_between(&b, &a).unwrap());
        }

        #[test]
        fn angle_with_positive_and_negative_multiples(a in nonzero_vec(), c in 0.01f64..100.0) {
            let pos: Vec<f64> = a.iter().map(|x| c * x).collect();
            let neg: Vec<f64> = a.iter().map(|x| -c * x).collect();
            prop_assert!(angle_between(&a, &pos).unwrap() < 1e-7);
            prop_assert!((angle_between(&a, &neg).unwrap() - PI).abs() < 1e-7);
        }
    }
}
