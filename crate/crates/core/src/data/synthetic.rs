//! Gaussian-cluster classification data, a small stand-in for image sets.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Per-coordinate standard deviation of samples around their class center.
pub const SYNTHETIC_SIGMA: f64 = 0.15;

/// Class prototypes: distinct random corners of the unit cube, each
/// coordinate "on" with probability 1/2. When `input_dim` is too small to
/// give every class its own corner, duplicates are kept.
fn centers(input_dim: usize, num_classes: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed, Stream::SyntheticCenters, &[]);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    let distinct_possible = input_dim >= usize::BITS as usize || num_classes <= 1 << input_dim;
    for _ in 0..num_classes {
        loop {
            let c: Vec<f64> = (0..input_dim)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            if !distinct_possible || !centers.contains(&c) {
                centers.push(c);
                break;
            }
        }
    }
    centers
}

fn sample(
    centers: &[Vec<f64>],
    num_samples: usize,
    seed: u64,
    split: u64,
) -> Result<Dataset> {
    let num_classes = centers.len();
    let input_dim = centers[0].len();
    let noise = Normal::new(0.0, SYNTHETIC_SIGMA).expect("valid sigma");
    let mut rng = seed::rng(seed, Stream::SyntheticSamples, &[split]);
    let mut features = Vec::with_capacity(num_samples * input_dim);
    let mut labels = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let label = i % num_classes;
        for &c in &centers[label] {
            let v: f64 = c + noise.sample(&mut rng);
            features.push(v.clamp(0.0, 1.0));
        }
        labels.push(label);
    }
    Dataset::new(features, input_dim, labels, num_classes)
}

fn validate(num_samples: usize, input_dim: usize, num_classes: usize) -> Result<()> {
    if num_classes == 0 {
        return Err(Error::config("dataset.synthetic.classes", "must be positive"));
    }
    if input_dim == 0 {
        return Err(Error::config("dataset.synthetic.dim", "must be positive"));
    }
    if num_samples < num_classes {
        return Err(Error::config(
            "dataset.synthetic.samples",
            format!("{num_samples} samples cannot cover {num_classes} classes"),
        ));
    }
    Ok(())
}

/// Class centers are distinct corners of `[0,1]^input_dim`; samples are the center plus
/// `N(0, SYNTHETIC_SIGMA^2)` noise, clipped to `[0,1]`. Labels cycle through
/// the classes, so counts are balanced within one sample.
pub fn generate_synthetic(
    num_samples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset> {
    validate(num_samples, input_dim, num_classes)?;
    sample(&centers(input_dim, num_classes, seed), num_samples, seed, 0)
}

/// Train and held-out sets drawn around the same class centers. The train set
/// equals `generate_synthetic(train_samples, ..)` for the same seed.
pub fn generate_synthetic_split(
    train_samples: usize,
    test_samples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    validate(train_samples, input_dim, num_classes)?;
    if test_samples == 0 {
        return Err(Error::config("dataset.synthetic.test_samples", "must be positive"));
    }
    let centers = centers(input_dim, num_classes, seed);
    Ok((
        sample(&centers, train_samples, seed, 0)?,
        sample(&centers, test_samples, seed, 1)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = generate_synthetic(1000, 20, 10, 1).unwrap();
        let b = generate_synthetic(1000, 20, 10, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), vec![100; 10]);
        assert!(a.features().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, generate_synthetic(1000, 20, 10, 2).unwrap());

        let protos = centers(20, 10, 1);
        for (i, c) in protos.iter().enumerate() {
            assert!(c.iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(!protos[..i].contains(c));
        }
        // only 4 corners exist in 2 dimensions
        assert_eq!(centers(2, 4, 3).len(), 4);
        assert_eq!(centers(2, 6, 3).len(), 6);

        let uneven = generate_synthetic(1003, 3, 10, 1).unwrap();
        let counts = uneven.class_counts();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn split_shares_centers_with_train() {
        let (train, test) = generate_synthetic_split(500, 200, 5, 4, 9).unwrap();
        assert_eq!(train, generate_synthetic(500, 5, 4, 9).unwrap());
        assert_eq!(test.len(), 200);
        assert_ne!(test.row(0), train.row(0));
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(generate_synthetic(5, 3, 10, 0).is_err());
    }
}
