use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::HdRng;

/// Isotropic Gaussian clusters, one per class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    /// Class centres are drawn uniformly from `[0, spread)^f`.
    pub spread: f64,
    /// Per-feature standard deviation around the centre.
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { classes: 3, features: 8, per_class: 60, spread: 10.0, noise: 1.0, seed: 0 }
    }
}

/// Samples a blob dataset. Rows are interleaved by class.
pub fn blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.classes == 0 || spec.per_class == 0 {
        return Err(Error::EmptyDataset);
    }
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = HdRng::new(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.features).map(|_| rng.random::<f64>() * spec.spread).collect())
        .collect();
    let mut features = Vec::with_capacity(spec.classes * spec.per_class * spec.features);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for _ in 0..spec.per_class {
        for (y, centre) in centres.iter().enumerate() {
            features.extend(centre.iter().map(|&c| (c + noise.sample(&mut rng)) as f32));
            labels.push(y);
        }
    }
    Dataset::new(features, spec.features, labels, (0..spec.classes).map(|c| format!("c{c}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = BlobSpec { classes: 4, features: 5, per_class: 7, ..Default::default() };
        let a = blobs(&spec).unwrap();
        assert_eq!((a.len(), a.n_features(), a.n_classes()), (28, 5, 4));
        assert_eq!(a.class_counts(), vec![7; 4]);
        assert_eq!(a, blobs(&spec).unwrap());
        assert_ne!(a, blobs(&BlobSpec { seed: 1, ..spec }).unwrap());
    }
}
