//! Synthetic spectrometer data with an object/sample hierarchy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::spectral::{MaterialClass, SpectralReading, SPECTRAL_LEN};

pub const OBJECTS_PER_CLASS: usize = 12;
pub const SAMPLES_PER_OBJECT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralClassModel {
    pub class: MaterialClass,
    pub mean: Vec<f64>,
    /// Per-sample Gaussian noise sd.
    pub noise: f64,
    /// Per-object offset sd (applied to both a constant shift and a linear tilt).
    pub offset: f64,
}

impl SpectralClassModel {
    /// Baseline plus 3 to 5 Gaussian bumps drawn from a fixed per-class seed.
    pub fn default_for(class: MaterialClass) -> Self {
        let idx = MaterialClass::ALL.iter().position(|c| *c == class).unwrap_or(0) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5bec_7a00 + idx);
        let bumps = rng.random_range(3..=5);
        let mut mean = vec![0.3; SPECTRAL_LEN];
        for _ in 0..bumps {
            let center = rng.random_range(0.0..SPECTRAL_LEN as f64);
            let width = rng.random_range(10.0..40.0);
            let height = rng.random_range(0.15..0.5);
            for (i, m) in mean.iter_mut().enumerate() {
                let z = (i as f64 - center) / width;
                *m += height * (-0.5 * z * z).exp();
            }
        }
        Self {
            class,
            mean,
            noise: 0.02,
            offset: 0.03,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.mean.len() != SPECTRAL_LEN || self.mean.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "{} mean must have {SPECTRAL_LEN} finite values",
                self.class
            )));
        }
        if !(self.noise >= 0.0 && self.offset >= 0.0) {
            return Err(SynthError::InvalidSpec(format!("{} scales must be non-negative", self.class)));
        }
        Ok(())
    }

    /// One object's readings: a shared offset plus independent noise per sample.
    pub fn sample_object(
        &self,
        object_id: &str,
        samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<SpectralReading> {
        let (shift, tilt) = if self.offset > 0.0 {
            let n = Normal::new(0.0, self.offset).expect("finite sd");
            (n.sample(rng), n.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let noise = (self.noise > 0.0).then(|| Normal::new(0.0, self.noise).expect("finite sd"));
        let base: Vec<f64> = self
            .mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + shift + tilt * (i as f64 / (SPECTRAL_LEN - 1) as f64 - 0.5))
            .collect();
        (0..samples)
            .map(|s| {
                let values = base
                    .iter()
                    .map(|b| b + noise.map_or(0.0, |n| n.sample(rng)))
                    .collect();
                SpectralReading::new(values, object_id, s as u32).expect("finite reading")
            })
            .collect()
    }
}

pub fn default_class_models() -> Vec<SpectralClassModel> {
    MaterialClass::ALL.into_iter().map(SpectralClassModel::default_for).collect()
}

/// Object id used by the dataset generator.
pub fn dataset_object_id(class: MaterialClass, index: usize) -> String {
    format!("{class}-{index:02}")
}

/// Readings ordered by class, then object, then sample. Each object gets its
/// own generator derived from `seed`, so subsets are reproducible on their own.
pub fn gen_spectral_dataset(
    models: &[SpectralClassModel],
    objects_per_class: usize,
    samples_per_object: usize,
    seed: u64,
) -> Result<Vec<(SpectralReading, MaterialClass)>, SynthError> {
    let mut out = Vec::with_capacity(models.len() * objects_per_class * samples_per_object);
    for (ci, model) in models.iter().enumerate() {
        model.validate()?;
        for o in 0..objects_per_class {
            let mut rng = object_rng(seed, ci, o);
            let id = dataset_object_id(model.class, o);
            out.extend(
                model
                    .sample_object(&id, samples_per_object, &mut rng)
                    .into_iter()
                    .map(|r| (r, model.class)),
            );
        }
    }
    Ok(out)
}

fn object_rng(seed: u64, class: usize, object: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | object as u64);
    rng
}

/// Index of the nearest class mean in Euclidean distance.
pub fn nearest_mean(models: &[SpectralClassModel], values: &[f64]) -> usize {
    let dist = |m: &SpectralClassModel| -> f64 {
        m.mean.iter().zip(values).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    (0..models.len())
        .min_by(|&a, &b| dist(&models[a]).total_cmp(&dist(&models[b])))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let data = gen_spectral_dataset(&default_class_models(), OBJECTS_PER_CLASS, SAMPLES_PER_OBJECT, 0)
            .unwrap();
        assert_eq!(data.len(), 3000);
        for c in MaterialClass::ALL {
            assert_eq!(data.iter().filter(|(_, k)| *k == c).count(), 600);
        }
    }

    #[test]
    fn deterministic() {
        let m = default_class_models();
        assert_eq!(gen_spectral_dataset(&m, 2, 3, 9).unwrap(), gen_spectral_dataset(&m, 2, 3, 9).unwrap());
        assert_ne!(gen_spectral_dataset(&m, 2, 3, 9).unwrap(), gen_spectral_dataset(&m, 2, 3, 10).unwrap());
    }

    #[test]
    fn zero_noise_gives_identical_samples_within_an_object() {
        let mut models = default_class_models();
        for m in &mut models {
            m.noise = 0.0;
            m.offset = 0.0;
        }
        let data = gen_spectral_dataset(&models, 3, 10, 1).unwrap();
        for chunk in data.chunks(10) {
            assert!(chunk.iter().all(|(r, _)| r.values() == chunk[0].0.values()));
        }
    }

    #[test]
    fn nearest_mean_oracle_is_accurate() {
        let models = default_class_models();
        let data = gen_spectral_dataset(&models, OBJECTS_PER_CLASS, SAMPLES_PER_OBJECT, 0).unwrap();
        let correct = data
            .iter()
            .filter(|(r, c)| models[nearest_mean(&models, r.values())].class == *c)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99);
    }

    #[test]
    fn negative_scale_rejected() {
        let mut m = SpectralClassModel::default_for(MaterialClass::Wood);
        m.noise = -1.0;
        assert!(gen_spectral_dataset(&[m], 1, 1, 0).is_err());
    }
}
