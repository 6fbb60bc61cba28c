//! Teacher-network synthetic multi-label data.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::nn::{MlpArchitecture, MlpModel};
use crate::seeding::{self, stream};
use crate::{Error, Result};

/// Parameters of a synthetic dataset.
///
/// Features are i.i.d. standard normal. Labels come from a randomly
/// initialized teacher MLP: a label is positive when the teacher's logit plus
/// `density_bias` is positive (sigmoid above 0.5), and each label is then
/// flipped independently with probability `label_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_labels: usize,
    pub teacher_hidden: Vec<usize>,
    pub label_noise: f64,
    pub density_bias: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_instances: 2000,
            n_features: 20,
            n_labels: 5,
            teacher_hidden: vec![16],
            label_noise: 0.1,
            density_bias: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 || self.n_features == 0 || self.n_labels == 0 {
            return Err(Error::InvalidArgument(
                "synthetic instance, feature and label counts must be positive".into(),
            ));
        }
        if self.teacher_hidden.contains(&0) {
            return Err(Error::InvalidArgument("teacher hidden widths must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::InvalidArgument(format!(
                "label noise {} outside [0, 0.5)",
                self.label_noise
            )));
        }
        if !self.density_bias.is_finite() {
            return Err(Error::InvalidArgument("density bias must be finite".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let (n, d, l) = (spec.n_instances, spec.n_features, spec.n_labels);

    let mut rng = seeding::rng(seeding::derive(seed, stream::SYNTHETIC_FEATURES));
    let features = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));

    let arch = MlpArchitecture::new(spec.teacher_hidden.clone())?;
    let teacher = MlpModel::init(
        &arch,
        d,
        l,
        seeding::derive(seed, stream::SYNTHETIC_TEACHER),
    )?;
    let logits = teacher.logits(features.view())?;

    let mut noise = seeding::rng(seeding::derive(seed, stream::SYNTHETIC_NOISE));
    let labels = logits.mapv(|z| {
        let clean = z + spec.density_bias > 0.0;
        let flip = noise.random::<f64>() < spec.label_noise;
        f64::from(u8::from(clean ^ flip))
    });
    Dataset::new("synthetic", features, Some(labels))
}
