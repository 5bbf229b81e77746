use crate::error::Result;
use crate::model::{AvvadNet, Variant};
use crate::numcore::{GradCheckable, Mode, Module, Real, Tensor};
use crate::synthgen::FrameLabels;

use super::loss::{batch_loss, LossWeights};

/// The weighted nine-term objective of a network on a fixed batch, exposed to
/// the gradient checker. Batch norm uses batch statistics; dropout is off.
pub struct Objective<F: Real> {
    pub net: AvvadNet<F>,
    pub audio: Tensor<F>,
    pub visual: Tensor<F>,
    pub targets: Vec<FrameLabels>,
    pub weights: LossWeights,
    pub variant: Variant,
}

impl<F: Real> Objective<F> {
    fn with_param<T>(&mut self, group: usize, f: impl FnOnce(&mut Tensor<F>) -> T) -> T {
        let mut params = Vec::new();
        self.net.parameters_mut("", &mut params);
        let (_, t) = params.swap_remove(group);
        f(t)
    }
}

impl<F: Real> GradCheckable<F> for Objective<F> {
    fn is_deterministic(&self) -> bool {
        true
    }

    fn groups(&self) -> Vec<(String, usize)> {
        let mut params = Vec::new();
        self.net.parameters("", &mut params);
        params.into_iter().map(|(n, t)| (n, t.len())).collect()
    }

    fn get(&self, group: usize, index: usize) -> F {
        let mut params = Vec::new();
        self.net.parameters("", &mut params);
        params[group].1.data()[index]
    }

    fn set(&mut self, group: usize, index: usize, value: F) {
        self.with_param(group, |t| t.data_mut()[index] = value);
    }

    fn evaluate(&mut self) -> Result<(F, Vec<u32>)> {
        let (out, cache) = self.net.forward(&self.audio, &self.visual, self.variant, Mode::Train, None)?;
        let (report, _) = batch_loss(&out, &self.targets, &self.weights)?;
        Ok((F::lit(report.total), cache.fingerprint()))
    }

    fn gradient(&mut self) -> Result<Vec<Vec<F>>> {
        let (out, cache) = self.net.forward(&self.audio, &self.visual, self.variant, Mode::Train, None)?;
        let (_, grads) = batch_loss(&out, &self.targets, &self.weights)?;
        self.net.zero_grad();
        self.net.backward(&cache, &grads);
        let mut params = Vec::new();
        self.net.parameters("", &mut params);
        Ok(params
            .into_iter()
            .map(|(_, t)| t.grad().map(<[F]>::to_vec).unwrap_or_else(|| vec![F::zero(); t.len()]))
            .collect())
    }
}
