//! Minimal numeric substrate: a dense tensor, the handful of differentiable
//! layers the network needs (each with an explicit backward pass), Adam, a
//! finite-difference gradient checker and the binary checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod norm;
pub mod ops;
pub mod pool;
pub mod real;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CheckpointEntry};
pub use conv::{conv2d, Conv2d};
pub use dense::Dense;
pub use gradcheck::{grad_check, GradCheckReport, GradCheckable};
pub use gru::{gru_step, Gru};
pub use norm::BatchNorm2d;
pub use ops::{binary_cross_entropy, sigmoid, softmax, BCE_EPS};
pub use real::Real;
pub use tensor::Tensor;

/// Forward-pass mode. Batch normalization uses batch statistics and dropout
/// is active only in `Train`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Anything owning trainable tensors (and optionally non-trainable buffers).
///
/// Names are `/`-joined paths; they become checkpoint entry names.
pub trait Module<F: Real> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>);

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>);

    fn buffers<'a>(&'a self, _prefix: &str, _out: &mut Vec<(String, &'a Tensor<F>)>) {}

    fn buffers_mut<'a>(&'a mut self, _prefix: &str, _out: &mut Vec<(String, &'a mut Tensor<F>)>) {}

    fn zero_grad(&mut self) {
        let mut params = Vec::new();
        self.parameters_mut("", &mut params);
        for (_, p) in params {
            p.zero_grad();
        }
    }

    fn parameter_count(&self) -> usize {
        let mut params = Vec::new();
        self.parameters("", &mut params);
        params.iter().map(|(_, p)| p.len()).sum()
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}
