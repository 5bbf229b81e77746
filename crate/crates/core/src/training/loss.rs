use std::fmt;

use crate::error::{Error, Result};
use crate::model::{LogitGrads, NetOutputs};
use crate::numcore::{binary_cross_entropy, sigmoid, Real, Tensor};
use crate::synthgen::FrameLabels;

pub const TERM_NAMES: [&str; 9] = [
    "a_sil", "a_spe", "a_sin", "a_oth", "v_voc", "av_sil", "av_spe", "av_sin", "av_oth",
];

/// Scale factors of the nine loss terms: four audio-level, one visual, four
/// audio-visual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda: [f64; 9],
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: [1.0; 9] }
    }
}

/// The six grouped settings (audio, visual, audio-visual) of the sweep.
pub const SWEEP_ROWS: [(f64, f64, f64); 6] = [
    (1.0, 1.0, 0.5),
    (1.0, 0.5, 1.0),
    (0.5, 1.0, 1.0),
    (1.0, 1.0, 1.0),
    (0.5, 0.5, 1.0),
    (0.5, 0.5, 0.5),
];

impl LossWeights {
    /// One scalar per group.
    pub fn grouped(a: f64, v: f64, av: f64) -> Self {
        LossWeights {
            lambda: [a, a, a, a, v, av, av, av, av],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.lambda.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "lambda.{} = {} must be finite and >= 0",
                i + 1,
                self.lambda[i]
            )));
        }
        Ok(())
    }

    fn group_active(&self, range: std::ops::Range<usize>) -> bool {
        self.lambda[range].iter().any(|&l| l > 0.0)
    }

    pub fn audio_active(&self) -> bool {
        self.group_active(0..4)
    }

    pub fn visual_active(&self) -> bool {
        self.group_active(4..5)
    }

    pub fn av_active(&self) -> bool {
        self.group_active(5..9)
    }
}

/// The nine loss terms and their weighted sum for one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub epoch: usize,
    pub batch: usize,
    pub terms: [f64; 9],
    pub total: f64,
}

impl LossReport {
    pub fn tsv_header() -> String {
        let mut s = String::from("epoch\tbatch");
        for n in TERM_NAMES {
            s.push('\t');
            s.push_str(n);
        }
        s.push_str("\ttotal\n");
        s
    }

    pub fn tsv_row(&self) -> String {
        let mut s = format!("{}\t{}", self.epoch, self.batch);
        for t in self.terms {
            s.push_str(&format!("\t{t:.6e}"));
        }
        s.push_str(&format!("\t{:.6e}\n", self.total));
        s
    }
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {} batch {} total {:.5}", self.epoch, self.batch, self.total)
    }
}

/// Probabilities for one block; outputs a variant does not produce are
/// `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Predictions {
    pub audio: Option<[f32; 4]>,
    pub visual: Option<f32>,
    pub av: Option<[f32; 4]>,
}

fn term_inputs(p: &Predictions, t: &FrameLabels) -> [(Option<f32>, f32); 9] {
    let a = |i: usize| (p.audio.map(|v| v[i]), t.audio[i]);
    let av = |i: usize| (p.av.map(|v| v[i]), t.av[i]);
    [a(0), a(1), a(2), a(3), (p.visual, t.visual), av(0), av(1), av(2), av(3)]
}

/// Weighted cross-entropy over the nine output/target pairs of one block.
/// Terms with a zero weight may lack a prediction; others may not.
pub fn total_loss(p: &Predictions, targets: &FrameLabels, w: &LossWeights) -> Result<LossReport> {
    w.validate()?;
    let mut terms = [0.0; 9];
    let mut total = 0.0f32;
    for (i, (pred, y)) in term_inputs(p, targets).into_iter().enumerate() {
        match pred {
            Some(pv) => {
                let l = binary_cross_entropy(pv, y)?;
                terms[i] = l as f64;
                total += w.lambda[i] as f32 * l;
            }
            None if w.lambda[i] > 0.0 => {
                return Err(Error::InvalidArgument(format!(
                    "missing prediction for loss term {} with lambda {}",
                    TERM_NAMES[i], w.lambda[i]
                )))
            }
            None => {}
        }
    }
    Ok(LossReport {
        epoch: 0,
        batch: 0,
        terms,
        total: total as f64,
    })
}

/// Batch-mean weighted loss and its gradient with respect to every logit the
/// network produced.
pub fn batch_loss<F: Real>(out: &NetOutputs<F>, targets: &[FrameLabels], w: &LossWeights) -> Result<(LossReport, LogitGrads<F>)> {
    let n = out.n;
    if targets.len() != n {
        return Err(Error::InvalidArgument(format!("{} targets for a batch of {n}", targets.len())));
    }
    let inv_n = F::one() / F::from_usize(n.max(1)).unwrap();
    let mut terms = [F::zero(); 9];
    let mut bce = |logit: F, y: f32, term: usize| -> Result<F> {
        let p = sigmoid(logit);
        let y = F::lit(y as f64);
        terms[term] += binary_cross_entropy(p, y)? * inv_n;
        Ok(F::lit(w.lambda[term]) * (p - y) * inv_n)
    };
    let mut grads = LogitGrads {
        audio: None,
        visual: None,
        av: None,
    };
    if let Some(a) = &out.audio {
        let mut g = vec![F::zero(); n * 4];
        for (s, t) in targets.iter().enumerate() {
            for i in 0..4 {
                g[s * 4 + i] = bce(a.logits.data()[s * 4 + i], t.audio[i], i)?;
            }
        }
        grads.audio = Some(Tensor::from_vec(&[n, 4], g)?);
    }
    if let Some(v) = &out.visual {
        let mut g = vec![F::zero(); n];
        for (s, t) in targets.iter().enumerate() {
            g[s] = bce(v.logit.data()[s], t.visual, 4)?;
        }
        grads.visual = Some(Tensor::from_vec(&[n, 1], g)?);
    }
    if let Some(f) = &out.fusion {
        let mut g = vec![F::zero(); n * 4];
        for (s, t) in targets.iter().enumerate() {
            for i in 0..4 {
                g[s * 4 + i] = bce(f.logits.data()[s * 4 + i], t.av[i], 5 + i)?;
            }
        }
        grads.av = Some(Tensor::from_vec(&[n, 4], g)?);
    }
    let present = [
        out.audio.is_some(),
        out.audio.is_some(),
        out.audio.is_some(),
        out.audio.is_some(),
        out.visual.is_some(),
        out.fusion.is_some(),
        out.fusion.is_some(),
        out.fusion.is_some(),
        out.fusion.is_some(),
    ];
    if let Some(i) = (0..9).find(|&i| !present[i] && w.lambda[i] > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "loss term {} has lambda {} but its output was not computed",
            TERM_NAMES[i], w.lambda[i]
        )));
    }
    let mut total = F::zero();
    for i in 0..9 {
        total += F::lit(w.lambda[i]) * terms[i];
    }
    let report = LossReport {
        epoch: 0,
        batch: 0,
        terms: terms.map(|t| t.as_f64()),
        total: total.as_f64(),
    };
    Ok((report, grads))
}
