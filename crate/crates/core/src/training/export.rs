use std::io::Write;

use crate::error::{Error, Result};
use crate::evalkit::argmax_label;
use crate::model::{AvvadNet, Variant};
use crate::numcore::{sigmoid, Mode};

use super::data::{batch_tensors, FeatureNorm, Sample, SceneData};

/// Tab-separated rows, one per block: scene id, start time, fused rows,
/// Q rows, K, attention, predicted label, true label.
pub fn export_embeddings<W: Write>(net: &AvvadNet<f32>, norm: &FeatureNorm, scenes: &[SceneData], mut w: W) -> Result<usize> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("embedding export: {e}"));
    let e = net.config.embed_dim;
    let mut header = vec!["scene".to_string(), "start".to_string()];
    for prefix in ["fused", "q"] {
        for i in 0..4 {
            for j in 0..e {
                header.push(format!("{prefix}{i}_{j}"));
            }
        }
    }
    header.extend((0..e).map(|j| format!("k_{j}")));
    header.extend((0..4).map(|i| format!("att{i}")));
    header.push("predicted".into());
    header.push("true".into());
    writeln!(w, "{}", header.join("\t")).map_err(io)?;
    let ashape = (net.config.audio_frames, net.config.audio_bins);
    let vshape = (net.config.visual_frames, net.config.visual_size);
    let mut rows = 0;
    for scene in scenes {
        for chunk in scene.samples.chunks(32) {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let (a, v) = batch_tensors::<f32>(&refs, norm, ashape, vshape)?;
            let (out, _) = net.forward(&a, &v, Variant::Full, Mode::Eval, None)?;
            let (au, vi, fu) = (out.audio.as_ref().unwrap(), out.visual.as_ref().unwrap(), out.fusion.as_ref().unwrap());
            for (i, s) in chunk.iter().enumerate() {
                let mut line = format!("{}\t{:.3}", scene.id, s.start_time);
                let mut push = |vals: &[f32]| {
                    for v in vals {
                        line.push_str(&format!("\t{v}"));
                    }
                };
                push(&fu.fused.data()[i * 4 * e..(i + 1) * 4 * e]);
                push(&au.q.data()[i * 4 * e..(i + 1) * 4 * e]);
                push(&vi.k.data()[i * e..(i + 1) * e]);
                push(&fu.att.data()[i * 4..(i + 1) * 4]);
                let z = &fu.logits.data()[i * 4..(i + 1) * 4];
                let p = [sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2]), sigmoid(z[3])];
                line.push_str(&format!("\t{}\t{}", argmax_label(&p), s.labels.class));
                writeln!(w, "{line}").map_err(io)?;
                rows += 1;
            }
        }
    }
    Ok(rows)
}
