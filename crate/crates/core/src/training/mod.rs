//! The nine-term objective, data preparation, and the training,
//! evaluation, ablation and sweep drivers.

mod data;
mod export;
mod loss;
mod objective;
mod trainer;

pub use data::{
    batch_tensors, load_manifest, load_scenes, prepare_scene, split_scenes, synth_scenes, FeatureNorm, Sample, SceneData, Splits,
};
pub use export::export_embeddings;
pub use loss::{batch_loss, total_loss, LossReport, LossWeights, Predictions, SWEEP_ROWS, TERM_NAMES};
pub use objective::Objective;
pub use trainer::{
    ablate, ablation_report, ablation_table, decode_events, evaluate, from_checkpoint, held_out, infer_scene,
    load_model, median, predict_samples, save_model, sweep, sweep_report, to_checkpoint, train, write_loss_log,
    AblationResult, SweepRow, TrainConfig, TrainOutcome,
};
