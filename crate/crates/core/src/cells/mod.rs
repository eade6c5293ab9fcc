//! Recurrent cells, classifier heads and whole models.

pub mod attention;
pub mod heads;
pub mod lstm;
pub mod model;
pub mod params;

pub use attention::{attend, cell_attention_step, step_with_attention, trace_sequence, AttentionOutput};
pub use heads::apply_head;
pub use lstm::{lstm_step, CellState, Gates, StepOutput};
pub use model::{split_time_major, time_major, Architecture, CellKind, Forward, Model, ModelSpec, ScoreModel};
pub use params::{
    AttentionParams, BoundAttention, BoundLstm, BoundModel, CellAttentionParams, CellParams, ClassifierHead, Gate,
    HeadKind, LstmParams, ModelParams,
};
