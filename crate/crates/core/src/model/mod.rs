//! The message-passing network over combinatorial complexes and its
//! reverse-mode gradients.

mod checkpoint;
mod network;
mod params;
mod tape;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{
    sequential, simultaneous, step1_enrich_faces, step2_contact_update, step3_face_collision_aggregate,
    step4_object_update, step5_node_object_exchange, Block, Embeddings, HopNet, ModelConfig, ModelError,
    ModelNormalizers, Recorded, Routes, SequentialBlock, SimultaneousBlock, Stages,
};
pub use params::{Gradients, Mlp, ParamStore};
pub use tape::{Routing, Tape, Var, LAYER_NORM_EPS};
