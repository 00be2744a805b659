use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Mlp, ParamStore};
use super::tape::{Routing, Tape, Var};
use crate::complex::{CombinatorialComplex, DEFAULT_CONTACT_RADIUS};
use crate::features::{FeatureBundle, FeatureConfig, FeatureNormalizers, Normalizer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("rank {rank} input has {got} columns, expected {expected}")]
    ShapeMismatch { rank: usize, expected: usize, got: usize },
    #[error("rank {rank} input has {got} rows, complex has {expected} cells")]
    RowMismatch { rank: usize, expected: usize, got: usize },
}

fn default_hidden() -> usize {
    128
}
fn default_hidden_layers() -> usize {
    2
}
fn default_blocks() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_radius() -> f64 {
    DEFAULT_CONTACT_RADIUS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    /// Untied repetitions of the processor block.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Layer norm on encoder and processor outputs.
    #[serde(default = "default_true")]
    pub layer_norm: bool,
    #[serde(default = "default_radius")]
    pub contact_radius: f64,
    #[serde(default)]
    pub no_object_cells: bool,
    #[serde(default)]
    pub no_center_mass_distance: bool,
    #[serde(default)]
    pub non_sequential: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            hidden_layers: default_hidden_layers(),
            blocks: default_blocks(),
            layer_norm: true,
            contact_radius: DEFAULT_CONTACT_RADIUS,
            no_object_cells: false,
            no_center_mass_distance: false,
            non_sequential: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden == 0 || self.blocks == 0 {
            return Err("hidden width and block count must be positive".into());
        }
        if !(self.contact_radius > 0.0 && self.contact_radius.is_finite()) {
            return Err(format!("contact_radius must be positive, got {}", self.contact_radius));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            no_center_mass_distance: self.no_center_mass_distance,
            no_object_cells: self.no_object_cells,
        }
    }
}

/// Input and target statistics carried with the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelNormalizers {
    pub features: FeatureNormalizers,
    pub node_target: Normalizer,
    pub object_target: Normalizer,
}

impl ModelNormalizers {
    pub fn new(config: FeatureConfig) -> Self {
        Self {
            features: FeatureNormalizers::new(config),
            node_target: Normalizer::new(3),
            object_target: Normalizer::new(3),
        }
    }
}

/// Neighborhood routings of one complex, shared by every block.
#[derive(Debug, Clone)]
pub struct Routes {
    pub face_nodes: Arc<Routing>,
    pub face_edges: Arc<Routing>,
    pub face_object: Arc<Routing>,
    pub contact_sender: Arc<Routing>,
    pub contact_receiver: Arc<Routing>,
    pub face_incoming: Arc<Routing>,
    pub object_faces: Arc<Routing>,
    pub object_nodes: Arc<Routing>,
    pub node_object: Arc<Routing>,
    pub node_faces: Arc<Routing>,
}

impl Routes {
    pub fn new(cc: &CombinatorialComplex) -> Self {
        let n = cc.node_count();
        let e = cc.edges().len();
        let f = cc.faces().len();
        let k = cc.objects().len();
        let c = cc.contacts().len();
        let faces = cc.faces();
        let face_nodes: Vec<Vec<usize>> = faces.iter().map(|t| t.node_ids.to_vec()).collect();
        let face_edges: Vec<Vec<usize>> = cc.face_edges().iter().map(|fe| fe.to_vec()).collect();
        let face_object: Vec<usize> = faces.iter().map(|t| t.object_id).collect();
        let senders: Vec<usize> = cc.contacts().iter().map(|ct| ct.sender).collect();
        let receivers: Vec<usize> = cc.contacts().iter().map(|ct| ct.receiver).collect();
        let mut incoming = vec![Vec::new(); f];
        for (j, &r) in receivers.iter().enumerate() {
            incoming[r].push(j);
        }
        let object_faces: Vec<Vec<usize>> = cc.objects().iter().map(|o| o.faces.clone()).collect();
        let object_nodes: Vec<Vec<usize>> = cc.objects().iter().map(|o| o.nodes.clone().collect()).collect();
        let mut node_faces = vec![Vec::new(); n];
        for (i, t) in faces.iter().enumerate() {
            for &v in &t.node_ids {
                node_faces[v].push(i);
            }
        }
        Self {
            face_nodes: Arc::new(Routing::from_groups(&face_nodes, n, false)),
            face_edges: Arc::new(Routing::from_groups(&face_edges, e, false)),
            face_object: Arc::new(Routing::gather(&face_object, k)),
            contact_sender: Arc::new(Routing::gather(&senders, f)),
            contact_receiver: Arc::new(Routing::gather(&receivers, f)),
            face_incoming: Arc::new(Routing::from_groups(&incoming, c, false)),
            object_faces: Arc::new(Routing::from_groups(&object_faces, f, true)),
            object_nodes: Arc::new(Routing::from_groups(&object_nodes, n, true)),
            node_object: Arc::new(Routing::gather(cc.node_object(), k)),
            node_faces: Arc::new(Routing::from_groups(&node_faces, f, true)),
        }
    }
}

/// Processor MLPs of one sequential block.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialBlock {
    pub m0to2: Mlp,
    pub m1to2: Mlp,
    pub m4to2: Mlp,
    pub proc_2: Mlp,
    pub m2to3: Mlp,
    pub proc_3: Mlp,
    pub proc_2b: Mlp,
    pub m2to4: Mlp,
    pub proc_4: Mlp,
    pub m0to4: Mlp,
    pub m4to0: Mlp,
    pub proc_0: Mlp,
    pub proc_4b: Mlp,
}

/// Processor MLPs of one simultaneous (non-sequential) block: every cell
/// reads its neighbors' encoded embeddings in a single exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct SimultaneousBlock {
    pub m0to2: Mlp,
    pub m1to2: Mlp,
    pub m4to2: Mlp,
    pub m3to2: Mlp,
    pub m2to3: Mlp,
    pub m2to4: Mlp,
    pub m0to4: Mlp,
    pub m4to0: Mlp,
    pub m2to0: Mlp,
    pub proc_2: Mlp,
    pub proc_3: Mlp,
    pub proc_4: Mlp,
    pub proc_0: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Sequential(Box<SequentialBlock>),
    Simultaneous(Box<SimultaneousBlock>),
}

/// Per-rank embedding handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embeddings {
    pub h0: Var,
    pub h1: Var,
    pub h2: Var,
    pub h3: Var,
    pub h4: Var,
}

/// Intermediate embeddings of one block, in computation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub h2_enriched: Var,
    pub h3_updated: Var,
    pub h2_collided: Var,
    pub h4_updated: Var,
    pub h0_final: Var,
    pub h4_final: Var,
}

/// A forward pass kept on its tape for inspection or differentiation.
pub struct Recorded<'a> {
    pub tape: Tape<'a>,
    pub embeddings: Embeddings,
    pub stages: Vec<Stages>,
    pub node_acc: Var,
    pub object_acc: Var,
}

/// The network: encoders, processor blocks, decoders and normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct HopNet {
    pub config: ModelConfig,
    pub params: ParamStore,
    /// One per rank; under `no_object_cells` rank 4 reuses the node encoder.
    pub encoders: Vec<Mlp>,
    pub blocks: Vec<Block>,
    pub node_decoder: Mlp,
    pub object_decoder: Mlp,
    pub normalizers: ModelNormalizers,
}

impl HopNet {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        assert!(config.hidden > 0 && config.blocks > 0, "hidden width and block count must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let h = config.hidden;
        let l = config.hidden_layers;
        let ln = config.layer_norm;
        let fc = config.features();
        let dims = fc.dims();

        let mut encoders: Vec<Mlp> = (0..4)
            .map(|r| Mlp::new(&mut store, &mut rng, &format!("encoder_{r}"), dims[r], h, l, h, ln))
            .collect();
        encoders.push(if config.no_object_cells {
            encoders[0].clone()
        } else {
            Mlp::new(&mut store, &mut rng, "encoder_4", dims[4], h, l, h, ln)
        });

        let blocks = (0..config.blocks)
            .map(|p| {
                let mut mk = |name: &str, mult: usize| {
                    Mlp::new(&mut store, &mut rng, &format!("block{p}.{name}"), mult * h, h, l, h, ln)
                };
                if config.non_sequential {
                    Block::Simultaneous(Box::new(SimultaneousBlock {
                        m0to2: mk("m0to2", 1),
                        m1to2: mk("m1to2", 1),
                        m4to2: mk("m4to2", 1),
                        m3to2: mk("m3to2", 1),
                        m2to3: mk("m2to3", 1),
                        m2to4: mk("m2to4", 1),
                        m0to4: mk("m0to4", 1),
                        m4to0: mk("m4to0", 1),
                        m2to0: mk("m2to0", 1),
                        proc_2: mk("proc_2", 5),
                        proc_3: mk("proc_3", 3),
                        proc_4: mk("proc_4", 3),
                        proc_0: mk("proc_0", 3),
                    }))
                } else {
                    Block::Sequential(Box::new(SequentialBlock {
                        m0to2: mk("m0to2", 1),
                        m1to2: mk("m1to2", 1),
                        m4to2: mk("m4to2", 1),
                        proc_2: mk("proc_2", 4),
                        m2to3: mk("m2to3", 1),
                        proc_3: mk("proc_3", 3),
                        proc_2b: mk("proc_2'", 2),
                        m2to4: mk("m2to4", 1),
                        proc_4: mk("proc_4", 2),
                        m0to4: mk("m0to4", 1),
                        m4to0: mk("m4to0", 1),
                        proc_0: mk("proc_0", 2),
                        proc_4b: mk("proc_4'", 2),
                    }))
                }
            })
            .collect();

        let node_decoder = Mlp::new(&mut store, &mut rng, "decoder_0", h, h, l, 3, false);
        let object_decoder = if config.no_object_cells {
            node_decoder.clone()
        } else {
            Mlp::new(&mut store, &mut rng, "decoder_4", h, h, l, 3, false)
        };

        Self {
            config,
            params: store,
            encoders,
            blocks,
            node_decoder,
            object_decoder,
            normalizers: ModelNormalizers::new(fc),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    fn check_inputs(&self, bundle: &FeatureBundle, cc: &CombinatorialComplex) -> Result<(), ModelError> {
        let dims = self.config.features().dims();
        for (rank, m) in bundle.ranks().iter().enumerate() {
            if m.ncols() != dims[rank] {
                return Err(ModelError::ShapeMismatch { rank, expected: dims[rank], got: m.ncols() });
            }
            let cells = cc.cell_count(rank as u8);
            if m.nrows() != cells {
                return Err(ModelError::RowMismatch { rank, expected: cells, got: m.nrows() });
            }
        }
        Ok(())
    }

    /// Runs the whole network on normalized features, keeping the tape.
    pub fn record(&self, bundle: &FeatureBundle, cc: &CombinatorialComplex) -> Result<Recorded<'_>, ModelError> {
        self.check_inputs(bundle, cc)?;
        let routes = Routes::new(cc);
        let mut tape = Tape::new(&self.params);
        let embeddings = self.encode(&mut tape, bundle);
        let mut emb = embeddings;
        let mut stages = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let st = match block {
                Block::Sequential(b) => sequential(b, &mut tape, &routes, emb),
                Block::Simultaneous(b) => simultaneous(b, &mut tape, &routes, emb),
            };
            emb = Embeddings { h0: st.h0_final, h1: emb.h1, h2: st.h2_collided, h3: st.h3_updated, h4: st.h4_final };
            stages.push(st);
        }
        let node_acc = self.node_decoder.apply(&mut tape, emb.h0);
        let object_acc = self.object_decoder.apply(&mut tape, emb.h4);
        Ok(Recorded { tape, embeddings, stages, node_acc, object_acc })
    }

    /// Normalized (node, object) accelerations.
    pub fn forward(
        &self,
        bundle: &FeatureBundle,
        cc: &CombinatorialComplex,
    ) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
        let rec = self.record(bundle, cc)?;
        Ok((rec.tape.value(rec.node_acc).clone(), rec.tape.value(rec.object_acc).clone()))
    }

    pub fn encode(&self, tape: &mut Tape<'_>, bundle: &FeatureBundle) -> Embeddings {
        let mut h = [0; 5];
        for (r, m) in bundle.ranks().into_iter().enumerate() {
            let x = tape.input(m.clone());
            h[r] = self.encoders[r].apply(tape, x);
        }
        Embeddings { h0: h[0], h1: h[1], h2: h[2], h3: h[3], h4: h[4] }
    }
}

/// Steps 1 to 5.
pub fn sequential(b: &SequentialBlock, tape: &mut Tape<'_>, routes: &Routes, e: Embeddings) -> Stages {
    let h2_enriched = step1_enrich_faces(b, tape, routes, e);
    let h3_updated = step2_contact_update(b, tape, routes, e, h2_enriched);
    let h2_collided = step3_face_collision_aggregate(b, tape, routes, h2_enriched, h3_updated);
    let h4_updated = step4_object_update(b, tape, routes, e, h2_collided);
    let (h0_final, h4_final) = step5_node_object_exchange(b, tape, routes, e, h4_updated);
    Stages { h2_enriched, h3_updated, h2_collided, h4_updated, h0_final, h4_final }
}

pub fn step1_enrich_faces(b: &SequentialBlock, tape: &mut Tape<'_>, routes: &Routes, e: Embeddings) -> Var {
    let m0 = b.m0to2.apply(tape, e.h0);
    let m0 = tape.route(m0, &routes.face_nodes);
    let m1 = b.m1to2.apply(tape, e.h1);
    let m1 = tape.route(m1, &routes.face_edges);
    let m4 = b.m4to2.apply(tape, e.h4);
    let m4 = tape.route(m4, &routes.face_object);
    let x = tape.concat(&[e.h2, m0, m1, m4]);
    b.proc_2.apply(tape, x)
}

pub fn step2_contact_update(
    b: &SequentialBlock,
    tape: &mut Tape<'_>,
    routes: &Routes,
    e: Embeddings,
    h2_enriched: Var,
) -> Var {
    let m = b.m2to3.apply(tape, h2_enriched);
    let ms = tape.route(m, &routes.contact_sender);
    let mr = tape.route(m, &routes.contact_receiver);
    let x = tape.concat(&[e.h3, ms, mr]);
    b.proc_3.apply(tape, x)
}

pub fn step3_face_collision_aggregate(
    b: &SequentialBlock,
    tape: &mut Tape<'_>,
    routes: &Routes,
    h2_enriched: Var,
    h3_updated: Var,
) -> Var {
    let incoming = tape.route(h3_updated, &routes.face_incoming);
    let x = tape.concat(&[h2_enriched, incoming]);
    b.proc_2b.apply(tape, x)
}

pub fn step4_object_update(
    b: &SequentialBlock,
    tape: &mut Tape<'_>,
    routes: &Routes,
    e: Embeddings,
    h2_collided: Var,
) -> Var {
    let m = b.m2to4.apply(tape, h2_collided);
    let m = tape.route(m, &routes.object_faces);
    let x = tape.concat(&[e.h4, m]);
    b.proc_4.apply(tape, x)
}

/// Returns `(h′0, h″4)`.
pub fn step5_node_object_exchange(
    b: &SequentialBlock,
    tape: &mut Tape<'_>,
    routes: &Routes,
    e: Embeddings,
    h4_updated: Var,
) -> (Var, Var) {
    let m40 = b.m4to0.apply(tape, h4_updated);
    let m40 = tape.route(m40, &routes.node_object);
    let x0 = tape.concat(&[e.h0, m40]);
    let h0 = b.proc_0.apply(tape, x0);
    let m04 = b.m0to4.apply(tape, e.h0);
    let m04 = tape.route(m04, &routes.object_nodes);
    let x4 = tape.concat(&[h4_updated, m04]);
    let h4 = b.proc_4b.apply(tape, x4);
    (h0, h4)
}

/// Single exchange in which every rank reads its encoded neighbors at once.
pub fn simultaneous(b: &SimultaneousBlock, tape: &mut Tape<'_>, routes: &Routes, e: Embeddings) -> Stages {
    let m02 = b.m0to2.apply(tape, e.h0);
    let m02 = tape.route(m02, &routes.face_nodes);
    let m12 = b.m1to2.apply(tape, e.h1);
    let m12 = tape.route(m12, &routes.face_edges);
    let m42 = b.m4to2.apply(tape, e.h4);
    let m42 = tape.route(m42, &routes.face_object);
    let m32 = b.m3to2.apply(tape, e.h3);
    let m32 = tape.route(m32, &routes.face_incoming);
    let x2 = tape.concat(&[e.h2, m02, m12, m42, m32]);
    let h2 = b.proc_2.apply(tape, x2);

    let m23 = b.m2to3.apply(tape, e.h2);
    let ms = tape.route(m23, &routes.contact_sender);
    let mr = tape.route(m23, &routes.contact_receiver);
    let x3 = tape.concat(&[e.h3, ms, mr]);
    let h3 = b.proc_3.apply(tape, x3);

    let m24 = b.m2to4.apply(tape, e.h2);
    let m24 = tape.route(m24, &routes.object_faces);
    let m04 = b.m0to4.apply(tape, e.h0);
    let m04 = tape.route(m04, &routes.object_nodes);
    let x4 = tape.concat(&[e.h4, m24, m04]);
    let h4 = b.proc_4.apply(tape, x4);

    let m40 = b.m4to0.apply(tape, e.h4);
    let m40 = tape.route(m40, &routes.node_object);
    let m20 = b.m2to0.apply(tape, e.h2);
    let m20 = tape.route(m20, &routes.node_faces);
    let x0 = tape.concat(&[e.h0, m40, m20]);
    let h0 = b.proc_0.apply(tape, x0);

    Stages { h2_enriched: h2, h3_updated: h3, h2_collided: h2, h4_updated: h4, h0_final: h0, h4_final: h4 }
}
