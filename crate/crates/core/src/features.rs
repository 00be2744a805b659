//! Raw per-cell input features and the running normalizers applied to them.
//!
//! Every feature is built from differences of positions, so the
//! representation is translation invariant, and never looks at `t+1`.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::complex::CombinatorialComplex;
use crate::geometry::{closest_points, triangle_normal, GeometryError, Vec3};

pub const NODE_FEATURE_DIM: usize = 16;
pub const EDGE_FEATURE_DIM: usize = 8;
pub const FACE_FEATURE_DIM: usize = 4;
pub const CONTACT_FEATURE_DIM: usize = 28;
pub const OBJECT_FEATURE_DIM: usize = 13;
/// `[b_static, b_dynamic, m, c1, c2]`
pub const PHYSICAL_DIM: usize = 5;
pub const NORMALIZER_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("frame history incomplete: {0}")]
    MissingHistory(String),
    #[error("physical parameters missing for object {0}")]
    MissingPhysicalParams(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Node positions of the whole scene at the frames the features use.
///
/// `before_previous` (`t−2`) feeds the `ẋ^{t−1}` block. On the first step of a
/// trajectory it does not exist and the velocity is held constant instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHistory {
    /// Frame `t0`: the first frame of the trajectory.
    pub reference: Vec<Vec3>,
    pub before_previous: Option<Vec<Vec3>>,
    pub previous: Vec<Vec3>,
    pub current: Vec<Vec3>,
}

impl FrameHistory {
    pub fn new(reference: Vec<Vec3>, previous: Vec<Vec3>, current: Vec<Vec3>) -> Self {
        Self { reference, before_previous: None, previous, current }
    }

    /// History ending at `frames[t]`; `frames[0]` is `t0`.
    pub fn from_frames(frames: &[Vec<Vec3>], t: usize) -> Result<Self, FeatureError> {
        if t == 0 || t >= frames.len() {
            return Err(FeatureError::MissingHistory(format!(
                "need frames t-1 and t, got t={t} of {}",
                frames.len()
            )));
        }
        Ok(Self {
            reference: frames[0].clone(),
            before_previous: (t >= 2).then(|| frames[t - 2].clone()),
            previous: frames[t - 1].clone(),
            current: frames[t].clone(),
        })
    }

    /// Shift one step forward: `t−1 ← t`, `t ← next`.
    pub fn advance(&mut self, next: Vec<Vec3>) {
        let prev = std::mem::replace(&mut self.current, next);
        let before = std::mem::replace(&mut self.previous, prev);
        self.before_previous = Some(before);
    }

    pub fn node_count(&self) -> usize {
        self.current.len()
    }

    pub fn translate(&mut self, offset: Vec3) {
        let frames = [
            Some(&mut self.reference),
            self.before_previous.as_mut(),
            Some(&mut self.previous),
            Some(&mut self.current),
        ];
        for frame in frames.into_iter().flatten() {
            frame.iter_mut().for_each(|p| *p = *p + offset);
        }
    }

    fn check(&self, node_count: usize) -> Result<(), FeatureError> {
        let mut frames = vec![("t0", &self.reference), ("t-1", &self.previous), ("t", &self.current)];
        if let Some(b) = &self.before_previous {
            frames.push(("t-2", b));
        }
        for (name, frame) in frames {
            if frame.len() != node_count {
                return Err(FeatureError::MissingHistory(format!(
                    "frame {name} has {} nodes, complex has {node_count}",
                    frame.len()
                )));
            }
        }
        Ok(())
    }

    fn velocity(&self, i: usize) -> Vec3 {
        self.current[i] - self.previous[i]
    }

    fn previous_velocity(&self, i: usize) -> Vec3 {
        match &self.before_previous {
            Some(b) => self.previous[i] - b[i],
            None => self.velocity(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
    pub is_static: bool,
}

impl PhysicalParams {
    pub fn encode(&self) -> [f64; PHYSICAL_DIM] {
        let (s, d) = if self.is_static { (1.0, 0.0) } else { (0.0, 1.0) };
        [s, d, self.mass, self.friction, self.restitution]
    }
}

/// Ablation switches that change the feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Drop the node-to-center blocks `d^{t0}`, `d^t`.
    #[serde(default)]
    pub no_center_mass_distance: bool,
    /// Replace object cells by a virtual center node: object rows use the
    /// node layout and every node carries its object's physical parameters.
    #[serde(default)]
    pub no_object_cells: bool,
}

impl FeatureConfig {
    pub fn node_dim(&self) -> usize {
        let base = if self.no_center_mass_distance { 8 } else { NODE_FEATURE_DIM };
        base + if self.no_object_cells { PHYSICAL_DIM } else { 0 }
    }

    pub fn object_dim(&self) -> usize {
        if self.no_object_cells {
            self.node_dim()
        } else {
            OBJECT_FEATURE_DIM
        }
    }

    pub fn dims(&self) -> [usize; 5] {
        [
            self.node_dim(),
            EDGE_FEATURE_DIM,
            FACE_FEATURE_DIM,
            CONTACT_FEATURE_DIM,
            self.object_dim(),
        ]
    }
}

/// Raw feature matrices, one row per cell of each rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub node: Array2<f64>,
    pub edge: Array2<f64>,
    pub face: Array2<f64>,
    pub contact: Array2<f64>,
    pub object: Array2<f64>,
}

impl FeatureBundle {
    pub fn ranks(&self) -> [&Array2<f64>; 5] {
        [&self.node, &self.edge, &self.face, &self.contact, &self.object]
    }

    pub fn ranks_mut(&mut self) -> [&mut Array2<f64>; 5] {
        [
            &mut self.node,
            &mut self.edge,
            &mut self.face,
            &mut self.contact,
            &mut self.object,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.ranks().iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

fn put_vec(row: &mut [f64], at: usize, v: Vec3) -> usize {
    row[at..at + 3].copy_from_slice(&v.to_array());
    row[at + 3] = v.norm();
    at + 4
}

/// Per-object centers (unweighted node means) of one frame.
pub fn object_centers(cc: &CombinatorialComplex, positions: &[Vec3]) -> Vec<Vec3> {
    cc.objects()
        .iter()
        .map(|o| Vec3::mean(&positions[o.nodes.clone()]))
        .collect()
}

fn check_physical(cc: &CombinatorialComplex, physical: &[PhysicalParams]) -> Result<(), FeatureError> {
    let k = cc.cell_count(4);
    if physical.len() < k {
        return Err(FeatureError::MissingPhysicalParams(physical.len()));
    }
    Ok(())
}

/// Node rows. `physical` is only read under `no_object_cells`.
pub fn node_features(
    history: &FrameHistory,
    cc: &CombinatorialComplex,
    physical: &[PhysicalParams],
    config: FeatureConfig,
) -> Result<Array2<f64>, FeatureError> {
    let n = cc.node_count();
    history.check(n)?;
    if config.no_object_cells {
        check_physical(cc, physical)?;
    }
    let c_ref = object_centers(cc, &history.reference);
    let c_cur = object_centers(cc, &history.current);
    let mut out = Array2::zeros((n, config.node_dim()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let k = cc.node_object()[i];
        let row = row.as_slice_mut().expect("standard layout");
        let mut at = put_vec(row, 0, history.velocity(i));
        at = put_vec(row, at, history.previous_velocity(i));
        if !config.no_center_mass_distance {
            at = put_vec(row, at, history.reference[i] - c_ref[k]);
            at = put_vec(row, at, history.current[i] - c_cur[k]);
        }
        if config.no_object_cells {
            row[at..at + PHYSICAL_DIM].copy_from_slice(&physical[k].encode());
        }
    }
    Ok(out)
}

pub fn edge_features(history: &FrameHistory, cc: &CombinatorialComplex) -> Result<Array2<f64>, FeatureError> {
    history.check(cc.node_count())?;
    let edges = cc.edges();
    let mut out = Array2::zeros((edges.len(), EDGE_FEATURE_DIM));
    for (&[s, r], mut row) in edges.iter().zip(out.rows_mut()) {
        let row = row.as_slice_mut().expect("standard layout");
        let at = put_vec(row, 0, history.reference[s] - history.reference[r]);
        put_vec(row, at, history.current[s] - history.current[r]);
    }
    Ok(out)
}

pub fn face_features(history: &FrameHistory, cc: &CombinatorialComplex) -> Result<Array2<f64>, FeatureError> {
    history.check(cc.node_count())?;
    let faces = cc.faces();
    let mut out = Array2::zeros((faces.len(), FACE_FEATURE_DIM));
    for (face, mut row) in faces.iter().zip(out.rows_mut()) {
        let n = triangle_normal(&face.positions(&history.current))?;
        put_vec(row.as_slice_mut().expect("standard layout"), 0, n);
    }
    Ok(out)
}

pub fn contact_features(history: &FrameHistory, cc: &CombinatorialComplex) -> Result<Array2<f64>, FeatureError> {
    history.check(cc.node_count())?;
    let x = &history.current;
    let contacts = cc.contacts();
    let mut out = Array2::zeros((contacts.len(), CONTACT_FEATURE_DIM));
    for (c, mut row) in contacts.iter().zip(out.rows_mut()) {
        let fs = &cc.faces()[c.sender];
        let fr = &cc.faces()[c.receiver];
        let cp = closest_points(&fs.positions(x), &fr.positions(x))?;
        let row = row.as_slice_mut().expect("standard layout");
        let mut at = put_vec(row, 0, cp.p_s - cp.p_r);
        for &i in &fs.node_ids {
            at = put_vec(row, at, x[i] - cp.p_s);
        }
        for &i in &fr.node_ids {
            at = put_vec(row, at, x[i] - cp.p_r);
        }
    }
    Ok(out)
}

/// Object rows. Under `no_object_cells` this is the virtual center node in
/// the node layout: center velocities, zero center distances, parameters.
pub fn object_features(
    history: &FrameHistory,
    cc: &CombinatorialComplex,
    physical: &[PhysicalParams],
    config: FeatureConfig,
) -> Result<Array2<f64>, FeatureError> {
    history.check(cc.node_count())?;
    check_physical(cc, physical)?;
    let c_cur = object_centers(cc, &history.current);
    let c_prev = object_centers(cc, &history.previous);
    let c_before = history.before_previous.as_ref().map(|b| object_centers(cc, b));
    let k = cc.cell_count(4);
    let mut out = Array2::zeros((k, config.object_dim()));
    for (j, mut row) in out.rows_mut().into_iter().enumerate() {
        let row = row.as_slice_mut().expect("standard layout");
        let v = c_cur[j] - c_prev[j];
        let v_prev = c_before.as_ref().map_or(v, |b| c_prev[j] - b[j]);
        let mut at = put_vec(row, 0, v);
        at = put_vec(row, at, v_prev);
        if config.no_object_cells && !config.no_center_mass_distance {
            // The virtual node sits on the center: both distance blocks are zero.
            at += 8;
        }
        row[at..at + PHYSICAL_DIM].copy_from_slice(&physical[j].encode());
    }
    Ok(out)
}

pub fn build_features(
    history: &FrameHistory,
    cc: &CombinatorialComplex,
    physical: &[PhysicalParams],
    config: FeatureConfig,
) -> Result<FeatureBundle, FeatureError> {
    Ok(FeatureBundle {
        node: node_features(history, cc, physical, config)?,
        edge: edge_features(history, cc)?,
        face: face_features(history, cc)?,
        contact: contact_features(history, cc)?,
        object: object_features(history, cc, physical, config)?,
    })
}

/// Per-channel running mean and variance (Welford / Chan merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Population variance; 1 before any data has been seen.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|m| (m / self.count).max(0.0)).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().iter().map(|v| (v + NORMALIZER_EPS).sqrt()).collect()
    }

    pub fn update(&mut self, batch: &Array2<f64>) {
        assert_eq!(batch.ncols(), self.dim(), "normalizer width mismatch");
        let nb = batch.nrows() as f64;
        if nb == 0.0 {
            return;
        }
        let bmean: Array1<f64> = batch.mean_axis(Axis(0)).expect("non-empty");
        let bm2: Array1<f64> = batch
            .axis_iter(Axis(0))
            .fold(Array1::zeros(self.dim()), |acc, row| {
                let d = &row - &bmean;
                acc + &d * &d
            });
        let total = self.count + nb;
        for c in 0..self.dim() {
            let delta = bmean[c] - self.mean[c];
            self.mean[c] += delta * nb / total;
            self.m2[c] += bm2[c] + delta * delta * self.count * nb / total;
        }
        self.count = total;
    }

    pub fn normalize(&self, x: &Array2<f64>) -> Array2<f64> {
        let std = self.std();
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / std[c];
            }
        }
        out
    }

    pub fn denormalize(&self, y: &Array2<f64>) -> Array2<f64> {
        let std = self.std();
        let mut out = y.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v * std[c] + self.mean[c];
            }
        }
        out
    }
}

/// One normalizer per rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizers {
    pub ranks: Vec<Normalizer>,
}

impl FeatureNormalizers {
    pub fn new(config: FeatureConfig) -> Self {
        Self { ranks: config.dims().iter().map(|&d| Normalizer::new(d)).collect() }
    }

    /// Normalizes every rank; statistics are updated first when `update` is set.
    pub fn normalize(&mut self, bundle: &FeatureBundle, update: bool) -> FeatureBundle {
        let mut out = bundle.clone();
        for ((norm, src), dst) in self.ranks.iter_mut().zip(bundle.ranks()).zip(out.ranks_mut()) {
            if update {
                norm.update(src);
            }
            *dst = norm.normalize(src);
        }
        out
    }

    pub fn normalize_frozen(&self, bundle: &FeatureBundle) -> FeatureBundle {
        let mut out = bundle.clone();
        for ((norm, src), dst) in self.ranks.iter().zip(bundle.ranks()).zip(out.ranks_mut()) {
            *dst = norm.normalize(src);
        }
        out
    }
}
