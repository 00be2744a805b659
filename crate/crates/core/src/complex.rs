//! The five-rank combinatorial complex of a scene snapshot.
//!
//! Ranks: 0 nodes, 1 directed edges, 2 mesh triangles, 3 directed collision
//! contacts, 4 objects. Directed cells (ranks 1 and 3) share their node set
//! with their reverse twin; containment queries compare node sets only and
//! return both directions.

use std::collections::HashMap;
use std::ops::Range;

use crate::geometry::{aabb_pairs, closest_points, Aabb, Triangle, Vec3};

/// Default contact radius in meters.
pub const DEFAULT_CONTACT_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ComplexError {
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
    #[error("rank {rank} ± {k} falls outside 0..=4")]
    RankOutOfRange { rank: u8, k: u8 },
    #[error("cell {0:?} does not exist")]
    UnknownCell(CellId),
}

/// Connectivity of one object's triangle mesh, in object-local node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    pub node_count: usize,
    pub faces: Vec<[usize; 3]>,
    pub is_static: bool,
}

/// A mesh triangle in global node indices, with its stored winding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangleRef {
    pub object_id: usize,
    pub node_ids: [usize; 3],
}

impl TriangleRef {
    pub fn positions(&self, positions: &[Vec3]) -> Triangle {
        self.node_ids.map(|i| positions[i])
    }
}

/// Directed rank-3 cell: `sender` and `receiver` are face indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Contact {
    pub sender: usize,
    pub receiver: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectCell {
    pub object_id: usize,
    pub is_static: bool,
    pub nodes: Range<usize>,
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub rank: u8,
    pub index: usize,
}

impl CellId {
    pub const fn new(rank: u8, index: usize) -> Self {
        Self { rank, index }
    }
}

/// Rank-specific payload of a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellMeta {
    Node,
    Edge { sender: usize, receiver: usize },
    Face(TriangleRef),
    Contact(Contact),
    Object { object_id: usize, is_static: bool },
}

/// Materialized view of one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: CellId,
    pub node_set: Vec<usize>,
    pub meta: CellMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinatorialComplex {
    node_object: Vec<usize>,
    edges: Vec<[usize; 2]>,
    faces: Vec<TriangleRef>,
    contacts: Vec<Contact>,
    objects: Vec<ObjectCell>,
    /// Directed edge indices lying on each face (both directions of its three sides).
    face_edges: Vec<[usize; 6]>,
    node_edges: Vec<Vec<usize>>,
    node_faces: Vec<Vec<usize>>,
    node_contacts: Vec<Vec<usize>>,
    contact_radius: f64,
}

/// Builds ranks 0, 1, 2 and 4 from the object meshes; rank 3 starts empty.
///
/// Objects occupy consecutive global node ranges in the given order.
pub fn build_complex(meshes: &[MeshTopology]) -> Result<CombinatorialComplex, ComplexError> {
    let total_nodes: usize = meshes.iter().map(|m| m.node_count).sum();
    let mut node_object = Vec::with_capacity(total_nodes);
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut face_edges = Vec::new();
    let mut objects = Vec::with_capacity(meshes.len());

    let mut offset = 0;
    for (object_id, mesh) in meshes.iter().enumerate() {
        if mesh.node_count < 3 {
            return Err(ComplexError::MalformedMesh(format!(
                "object {object_id} has {} nodes; at least 3 required",
                mesh.node_count
            )));
        }
        if mesh.faces.is_empty() {
            return Err(ComplexError::MalformedMesh(format!("object {object_id} has no faces")));
        }
        node_object.extend(std::iter::repeat(object_id).take(mesh.node_count));
        let mut seen_faces = std::collections::HashSet::new();
        let mut object_faces = Vec::with_capacity(mesh.faces.len());
        for (fi, face) in mesh.faces.iter().enumerate() {
            if face.iter().any(|&i| i >= mesh.node_count) {
                return Err(ComplexError::MalformedMesh(format!(
                    "object {object_id} face {fi} references a node outside 0..{}",
                    mesh.node_count
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(ComplexError::MalformedMesh(format!(
                    "object {object_id} face {fi} repeats a node"
                )));
            }
            let mut key = *face;
            key.sort_unstable();
            if !seen_faces.insert(key) {
                return Err(ComplexError::MalformedMesh(format!(
                    "object {object_id} face {fi} duplicates an earlier face"
                )));
            }
            let global = face.map(|i| i + offset);
            let mut fe = [0usize; 6];
            for side in 0..3 {
                let a = global[side];
                let b = global[(side + 1) % 3];
                let (lo, hi) = (a.min(b), a.max(b));
                let first = *edge_index.entry((lo, hi)).or_insert_with(|| {
                    edges.push([lo, hi]);
                    edges.push([hi, lo]);
                    edges.len() - 2
                });
                fe[2 * side] = first;
                fe[2 * side + 1] = first + 1;
            }
            object_faces.push(faces.len());
            faces.push(TriangleRef { object_id, node_ids: global });
            face_edges.push(fe);
        }
        objects.push(ObjectCell {
            object_id,
            is_static: mesh.is_static,
            nodes: offset..offset + mesh.node_count,
            faces: object_faces,
        });
        offset += mesh.node_count;
    }

    let mut node_edges = vec![Vec::new(); total_nodes];
    for (e, &[s, r]) in edges.iter().enumerate() {
        node_edges[s].push(e);
        node_edges[r].push(e);
    }
    let mut node_faces = vec![Vec::new(); total_nodes];
    for (f, tri) in faces.iter().enumerate() {
        for &n in &tri.node_ids {
            node_faces[n].push(f);
        }
    }

    Ok(CombinatorialComplex {
        node_object,
        edges,
        faces,
        contacts: Vec::new(),
        objects,
        face_edges,
        node_edges,
        node_faces,
        node_contacts: vec![Vec::new(); total_nodes],
        contact_radius: DEFAULT_CONTACT_RADIUS,
    })
}

/// Unordered face pairs `(i, j)`, `i < j`, from distinct objects whose closest
/// distance is below `d_c`, found by an AABB sweep followed by exact narrowphase.
pub fn contact_face_pairs(
    cc: &CombinatorialComplex,
    positions: &[Vec3],
    d_c: f64,
) -> Vec<(usize, usize)> {
    let boxes: Vec<Aabb> = cc
        .faces
        .iter()
        .map(|f| Aabb::from_points(&f.positions(positions)))
        .collect();
    aabb_pairs(&boxes, d_c)
        .into_iter()
        .filter(|&(i, j)| cc.faces[i].object_id != cc.faces[j].object_id)
        .filter(|&(i, j)| {
            let a = cc.faces[i].positions(positions);
            let b = cc.faces[j].positions(positions);
            matches!(closest_points(&a, &b), Ok(c) if c.dist < d_c)
        })
        .collect()
}

/// Returns a copy of `cc` whose rank-3 cells are the directed contacts at
/// `positions`: each qualifying unordered pair `(s, r)` yields `s→r` then `r→s`.
pub fn detect_contacts(cc: &CombinatorialComplex, positions: &[Vec3], d_c: f64) -> CombinatorialComplex {
    assert!(d_c > 0.0, "contact radius must be positive");
    let pairs = contact_face_pairs(cc, positions, d_c);
    let mut out = cc.clone();
    out.set_contacts(&pairs);
    out.contact_radius = d_c;
    out
}

impl CombinatorialComplex {
    fn set_contacts(&mut self, pairs: &[(usize, usize)]) {
        self.contacts.clear();
        for &(i, j) in pairs {
            self.contacts.push(Contact { sender: i, receiver: j });
            self.contacts.push(Contact { sender: j, receiver: i });
        }
        for v in self.node_contacts.iter_mut() {
            v.clear();
        }
        for (c, contact) in self.contacts.iter().enumerate() {
            for f in [contact.sender, contact.receiver] {
                for &n in &self.faces[f].node_ids {
                    self.node_contacts[n].push(c);
                }
            }
        }
    }

    /// Replaces rank-3 cells with the given directed contacts (test and
    /// counterfactual plumbing). Contacts within one object are rejected.
    pub fn with_contacts(&self, contacts: &[Contact]) -> Result<Self, ComplexError> {
        let mut out = self.clone();
        for c in contacts {
            if c.sender >= self.faces.len() || c.receiver >= self.faces.len() {
                return Err(ComplexError::MalformedMesh("contact references a missing face".into()));
            }
            if self.faces[c.sender].object_id == self.faces[c.receiver].object_id {
                return Err(ComplexError::MalformedMesh("contact within one object".into()));
            }
        }
        out.contacts = contacts.to_vec();
        for v in out.node_contacts.iter_mut() {
            v.clear();
        }
        for (ci, contact) in out.contacts.iter().enumerate() {
            for f in [contact.sender, contact.receiver] {
                for &n in &out.faces[f].node_ids {
                    out.node_contacts[n].push(ci);
                }
            }
        }
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.node_object.len()
    }

    pub fn cell_count(&self, rank: u8) -> usize {
        match rank {
            0 => self.node_object.len(),
            1 => self.edges.len(),
            2 => self.faces.len(),
            3 => self.contacts.len(),
            4 => self.objects.len(),
            _ => 0,
        }
    }

    pub fn node_object(&self) -> &[usize] {
        &self.node_object
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[TriangleRef] {
        &self.faces
    }

    pub fn face_edges(&self) -> &[[usize; 6]] {
        &self.face_edges
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn objects(&self) -> &[ObjectCell] {
        &self.objects
    }

    pub fn contact_radius(&self) -> f64 {
        self.contact_radius
    }

    pub fn cell(&self, id: CellId) -> Result<Cell, ComplexError> {
        if id.index >= self.cell_count(id.rank) {
            return Err(ComplexError::UnknownCell(id));
        }
        let i = id.index;
        let (mut node_set, meta) = match id.rank {
            0 => (vec![i], CellMeta::Node),
            1 => {
                let [s, r] = self.edges[i];
                (vec![s, r], CellMeta::Edge { sender: s, receiver: r })
            }
            2 => (self.faces[i].node_ids.to_vec(), CellMeta::Face(self.faces[i])),
            3 => {
                let c = self.contacts[i];
                let mut n = self.faces[c.sender].node_ids.to_vec();
                n.extend_from_slice(&self.faces[c.receiver].node_ids);
                (n, CellMeta::Contact(c))
            }
            _ => {
                let o = &self.objects[i];
                (
                    o.nodes.clone().collect(),
                    CellMeta::Object { object_id: o.object_id, is_static: o.is_static },
                )
            }
        };
        node_set.sort_unstable();
        Ok(Cell { id, node_set, meta })
    }

    /// Cells of rank `rank` that contain node `n`.
    fn incident(&self, n: usize, rank: u8) -> Vec<usize> {
        match rank {
            0 => vec![n],
            1 => self.node_edges[n].clone(),
            2 => self.node_faces[n].clone(),
            3 => self.node_contacts[n].clone(),
            _ => vec![self.node_object[n]],
        }
    }

    fn contains_all(&self, id: CellId, nodes: &[usize]) -> bool {
        match id.rank {
            4 => nodes.iter().all(|n| self.objects[id.index].nodes.contains(n)),
            _ => {
                let set = self.cell(id).expect("valid cell").node_set;
                nodes.iter().all(|n| set.binary_search(n).is_ok())
            }
        }
    }

    /// k-up (strict superset, rank + k) or k-down (strict subset, rank − k)
    /// neighbors of `cell`, sorted by index. Cells of different rank are
    /// distinct even when their node sets coincide, so containment is tested
    /// on node sets without requiring them to differ.
    pub fn neighborhood(
        &self,
        cell: CellId,
        direction: Direction,
        k: u8,
    ) -> Result<Vec<CellId>, ComplexError> {
        let target = match direction {
            Direction::Up => cell.rank.checked_add(k).filter(|&r| r <= 4),
            Direction::Down => cell.rank.checked_sub(k),
        };
        let target = match target {
            Some(t) if k >= 1 && cell.rank <= 4 => t,
            _ => return Err(ComplexError::RankOutOfRange { rank: cell.rank, k }),
        };
        let x = self.cell(cell)?;
        let mut out: Vec<usize> = match direction {
            Direction::Up => self
                .incident(x.node_set[0], target)
                .into_iter()
                .filter(|&y| self.contains_all(CellId::new(target, y), &x.node_set))
                .collect(),
            Direction::Down => {
                let mut cand: Vec<usize> =
                    x.node_set.iter().flat_map(|&n| self.incident(n, target)).collect();
                cand.sort_unstable();
                cand.dedup();
                cand.into_iter()
                    .filter(|&y| {
                        let ys = self.cell(CellId::new(target, y)).expect("valid").node_set;
                        self.contains_all(cell, &ys)
                    })
                    .collect()
            }
        };
        out.sort_unstable();
        out.dedup();
        Ok(out.into_iter().map(|i| CellId::new(target, i)).collect())
    }
}
