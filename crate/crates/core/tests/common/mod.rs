#![allow(dead_code)]

use hopnet::complex::{
    build_complex, detect_contacts, Cell, CellId, CombinatorialComplex, Contact, Direction, MeshTopology,
};
use hopnet::features::{build_features, FeatureBundle, FeatureConfig, FrameHistory, PhysicalParams};
use hopnet::geometry::{closest_points, Quaternion, Vec3};
use hopnet::sim::{icosphere, subdivided_box, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tetra_mesh(is_static: bool) -> MeshTopology {
    MeshTopology { node_count: 4, faces: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], is_static }
}

pub fn tetra_at(c: Vec3, scale: f64) -> Vec<Vec3> {
    [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ]
    .iter()
    .map(|&p| c + p * scale)
    .collect()
}

pub fn params(n: usize) -> Vec<PhysicalParams> {
    (0..n)
        .map(|k| PhysicalParams {
            mass: 1.0 + 0.5 * k as f64,
            friction: 0.3,
            restitution: 0.6 + 0.1 * k as f64,
            is_static: false,
        })
        .collect()
}

/// Two moving tetrahedra whose closest faces lie within the contact radius.
pub struct MicroScene {
    pub cc: CombinatorialComplex,
    pub history: FrameHistory,
    pub physical: Vec<PhysicalParams>,
}

pub fn micro_scene(offset: Vec3) -> MicroScene {
    let base = build_complex(&[tetra_mesh(false), tetra_mesh(false)]).unwrap();
    let frame = |t: f64| {
        let mut p = tetra_at(Vec3::new(0.0, 0.0, 0.0) + offset + Vec3::new(0.05, 0.0, 0.0) * t, 1.0);
        p.extend(tetra_at(Vec3::new(1.1, 0.2, 0.1) + offset + Vec3::new(-0.04, 0.01, -0.02) * t, 0.9));
        p
    };
    let mut history = FrameHistory::new(frame(0.0), frame(1.0), frame(2.0));
    history.before_previous = Some(frame(0.5));
    let cc = detect_contacts(&base, &history.current, 0.25);
    assert!(!cc.contacts().is_empty(), "micro scene must have contacts");
    MicroScene { cc, history, physical: params(2) }
}

impl MicroScene {
    pub fn features(&self, config: FeatureConfig) -> FeatureBundle {
        build_features(&self.history, &self.cc, &self.physical, config).unwrap()
    }
}

// ---- random scenes and exhaustive oracles ------------------------------------

pub fn random_object(rng: &mut ChaCha8Rng) -> TriMesh {
    if rng.gen_bool(0.5) {
        icosphere(rng.gen_range(0.3..0.6), rng.gen_range(0..2))
    } else {
        subdivided_box(Vec3::new(rng.gen_range(0.2..0.5), rng.gen_range(0.2..0.5), rng.gen_range(0.2..0.5)), rng.gen_range(0..2))
    }
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Quaternion {
    let v = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    Quaternion::from_rotation_vector(v)
}

/// Three objects packed so that some, but not all, face pairs come close.
pub fn random_scene(seed: u64) -> (CombinatorialComplex, Vec<Vec3>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topo = Vec::new();
    let mut positions = Vec::new();
    for _ in 0..3 {
        let mesh = random_object(&mut rng);
        let q = random_rotation(&mut rng);
        let c = Vec3::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
        positions.extend(mesh.nodes.iter().map(|&p| q.rotate(p) + c));
        topo.push(mesh.topology(false));
    }
    (build_complex(&topo).unwrap(), positions)
}

pub fn brute_force_contacts(cc: &CombinatorialComplex, positions: &[Vec3], d_c: f64) -> Vec<Contact> {
    let faces = cc.faces();
    let mut out = Vec::new();
    for i in 0..faces.len() {
        for j in i + 1..faces.len() {
            if faces[i].object_id == faces[j].object_id {
                continue;
            }
            let d = closest_points(&faces[i].positions(positions), &faces[j].positions(positions)).unwrap().dist;
            if d < d_c {
                out.push(Contact { sender: i, receiver: j });
                out.push(Contact { sender: j, receiver: i });
            }
        }
    }
    out
}

pub fn all_cells(cc: &CombinatorialComplex) -> Vec<Cell> {
    (0..=4u8)
        .flat_map(|r| (0..cc.cell_count(r)).map(move |i| CellId::new(r, i)))
        .map(|id| cc.cell(id).unwrap())
        .collect()
}

pub fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

pub fn oracle(cells: &[Cell], x: &Cell, direction: Direction, k: u8) -> Vec<CellId> {
    let target = match direction {
        Direction::Up => x.id.rank + k,
        Direction::Down => x.id.rank - k,
    };
    let mut out: Vec<CellId> = cells
        .iter()
        .filter(|y| y.id.rank == target)
        .filter(|y| match direction {
            Direction::Up => subset(&x.node_set, &y.node_set),
            Direction::Down => subset(&y.node_set, &x.node_set),
        })
        .map(|y| y.id)
        .collect();
    out.sort();
    out
}

pub fn triangle() -> MeshTopology {
    MeshTopology { node_count: 3, faces: vec![[0, 1, 2]], is_static: false }
}

pub fn quad() -> MeshTopology {
    MeshTopology { node_count: 4, faces: vec![[0, 1, 2], [0, 2, 3]], is_static: false }
}

pub fn tetra() -> MeshTopology {
    MeshTopology { node_count: 4, faces: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], is_static: true }
}

/// Complexes of at most 30 cells, with random directed contact twins.
pub fn random_small_complex(rng: &mut ChaCha8Rng) -> CombinatorialComplex {
    let layouts: [&[fn() -> MeshTopology]; 5] =
        [&[triangle], &[tetra], &[triangle, triangle], &[triangle, quad], &[quad]];
    let layout = layouts[rng.gen_range(0..layouts.len())];
    let meshes: Vec<MeshTopology> = layout.iter().map(|f| f()).collect();
    let cc = build_complex(&meshes).unwrap();
    let budget = 30 - (0..=4u8).map(|r| cc.cell_count(r)).sum::<usize>();
    let mut contacts = Vec::new();
    let faces = cc.faces();
    for i in 0..faces.len() {
        for j in i + 1..faces.len() {
            if faces[i].object_id != faces[j].object_id && contacts.len() + 2 <= budget && rng.gen_bool(0.7) {
                contacts.push(Contact { sender: i, receiver: j });
                contacts.push(Contact { sender: j, receiver: i });
            }
        }
    }
    cc.with_contacts(&contacts).unwrap()
}
