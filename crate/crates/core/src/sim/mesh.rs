//! Canonical triangle meshes of the primitive shapes, in the body frame and
//! wound counter-clockwise seen from outside.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::complex::MeshTopology;
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub nodes: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn topology(&self, is_static: bool) -> MeshTopology {
        MeshTopology { node_count: self.nodes.len(), faces: self.faces.clone(), is_static }
    }

    /// Undirected edge count; with `V − E + F = 2` this checks closed meshes.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }
}

/// Icosahedron refined `subdivision` times by edge midpoints, projected onto
/// the sphere. Subdivision 1 gives 42 nodes and 80 faces.
pub fn icosphere(radius: f64, subdivision: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut nodes: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivision {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Vec3>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                nodes.push((nodes[a] + nodes[b]) * 0.5);
                nodes.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for p in nodes.iter_mut() {
        *p = p.try_normalize().expect("icosphere node at origin") * radius;
    }
    TriMesh { nodes, faces }
}

/// Axis-aligned box surface with each face cut into a `2^s × 2^s` grid.
/// Subdivision 1 gives 26 nodes and 48 faces.
pub fn subdivided_box(half_extents: Vec3, subdivision: u32) -> TriMesh {
    let n = 1usize << subdivision;
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut node = |ijk: [usize; 3], nodes: &mut Vec<Vec3>| {
        *index.entry(ijk).or_insert_with(|| {
            let c = |i: usize, h: f64| -h + 2.0 * h * i as f64 / n as f64;
            nodes.push(Vec3::new(c(ijk[0], half_extents.x), c(ijk[1], half_extents.y), c(ijk[2], half_extents.z)));
            nodes.len() - 1
        })
    };
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for u in 0..n {
                for v in 0..n {
                    let mut corner = |du: usize, dv: usize, nodes: &mut Vec<Vec3>| {
                        let mut ijk = [0; 3];
                        ijk[axis] = side;
                        ijk[b] = u + du;
                        ijk[c] = v + dv;
                        node(ijk, nodes)
                    };
                    let p00 = corner(0, 0, &mut nodes);
                    let p10 = corner(1, 0, &mut nodes);
                    let p11 = corner(1, 1, &mut nodes);
                    let p01 = corner(0, 1, &mut nodes);
                    if side == n {
                        faces.push([p00, p10, p11]);
                        faces.push([p00, p11, p01]);
                    } else {
                        faces.push([p00, p11, p10]);
                        faces.push([p00, p01, p11]);
                    }
                }
            }
        }
    }
    TriMesh { nodes, faces }
}

/// Flat `tiles × tiles` quad grid on `z = 0` over `[−h, h]²`, two triangles
/// per tile, facing +z.
pub fn floor_grid(half_size: f64, tiles: usize) -> TriMesh {
    let m = tiles + 1;
    let c = |i: usize| -half_size + 2.0 * half_size * i as f64 / tiles as f64;
    let nodes = (0..m)
        .flat_map(|j| (0..m).map(move |i| Vec3::new(c(i), c(j), 0.0)))
        .collect();
    let id = |i: usize, j: usize| j * m + i;
    let mut faces = Vec::with_capacity(2 * tiles * tiles);
    for j in 0..tiles {
        for i in 0..tiles {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh { nodes, faces }
}
