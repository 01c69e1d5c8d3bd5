//! Obstacle classification on a Delaunay graph of the projected points.
//!
//! The triangulation is built in image coordinates, then every edge whose
//! endpoints are at least `epsilon` apart in 3D is dropped. A triangle
//! survives only if all three of its edges do. Each vertex gets the
//! normalized mean of its surviving triangles' upward normals, and is an
//! obstacle when that normal leans more than `c` degrees away from vertical.

use std::collections::HashSet;

use delaunator::{triangulate, Point};
use nalgebra::Vector3;

use crate::ingest::FusedPoint;
use crate::par;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdjacencyGraph {
    pub vertex_count: usize,
    /// Every triangle of the planar triangulation, counter-clockwise in (u, v).
    pub triangles: Vec<[usize; 3]>,
    /// Unpruned Delaunay edges, `(i, j)` with `i < j`.
    pub delaunay_edges: Vec<(usize, usize)>,
    /// Edges shorter than `epsilon` in 3D.
    pub edges: Vec<(usize, usize)>,
    /// Indices into `triangles` whose three edges all survived.
    pub surviving_triangles: Vec<usize>,
    /// Sorted neighbour lists over `edges`.
    pub neighbors: Vec<Vec<usize>>,
    pub epsilon: f64,
}

/// Triangulates `points` on `(u, v)` and prunes edges by 3D length.
pub fn build_graph(points: &[FusedPoint], epsilon: f64) -> AdjacencyGraph {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let n = points.len();
    let mut graph = AdjacencyGraph {
        vertex_count: n,
        neighbors: vec![Vec::new(); n],
        epsilon,
        ..Default::default()
    };
    if n < 3 {
        return graph;
    }

    let coords: Vec<Point> = points.iter().map(|p| Point { x: p.u, y: p.v }).collect();
    let tri = triangulate(&coords);
    graph.triangles = tri
        .triangles
        .chunks_exact(3)
        .map(|t| [t[0], t[1], t[2]])
        .collect();

    let mut all = HashSet::new();
    for t in &graph.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            all.insert((a.min(b), a.max(b)));
        }
    }
    let mut delaunay_edges: Vec<_> = all.into_iter().collect();
    delaunay_edges.sort_unstable();

    let keep = |&(a, b): &(usize, usize)| points[a].dist3(&points[b]) < epsilon;
    let edges: Vec<_> = delaunay_edges.iter().copied().filter(keep).collect();
    let kept: HashSet<_> = edges.iter().copied().collect();

    for &(a, b) in &edges {
        graph.neighbors[a].push(b);
        graph.neighbors[b].push(a);
    }
    for nb in &mut graph.neighbors {
        nb.sort_unstable();
    }
    graph.surviving_triangles = graph
        .triangles
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            (0..3).all(|k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                kept.contains(&(a.min(b), a.max(b)))
            })
        })
        .map(|(i, _)| i)
        .collect();
    graph.delaunay_edges = delaunay_edges;
    graph.edges = edges;
    graph
}

/// Unit normal of a 3D triangle oriented with non-negative z, or `None` when
/// the triangle is degenerate.
///
/// `sliver` widens "degenerate" to near-collinear triangles: one is skipped
/// when twice its area falls below `sliver` times its longest edge squared
/// (an equilateral triangle scores about 0.87). With 0 only exactly flat
/// triangles are skipped.
pub fn triangle_normal(
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
    sliver: f64,
) -> Option<Vector3<f64>> {
    let e1 = b - a;
    let e2 = c - a;
    let n = e1.cross(&e2);
    let len = n.norm();
    let scale = e1.norm() * e2.norm();
    if len == 0.0 || len <= 1e-12 * scale {
        return None;
    }
    let longest = e1
        .norm_squared()
        .max(e2.norm_squared())
        .max((c - b).norm_squared());
    if len < sliver * longest {
        return None;
    }
    let n = n / len;
    Some(if n.z < 0.0 { -n } else { n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    /// `None` for vertices without a usable incident triangle.
    pub normals: Vec<Option<Vector3<f64>>>,
}

impl NormalField {
    pub fn z(&self, i: usize) -> Option<f64> {
        self.normals[i].map(|n| n.z)
    }

    /// Angle of the normal above the horizontal plane, in degrees.
    pub fn elevation_deg(&self, i: usize) -> Option<f64> {
        self.z(i).map(|z| z.clamp(-1.0, 1.0).asin().to_degrees())
    }
}

pub fn compute_normals(graph: &AdjacencyGraph, points: &[FusedPoint], sliver: f64) -> NormalField {
    let pos = |i: usize| Vector3::new(points[i].x, points[i].y, points[i].z);
    let tri_normals: Vec<Option<Vector3<f64>>> = par::map_slice(&graph.surviving_triangles, |&t| {
        let [a, b, c] = graph.triangles[t];
        triangle_normal(pos(a), pos(b), pos(c), sliver)
    });

    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); graph.vertex_count];
    for (k, &t) in graph.surviving_triangles.iter().enumerate() {
        if tri_normals[k].is_some() {
            for &v in &graph.triangles[t] {
                incident[v].push(k as u32);
            }
        }
    }

    let normals = par::map_range(graph.vertex_count, |v| {
        let inc = &incident[v];
        if inc.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = inc
            .iter()
            .filter_map(|&k| tri_normals[k as usize])
            .fold(Vector3::zeros(), |acc, n| acc + n);
        let mean = sum / inc.len() as f64;
        let len = mean.norm();
        (len > 1e-12).then(|| mean / len)
    });
    NormalField { normals }
}

/// Smallest normal z-component that still counts as flat for threshold `c`.
pub fn flat_z_threshold(c_deg: f64) -> f64 {
    (90.0 - c_deg).to_radians().sin()
}

/// `true` marks an obstacle: the normal is more than `c_deg` away from
/// vertical, or there is no normal at all.
pub fn classify_obstacles(normals: &NormalField, c_deg: f64) -> Vec<bool> {
    assert!(c_deg > 0.0 && c_deg < 90.0, "c must lie in (0, 90) degrees");
    let threshold = flat_z_threshold(c_deg);
    normals
        .normals
        .iter()
        .map(|n| match n {
            Some(n) => n.z < threshold,
            None => true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(i: usize, x: f64, y: f64, z: f64, u: f64, v: f64) -> FusedPoint {
        FusedPoint {
            index: i,
            x,
            y,
            z,
            u,
            v,
        }
    }

    #[test]
    fn tiny_inputs() {
        let g = build_graph(&[fp(0, 0., 0., 0., 0., 0.)], 1.0);
        assert!(g.triangles.is_empty() && g.edges.is_empty());
        let collinear: Vec<_> = (0..5)
            .map(|i| fp(i, i as f64, 0., 0., i as f64, 0.))
            .collect();
        assert!(build_graph(&collinear, 1.0).triangles.is_empty());
    }

    #[test]
    fn one_triangle() {
        let pts = [
            fp(0, 0., 0., 0., 0., 0.),
            fp(1, 0.3, 0., 0., 10., 0.),
            fp(2, 0., 0.3, 0., 0., 10.),
        ];
        let g = build_graph(&pts, 0.5);
        assert_eq!(g.triangles.len(), 1);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.surviving_triangles, vec![0]);

        // Pull vertex 2 away in 3D only.
        let mut far = pts;
        far[2].z = 0.6;
        let g = build_graph(&far, 0.5);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert!(g.surviving_triangles.is_empty());
    }

    #[test]
    fn edge_exactly_at_epsilon_is_dropped() {
        let pts = [
            fp(0, 0., 0., 0., 0., 0.),
            fp(1, 0.5, 0., 0., 10., 0.),
            fp(2, 0., 0.25, 0., 0., 10.),
        ];
        let g = build_graph(&pts, 0.5);
        assert!(!g.edges.contains(&(0, 1)));
    }

    #[test]
    fn ground_and_wall_normals() {
        let n = triangle_normal(
            Vector3::new(0., 0., 0.),
            Vector3::new(1., 0., 0.),
            Vector3::new(0., 1., 0.),
            0.0,
        )
        .unwrap();
        assert_eq!(n, Vector3::new(0., 0., 1.));

        let w = triangle_normal(
            Vector3::new(5., 0., 0.),
            Vector3::new(5., 1., 0.),
            Vector3::new(5., 0., 1.),
            0.0,
        )
        .unwrap();
        assert_eq!(w.x.abs(), 1.0);
        assert_eq!(w.z, 0.0);

        // Clockwise order gives the same upward normal.
        let n2 = triangle_normal(
            Vector3::new(0., 0., 0.),
            Vector3::new(0., 1., 0.),
            Vector3::new(1., 0., 0.),
            0.0,
        )
        .unwrap();
        assert_eq!(n2, n);
    }

    #[test]
    fn degenerate_triangle_skipped() {
        assert!(triangle_normal(
            Vector3::new(0., 0., 0.),
            Vector3::new(1., 1., 1.),
            Vector3::new(2., 2., 2.),
            0.0,
        )
        .is_none());
    }

    #[test]
    fn sliver_tolerance() {
        // Twice the area over the longest edge squared is 0.1 here.
        let (a, b, c) = (
            Vector3::new(0., 0., 0.),
            Vector3::new(1., 0., 0.),
            Vector3::new(0.5, 0., 0.1),
        );
        assert!(triangle_normal(a, b, c, 0.09).is_some());
        assert!(triangle_normal(a, b, c, 0.11).is_none());
    }

    #[test]
    fn sloped_plane_vertex() {
        // Fan around the origin on the plane z = x.
        let mut pts = vec![fp(0, 0., 0., 0., 100., 100.)];
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            let (x, y) = (0.1 * a.cos(), 0.1 * a.sin());
            pts.push(fp(
                k + 1,
                x,
                y,
                x,
                100. + 10. * a.cos(),
                100. + 10. * a.sin(),
            ));
        }
        let g = build_graph(&pts, 0.5);
        let nf = compute_normals(&g, &pts, 0.0);
        let n = nf.normals[0].unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n - Vector3::new(-s, 0., s)).norm() < 1e-12);
        assert!((nf.elevation_deg(0).unwrap() - 45.0).abs() < 1e-9);
        assert!((n.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classification_rule() {
        let c = 30.0;
        let field = NormalField {
            normals: vec![
                Some(Vector3::new(0., 0., 1.)),
                Some(Vector3::new(1., 0., 0.)),
                Some(Vector3::new(
                    (1.0 - flat_z_threshold(c).powi(2)).sqrt(),
                    0.,
                    flat_z_threshold(c),
                )),
                None,
            ],
        };
        assert_eq!(
            classify_obstacles(&field, c),
            vec![false, true, false, true]
        );
    }
}
