//! Contiguity extraction from polygon boundaries.

use super::{Projection, StudyRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contiguity {
    /// Neighbors share at least one boundary point.
    Queen,
    /// Neighbors share a boundary stretch of positive length.
    Rook,
}

/// Symmetric, irreflexive neighbor lists over area indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Build from undirected edges; symmetrizes and deduplicates. Self-loops
    /// are ignored.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Adjacency {
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in edges {
            if i == j || i >= n || j >= n {
                continue;
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Adjacency { n, neighbors }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Indices of areas with no neighbors.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.neighbors[i].is_empty()).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with i < j.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| i < j).map(move |&j| (i, j)))
    }

    /// Induced subgraph on `keep` (old indices, in the order given); the new
    /// index of `keep[k]` is `k`.
    pub fn subset(&self, keep: &[usize]) -> Adjacency {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &old) in keep.iter().enumerate() {
            new_index[old] = k;
        }
        let edges = self.edges().filter_map(|(i, j)| {
            let (ni, nj) = (new_index[i], new_index[j]);
            (ni != usize::MAX && nj != usize::MAX).then_some((ni, nj))
        });
        Adjacency::from_edges(keep.len(), edges.collect::<Vec<_>>())
    }
}

pub fn queen_adjacency(region: &StudyRegion, tol_ft: f64) -> Adjacency {
    contiguity_adjacency(region, Contiguity::Queen, tol_ft)
}

pub fn rook_adjacency(region: &StudyRegion, tol_ft: f64) -> Adjacency {
    contiguity_adjacency(region, Contiguity::Rook, tol_ft)
}

/// Neighbor extraction in a local equidistant plane. Queen: the minimum
/// distance between the two boundaries is at most `tol_ft`. Rook: boundary
/// contact additionally spans more than `2 * tol_ft` (a stretch, not a
/// corner touch).
pub fn contiguity_adjacency(region: &StudyRegion, kind: Contiguity, tol_ft: f64) -> Adjacency {
    let proj = Projection::azimuthal_equidistant(region.centroid());
    let boundaries: Vec<Boundary> = region
        .areas
        .iter()
        .map(|a| {
            let mut segments = Vec::new();
            for ring in &a.rings {
                let pts: Vec<(f64, f64)> = ring.points.iter().map(|&p| proj.forward(p)).collect();
                for w in pts.windows(2) {
                    segments.push((w[0], w[1]));
                }
            }
            Boundary::new(segments)
        })
        .collect();

    let n = region.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !boundaries[i].bbox_near(&boundaries[j], tol_ft) {
                continue;
            }
            let contact = match kind {
                Contiguity::Queen => boundaries[i].touches(&boundaries[j], tol_ft),
                Contiguity::Rook => boundaries[i].shares_stretch(&boundaries[j], tol_ft),
            };
            if contact {
                edges.push((i, j));
            }
        }
    }
    Adjacency::from_edges(n, edges)
}

struct Boundary {
    segments: Vec<((f64, f64), (f64, f64))>,
    min: (f64, f64),
    max: (f64, f64),
}

impl Boundary {
    fn new(segments: Vec<((f64, f64), (f64, f64))>) -> Boundary {
        let (mut min, mut max) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &(a, b) in &segments {
            for p in [a, b] {
                min.0 = min.0.min(p.0);
                min.1 = min.1.min(p.1);
                max.0 = max.0.max(p.0);
                max.1 = max.1.max(p.1);
            }
        }
        Boundary { segments, min, max }
    }

    fn bbox_near(&self, other: &Boundary, tol: f64) -> bool {
        self.min.0 - tol <= other.max.0
            && other.min.0 - tol <= self.max.0
            && self.min.1 - tol <= other.max.1
            && other.min.1 - tol <= self.max.1
    }

    fn touches(&self, other: &Boundary, tol: f64) -> bool {
        self.segments.iter().any(|&s| {
            other
                .segments
                .iter()
                .any(|&t| segment_distance(s, t) <= tol)
        })
    }

    /// True when the contact points between the boundaries spread over more
    /// than `2 * tol`: endpoint-within-tolerance points of collinear overlaps
    /// always include the overlap's ends, so their spread measures the shared
    /// stretch.
    fn shares_stretch(&self, other: &Boundary, tol: f64) -> bool {
        let threshold = (2.0 * tol).max(1e-9);
        let (mut min, mut max) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &s in &self.segments {
            for &t in &other.segments {
                let mut contacts = [None; 4];
                let mut k = 0;
                for e in [s.0, s.1] {
                    if point_segment_distance(e, t) <= tol {
                        contacts[k] = Some(e);
                        k += 1;
                    }
                }
                for e in [t.0, t.1] {
                    if point_segment_distance(e, s) <= tol {
                        contacts[k] = Some(e);
                        k += 1;
                    }
                }
                for p in contacts.into_iter().flatten() {
                    min.0 = min.0.min(p.0);
                    min.1 = min.1.min(p.1);
                    max.0 = max.0.max(p.0);
                    max.1 = max.1.max(p.1);
                }
                if (max.0 - min.0).max(max.1 - min.1) > threshold {
                    return true;
                }
            }
        }
        false
    }
}

fn point_segment_distance(p: (f64, f64), (a, b): ((f64, f64), (f64, f64))) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return apx.hypot(apy);
    }
    let t = ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0);
    (apx - t * abx).hypot(apy - t * aby)
}

fn segment_distance(s: ((f64, f64), (f64, f64)), t: ((f64, f64), (f64, f64))) -> f64 {
    if segments_properly_intersect(s, t) {
        return 0.0;
    }
    point_segment_distance(s.0, t)
        .min(point_segment_distance(s.1, t))
        .min(point_segment_distance(t.0, s))
        .min(point_segment_distance(t.1, s))
}

fn segments_properly_intersect(
    (p1, p2): ((f64, f64), (f64, f64)),
    (q1, q2): ((f64, f64), (f64, f64)),
) -> bool {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{AreaUnit, GeoPoint, Ring};

    fn square(id: &str, lon0: f64, lat0: f64, side_deg: f64) -> AreaUnit {
        AreaUnit {
            id: id.into(),
            name: id.into(),
            rings: vec![Ring {
                points: vec![
                    GeoPoint { lon: lon0, lat: lat0 },
                    GeoPoint { lon: lon0 + side_deg, lat: lat0 },
                    GeoPoint { lon: lon0 + side_deg, lat: lat0 + side_deg },
                    GeoPoint { lon: lon0, lat: lat0 + side_deg },
                    GeoPoint { lon: lon0, lat: lat0 },
                ],
                hole: false,
            }],
            area_sq_mi: 1.0,
        }
    }

    fn grid_region(rows: usize, cols: usize, side_deg: f64) -> StudyRegion {
        let mut areas = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let id = format!("{}", r * cols + c + 1);
                areas.push(square(&id, -87.7 + c as f64 * side_deg, 41.8 + r as f64 * side_deg, side_deg));
            }
        }
        StudyRegion { areas }
    }

    #[test]
    fn queen_grid_2x2_counts_corners() {
        let region = grid_region(2, 2, 0.01);
        let adj = queen_adjacency(&region, 10.0);
        for i in 0..4 {
            assert_eq!(adj.degree(i), 3, "cell {i}");
        }
    }

    #[test]
    fn rook_grid_2x2_excludes_corners() {
        let region = grid_region(2, 2, 0.01);
        let adj = rook_adjacency(&region, 10.0);
        for i in 0..4 {
            assert_eq!(adj.degree(i), 2, "cell {i}");
        }
        assert!(!adj.is_edge(0, 3));
        assert!(!adj.is_edge(1, 2));
    }

    #[test]
    fn strip_3x1_degrees() {
        let region = grid_region(1, 3, 0.01);
        let adj = queen_adjacency(&region, 10.0);
        assert_eq!(adj.degree(0), 1);
        assert_eq!(adj.degree(1), 2);
        assert_eq!(adj.degree(2), 1);
    }

    #[test]
    fn disjoint_squares_are_isolated() {
        let region = StudyRegion {
            areas: vec![square("1", -87.9, 41.8, 0.01), square("2", -87.6, 41.8, 0.01)],
        };
        let adj = queen_adjacency(&region, 10.0);
        assert_eq!(adj.isolated(), vec![0, 1]);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let region = grid_region(3, 3, 0.01);
        let adj = queen_adjacency(&region, 10.0);
        for i in 0..adj.n() {
            for &j in adj.neighbors(i) {
                assert!(adj.is_edge(j, i));
            }
        }
    }

    #[test]
    fn subset_remaps_indices() {
        let adj = Adjacency::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]);
        let sub = adj.subset(&[0, 2, 3]);
        assert_eq!(sub.n(), 3);
        assert!(!sub.is_edge(0, 1)); // 0-2 were not adjacent
        assert!(sub.is_edge(1, 2)); // 2-3 were
        assert_eq!(sub.degree(0), 0);
    }

    #[test]
    fn from_edges_dedupes_and_drops_self_loops() {
        let adj = Adjacency::from_edges(3, [(0, 1), (1, 0), (1, 1), (1, 2), (1, 2)]);
        assert_eq!(adj.degree(0), 1);
        assert_eq!(adj.degree(1), 2);
        assert_eq!(adj.edge_count(), 2);
    }
}
