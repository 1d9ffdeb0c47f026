//! Voronoi diagrams clipped to the container, cell and vertex classification,
//! and topological charge bookkeeping.
//!
//! Cells are built per site by intersecting the container with the
//! bisector half-planes of every other site. Each polygon edge remembers what
//! produced it (a neighbouring site or a container side), which is all the
//! classification needs: a side is a maximal run of edges with the same
//! neighbour, so a cell corner sitting on a container corner is not a side
//! break unless another cell meets it there.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{polygon_vertices, shoelace_area, Point2};
use crate::metrics::edge_clearance;

/// Default vertex-merge tolerance, relative to the disk radius.
pub const DEFAULT_MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum EdgeLabel {
    /// Part of the bisector with this site.
    Site(usize),
    /// Part of this container side (side k joins corners k and k+1).
    Boundary(u32),
}

impl EdgeLabel {
    fn neighbour(self) -> Option<usize> {
        match self {
            EdgeLabel::Site(j) => Some(j),
            EdgeLabel::Boundary(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell {
    pub site_index: usize,
    /// Raw corners in counter-clockwise order, convention I units.
    pub polygon: Vec<Point2>,
    /// `labels[k]` describes the edge from `polygon[k]` to `polygon[k + 1]`.
    pub labels: Vec<EdgeLabel>,
    /// Sides after merging vertices and dropping spurious corners.
    pub side_count: usize,
    pub is_border: bool,
    /// Number of separate stretches of container boundary in this cell (almost always 0 or 1).
    pub boundary_sides: usize,
    /// `6 − c` for interior cells, `5 − c` for cells with one boundary side.
    pub charge: i64,
    /// Indices into [`VoronoiDiagram::vertices`] of the true corners, in order.
    pub corners: Vec<usize>,
}

impl VoronoiCell {
    pub fn area(&self) -> f64 {
        shoelace_area(&self.polygon)
    }

    pub fn neighbours(&self) -> BTreeSet<usize> {
        self.labels.iter().filter_map(|l| l.neighbour()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexNode {
    pub position: Point2,
    /// Faces meeting here, counting the outside of the container for boundary vertices.
    pub order: usize,
    pub charge: i64,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiDiagram {
    pub sigma: u32,
    /// Convention I disk radius the container was built for.
    pub r: f64,
    pub cells: Vec<VoronoiCell>,
    pub vertices: Vec<VertexNode>,
    /// Merge tolerance of the last classification, relative to `r`.
    pub merge_tol: f64,
    /// Interior edges (between two cells) after classification.
    pub interior_edges: usize,
}

impl VoronoiDiagram {
    /// Container corners in convention I units.
    pub fn container(&self) -> Vec<Point2> {
        outer_polygon(self.sigma, self.r)
    }

    pub fn container_area(&self) -> f64 {
        shoelace_area(&self.container())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerCounts {
    pub n_v: usize,
    pub n_e: usize,
    pub n_f: usize,
}

impl EulerCounts {
    pub fn characteristic(&self) -> i64 {
        self.n_v as i64 - self.n_e as i64 + self.n_f as i64
    }
}

/// Charge census laid out like a defect table: cells by side count (interior
/// and border separately), border count, vertices by order, and the sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeLedger {
    pub interior_cells: BTreeMap<usize, usize>,
    pub border_cells: BTreeMap<usize, usize>,
    pub border_count: usize,
    /// Vertices of order ≥ 3, keyed by order.
    pub vertex_census: BTreeMap<usize, usize>,
    pub q_interior_sum: i64,
    pub q_border_sum: i64,
    pub q_vertex_sum: i64,
    /// Sum over all cells of `6 − c`, all vertex charges and the outer face `6 − N_b`.
    pub total_q: i64,
    pub euler_counts: EulerCounts,
    pub merge_tol: f64,
}

impl ChargeLedger {
    /// Charge inside the domain; 6 for a consistent diagram.
    pub fn charge_sum(&self) -> i64 {
        self.q_interior_sum + self.q_border_sum + self.q_vertex_sum
    }

    /// Cell counts by side count regardless of position.
    pub fn cells_by_sides(&self) -> BTreeMap<usize, usize> {
        let mut all = self.interior_cells.clone();
        for (c, k) in &self.border_cells {
            *all.entry(*c).or_default() += k;
        }
        all
    }
}

/// Container (outer polygon) corners in convention I units.
pub fn outer_polygon(sigma: u32, r: f64) -> Vec<Point2> {
    polygon_vertices(sigma, 1.0 + r / (PI / sigma as f64).cos())
}

/// Keeps the part of `poly` with `a·x ≤ b`; the new edge along the line gets `label`.
pub(crate) fn clip(poly: &[(Point2, EdgeLabel)], a: Point2, b: f64, label: EdgeLabel) -> Vec<(Point2, EdgeLabel)> {
    let n = poly.len();
    let side: Vec<f64> = poly.iter().map(|(p, _)| a.dot(*p) - b).collect();
    if side.iter().all(|&s| s <= 0.0) {
        return poly.to_vec();
    }
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let (p, l) = poly[k];
        let q = poly[(k + 1) % n].0;
        let (sp, sq) = (side[k], side[(k + 1) % n]);
        let crossing = |p: Point2, q: Point2| p + (q - p) * (sp / (sp - sq));
        match (sp <= 0.0, sq <= 0.0) {
            (true, true) => out.push((p, l)),
            (true, false) => {
                out.push((p, l));
                out.push((crossing(p, q), label));
            }
            (false, true) => out.push((crossing(p, q), l)),
            (false, false) => {}
        }
    }
    out
}

/// Raw clipped Voronoi diagram of `cfg` in the container. Cells come back
/// classified with [`DEFAULT_MERGE_TOL`].
pub fn clipped_voronoi(cfg: &Configuration) -> Result<VoronoiDiagram> {
    let sites = cfg.unit_centers();
    let n = sites.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if sites[i].dist_sq(sites[j]) == 0.0 {
                return Err(Error::Degenerate(format!("sites {i} and {j} coincide")));
            }
        }
    }
    let container = outer_polygon(cfg.sigma, cfg.r);
    let base: Vec<(Point2, EdgeLabel)> = container
        .iter()
        .enumerate()
        .map(|(k, p)| (*p, EdgeLabel::Boundary(k as u32)))
        .collect();

    let cells = (0..n)
        .map(|i| {
            let pi = sites[i];
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| pi.dist_sq(sites[a]).total_cmp(&pi.dist_sq(sites[b])));
            let mut poly = base.clone();
            for j in others {
                // sites farther than twice the cell's reach cannot cut it
                let reach = poly.iter().map(|(p, _)| p.dist_sq(pi)).fold(0.0, f64::max);
                if 0.25 * pi.dist_sq(sites[j]) > reach {
                    break;
                }
                let a = sites[j] - pi;
                let b = a.dot((pi + sites[j]) * 0.5);
                poly = clip(&poly, a, b, EdgeLabel::Site(j));
                if poly.is_empty() {
                    break;
                }
            }
            let (polygon, labels) = poly.into_iter().unzip();
            VoronoiCell {
                site_index: i,
                polygon,
                labels,
                side_count: 0,
                is_border: false,
                boundary_sides: 0,
                charge: 0,
                corners: Vec::new(),
            }
        })
        .collect();

    let raw = VoronoiDiagram {
        sigma: cfg.sigma,
        r: cfg.r,
        cells,
        vertices: Vec::new(),
        merge_tol: DEFAULT_MERGE_TOL,
        interior_edges: 0,
    };
    Ok(classify_cells(raw, DEFAULT_MERGE_TOL))
}

/// Clusters points closer than `tol` (single linkage). Returns the cluster of
/// each point and the cluster centroids.
fn cluster(points: &[Point2], tol: f64) -> (Vec<usize>, Vec<Point2>) {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if points[b].x - points[a].x > tol {
                break;
            }
            if points[a].dist(points[b]) <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut id_of_root = BTreeMap::new();
    let mut ids = vec![0; n];
    let mut sums: Vec<(Point2, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let next = id_of_root.len();
        let id = *id_of_root.entry(root).or_insert(next);
        if id == sums.len() {
            sums.push((Point2::ORIGIN, 0));
        }
        sums[id].0 = sums[id].0 + points[i];
        sums[id].1 += 1;
        ids[i] = id;
    }
    let centroids = sums.into_iter().map(|(s, k)| s * (1.0 / k as f64)).collect();
    (ids, centroids)
}

/// Merges corners within `merge_tol·r`, drops spurious corners and counts
/// sides, cell charges and vertex orders. Works from the raw polygons, so
/// classifying twice gives the same result.
pub fn classify_cells(mut diagram: VoronoiDiagram, merge_tol: f64) -> VoronoiDiagram {
    let tol = merge_tol * diagram.r;
    let mut all = Vec::new();
    let mut offsets = Vec::with_capacity(diagram.cells.len());
    for cell in &diagram.cells {
        offsets.push(all.len());
        all.extend_from_slice(&cell.polygon);
    }
    let (ids, centroids) = cluster(&all, tol);

    // faces around each merged corner and whether a container side touches it
    let mut faces: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); centroids.len()];
    let mut on_boundary = vec![false; centroids.len()];
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();

    let single = diagram.cells.len() == 1;
    for (ci, cell) in diagram.cells.iter_mut().enumerate() {
        let m = cell.polygon.len();
        // edges that survive merging, as (start corner, label)
        let edges: Vec<(usize, EdgeLabel)> = (0..m)
            .filter_map(|k| {
                let a = ids[offsets[ci] + k];
                let b = ids[offsets[ci] + (k + 1) % m];
                (a != b).then_some((a, cell.labels[k]))
            })
            .collect();
        let side_of = |l: EdgeLabel| l.neighbour();
        let breaks: Vec<usize> = (0..edges.len())
            .filter(|&k| {
                let prev = edges[(k + edges.len() - 1) % edges.len()].1;
                side_of(prev) != side_of(edges[k].1)
            })
            .collect();

        cell.corners = breaks.iter().map(|&k| edges[k].0).collect();
        cell.boundary_sides = breaks.iter().filter(|&&k| side_of(edges[k].1).is_none()).count();
        cell.side_count = if breaks.is_empty() {
            // nothing to deform the container corners against
            if single {
                diagram.sigma as usize
            } else {
                1
            }
        } else {
            breaks.len()
        };
        if single {
            cell.boundary_sides = 1;
            cell.corners.clear();
        }
        cell.is_border = cell.boundary_sides > 0;
        cell.charge = 6 - cell.side_count as i64 - cell.boundary_sides as i64;

        for &k in &breaks {
            let corner = edges[k].0;
            faces[corner].insert(ci);
            let prev = edges[(k + edges.len() - 1) % edges.len()].1;
            if side_of(prev).is_none() || side_of(edges[k].1).is_none() {
                on_boundary[corner] = true;
            }
            if let Some(j) = side_of(edges[k].1) {
                pairs.insert((ci.min(j), ci.max(j)));
            }
        }
    }

    // keep only corners that are true vertices, renumbered densely
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut vertices = Vec::new();
    for (c, set) in faces.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let order = set.len() + usize::from(on_boundary[c]);
        remap[c] = vertices.len();
        vertices.push(VertexNode {
            position: centroids[c],
            order,
            charge: -2 * (order as i64 - 3),
            on_boundary: on_boundary[c],
        });
    }
    for cell in &mut diagram.cells {
        cell.corners = cell.corners.iter().map(|&c| remap[c]).collect();
    }
    diagram.vertices = vertices;
    diagram.merge_tol = merge_tol;
    diagram.interior_edges = pairs.len();
    diagram
}

fn euler_counts(diagram: &VoronoiDiagram) -> EulerCounts {
    let boundary_edges: usize = diagram.cells.iter().map(|c| c.boundary_sides).sum();
    EulerCounts {
        n_v: diagram.vertices.len(),
        n_e: diagram.interior_edges + boundary_edges,
        n_f: diagram.cells.len() + 1,
    }
}

/// Charge census of a classified diagram. Fails with the full census when the
/// charge inside the domain is not 6 or the raw Euler count is not 2, either of
/// which means the classification went wrong.
pub fn charge_ledger(diagram: &VoronoiDiagram) -> Result<ChargeLedger> {
    if diagram.cells.len() < 2 {
        return Err(Error::InvalidInput("charge_ledger needs at least two cells".into()));
    }
    let mut interior_cells = BTreeMap::new();
    let mut border_cells = BTreeMap::new();
    let (mut q_int, mut q_border, mut q_all_cells) = (0, 0, 0);
    let mut border_sides = 0;
    for cell in &diagram.cells {
        let c = cell.side_count;
        q_all_cells += 6 - c as i64;
        if cell.is_border {
            *border_cells.entry(c).or_default() += 1;
            q_border += cell.charge;
            border_sides += cell.boundary_sides;
        } else {
            *interior_cells.entry(c).or_default() += 1;
            q_int += cell.charge;
        }
    }
    let mut vertex_census = BTreeMap::new();
    let mut q_vertex = 0;
    for v in diagram.vertices.iter().filter(|v| v.order >= 3) {
        *vertex_census.entry(v.order).or_default() += 1;
        q_vertex += v.charge;
    }
    let ledger = ChargeLedger {
        interior_cells,
        border_cells,
        border_count: diagram.cells.iter().filter(|c| c.is_border).count(),
        vertex_census,
        q_interior_sum: q_int,
        q_border_sum: q_border,
        q_vertex_sum: q_vertex,
        total_q: q_all_cells + q_vertex + 6 - border_sides as i64,
        euler_counts: euler_counts(diagram),
        merge_tol: diagram.merge_tol,
    };
    if ledger.charge_sum() != 6 || ledger.euler_counts.characteristic() != 2 {
        return Err(Error::LedgerViolation(Box::new(ledger)));
    }
    Ok(ledger)
}

/// Contacts of one disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactCount {
    pub disks: usize,
    pub border: usize,
}

impl ContactCount {
    pub fn total(&self) -> usize {
        self.disks + self.border
    }
}

/// Per-disk tangencies with other disks (distance within `tol·2r` of `2r`) and
/// with container sides (center within `tol·r` of the inner polygon side).
pub fn contact_census(cfg: &Configuration, tol: f64) -> Vec<ContactCount> {
    let centers = cfg.unit_centers();
    let limit = 2.0 * cfg.r * (1.0 + tol);
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let disks = centers
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != i && c.dist(**o) <= limit)
                .count();
            let border = (0..cfg.sigma)
                .filter(|&k| edge_clearance(*c, cfg.sigma, k) <= tol * cfg.r)
                .count();
            ContactCount { disks, border }
        })
        .collect()
}
