mod common;

use std::collections::BTreeMap;

use common::{from_centers, hexagon_lattice, hexagon_seven, spec};
use polypack::optimizer::{multi_restart, SolverParams};
use polypack::topology::{charge_ledger, classify_cells, clipped_voronoi, contact_census, ChargeLedger};
use polypack::{Configuration, Point2};

fn hexagon_optimum(n: usize, restarts: usize) -> Configuration {
    let params = SolverParams {
        restarts,
        ..SolverParams::default()
    };
    multi_restart(spec(6), n, &params).unwrap()
}

fn ledger(cfg: &Configuration) -> ChargeLedger {
    charge_ledger(&clipped_voronoi(cfg).unwrap()).unwrap()
}

fn census(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
    pairs.iter().copied().collect()
}

#[test]
fn hexagon_ten_census() {
    let l = ledger(&hexagon_optimum(10, 30));
    assert_eq!(l.cells_by_sides(), census(&[(4, 6), (5, 2), (6, 2)]));
    assert_eq!(l.border_count, 8);
    assert!(l.vertex_census.keys().all(|&order| order == 3));
    assert_eq!(l.total_q, 12);
    assert_eq!(l.charge_sum(), 6);
}

#[test]
fn hexagon_ten_corner_cells_are_quadrilaterals() {
    let cfg = hexagon_optimum(10, 30);
    let diagram = clipped_voronoi(&cfg).unwrap();
    let corners = polypack::topology::outer_polygon(6, cfg.r);
    for cell in &diagram.cells {
        let holds_corner = cell
            .polygon
            .iter()
            .any(|p| corners.iter().any(|c| c.dist(*p) < 1e-9));
        if holds_corner {
            assert_eq!(cell.side_count, 4);
        }
    }
}

#[test]
fn hexagon_twelve_has_three_four_vertices() {
    let l = ledger(&hexagon_optimum(12, 40));
    assert_eq!(l.vertex_census.get(&4), Some(&3));
    assert_eq!(l.cells_by_sides(), census(&[(4, 9), (5, 3)]));
    assert_eq!(l.border_count, 9);
    assert_eq!(l.q_vertex_sum, -6);
    assert_eq!(l.total_q, 12);
}

#[test]
fn lattices_obey_euler() {
    for cfg in [hexagon_seven(), hexagon_lattice(2), hexagon_lattice(3)] {
        let l = ledger(&cfg);
        assert_eq!(l.charge_sum(), 6);
        assert_eq!(l.euler_counts.characteristic(), 2);
    }
}

#[test]
fn merge_tolerance_is_exposed() {
    let cfg = hexagon_optimum(12, 40);
    let raw = clipped_voronoi(&cfg).unwrap();
    let tight = classify_cells(raw.clone(), 1e-13);
    let loose = classify_cells(raw, 1e-6);
    assert_eq!(loose.merge_tol, 1e-6);
    // the 4-vertices of the optimum are only exact to roundoff
    let fours = |d: &polypack::topology::VoronoiDiagram| d.vertices.iter().filter(|v| v.order == 4).count();
    assert_eq!(fours(&loose), 3);
    assert!(fours(&tight) <= 3);
}

#[test]
fn contact_census_examples() {
    let single = Configuration::with_radius(spec(6), vec![polypack::ParamPoint::new(0.0, 0.0)], 0.3);
    assert_eq!(contact_census(&single, 1e-9)[0].total(), 0);
    let seven = hexagon_seven();
    let center = seven
        .unit_centers()
        .iter()
        .position(|c| c.norm() < 1e-12)
        .unwrap();
    let counts = contact_census(&seven, 1e-9);
    assert_eq!(counts[center].disks, 6);
    assert_eq!(counts[center].border, 0);
}

#[test]
fn two_sites_share_a_single_edge() {
    let cfg = from_centers(5, &[Point2::new(-0.3, 0.1), Point2::new(0.4, -0.2)]);
    let d = clipped_voronoi(&cfg).unwrap();
    assert_eq!(d.interior_edges, 1);
    let total: f64 = d.cells.iter().map(|c| c.area()).sum();
    assert!((total - d.container_area()).abs() < 1e-12);
}
