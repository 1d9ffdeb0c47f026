mod common;

use common::{hexagon_seven, spec};
use polypack::energy::energy;
use polypack::metrics::packing_fraction;
use polypack::optimizer::{
    anneal_run, local_minimize_traced, multi_restart, multi_restart_logged, random_start, run_seed, SolverParams,
};
use polypack::configuration::{AUDIT_CONTAINMENT_TOL, AUDIT_OVERLAP_TOL};
use polypack::topology::{charge_ledger, clipped_voronoi};

fn params(restarts: usize, seed: u64) -> SolverParams {
    SolverParams {
        restarts,
        seed,
        ..SolverParams::default()
    }
}

#[test]
fn two_disks_in_square_take_opposite_corners() {
    // the inner square has unit circumradius: its diagonal 2 is the distance
    let best = multi_restart(spec(4), 2, &params(5, 0)).unwrap();
    assert!((best.rho() - packing_fraction(2, 1.0, 4)).abs() < 1e-6);
}

#[test]
fn three_disks_in_triangle_fill_the_corners() {
    // corners of the unit triangle are √3 apart
    let best = multi_restart(spec(3), 3, &params(5, 1)).unwrap();
    assert!((best.r - 0.5 * 3f64.sqrt()).abs() < 1e-6);
}

#[test]
fn hexagon_seven_is_found() {
    let best = multi_restart(spec(6), 7, &params(100, 0)).unwrap();
    assert!((best.rho() - hexagon_seven().rho()).abs() < 1e-6);
}

#[test]
fn single_restart_equals_anneal_run() {
    let p = params(1, 99);
    let a = multi_restart(spec(7), 8, &p).unwrap();
    let b = anneal_run(spec(7), 8, &p, run_seed(99, 0)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.r, b.r);
}

#[test]
fn same_seed_same_answer() {
    let a = multi_restart(spec(5), 11, &params(4, 5)).unwrap();
    let b = multi_restart(spec(5), 11, &params(4, 5)).unwrap();
    assert_eq!(a.rho().to_bits(), b.rho().to_bits());
}

#[test]
fn outputs_pass_the_audit_and_euler_ledger() {
    for (sigma, n) in [(3, 9), (4, 13), (5, 17), (8, 20), (12, 25)] {
        let cfg = multi_restart(spec(sigma), n, &params(2, 3)).unwrap();
        cfg.audit(AUDIT_OVERLAP_TOL, AUDIT_CONTAINMENT_TOL).unwrap();
        let ledger = charge_ledger(&clipped_voronoi(&cfg).unwrap()).unwrap();
        assert_eq!(ledger.charge_sum(), 6);
    }
}

#[test]
fn energy_trace_is_monotone() {
    let start = random_start(spec(5), 12, 17);
    for s in [10.0, 300.0] {
        let out = local_minimize_traced(&start, 5, s, -0.1, 0.05, 1e-12, 300).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
        }
    }
}

#[test]
fn final_energy_counts_contacts() {
    let cfg = hexagon_seven();
    // α = 0: every tangent pair contributes exactly 1
    let e = energy(&cfg.params, 6, 1e6, 0.0, 0.05).unwrap();
    assert!((e.value - 12.0).abs() < 1e-6, "{}", e.value);
}

#[test]
fn logged_stages_report_every_exponent() {
    let p = params(2, 8);
    let log = std::sync::Mutex::new(Vec::new());
    multi_restart_logged(spec(6), 6, &p, &|rec| log.lock().unwrap().push(rec)).unwrap();
    let log = log.into_inner().unwrap();
    assert_eq!(log.len(), 2 * p.exponents().len());
    assert!(log.iter().all(|r| r.rho > 0.0 && r.d_min > 0.0));
}
