//! Regenerates `fixtures/pentagon_100.json`: an unrefined 100-disk pentagon
//! packing for the variance-refinement check.
//!
//! Run 1262 of master seed 0 is the first default-schedule run that lands in
//! the densest basin found for this case. Its annealed output is annealed once
//! more from s = 1e4, with a larger iteration budget and without the contact
//! polish.
//!
//! ```text
//! cargo run --release --example pentagon_fixture -- fixtures/pentagon_100.json
//! ```

use polypack::io::{params_hash, write_record, PackingRecord};
use polypack::optimizer::{anneal_from, anneal_run, run_seed, SolverParams};
use polypack::{Convention, PolygonSpec};

const RUN_INDEX: usize = 1262;

fn main() -> polypack::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures/pentagon_100.json".into());
    let spec = PolygonSpec::new(5, Convention::I)?;
    let first = SolverParams {
        polish: false,
        ..SolverParams::default()
    };
    let annealed = anneal_run(spec, 100, &first, run_seed(0, RUN_INDEX))?;
    let second = SolverParams {
        s_in: 1e4,
        max_iter_per_s: 4000,
        polish: false,
        ..SolverParams::default()
    };
    let mut cfg = anneal_from(spec, annealed.params.clone(), &second, RUN_INDEX, &mut |_| {})?;
    cfg.provenance = annealed.provenance.clone();
    let cfg = cfg.tag(format!("reanneal:s_in={}", second.s_in));
    let record = PackingRecord::from_configuration(&cfg, Some(0), params_hash(&(&first, &second)));
    write_record(out.as_ref(), &record)?;
    println!("rho = {:.12} after {:.12}", cfg.rho(), annealed.rho());
    Ok(())
}
