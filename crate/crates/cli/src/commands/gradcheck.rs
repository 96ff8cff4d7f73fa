//! Gradient audit: compare every op's analytic backward pass against
//! central finite differences and report per-op worst relative error.

use scslab_analysis::{gradcheck_suite, op_names, GRADCHECK_TOL};

use super::{create_out_dir, refuse_clobber, Invocation};
use crate::config::write_snapshot;
use crate::error::{from_analysis, CliError, Result};

pub const REPORT_FILE: &str = "gradcheck_report.txt";
pub const SNAPSHOT_FILE: &str = "config.gradcheck.resolved";

pub fn cmd_gradcheck(inv: &Invocation) -> Result<()> {
    let report_path = inv.out.join(REPORT_FILE);
    let snapshot = inv.out.join(SNAPSHOT_FILE);
    refuse_clobber(inv.force, &[report_path.clone(), snapshot.clone()])?;

    let instances = inv.config.count("gradcheck.instances");
    let seed = inv.config.uint("gradcheck.seed");
    if instances == 0 {
        return Err(CliError::Config(
            "gradcheck.instances must be at least 1".into(),
        ));
    }
    println!(
        "auditing {} ops x {instances} instance(s), seed {seed}",
        op_names().len()
    );
    let report = gradcheck_suite(instances, seed).map_err(from_analysis)?;
    let text = report.render(GRADCHECK_TOL);
    print!("{text}");

    create_out_dir(&inv.out)?;
    write_snapshot(&inv.config, "gradcheck", &snapshot)?;
    std::fs::write(&report_path, &text).map_err(|e| CliError::io(&report_path, e))?;
    println!("wrote {}", report_path.display());

    if report.all_within(GRADCHECK_TOL) {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient audit failed: max rel err {:e} exceeds {GRADCHECK_TOL:e}",
            report.max_rel_err()
        )))
    }
}
