//! 1-D detector demo: slide the fixed template over a planted signal and
//! contrast raw-correlation (conv) with normalized-similarity (scs)
//! responses.

use scslab_analysis::{detector_response_1d, DetectorMode};
use scslab_data::{synth_1d_signal, SignalKind, TEMPLATE_1D};

use super::{create_out_dir, refuse_clobber, Invocation};
use crate::config::write_snapshot;
use crate::error::{CliError, Result};

pub const RESPONSE_FILE: &str = "demo1d.csv";
pub const REPORT_FILE: &str = "demo1d.txt";
pub const SNAPSHOT_FILE: &str = "config.demo1d.resolved";

pub fn cmd_demo1d(inv: &Invocation) -> Result<()> {
    let csv = inv.out.join(RESPONSE_FILE);
    let txt = inv.out.join(REPORT_FILE);
    let snapshot = inv.out.join(SNAPSHOT_FILE);
    refuse_clobber(inv.force, &[csv.clone(), txt.clone(), snapshot.clone()])?;

    let sigma = inv.config.float("demo1d.sigma");
    if sigma < 0.0 {
        return Err(CliError::Config("demo1d.sigma must be non-negative".into()));
    }
    let seed = inv.config.uint("demo1d.seed");
    let signal = synth_1d_signal(SignalKind::FeaturePresent, sigma, seed);
    let conv = detector_response_1d(&TEMPLATE_1D, &signal.values, DetectorMode::Conv);
    let scs = detector_response_1d(&TEMPLATE_1D, &signal.values, DetectorMode::Scs);
    let true_offset = signal
        .offset
        .expect("FeaturePresent always embeds the template");

    let mut body = String::from("offset,conv,scs\n");
    for (i, (c, s)) in conv.iter().zip(&scs).enumerate() {
        body.push_str(&format!("{i},{c},{s}\n"));
    }
    let report = format!(
        "sigma: {sigma}\nseed: {seed}\ntrue_offset: {true_offset}\n\
         conv_argmax: {}\nconv_peak: {}\nscs_argmax: {}\nscs_peak: {}\n",
        argmax(&conv),
        conv[argmax(&conv)],
        argmax(&scs),
        scs[argmax(&scs)],
    );

    create_out_dir(&inv.out)?;
    write_snapshot(&inv.config, "demo1d", &snapshot)?;
    std::fs::write(&csv, body).map_err(|e| CliError::io(&csv, e))?;
    std::fs::write(&txt, &report).map_err(|e| CliError::io(&txt, e))?;
    print!("{report}");
    println!("wrote {}", csv.display());
    Ok(())
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("detector responses are never empty")
}
