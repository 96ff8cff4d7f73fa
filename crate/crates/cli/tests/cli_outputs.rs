//! Saliency, gradient-audit, and 1-D demo artifacts through the real binary.

mod common;

use common::*;
use tempfile::TempDir;

#[test]
fn saliency_writes_a_pgm_and_sidecar_per_index() {
    let tmp = TempDir::new().unwrap();
    let train_out = tiny_train(tmp.path());
    let ckpt = tiny_run_dir(&train_out).join("best.ckpt");
    let sal = tmp.path().join("sal");
    let res = scslab(&[
        "saliency",
        "--config",
        train_out.join("config.train.resolved").to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        sal.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    assert!(sal.join("config.saliency.resolved").exists());
    for i in 0..3 {
        let pgm = std::fs::read(sal.join(format!("saliency_{i}.pgm"))).unwrap();
        let header = b"P5\n32 32\n255\n";
        assert!(pgm.starts_with(header), "index {i} should be a 32x32 binary PGM");
        assert_eq!(pgm.len(), header.len() + 32 * 32, "one byte per pixel");

        let sidecar = read(&sal.join(format!("saliency_{i}.txt")));
        assert!(sidecar.contains(&format!("image_id: {i}\n")));
        for key in ["class: ", "logit: ", "sparsity: ", "reduction: max_abs", "normalization: "] {
            assert!(sidecar.contains(key), "sidecar {i} should report {key:?}: {sidecar}");
        }
    }
    assert!(!sal.join("saliency_3.pgm").exists(), "only the requested indices are written");
}

#[test]
fn saliency_index_out_of_range_exits_2_before_writing() {
    let tmp = TempDir::new().unwrap();
    let train_out = tiny_train(tmp.path());
    let ckpt = tiny_run_dir(&train_out).join("best.ckpt");
    let sal = tmp.path().join("sal");
    let res = scslab(&[
        "saliency",
        "--config",
        train_out.join("config.train.resolved").to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        sal.to_str().unwrap(),
        "--override",
        "saliency.indices=0,999",
    ]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(
        !sal.join("saliency_0.pgm").exists(),
        "a bad index anywhere in the list must abort the whole command"
    );
}

#[test]
fn gradcheck_reports_every_audited_op() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let res = scslab(&[
        "gradcheck",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "gradcheck.instances=2",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let report = read(&out.join("gradcheck_report.txt"));
    for op in [
        "conv2d",
        "cossim2d",
        "scs2d",
        "sdp2d",
        "linear",
        "relu",
        "maxpool2d",
        "maxabspool2d",
        "batchnorm2d",
        "cross_entropy",
    ] {
        assert!(report.contains(op), "report should cover {op}: {report}");
    }
    assert_eq!(report.lines().count(), 11, "one line per op plus the overall verdict");
    assert!(!report.contains("FAIL"), "{report}");
    assert!(report.contains("overall max_rel_err="));
    assert!(stdout(&res).contains("overall max_rel_err="), "the report is echoed to stdout");
    assert!(out.join("config.gradcheck.resolved").exists());
}

#[test]
fn noiseless_demo_finds_the_planted_feature_with_a_unit_peak() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let res = scslab(&[
        "demo1d",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "demo1d.sigma=0",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let report = read(&out.join("demo1d.txt"));
    let field = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("missing {key:?} in {report}"))
            .trim()
            .parse()
            .unwrap()
    };
    assert_eq!(field("true_offset:"), field("scs_argmax:"), "{report}");
    let peak = field("scs_peak:");
    assert!((peak - 1.0).abs() < 1e-6, "a clean match should score ~1, got {peak}");

    let csv = read(&out.join("demo1d.csv"));
    let lines = csv_lines(&csv);
    assert_eq!(lines[0], "offset,conv,scs");
    assert_eq!(lines.len(), 58, "one row per valid kernel placement");
}
