//! End-to-end training runs through the real binary: grid artifacts,
//! reproducibility, worker parallelism, and data-source failures.

mod common;

use common::*;
use tempfile::TempDir;

const SUMMARY_HEADER: &str = "arch,layer,activation,pooling,normalization,p_mode,q_mode,seed,\
                              params,flagged,best_test_acc,best_epoch,mean_train_time_s,\
                              mean_eval_time_s";

#[test]
fn two_cell_grid_writes_summary_and_per_run_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "grid.activations = relu,none\n");
    let out = tmp.path().join("out");
    let res = scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let summary = read(&out.join("summary.csv"));
    let lines = csv_lines(&summary);
    assert_eq!(lines.len(), 3, "header plus one row per cell");
    assert_eq!(lines[0], SUMMARY_HEADER);
    assert!(lines[1].starts_with("rohrer_small,conv,relu,maxpool,none,"));
    assert!(lines[2].starts_with("rohrer_small,conv,none,maxpool,none,"));

    let flagged: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(flagged[9], "degraded", "conv without activation is flagged");
    let unflagged: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(unflagged[9], "", "conv with relu is not flagged");

    assert!(out.join("config.train.resolved").exists());
    for cell in ["conv-relu", "conv-none"] {
        let run = out.join(format!("rohrer_small-{cell}-maxpool-none-seed0"));
        for artifact in ["telemetry.csv", "initial.ckpt", "best.ckpt", "final.ckpt", "summary_row.csv"]
        {
            assert!(run.join(artifact).exists(), "{cell} run should write {artifact}");
        }
        let telemetry = read(&run.join("telemetry.csv"));
        assert_eq!(csv_lines(&telemetry).len(), 2, "header plus one row per epoch");
    }
}

#[test]
fn rerun_with_zeroed_times_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (first, second) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&first, &second] {
        let res =
            scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }

    assert_eq!(read(&first.join("summary.csv")), read(&second.join("summary.csv")));
    let run = "rohrer_small-conv-relu-maxpool-none-seed0";
    assert_eq!(
        read(&first.join(run).join("telemetry.csv")),
        read(&second.join(run).join("telemetry.csv"))
    );
}

#[test]
fn zero_epoch_run_reports_empty_metrics_and_skips_best_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "train.epochs = 0\n");
    let out = tmp.path().join("out");
    let res = scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let summary = read(&out.join("summary.csv"));
    let row: Vec<&str> = csv_lines(&summary)[1].split(',').collect();
    assert_eq!(row.len(), 14);
    assert!(row[10..14].iter().all(|f| f.is_empty()), "no epochs means no metrics: {row:?}");

    let run = tiny_run_dir(&out);
    assert!(run.join("initial.ckpt").exists());
    assert!(run.join("final.ckpt").exists());
    assert!(!run.join("best.ckpt").exists(), "nothing was evaluated, so nothing is best");
    let telemetry = read(&run.join("telemetry.csv"));
    assert_eq!(csv_lines(&telemetry).len(), 1, "telemetry holds only the header");
}

#[test]
fn parallel_workers_produce_the_same_bytes_as_serial() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "grid.activations = relu,none\n");
    let (serial, parallel) = (tmp.path().join("serial"), tmp.path().join("parallel"));

    let res =
        scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", serial.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let res = scslab(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        parallel.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    assert_eq!(read(&serial.join("summary.csv")), read(&parallel.join("summary.csv")));
    for cell in ["conv-relu", "conv-none"] {
        let run = format!("rohrer_small-{cell}-maxpool-none-seed0");
        assert_eq!(
            read(&serial.join(&run).join("telemetry.csv")),
            read(&parallel.join(&run).join("telemetry.csv")),
            "{cell} telemetry should not depend on worker scheduling"
        );
    }
}

#[test]
fn cifar_source_without_a_dataset_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "data.source = cifar10\n");
    let out = tmp.path().join("out");

    let res = scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3, "no data.dir at all: {}", stderr(&res));

    let empty = tmp.path().join("empty-dataset");
    std::fs::create_dir(&empty).unwrap();
    let res = scslab(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--data-dir",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 3, "directory without batch files: {}", stderr(&res));
    assert!(!out.exists(), "failed data loading must not leave outputs behind");
}

#[test]
fn unknown_grid_value_exits_2_and_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "grid.layer_kinds = conv,warp\n");
    let out = tmp.path().join("out");
    let res = scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("grid.layer_kinds"), "{}", stderr(&res));
}
