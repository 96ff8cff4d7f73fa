//! Binary record format: golden files, error offsets, byte-exact
//! round-trips.

use std::fs;

use scslab_data::{
    load_cifar10, write_record_file, Dataset, DataError, IMAGE_PIXELS, RECORD_BYTES, TEST_FILE,
    TRAIN_FILES,
};

/// Builds a record directory whose five train files hold the given record
/// blobs (split across files) and whose test file holds `test`.
fn write_dir(dir: &std::path::Path, train_records: &[Vec<u8>], test_records: &[Vec<u8>]) {
    let per_file = train_records.len().div_ceil(TRAIN_FILES.len()).max(1);
    for (f, name) in TRAIN_FILES.iter().enumerate() {
        let lo = (f * per_file).min(train_records.len());
        let hi = ((f + 1) * per_file).min(train_records.len());
        let bytes: Vec<u8> = train_records[lo..hi].concat();
        fs::write(dir.join(name), bytes).unwrap();
    }
    fs::write(dir.join(TEST_FILE), test_records.concat()).unwrap();
}

fn record(label: u8, fill: u8) -> Vec<u8> {
    let mut r = vec![fill; RECORD_BYTES];
    r[0] = label;
    r
}

#[test]
fn golden_two_record_file_loads_with_labels_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec_a = record(3, 0);
    rec_a[1] = 255; // first pixel of the red plane
    let rec_b = record(7, 51);
    write_dir(dir.path(), &[rec_a, rec_b], &[record(1, 0)]);

    let (train, test) = load_cifar10(dir.path()).unwrap();
    assert_eq!(train.len(), 2);
    assert_eq!(test.len(), 1);
    assert_eq!(train.label(0), 3);
    assert_eq!(train.label(1), 7);
    assert_eq!(train.image(0)[0], 1.0); // byte 255 -> exactly 1.0
    assert_eq!(train.image(1)[0], 0.2); // byte 51 -> exactly 0.2
}

#[test]
fn missing_file_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_cifar10(dir.path()).unwrap_err();
    match err {
        DataError::Io { path, .. } => {
            assert!(path.ends_with("data_batch_1.bin"));
        }
        other => panic!("expected io error, got {other}"),
    }
}

#[test]
fn truncated_record_reports_the_fragment_offset() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(dir.path(), &[record(0, 9)], &[record(0, 9)]);
    // append a 10-byte fragment to the first train file
    let p = dir.path().join(TRAIN_FILES[0]);
    let mut bytes = fs::read(&p).unwrap();
    bytes.extend_from_slice(&[1u8; 10]);
    fs::write(&p, bytes).unwrap();

    let err = load_cifar10(dir.path()).unwrap_err();
    match err {
        DataError::Format { path, offset, .. } => {
            assert_eq!(path, p);
            assert_eq!(offset, RECORD_BYTES as u64);
        }
        other => panic!("expected format error, got {other}"),
    }
}

#[test]
fn out_of_range_label_reports_its_record_offset() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(
        dir.path(),
        &[record(0, 1)],
        &[record(2, 5), record(11, 6)],
    );
    let err = load_cifar10(dir.path()).unwrap_err();
    match err {
        DataError::Format { path, offset, detail } => {
            assert!(path.ends_with(TEST_FILE));
            assert_eq!(offset, RECORD_BYTES as u64); // second record
            assert!(detail.contains("11"));
        }
        other => panic!("expected format error, got {other}"),
    }
}

#[test]
fn write_then_reload_is_byte_identical() {
    let pixels: Vec<u8> = (0..3 * IMAGE_PIXELS).map(|i| (i * 37 % 256) as u8).collect();
    let ds = Dataset::new(pixels, vec![0, 4, 9], "train").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.bin");
    write_record_file(&ds, &path).unwrap();

    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 3 * RECORD_BYTES);
    assert_eq!(bytes[0], 0);
    assert_eq!(bytes[RECORD_BYTES], 4);

    // splice the file into a full directory and reload
    write_dir(
        dir.path(),
        &bytes.chunks_exact(RECORD_BYTES).map(<[u8]>::to_vec).collect::<Vec<_>>(),
        &[record(0, 0)],
    );
    let (train, _) = load_cifar10(dir.path()).unwrap();
    assert_eq!(train.checksum(), ds.checksum());
    for i in 0..3 {
        assert_eq!(train.raw_image(i), ds.raw_image(i));
        assert_eq!(train.label(i), ds.label(i));
    }

    // and writing the reloaded dataset reproduces the same bytes
    let path2 = dir.path().join("roundtrip2.bin");
    write_record_file(&train, &path2).unwrap();
    assert_eq!(fs::read(&path2).unwrap(), bytes);
}
