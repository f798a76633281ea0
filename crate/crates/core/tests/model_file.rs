//! Byte-level stability of the model format. The fixtures under
//! `tests/fixtures` were produced by this crate and are compared verbatim;
//! run with `MICROHD_BLESS=1` to regenerate them after a deliberate format
//! change.

use std::path::PathBuf;

use microhd::cost::memory_bits;
use microhd::data::{blobs, prepare, BlobSpec, Normalization};
use microhd::model::{train, HdcConfig, TrainOptions, TrainedModel};
use microhd::model_file::{from_bytes, load_model, save_model, to_bytes, HEADER_BYTES};
use microhd::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn small_model(config: HdcConfig, normalization: Normalization) -> TrainedModel {
    let spec = BlobSpec { classes: config.classes, features: config.features, per_class: 12, seed: 21, ..Default::default() };
    let s = prepare(&blobs(&spec).unwrap(), None, 21, normalization).unwrap();
    let opts = TrainOptions { epochs: 3, ..Default::default() };
    train(config, 77, &s.train, &opts, normalization).unwrap().0.into_model()
}

fn check_golden(name: &str, model: &TrainedModel) {
    let bytes = to_bytes(model).unwrap();
    let path = fixture(name);
    if std::env::var_os("MICROHD_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &bytes).unwrap();
    }
    let golden = std::fs::read(&path).unwrap();
    assert_eq!(bytes, golden, "{name} drifted from the committed fixture");
    assert_eq!(&from_bytes(&golden).unwrap(), model);
}

#[test]
fn golden_id_level() {
    check_golden("id_level_f5_c3_d70_l4_q5.mhd", &small_model(HdcConfig::id_level(5, 3, 70, 4, 5), Normalization::MinMax));
}

#[test]
fn golden_projection() {
    check_golden("projection_f4_c2_d33_q3.mhd", &small_model(HdcConfig::projection(4, 2, 33, 3), Normalization::ZScore));
}

#[test]
fn golden_header_fields() {
    let bytes = std::fs::read(fixture("id_level_f5_c3_d70_l4_q5.mhd")).unwrap();
    assert_eq!(&bytes[0..4], b"MHD1");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(&bytes[6..10], &[0, 0, 1, 5]);
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    assert_eq!([u32_at(12), u32_at(16), u32_at(20), u32_at(24)], [5, 70, 4, 3]);
    assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 77);
    let bits = u64::from_le_bytes(bytes[44..52].try_into().unwrap());
    assert_eq!(bits, 70 * (5 + 4 + 3 * 5));
    assert_eq!(bytes.len() as u64, HEADER_BYTES as u64 + bits.div_ceil(8));
}

#[test]
fn file_size_matches_cost_model() {
    for config in [
        HdcConfig::id_level(7, 4, 129, 9, 13),
        HdcConfig::id_level(3, 2, 64, 2, 1),
        HdcConfig::projection(6, 3, 100, 16),
        HdcConfig::projection(2, 5, 17, 1),
    ] {
        let model = small_model(config, Normalization::MinMax);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mhd");
        save_model(&model, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, HEADER_BYTES as u64 + memory_bits(&config).div_ceil(8), "{config}");
        assert_eq!(load_model(&path).unwrap(), model);
    }
}

#[test]
fn corruption_is_detected() {
    let golden = std::fs::read(fixture("projection_f4_c2_d33_q3.mhd")).unwrap();
    for at in [12, 40, HEADER_BYTES, golden.len() - 1] {
        let mut bad = golden.clone();
        bad[at] ^= 0x01;
        assert!(matches!(from_bytes(&bad), Err(Error::Checksum { .. })), "byte {at}");
    }
    assert!(from_bytes(&golden[..golden.len() - 1]).is_err());
    let mut longer = golden.clone();
    longer.push(0);
    assert!(from_bytes(&longer).is_err());
}
