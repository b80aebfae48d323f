mod common;

use common::{bit_identical, random_classifier};
use qseg::model_file::{self, ModelFileError};
use serde_json::Value;

fn doc(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn random_models_round_trip_through_files_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100 {
        let m = random_classifier(seed);
        let path = dir.path().join(format!("m{seed}.json"));
        model_file::save(&m, &path).unwrap();
        let back = model_file::load(&path).unwrap();
        assert!(bit_identical(&m, &back), "seed {seed}");
        assert_eq!(model_file::to_bytes(&back).unwrap(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn envelope_fields_and_checksum() {
    let bytes = model_file::to_bytes(&random_classifier(7)).unwrap();
    let d = doc(&bytes);
    assert_eq!(d["format"], "qseg-model");
    assert_eq!(d["format_version"], 1);
    let compact = d["model"].to_string();
    assert_eq!(
        d["checksum"].as_str().unwrap(),
        model_file::sha256_tag(compact.as_bytes())
    );
    assert!(bytes.ends_with(b"}\n"));
}

#[test]
fn rejects_other_versions() {
    let mut d = doc(&model_file::to_bytes(&random_classifier(1)).unwrap());
    d["format_version"] = Value::from(2);
    let err = model_file::from_bytes(d.to_string().as_bytes(), "m.json").unwrap_err();
    assert!(
        matches!(err, ModelFileError::Version { ref found, .. } if found == "2"),
        "{err}"
    );
}

#[test]
fn detects_tampering() {
    let mut d = doc(&model_file::to_bytes(&random_classifier(2)).unwrap());
    d["model"]["metadata"]["train_rows"] = Value::from(123_456_789);
    let err = model_file::from_bytes(d.to_string().as_bytes(), "m.json").unwrap_err();
    assert!(matches!(err, ModelFileError::Checksum(_)), "{err}");
}

#[test]
fn rejects_truncated_and_foreign_files() {
    let bytes = model_file::to_bytes(&random_classifier(3)).unwrap();
    let err = model_file::from_bytes(&bytes[..bytes.len() / 2], "m.json").unwrap_err();
    assert!(matches!(err, ModelFileError::Parse(..)), "{err}");
    let err = model_file::from_bytes(br#"{"format": "other", "format_version": 1}"#, "m.json").unwrap_err();
    assert!(matches!(err, ModelFileError::NotAModel(_)), "{err}");
    let err = model_file::from_bytes(b"[1, 2]", "m.json").unwrap_err();
    assert!(matches!(err, ModelFileError::NotAModel(_)), "{err}");
}

#[test]
fn rejects_models_whose_shapes_disagree() {
    let mut m = random_classifier(4);
    m.preprocessor.scaler.min.push(0.0);
    m.preprocessor.scaler.max.push(1.0);
    m.preprocessor
        .pca
        .components
        .push(vec![0.0; m.preprocessor.pca.mean.len()]);
    m.preprocessor.pca.explained_variance.push(0.0);
    let bytes = model_file::to_bytes(&m).unwrap();
    let err = model_file::from_bytes(&bytes, "m.json").unwrap_err();
    assert!(matches!(err, ModelFileError::Inconsistent(..)), "{err}");
}

#[test]
fn refuses_to_store_non_finite_values() {
    let mut m = random_classifier(5);
    m.metadata.final_train_loss = f64::NAN;
    assert!(matches!(model_file::to_bytes(&m), Err(ModelFileError::NonFinite)));
}
