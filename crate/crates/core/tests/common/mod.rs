#![allow(dead_code)]

use flowmend_core::harness::ExperimentManifest;

/// 24 small synthetic sequences, 4 folds, networks small enough for a test.
pub fn tiny_manifest() -> ExperimentManifest {
    let json = r#"{
        "dataset": { "kind": "synthetic", "per_class": 4, "frames": 4, "image_size": 64, "seed": 3 },
        "mask": { "kind": "LowerPart", "rects": [[0.0, 0.52, 1.0, 1.0]], "fill": 0.0 },
        "flow_size": 16,
        "folds": { "k": 4, "seed": 1 },
        "ae": { "input_size": 16, "encoder_channels": [4, 4, 8], "epochs": 2, "batch": 8 },
        "cnn": { "input_size": 16, "channels": [4, 4, 8], "hidden": 16, "epochs": 3, "batch": 8 },
        "strategy": "Apex"
    }"#;
    let m: ExperimentManifest = serde_json::from_str(json).unwrap();
    m.validate().unwrap();
    m
}
