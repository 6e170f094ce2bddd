use std::path::Path;

use super::cv::{mean_of, AblationTable, CVReport, FoldResult};
use super::manifest::ExperimentManifest;
use crate::error::{Error, Result};
use crate::numfmt::sig6;

const FOLD_HEADER: [&str; 8] = [
    "fold",
    "clean_accuracy",
    "occluded_accuracy",
    "reconstructed_accuracy",
    "epe_inside_occluded",
    "epe_inside_reconstructed",
    "epe_outside_occluded",
    "epe_outside_reconstructed",
];

fn cell(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Copies the manifest with the fold plan actually used filled in.
fn write_manifest(manifest: &ExperimentManifest, plan: &crate::dataset::FoldPlan, dir: &Path) -> Result<()> {
    let mut m = manifest.clone();
    m.fold_plan = Some(plan.clone());
    std::fs::write(dir.join("manifest.json"), m.to_json()?)?;
    plan.save(dir.join("fold_plan.json"))
}

/// Writes `folds.csv`, `summary.csv`, per-epoch curves under `curves/`, the
/// fold plan and a copy of the manifest. Missing directories are created.
pub fn emit_report(report: &CVReport, manifest: &ExperimentManifest, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("curves"))?;
    let rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            vec![
                f.fold.to_string(),
                sig6(f.clean_accuracy),
                sig6(f.occluded_accuracy),
                cell(f.reconstructed_accuracy),
                cell(f.epe_inside_occluded),
                cell(f.epe_inside_reconstructed),
                cell(f.epe_outside_occluded),
                cell(f.epe_outside_reconstructed),
            ]
        })
        .collect();
    write_rows(&dir.join("folds.csv"), &FOLD_HEADER, &rows)?;

    let f = &report.folds;
    let summary: Vec<Vec<String>> = [
        ("clean_accuracy", mean_of(f, |r| Some(r.clean_accuracy))),
        ("occluded_accuracy", mean_of(f, |r| Some(r.occluded_accuracy))),
        ("reconstructed_accuracy", mean_of(f, |r| r.reconstructed_accuracy)),
        ("epe_inside_occluded", mean_of(f, |r| r.epe_inside_occluded)),
        ("epe_inside_reconstructed", mean_of(f, |r| r.epe_inside_reconstructed)),
        ("epe_outside_occluded", mean_of(f, |r| r.epe_outside_occluded)),
        ("epe_outside_reconstructed", mean_of(f, |r| r.epe_outside_reconstructed)),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), cell(v)])
    .collect();
    write_rows(&dir.join("summary.csv"), &["metric", "mean"], &summary)?;

    for (i, h) in report.cnn_histories.iter().enumerate() {
        std::fs::write(dir.join("curves").join(format!("cnn_fold{}.csv", i)), h.to_csv())?;
    }
    for (i, h) in report.ae_histories.iter().enumerate() {
        h.write_csv(dir.join("curves").join(format!("ae_fold{}.csv", i)))?;
    }
    write_manifest(manifest, &report.plan, dir)
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Data(format!("bad number {:?}", s)))
}

/// Reads a `folds.csv` written by [`emit_report`].
pub fn read_folds_csv(path: impl AsRef<Path>) -> Result<Vec<FoldResult>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != FOLD_HEADER.len() {
            return Err(Error::Data(format!("folds.csv row has {} fields", rec.len())));
        }
        let req = |i: usize| parse_opt(&rec[i])?.ok_or_else(|| Error::Data(format!("missing {}", FOLD_HEADER[i])));
        out.push(FoldResult {
            fold: rec[0].parse().map_err(|_| Error::Data(format!("bad fold {:?}", &rec[0])))?,
            clean_accuracy: req(1)?,
            occluded_accuracy: req(2)?,
            reconstructed_accuracy: parse_opt(&rec[3])?,
            epe_inside_occluded: parse_opt(&rec[4])?,
            epe_inside_reconstructed: parse_opt(&rec[5])?,
            epe_outside_occluded: parse_opt(&rec[6])?,
            epe_outside_reconstructed: parse_opt(&rec[7])?,
        });
    }
    Ok(out)
}

/// Writes `ablation_<axis>.csv`: one row per setting with means and per-fold accuracy.
pub fn emit_ablation(table: &AblationTable, manifest: &ExperimentManifest, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let k = table.rows.first().map_or(0, |r| r.folds.len());
    let mut header: Vec<String> = ["setting", "reconstructed_accuracy", "epe_inside_reconstructed", "epe_outside_reconstructed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..k).map(|i| format!("fold{}_accuracy", i)));
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.setting.clone(),
                cell(mean_of(&r.folds, |f| f.reconstructed_accuracy)),
                cell(mean_of(&r.folds, |f| f.epe_inside_reconstructed)),
                cell(mean_of(&r.folds, |f| f.epe_outside_reconstructed)),
            ];
            row.extend(r.folds.iter().map(|f| cell(f.reconstructed_accuracy)));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&dir.join(format!("ablation_{}.csv", table.axis.name())), &header_refs, &rows)?;
    write_manifest(manifest, &table.plan, dir)
}
