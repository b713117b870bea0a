use std::fs;
use std::path::Path;

use croprow::harness::{
    emit_report, evaluate_dataset, evaluate_sample, load_manifest, Category, EvalOptions, PredictionSource,
    ReportFormat, GLOBAL_SIZE,
};
use croprow::houghlines::RowAngle;
use croprow::imagecore::{encode_mask, encode_rgb_ppm, BinaryMask};
use croprow::rowcluster::PipelineConfig;
use croprow::synthgen::{render_gt_mask, render_rgb, RowSpec, SceneSpec};

fn scene(angles: &[f64]) -> SceneSpec {
    let n = angles.len() as f64;
    SceneSpec {
        size: (160, 160),
        rows: angles
            .iter()
            .enumerate()
            .map(|(i, &a)| RowSpec::through(RowAngle::new(a), 40.0 + i as f64 * 80.0 / n, 80.0, 3))
            .collect(),
        speckle_density: 0.0,
        seed: 0,
    }
}

fn save(dir: &Path, name: &str, mask: &BinaryMask) {
    fs::write(dir.join(name), encode_mask(mask)).unwrap();
}

fn manifest(dir: &Path, lines: &[&str]) -> std::path::PathBuf {
    let mut body = String::from("image,gt_mask,pred_mask,category\n");
    for l in lines {
        body += l;
        body.push('\n');
    }
    let p = dir.join("manifest.csv");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn identical_pairs_score_perfectly_in_every_category() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "one.pgm", &render_gt_mask(&scene(&[4.0])).unwrap());
    save(dir.path(), "two.pgm", &render_gt_mask(&scene(&[-10.0, 12.0])).unwrap());
    let m =
        manifest(dir.path(), &[",one.pgm,one.pgm,a", ",two.pgm,two.pgm,a", ",one.pgm,one.pgm,e", ",two.pgm,two.pgm,e"]);
    let samples = load_manifest(&m).unwrap();
    let report = evaluate_dataset(&samples, &PipelineConfig::default(), &EvalOptions::default()).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.per_category.len(), 2);
    for c in report.per_category.iter().chain([&report.overall]) {
        assert_eq!(c.mean_accuracy, 1.0);
        assert_eq!(c.mean_iou, 1.0);
        assert_eq!(c.mean_angle_error, Some(0.0));
        assert_eq!(c.detection_rate, 1.0);
    }
    assert_eq!(report.overall.sample_count, 4);
    assert_eq!(report.overall.mean_gt_rows, 1.5);
}

#[test]
fn empty_predictions_leave_angle_error_absent() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "gt.pgm", &render_gt_mask(&scene(&[3.0, -8.0])).unwrap());
    save(dir.path(), "empty.pgm", &BinaryMask::empty(160, 160));
    let m = manifest(dir.path(), &[",gt.pgm,empty.pgm,h", ",gt.pgm,gt.pgm,b"]);
    let report =
        evaluate_dataset(&load_manifest(&m).unwrap(), &PipelineConfig::default(), &EvalOptions::default()).unwrap();
    let h = report.per_category.iter().find(|c| c.category_id == "h").unwrap();
    assert_eq!(h.detection_rate, 0.0);
    assert_eq!(h.mean_angle_error, None);
    assert_eq!(h.mean_pred_rows, 0.0);
    let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv)).unwrap();
    let row = csv.lines().find(|l| l.starts_with("h,")).unwrap();
    assert_eq!(row.split(',').nth(5), Some("NA"));
}

#[test]
fn overall_is_sample_weighted() {
    let dir = tempfile::tempdir().unwrap();
    let gt = render_gt_mask(&scene(&[0.0, 15.0])).unwrap();
    save(dir.path(), "gt.pgm", &gt);
    let mut lines = Vec::new();
    for (i, (delta, cat)) in [(0.5, "a"), (1.0, "a"), (2.0, "a"), (1.5, "c")].iter().enumerate() {
        let name = format!("p{i}.pgm");
        save(dir.path(), &name, &render_gt_mask(&scene(&[*delta, 15.0 - delta])).unwrap());
        lines.push(format!(",gt.pgm,{name},{cat}"));
    }
    let lines: Vec<&str> = lines.iter().map(String::as_str).collect();
    let samples = load_manifest(&manifest(dir.path(), &lines)).unwrap();
    let cfg = PipelineConfig::default();
    let report = evaluate_dataset(&samples, &cfg, &EvalOptions::default()).unwrap();

    // independent summation over per-sample results
    let per: Vec<_> = samples.iter().map(|s| evaluate_sample(s, &cfg, &EvalOptions::default()).unwrap()).collect();
    let acc = per.iter().map(|r| r.evaluation.scores.accuracy).sum::<f64>() / per.len() as f64;
    let iou = per.iter().map(|r| r.evaluation.scores.iou).sum::<f64>() / per.len() as f64;
    assert!((report.overall.mean_accuracy - acc).abs() < 1e-12);
    assert!((report.overall.mean_iou - iou).abs() < 1e-12);
    let weighted: f64 = report.per_category.iter().map(|c| c.mean_accuracy * c.sample_count as f64).sum::<f64>()
        / report.overall.sample_count as f64;
    assert!((report.overall.mean_accuracy - weighted).abs() < 1e-12);
    assert_eq!(per[0].category, Category::A);
}

#[test]
fn bad_samples_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "gt.pgm", &render_gt_mask(&scene(&[0.0])).unwrap());
    save(dir.path(), "small.pgm", &BinaryMask::empty(40, 40));
    fs::write(dir.path().join("junk.pgm"), b"not an image").unwrap();
    let m = manifest(dir.path(), &[",gt.pgm,gt.pgm,a", ",gt.pgm,small.pgm,a", ",gt.pgm,junk.pgm,b"]);
    let report =
        evaluate_dataset(&load_manifest(&m).unwrap(), &PipelineConfig::default(), &EvalOptions::default()).unwrap();
    assert_eq!(report.overall.sample_count, 1);
    let rows: Vec<usize> = report.failures.iter().map(|f| f.row).collect();
    assert_eq!(rows, [2, 3]);
    assert!(report.failures[0].reason.contains("dimensions"), "{}", report.failures[0].reason);
    assert!(report.failures[1].reason.contains("junk.pgm"), "{}", report.failures[1].reason);
}

#[test]
fn global_protocol_resizes_both_masks() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        size: (1024, 576),
        rows: vec![RowSpec::through(RowAngle::new(0.0), 400.0, 288.0, 6)],
        speckle_density: 0.0,
        seed: 0,
    };
    save(dir.path(), "gt.pgm", &render_gt_mask(&spec).unwrap());
    let m = manifest(dir.path(), &[",gt.pgm,gt.pgm,f"]);
    let options = EvalOptions { resize: Some(GLOBAL_SIZE), ..Default::default() };
    let report = evaluate_dataset(&load_manifest(&m).unwrap(), &PipelineConfig::default(), &options).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.overall.mean_angle_error, Some(0.0));
}

#[test]
fn baseline_source_reads_the_image_column() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(&[5.0, -9.0]);
    let spec = SceneSpec { rows: spec.rows.into_iter().map(|r| RowSpec { width: 5, ..r }).collect(), ..spec };
    save(dir.path(), "gt.pgm", &render_gt_mask(&spec).unwrap());
    fs::write(dir.path().join("rgb.ppm"), encode_rgb_ppm(&render_rgb(&spec, [60, 150, 50], [130, 95, 60]).unwrap()))
        .unwrap();
    let m = manifest(dir.path(), &["rgb.ppm,gt.pgm,,j", ",gt.pgm,,j"]);
    let baseline = croprow::baseline::BaselineConfig::default();
    let options = EvalOptions { source: PredictionSource::Baseline(baseline), ..Default::default() };
    let report = evaluate_dataset(&load_manifest(&m).unwrap(), &baseline.row_pipeline, &options).unwrap();
    assert_eq!(report.overall.sample_count, 1);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.baseline, Some(baseline));
    assert!(!report.notes.is_empty());
    assert!(report.overall.mean_angle_error.unwrap() <= 0.5);
}
