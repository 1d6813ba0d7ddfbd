//! CSV outputs. Every writer returns the file contents so that callers
//! and tests can compare bytes directly.

use wavemat_core::experiment::{ExperimentResult, ResultRow};
use wavemat_core::metrics::{ConfusionCounts, IouReport};
use wavemat_core::{ClassId, MaterialClass};

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// `iteration,loss` per line, iterations counted from 1, no header.
pub fn loss_log(losses: &[f64]) -> String {
    losses
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{},{l}\n", i + 1))
        .collect()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    csv_text(
        &["experiment", "model", "angles", "miou"],
        rows.iter().map(|r| {
            vec![
                r.experiment.as_str().into(),
                r.model.as_str().into(),
                r.angles.as_str().into(),
                r.miou.to_string(),
            ]
        }),
    )
}

fn class_fields(counts: &ConfusionCounts, report: &IouReport, classes: &[MaterialClass], i: usize) -> Vec<String> {
    let id = ClassId(i as u16);
    let name = classes.get(i).map_or_else(|| i.to_string(), |c| c.name.clone());
    vec![
        i.to_string(),
        name,
        counts.tp[i].to_string(),
        counts.fp[i].to_string(),
        counts.fn_[i].to_string(),
        report.iou(id).map_or_else(String::new, |v| v.to_string()),
    ]
}

/// One row per class; the iou column is empty for classes that never
/// occur in either predictions or truth.
pub fn per_class_csv(counts: &ConfusionCounts, report: &IouReport, classes: &[MaterialClass]) -> String {
    csv_text(
        &["class_id", "class_name", "tp", "fp", "fn", "iou"],
        (0..counts.n_classes()).map(|i| class_fields(counts, report, classes, i)),
    )
}

pub fn experiment_classes_csv(results: &[ExperimentResult]) -> String {
    csv_text(
        &["experiment", "model", "angles", "class_id", "class_name", "tp", "fp", "fn", "iou"],
        results.iter().flat_map(|r| {
            (0..r.counts.n_classes()).map(move |i| {
                let mut row = vec![
                    r.row.experiment.as_str().to_string(),
                    r.row.model.as_str().to_string(),
                    r.row.angles.as_str().to_string(),
                ];
                row.extend(class_fields(&r.counts, &r.report, &r.class_table, i));
                row
            })
        }),
    )
}

pub fn importance_csv(importance: &[(usize, f64)]) -> String {
    csv_text(
        &["index", "importance"],
        importance.iter().map(|(i, v)| vec![i.to_string(), v.to_string()]),
    )
}

/// `index` followed by one column of mean amplitudes per class.
pub fn mean_waveforms_csv(means: &[(MaterialClass, Vec<f64>)]) -> String {
    let mut header = vec!["index"];
    header.extend(means.iter().map(|(c, _)| c.name.as_str()));
    let len = means.first().map_or(0, |(_, w)| w.len());
    csv_text(
        &header,
        (0..len).map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(means.iter().map(|(_, w)| w[i].to_string()));
            row
        }),
    )
}

pub fn ablation_csv(rows: &[(u64, f64, f64)]) -> String {
    csv_text(
        &["seed", "without_material", "with_material", "delta"],
        rows.iter()
            .map(|(s, a, b)| vec![s.to_string(), a.to_string(), b.to_string(), (b - a).to_string()]),
    )
}

pub fn summary_csv(split: &str, samples: usize, miou: f64) -> String {
    csv_text(
        &["split", "samples", "miou"],
        [vec![split.to_string(), samples.to_string(), miou.to_string()]],
    )
}
