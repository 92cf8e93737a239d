//! Confusion matrices, accuracy / balanced accuracy / per-class P, R, F1,
//! and text and TSV reports.
//!
//! Balanced accuracy is the unweighted mean of per-class recalls. Decoding is
//! argmax with ties going to the lower class index. Undefined ratios (zero
//! denominator) are reported as 0 and flagged.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{DieDat, MaskedSample, PosClass};
use crate::model::{Model, Prediction};
use crate::tensor::argmax;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("a `{arch}` checkpoint has no POS head; use --task diedat")]
    Capability { arch: String },
    #[error("unknown task `{0}` (expected diedat, pos or both)")]
    UnknownTask(String),
    #[error("no samples to evaluate")]
    Empty,
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub classes: Vec<String>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        assert_eq!(names.len(), self.k(), "one name per class");
        self.classes = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }
}

/// Counts (truth, prediction) pairs. Classes are named by index until
/// [`ConfusionMatrix::with_names`] is applied.
///
/// Panics when the slices differ in length or a label is `>= k`.
pub fn confusion(predictions: &[usize], truths: &[usize], k: usize) -> ConfusionMatrix {
    assert_eq!(predictions.len(), truths.len(), "predictions and truths differ in length");
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in predictions.iter().zip(truths) {
        assert!(p < k && t < k, "label outside 0..{k}");
        counts[t][p] += 1;
    }
    ConfusionMatrix { counts, classes: (0..k).map(|c| c.to_string()).collect() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is this one.
    pub support: u64,
    /// Set when precision, recall or F1 had a zero denominator.
    pub undefined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Panics on an empty matrix.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let total = cm.total();
    assert!(total > 0, "metrics of an empty confusion matrix");
    let k = cm.k();
    let diag: u64 = (0..k).map(|c| cm.counts[c][c]).sum();
    let mut classes = Vec::with_capacity(k);
    for c in 0..k {
        let row: u64 = cm.counts[c].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[c]).sum();
        let (recall, r_undef) = ratio(cm.counts[c][c], row);
        let (precision, p_undef) = ratio(cm.counts[c][c], col);
        let (f1, f_undef) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        classes.push(ClassMetrics {
            name: cm.classes[c].clone(),
            precision,
            recall,
            f1,
            support: row,
            undefined: r_undef || p_undef || f_undef,
        });
    }
    let balanced_accuracy = classes.iter().map(|c| c.recall).sum::<f64>() / k as f64;
    MetricsReport { accuracy: diag as f64 / total as f64, balanced_accuracy, classes, total }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    DieDat,
    Pos,
    Both,
}

impl FromStr for Task {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diedat" => Ok(Task::DieDat),
            "pos" => Ok(Task::Pos),
            "both" => Ok(Task::Both),
            _ => Err(EvalError::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub diedat: Option<MetricsReport>,
    pub pos: Option<MetricsReport>,
    /// Samples left out of the POS metrics for lack of a POS label.
    pub pos_unlabeled: usize,
}

/// Evaluation-mode predictions for every sample, in order.
pub fn predictions(model: &Model, samples: &[MaskedSample]) -> Vec<Prediction> {
    samples.par_iter().map(|s| model.predict(&s.window_tokens)).collect()
}

/// Die/dat confusion matrix of a model over `samples`.
pub fn diedat_confusion(model: &Model, samples: &[MaskedSample]) -> ConfusionMatrix {
    diedat_matrix(&predictions(model, samples), samples)
}

fn diedat_matrix(preds: &[Prediction], samples: &[MaskedSample]) -> ConfusionMatrix {
    let p: Vec<usize> = preds.iter().map(|p| argmax(&p.diedat)).collect();
    let t: Vec<usize> = samples.iter().map(|s| s.target_label.index()).collect();
    confusion(&p, &t, 2).with_names(&[DieDat::Dat.as_str(), DieDat::Die.as_str()])
}

pub fn evaluate(model: &Model, samples: &[MaskedSample], task: Task) -> Result<Evaluation, EvalError> {
    if task != Task::DieDat && !model.arch().is_multitask() {
        return Err(EvalError::Capability { arch: model.arch().to_string() });
    }
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let preds = predictions(model, samples);
    let mut out = Evaluation { diedat: None, pos: None, pos_unlabeled: 0 };
    if task != Task::Pos {
        out.diedat = Some(metrics(&diedat_matrix(&preds, samples)));
    }
    if task != Task::DieDat {
        let (mut p, mut t) = (Vec::new(), Vec::new());
        for (pred, s) in preds.iter().zip(samples) {
            match s.pos_label {
                Some(label) => {
                    p.push(argmax(pred.pos.as_ref().expect("multitask prediction has POS")));
                    t.push(label.index());
                }
                None => out.pos_unlabeled += 1,
            }
        }
        if !t.is_empty() {
            let names = PosClass::ALL.map(PosClass::short);
            out.pos = Some(metrics(&confusion(&p, &t, 3).with_names(&names)));
        }
    }
    Ok(out)
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Aligned plain-text table, one block per titled report. Percentages with
/// two decimals; undefined per-class values carry a `*`.
pub fn render_text(reports: &[(&str, &MetricsReport)]) -> String {
    let header = ["", "Accuracy", "Balanced accuracy", "Precision", "Recall", "F1"];
    let mut rows: Vec<[String; 6]> = Vec::new();
    let mut any_undefined = false;
    for (title, r) in reports {
        rows.push([
            title.to_string(),
            pct(r.accuracy),
            pct(r.balanced_accuracy),
            String::new(),
            String::new(),
            String::new(),
        ]);
        for c in &r.classes {
            let mark = if c.undefined { "*" } else { "" };
            any_undefined |= c.undefined;
            rows.push([
                format!("  {}", c.name),
                String::new(),
                String::new(),
                format!("{}{mark}", pct(c.precision)),
                format!("{}{mark}", pct(c.recall)),
                format!("{}{mark}", pct(c.f1)),
            ]);
        }
    }
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            let _ = write!(s, " | {cell:>w$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-|-"));
    out.push('\n');
    for row in &rows {
        line(&mut out, &row.each_ref().map(String::as_str));
    }
    if any_undefined {
        out.push_str("* zero denominator, reported as 0\n");
    }
    out
}

/// TSV with header `task class accuracy balanced_accuracy precision recall
/// f1 support undefined`; the per-task summary row has class `all`.
pub fn render_tsv(reports: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::from("task\tclass\taccuracy\tbalanced_accuracy\tprecision\trecall\tf1\tsupport\tundefined\n");
    for (title, r) in reports {
        let _ = writeln!(out, "{title}\tall\t{}\t{}\t\t\t\t{}\t", pct(r.accuracy), pct(r.balanced_accuracy), r.total);
        for c in &r.classes {
            let _ = writeln!(
                out,
                "{title}\t{}\t\t\t{}\t{}\t{}\t{}\t{}",
                c.name,
                pct(c.precision),
                pct(c.recall),
                pct(c.f1),
                c.support,
                c.undefined
            );
        }
    }
    out
}

impl Evaluation {
    pub fn reports(&self) -> Vec<(&'static str, &MetricsReport)> {
        let mut v = Vec::new();
        if let Some(r) = &self.diedat {
            v.push(("die/dat", r));
        }
        if let Some(r) = &self.pos {
            v.push(("POS", r));
        }
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = render_text(&self.reports());
        if self.pos_unlabeled > 0 {
            let _ = writeln!(s, "{} samples without POS label left out of POS metrics", self.pos_unlabeled);
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        render_tsv(&self.reports())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_case() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2);
        assert_eq!(cm.counts, vec![vec![1, 0], vec![1, 2]]);
        let m = metrics(&cm);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.classes[0].recall, 1.0);
        assert!((m.classes[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.balanced_accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.classes[0].precision, 0.5);
        assert_eq!(m.classes[1].precision, 1.0);
        assert!((m.classes[0].f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_diagonal() {
        let cm = confusion(&[], &[], 3);
        assert_eq!(cm.total(), 0);
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3);
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        let m = metrics(&cm);
        assert_eq!((m.accuracy, m.balanced_accuracy), (1.0, 1.0));
        assert!(m.classes.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0 && !c.undefined));
    }

    #[test]
    #[should_panic]
    fn length_mismatch_panics() {
        confusion(&[0, 1], &[0], 2);
    }

    #[test]
    #[should_panic]
    fn empty_metrics_panics() {
        metrics(&confusion(&[], &[], 2));
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics(&confusion(&[0, 0], &[0, 0], 2));
        assert_eq!(m.classes[1].precision, 0.0);
        assert_eq!(m.classes[1].recall, 0.0);
        assert!(m.classes[1].undefined);
        assert!(!m.classes[0].undefined);
        assert_eq!(m.balanced_accuracy, 0.5);
        assert!(render_text(&[("t", &m)]).contains("* zero denominator"));
    }

    #[test]
    fn text_report_layout() {
        let m = metrics(&confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).with_names(&["dat", "die"]));
        let text = render_text(&[("die/dat", &m)]);
        let first = text.lines().next().unwrap();
        let cols: Vec<&str> = first.split('|').map(str::trim).collect();
        assert_eq!(cols, ["", "Accuracy", "Balanced accuracy", "Precision", "Recall", "F1"]);
        assert!(text.contains("75.00"));
        assert!(text.contains("83.33"));
        assert!(text.lines().any(|l| l.trim_start().starts_with("dat")));
        let tsv = render_tsv(&[("die/dat", &m)]);
        assert_eq!(tsv.lines().count(), 4);
        assert!(tsv.lines().nth(1).unwrap().starts_with("die/dat\tall\t75.00\t83.33"));
    }

    fn sample(tokens: &[&str], label: DieDat, pos: Option<PosClass>) -> MaskedSample {
        MaskedSample {
            window_tokens: tokens.iter().map(|t| t.to_string()).collect(),
            target_label: label,
            pos_label: pos,
            provenance: None,
        }
    }

    fn uniform_binary() -> Model {
        use crate::embedding::Vocab;
        use crate::model::{BinaryConfig, BinaryModel, EmbeddingInit};
        let cfg = BinaryConfig { emb_dim: 3, hidden: 2, ..Default::default() };
        let mut m = BinaryModel::new(cfg, EmbeddingInit::Random(Vocab::from_tokens(["a", "b"])), 0).unwrap();
        crate::model::tests::zero_params(&mut m.store);
        Model::Binary(m)
    }

    #[test]
    fn uniform_model_predicts_dat_everywhere() {
        use crate::corpus::PREDICT;
        // 3 dat, 5 die: the tie rule sends every prediction to dat.
        let mut samples = vec![sample(&["a", PREDICT], DieDat::Dat, None); 3];
        samples.extend(vec![sample(&[PREDICT, "b"], DieDat::Die, None); 5]);
        let model = uniform_binary();
        let e = evaluate(&model, &samples, Task::DieDat).unwrap();
        let r = e.diedat.as_ref().unwrap();
        assert_eq!(r.accuracy, 3.0 / 8.0);
        assert_eq!(r.balanced_accuracy, 0.5);
        assert_eq!(e, evaluate(&model, &samples, Task::DieDat).unwrap());
    }

    #[test]
    fn pos_on_binary_is_a_capability_error() {
        let samples = vec![sample(&["a", crate::corpus::PREDICT], DieDat::Dat, None)];
        let model = uniform_binary();
        for task in [Task::Pos, Task::Both] {
            assert!(matches!(evaluate(&model, &samples, task), Err(EvalError::Capability { .. })));
        }
        assert_eq!(evaluate(&model, &[], Task::DieDat), Err(EvalError::Empty));
    }

    #[test]
    fn task_names() {
        assert_eq!("pos".parse::<Task>().unwrap(), Task::Pos);
        assert!("all".parse::<Task>().is_err());
    }

    proptest! {
        #[test]
        fn accuracy_is_frequency_weighted_recall(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..200)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let m = metrics(&confusion(&p, &t, 3));
            let weighted: f64 = m.classes.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / m.total as f64;
            prop_assert!((weighted - m.accuracy).abs() < 1e-12);
            for c in &m.classes {
                prop_assert!((0.0..=1.0).contains(&c.f1));
                if c.precision + c.recall > 0.0 {
                    prop_assert!((c.f1 - 2.0 * c.precision * c.recall / (c.precision + c.recall)).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn order_does_not_matter(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..100), seed in 0u64..1000) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            crate::tensor::Rng::new(seed).shuffle(&mut shuffled);
            let (p2, t2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
            prop_assert_eq!(metrics(&confusion(&p, &t, 2)), metrics(&confusion(&p2, &t2, 2)));
        }
    }
}
