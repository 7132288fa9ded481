use std::fmt::Write as _;

use super::metrics::{ConfusionMatrix, MetricsReport};
use super::{CrossDbOutcome, SingleDbOutcome};

fn per_class_table(out: &mut String, report: &MetricsReport) {
    let _ = writeln!(
        out,
        "{:<8} {:>8} {:>9} {:>9} {:>9} {:>9}",
        "class", "support", "predicted", "precision", "recall", "f1"
    );
    for m in &report.per_class {
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>9} {:>9.4} {:>9.4} {:>9.4}",
            m.class.name(),
            m.support,
            m.predicted,
            m.precision,
            m.recall,
            m.f1
        );
    }
    let _ = writeln!(
        out,
        "overall accuracy {:.4} ({} beats)",
        report.accuracy, report.total
    );
}

fn confusion_table(out: &mut String, m: &ConfusionMatrix) {
    let _ = writeln!(out, "confusion (rows actual, columns predicted)");
    let _ = write!(out, "{:<8}", "");
    for c in &m.classes {
        let _ = write!(out, " {:>7}", c.name());
    }
    let _ = writeln!(out, " {:>7}", "total");
    for (i, c) in m.classes.iter().enumerate() {
        let _ = write!(out, "{:<8}", c.name());
        for v in &m.counts[i] {
            let _ = write!(out, " {v:>7}");
        }
        let _ = writeln!(out, " {:>7}", m.row_sum(i));
    }
}

pub fn render_single_text(o: &SingleDbOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} on {} at {} Hz: {} train / {} test beats",
        o.model.kind(),
        o.config.database.name(),
        o.rate_hz,
        o.n_train,
        o.n_test
    );
    for r in &o.records {
        let _ = writeln!(
            s,
            "  record {:<8} {:>6} beats {:>4} skipped",
            r.record, r.beats, r.skipped
        );
    }
    per_class_table(&mut s, &o.report);
    confusion_table(&mut s, &o.confusion);
    s
}

/// Actual-versus-predicted counts per class, then the full confusion matrix.
pub fn render_cross_text(o: &CrossDbOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} trained on {} ({} beats), tested on {} ({} beats) at {} Hz",
        o.model.kind(),
        o.train_config.database.name(),
        o.n_train,
        o.test_config.database.name(),
        o.n_test,
        o.rate_hz
    );
    let _ = writeln!(s, "{:<8} {:>8} {:>15}", "class", "actual", "predicted same");
    for (i, c) in o.confusion.classes.iter().enumerate() {
        if o.confusion.row_sum(i) > 0 {
            let _ = writeln!(
                s,
                "{:<8} {:>8} {:>15}",
                c.name(),
                o.confusion.row_sum(i),
                o.confusion.tp(i)
            );
        }
    }
    per_class_table(&mut s, &o.report);
    confusion_table(&mut s, &o.confusion);
    s
}

/// `class,support,precision,recall,f1` rows, then an `overall_accuracy` footer.
pub fn render_csv(report: &MetricsReport) -> String {
    let mut s = String::from("class,support,precision,recall,f1\n");
    for m in &report.per_class {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6}",
            m.class.name(),
            m.support,
            m.precision,
            m.recall,
            m.f1
        );
    }
    let _ = writeln!(
        s,
        "overall_accuracy,{},{:.6},,",
        report.total, report.accuracy
    );
    s
}
