//! Classification report: per-class counts, accuracy and confusion matrix.

use std::fmt::Write as _;
use std::io::Write;

use rbd_core::BehaviorClass;

const N: usize = BehaviorClass::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; N]; N],
}

impl EvalReport {
    pub fn from_labels(truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "one prediction per sample");
        let mut confusion = [[0; N]; N];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        Self { confusion }
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.confusion[class].iter().sum()
    }

    pub fn total(&self) -> usize {
        (0..N).map(|c| self.class_count(c)).sum()
    }

    /// Correct predictions over all predictions.
    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..N).map(|c| self.confusion[c][c]).sum();
        ratio(correct, self.total())
    }

    pub fn class_accuracy(&self, class: usize) -> f64 {
        ratio(self.confusion[class][class], self.class_count(class))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:>8} {:>10}", "Behavior", "Samples", "Accuracy");
        for b in BehaviorClass::ALL {
            let c = b.label() as usize;
            let _ = writeln!(s, "{:<18} {:>8} {:>9.2}%", b.name(), self.class_count(c), 100.0 * self.class_accuracy(c));
        }
        let _ = writeln!(s, "{:<18} {:>8} {:>9.2}%", "All", self.total(), 100.0 * self.accuracy());
        let _ = writeln!(s, "\nConfusion matrix (rows: true, columns: predicted)");
        let _ = write!(s, "{:<18}", "");
        for b in BehaviorClass::ALL {
            let _ = write!(s, " {:>9}", b.key());
        }
        s.push('\n');
        for b in BehaviorClass::ALL {
            let _ = write!(s, "{:<18}", b.key());
            for n in self.confusion[b.label() as usize] {
                let _ = write!(s, " {n:>9}");
            }
            s.push('\n');
        }
        s
    }

    /// One row per class plus an `all` row: counts, accuracy and the
    /// confusion-matrix row.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["class".to_string(), "label".into(), "samples".into(), "correct".into(), "accuracy".into()];
        header.extend(BehaviorClass::ALL.iter().map(|b| format!("pred_{}", b.key())));
        w.write_record(&header)?;
        for b in BehaviorClass::ALL {
            let c = b.label() as usize;
            let mut row = vec![
                b.key().to_string(),
                c.to_string(),
                self.class_count(c).to_string(),
                self.confusion[c][c].to_string(),
                format!("{:.6}", self.class_accuracy(c)),
            ];
            row.extend(self.confusion[c].iter().map(|n| n.to_string()));
            w.write_record(&row)?;
        }
        let correct: usize = (0..N).map(|c| self.confusion[c][c]).sum();
        let mut row = vec!["all".to_string(), String::new(), self.total().to_string(), correct.to_string(), format!("{:.6}", self.accuracy())];
        row.extend((0..N).map(|p| (0..N).map(|t| self.confusion[t][p]).sum::<usize>().to_string()));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}
