use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[truth][prediction]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Input("confusion matrix rows must form a square".into()));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.concat(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Samples per true class.
    pub fn supports(&self) -> Vec<u64> {
        (0..self.k).map(|t| (0..self.k).map(|p| self.get(t, p)).sum()).collect()
    }

    /// Samples per predicted class.
    pub fn predicted(&self) -> Vec<u64> {
        (0..self.k).map(|p| (0..self.k).map(|t| self.get(t, p)).sum()).collect()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::Input(format!(
                "cannot add {0}x{0} and {1}x{1} confusion matrices",
                self.k, other.k
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Aligned text grid with the given class titles on both axes.
    pub fn render(&self, titles: &[&str]) -> String {
        let width = titles
            .iter()
            .map(|t| t.len())
            .chain(self.counts.iter().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(5);
        let mut s = format!("{:<width$}", "true \\ pred");
        for t in titles {
            s.push_str(&format!("  {t:>width$}"));
        }
        s.push('\n');
        for (i, row) in self.rows().iter().enumerate() {
            s.push_str(&format!("{:<width$}", titles.get(i).copied().unwrap_or("?")));
            for c in row {
                s.push_str(&format!("  {c:>width$}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Input(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Input(format!("label pair ({t}, {p}) outside 0..{k}")));
        }
        cm.counts[t * k + p] += 1;
    }
    Ok(cm)
}
