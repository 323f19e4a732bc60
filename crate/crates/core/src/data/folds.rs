//! Stratified, unshuffled k-fold assignment and the train/val/test rotation.
//!
//! Within each class the samples keep their manifest order and are cut into
//! k contiguous segments. A class of n samples gets segments of ⌊n/k⌋, and
//! the `n mod k` leftover samples enlarge the segments listed first in that
//! class's placement order. The default placement orders reproduce the
//! published five-fold table: folds in natural order, except that
//! misalignment enlarges folds 1, 2, 3 and 5, leaving fold 4 short.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{ClassLabel, DatasetManifest};
use crate::error::{Error, Result};

/// For each class, the fold order in which remainder samples are handed out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemainderPlacement {
    pub per_class: [Vec<usize>; 3],
}

impl RemainderPlacement {
    /// Remainders go to the lowest-numbered folds for every class.
    pub fn front_loaded(k: usize) -> Self {
        let order: Vec<usize> = (0..k).collect();
        RemainderPlacement {
            per_class: [order.clone(), order.clone(), order],
        }
    }

    /// The observed five-fold layout: misalignment skips fold 4 (index 3).
    pub fn table_one() -> Self {
        RemainderPlacement {
            per_class: [vec![0, 1, 2, 3, 4], vec![0, 1, 2, 4, 3], vec![0, 1, 2, 3, 4]],
        }
    }

    pub fn default_for(k: usize) -> Self {
        if k == 5 {
            Self::table_one()
        } else {
            Self::front_loaded(k)
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        for (c, order) in self.per_class.iter().enumerate() {
            let mut seen = vec![false; k];
            for &f in order {
                if f >= k || seen[f] {
                    return Err(Error::Input(format!(
                        "remainder placement for class {c} is not a permutation of 0..{k}: {order:?}"
                    )));
                }
                seen[f] = true;
            }
            if order.len() != k {
                return Err(Error::Input(format!(
                    "remainder placement for class {c} lists {} folds, need {k}",
                    order.len()
                )));
            }
        }
        Ok(())
    }
}

/// Segment sizes for `n` samples over `k` folds given a placement order.
pub fn segment_sizes(n: usize, k: usize, placement: &[usize]) -> Vec<usize> {
    let mut sizes = vec![n / k; k];
    for &f in placement.iter().take(n % k) {
        sizes[f] += 1;
    }
    sizes
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    /// Fold of each manifest entry, in manifest order.
    assignment: Vec<usize>,
    labels: Vec<ClassLabel>,
    /// `counts[class][fold]`.
    counts: [Vec<usize>; 3],
}

impl FoldPlan {
    fn from_assignment(k: usize, assignment: Vec<usize>, labels: Vec<ClassLabel>) -> Self {
        let mut counts = [vec![0; k], vec![0; k], vec![0; k]];
        for (&f, l) in assignment.iter().zip(&labels) {
            counts[l.index()][f] += 1;
        }
        FoldPlan {
            k,
            assignment,
            labels,
            counts,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn counts(&self) -> &[Vec<usize>; 3] {
        &self.counts
    }

    pub fn label(&self, index: usize) -> ClassLabel {
        self.labels[index]
    }

    /// Manifest indices in `fold`, ascending.
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    /// Tab-separated plan file: a `# k=<k>` line, a column header, then
    /// `index, path, class, fold` per sample with 1-based folds.
    pub fn to_text(&self, manifest: &DatasetManifest) -> String {
        let mut s = format!("# k={}\nindex\tpath\tclass\tfold\n", self.k);
        for (i, r) in manifest.records().iter().enumerate() {
            writeln!(s, "{i}\t{}\t{}\t{}", r.path.display(), r.label, self.assignment[i] + 1).unwrap();
        }
        s
    }

    /// Reads a plan file and checks it against `manifest`.
    pub fn parse(text: &str, manifest: &DatasetManifest) -> Result<Self> {
        let mut lines = text.lines();
        let k: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("# k="))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Input("plan file must start with \"# k=<folds>\"".into()))?;
        if k < 2 {
            return Err(Error::Input(format!("plan declares k={k}")));
        }
        lines.next();
        let mut assignment = Vec::with_capacity(manifest.len());
        for (n, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let rec = manifest.records().get(n);
            match (cols.as_slice(), rec) {
                ([idx, path, class, fold], Some(rec))
                    if idx.parse() == Ok(n)
                        && Path::new(path) == rec.path
                        && *class == rec.label.name() =>
                {
                    let f: usize = fold
                        .parse()
                        .ok()
                        .filter(|f| (1..=k).contains(f))
                        .ok_or_else(|| Error::Input(format!("plan line {}: bad fold {fold:?}", n + 3)))?;
                    assignment.push(f - 1);
                }
                _ => {
                    return Err(Error::Input(format!(
                        "plan line {} does not match manifest entry {n}",
                        n + 3
                    )))
                }
            }
        }
        if assignment.len() != manifest.len() {
            return Err(Error::Input(format!(
                "plan covers {} samples, manifest has {}",
                assignment.len(),
                manifest.len()
            )));
        }
        let labels = manifest.records().iter().map(|r| r.label).collect();
        Ok(Self::from_assignment(k, assignment, labels))
    }

    pub fn save(&self, manifest: &DatasetManifest, path: &Path) -> Result<()> {
        fs::write(path, self.to_text(manifest)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, manifest: &DatasetManifest) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, manifest)
    }

    /// Per-class, per-fold count table with totals.
    pub fn summary_table(&self) -> String {
        let mut s = format!("{:<14}", "Class");
        for f in 1..=self.k {
            write!(s, "{f:>7}").unwrap();
        }
        writeln!(s, "{:>8}", "Total").unwrap();
        for c in ClassLabel::ALL {
            let row = &self.counts[c.index()];
            write!(s, "{:<14}", c.title()).unwrap();
            for n in row {
                write!(s, "{n:>7}").unwrap();
            }
            writeln!(s, "{:>8}", row.iter().sum::<usize>()).unwrap();
        }
        s
    }
}

pub fn stratified_ordered_kfold(manifest: &DatasetManifest, k: usize, placement: &RemainderPlacement) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Input(format!("need at least 2 folds, got {k}")));
    }
    if manifest.is_empty() {
        return Err(Error::Input("manifest is empty".into()));
    }
    placement.validate(k)?;
    let counts = manifest.class_counts();
    for c in ClassLabel::ALL {
        let n = counts[c.index()];
        if n < k {
            return Err(Error::Input(format!(
                "class {c} has {n} samples, fewer than {k} folds"
            )));
        }
    }
    // Running boundary per class: the sample with class ordinal `o` lands in
    // the first fold whose cumulative size exceeds `o`.
    let bounds: Vec<Vec<usize>> = ClassLabel::ALL
        .iter()
        .map(|c| {
            let sizes = segment_sizes(counts[c.index()], k, &placement.per_class[c.index()]);
            sizes
                .iter()
                .scan(0, |acc, &s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let assignment = manifest
        .records()
        .iter()
        .map(|r| {
            bounds[r.label.index()]
                .iter()
                .position(|&end| r.ordinal < end)
                .expect("ordinal below class total")
        })
        .collect();
    let labels = manifest.records().iter().map(|r| r.label).collect();
    Ok(FoldPlan::from_assignment(k, assignment, labels))
}

/// One rotation of the cross-validation: three training folds, one
/// validation fold, one test fold (for k = 5).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CvSplit {
    pub test_fold: usize,
    pub val_fold: usize,
    pub train_folds: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// For test fold `i` the validation fold is `(i + 1) mod k` and the rest
/// train.
pub fn make_cv_splits(plan: &FoldPlan) -> Vec<CvSplit> {
    let k = plan.k;
    (0..k)
        .map(|test_fold| {
            let val_fold = (test_fold + 1) % k;
            let train_folds: Vec<usize> = (0..k).filter(|&f| f != test_fold && f != val_fold).collect();
            let pick = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
                (0..plan.assignment.len()).filter(|&i| pred(plan.assignment[i])).collect()
            };
            CvSplit {
                test_fold,
                val_fold,
                train: pick(&|f| f != test_fold && f != val_fold),
                val: pick(&|f| f == val_fold),
                test: pick(&|f| f == test_fold),
                train_folds,
            }
        })
        .collect()
}
