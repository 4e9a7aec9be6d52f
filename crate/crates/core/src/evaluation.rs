//! Level-wise labels and external clustering metrics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{ln, sqrt};
use crate::{Error, Result};

/// One cluster id per observation.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Labeling {
    pub labels: Vec<u64>,
}

impl Labeling {
    pub fn new(labels: Vec<u64>) -> Self {
        Labeling { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl From<Vec<u64>> for Labeling {
    fn from(labels: Vec<u64>) -> Self {
        Labeling { labels }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelMetrics {
    pub level: usize,
    pub purity: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f_measure: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelReport {
    pub levels: Vec<LevelMetrics>,
}

/// Labels at `level` (1 is the root). Paths shorter than the level keep the
/// label of their last node.
pub fn level_labels<P: AsRef<[u64]>>(paths: &[P], level: usize, max_level: usize) -> Result<Labeling> {
    if level == 0 || level > max_level {
        return Err(Error::LevelOutOfRange { level, max_level });
    }
    let mut labels = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let last = *p.last().ok_or(Error::EmptyPath)?;
        labels.push(p.get(level - 1).copied().unwrap_or(last));
    }
    Ok(Labeling { labels })
}

struct Contingency {
    n: f64,
    cells: BTreeMap<(u64, u64), f64>,
    pred: BTreeMap<u64, f64>,
    truth: BTreeMap<u64, f64>,
}

impl Contingency {
    fn new(pred: &Labeling, truth: &Labeling) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
        }
        let mut c = Contingency {
            n: pred.len() as f64,
            cells: BTreeMap::new(),
            pred: BTreeMap::new(),
            truth: BTreeMap::new(),
        };
        for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
            *c.cells.entry((p, t)).or_default() += 1.0;
            *c.pred.entry(p).or_default() += 1.0;
            *c.truth.entry(t).or_default() += 1.0;
        }
        Ok(c)
    }
}

fn entropy(counts: &BTreeMap<u64, f64>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c / n;
            -p * ln(p)
        })
        .sum()
}

fn pairs(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

pub fn purity(pred: &Labeling, truth: &Labeling) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut best: BTreeMap<u64, f64> = BTreeMap::new();
    for (&(p, _), &count) in &c.cells {
        let b = best.entry(p).or_default();
        if count > *b {
            *b = count;
        }
    }
    Ok(best.values().sum::<f64>() / c.n)
}

/// Mutual information over the geometric mean of the two entropies. Two
/// single-cluster labelings score 1; exactly one scores 0.
pub fn nmi(pred: &Labeling, truth: &Labeling) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    let hp = entropy(&c.pred, c.n);
    let ht = entropy(&c.truth, c.n);
    let zero = |h: f64| h <= 1e-15;
    match (zero(hp), zero(ht)) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mut mi = 0.0;
    for (&(p, t), &count) in &c.cells {
        mi += (count / c.n) * ln(count * c.n / (c.pred[&p] * c.truth[&t]));
    }
    Ok((mi / sqrt(hp * ht)).clamp(0.0, 1.0))
}

/// Adjusted Rand index. Identical trivial partitions (where the maximum
/// and expected index coincide) score 1.
pub fn ari(pred: &Labeling, truth: &Labeling) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    let index: f64 = c.cells.values().map(|&x| pairs(x)).sum();
    let sum_pred: f64 = c.pred.values().map(|&x| pairs(x)).sum();
    let sum_truth: f64 = c.truth.values().map(|&x| pairs(x)).sum();
    let total = pairs(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_pred * sum_truth / total;
    let max = 0.5 * (sum_pred + sum_truth);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Class-weighted best-match F1.
pub fn f_measure(pred: &Labeling, truth: &Labeling) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut best: BTreeMap<u64, f64> = BTreeMap::new();
    for (&(p, t), &count) in &c.cells {
        let precision = count / c.pred[&p];
        let recall = count / c.truth[&t];
        let f = 2.0 * precision * recall / (precision + recall);
        let b = best.entry(t).or_default();
        if f > *b {
            *b = f;
        }
    }
    Ok(best.iter().map(|(t, f)| c.truth[t] / c.n * f).sum())
}

pub fn level_metrics(pred: &Labeling, truth: &Labeling, level: usize) -> Result<LevelMetrics> {
    Ok(LevelMetrics {
        level,
        purity: purity(pred, truth)?,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        f_measure: f_measure(pred, truth)?,
    })
}

/// Metrics at every level from 1 to `max_level`.
pub fn level_report<P: AsRef<[u64]>, Q: AsRef<[u64]>>(
    pred_paths: &[P],
    truth_paths: &[Q],
    max_level: usize,
) -> Result<LevelReport> {
    if pred_paths.len() != truth_paths.len() {
        return Err(Error::LengthMismatch { left: pred_paths.len(), right: truth_paths.len() });
    }
    let mut report = LevelReport::default();
    for level in 1..=max_level {
        let pred = level_labels(pred_paths, level, max_level)?;
        let truth = level_labels(truth_paths, level, max_level)?;
        report.levels.push(level_metrics(&pred, &truth, level)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::Rng;

    fn l(v: &[u64]) -> Labeling {
        Labeling::new(v.to_vec())
    }

    #[test]
    fn level_label_rules() {
        let paths = vec![vec![0, 1, 3], vec![0, 2], vec![0, 1, 4]];
        assert_eq!(level_labels(&paths, 1, 3).unwrap().labels, vec![0, 0, 0]);
        assert_eq!(level_labels(&paths, 2, 3).unwrap().labels, vec![1, 2, 1]);
        assert_eq!(level_labels(&paths, 3, 3).unwrap().labels, vec![3, 2, 4]);
        let short = vec![vec![0u64, 7]];
        assert_eq!(level_labels(&short, 5, 5).unwrap().labels, vec![7]);
        assert!(level_labels(&[Vec::<u64>::new()], 1, 2).is_err());
        assert!(level_labels(&paths, 0, 3).is_err());
        assert!(level_labels(&paths, 4, 3).is_err());
    }

    #[test]
    fn purity_cases() {
        assert_eq!(purity(&l(&[5, 5, 9, 9]), &l(&[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(purity(&l(&[0, 0, 0, 0]), &l(&[0, 0, 1, 1])).unwrap(), 0.5);
        assert_eq!(purity(&l(&[0, 0, 1, 1]), &l(&[0, 1, 1, 1])).unwrap(), 0.75);
        assert!(purity(&l(&[0]), &l(&[0, 1])).is_err());
    }

    #[test]
    fn nmi_cases() {
        assert!((nmi(&l(&[3, 3, 8, 8, 2]), &l(&[0, 0, 1, 1, 2])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&l(&[0, 0, 0, 0]), &l(&[0, 0, 1, 1])).unwrap(), 0.0);
        assert_eq!(nmi(&l(&[0, 0, 0]), &l(&[4, 4, 4])).unwrap(), 1.0);
        assert!(nmi(&l(&[0, 0, 1, 1]), &l(&[0, 1, 0, 1])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn ari_cases() {
        assert_eq!(ari(&l(&[0, 0, 1, 2]), &l(&[1, 1, 0, 2])).unwrap(), 1.0);
        assert!((ari(&l(&[0, 0, 1, 1]), &l(&[0, 1, 0, 1])).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ari_of_random_labelings_centres_on_zero() {
        let mut rng = Rng::new(11);
        let truth: Vec<u64> = (0..60).map(|i| i % 3).collect();
        let truth = l(&truth);
        let reps = 10_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let mut pred = truth.labels.clone();
            rng.shuffle(&mut pred);
            sum += ari(&l(&pred), &truth).unwrap();
        }
        assert!((sum / reps as f64).abs() < 0.02);
    }

    #[test]
    fn f_measure_cases() {
        assert_eq!(f_measure(&l(&[1, 1, 0, 0]), &l(&[0, 0, 1, 1])).unwrap(), 1.0);
        let f = f_measure(&l(&[0, 0, 0, 0]), &l(&[0, 0, 1, 1])).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn report_over_levels() {
        let paths = vec![vec![0u64, 1, 3], vec![0, 1, 4], vec![0, 2, 5], vec![0, 2, 6]];
        let r = level_report(&paths, &paths, 3).unwrap();
        assert_eq!(r.levels.len(), 3);
        let root = &r.levels[0];
        assert_eq!((root.purity, root.nmi, root.ari, root.f_measure), (1.0, 1.0, 1.0, 1.0));
        for m in &r.levels[1..] {
            assert_eq!((m.purity, m.ari, m.f_measure), (1.0, 1.0, 1.0));
            assert!((m.nmi - 1.0).abs() < 1e-12);
        }
        let one = level_report(&paths, &paths, 1).unwrap();
        assert_eq!(one.levels.len(), 1);
        assert_eq!(one.levels[0].purity, 1.0);

        // Level 2 of this pair is the 4-observation fixture used above.
        let pred = vec![vec![0u64, 10], vec![0, 10], vec![0, 11], vec![0, 11]];
        let truth = vec![vec![0u64, 20], vec![0, 21], vec![0, 20], vec![0, 21]];
        let m = &level_report(&pred, &truth, 2).unwrap().levels[1];
        assert_eq!(m.purity, 0.5);
        assert!(m.nmi.abs() < 1e-15);
        assert!((m.ari + 0.5).abs() < 1e-12);
        assert!((m.f_measure - 0.5).abs() < 1e-12);
        assert!(level_report(&pred, &truth[..3], 2).is_err());
    }
}
