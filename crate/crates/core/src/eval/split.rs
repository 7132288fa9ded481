use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::BeatClass;
use crate::error::{Error, Result};

/// Row indices of the two partitions, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Rows of each class grouped in class order.
fn by_class(labels: &[BeatClass]) -> BTreeMap<BeatClass, Vec<usize>> {
    let mut groups: BTreeMap<BeatClass, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    groups
}

/// Seeded stratified split with `fraction` of the rows in train.
///
/// The train total is `round(n·fraction)`; it is shared between classes by
/// largest remainder. Every class with at least two rows keeps one row on
/// each side; a single-row class goes to train.
pub fn stratified_split(labels: &[BeatClass], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let groups = by_class(labels);
    let target = (labels.len() as f64 * fraction).round() as usize;

    let mut quota: Vec<usize> = Vec::with_capacity(groups.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(groups.len());
    for (g, rows) in groups.values().enumerate() {
        let exact = rows.len() as f64 * fraction;
        quota.push(exact.floor() as usize);
        remainders.push((exact - exact.floor(), g));
    }
    let assigned: usize = quota.iter().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, g) in remainders.iter().take(target.saturating_sub(assigned)) {
        quota[g] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(labels.len() - target.min(labels.len()));
    for ((class, rows), q) in groups.iter().zip(quota) {
        let n = rows.len();
        let q = if n == 1 {
            log::warn!("class {class} has a single sample; it is placed in the training set");
            1
        } else {
            q.clamp(1, n - 1)
        };
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..q]);
        test.extend_from_slice(&rows[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Seeded stratified fold assignment: `result[i]` is the fold of row `i`.
pub fn stratified_folds(labels: &[BeatClass], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for rows in by_class(labels).values() {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        for (k, &r) in rows.iter().enumerate() {
            assignment[r] = (offset + k) % folds;
        }
        // continue the round-robin so small classes do not all land in fold 0
        offset = (offset + rows.len()) % folds;
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BeatClass::*;

    #[test]
    fn thirteen_thousand_at_seventy_percent() {
        let sizes = [2239usize, 2490, 1800, 2078, 992, 1226, 388, 1787];
        let labels: Vec<BeatClass> = BeatClass::MITBIH
            .iter()
            .zip(sizes)
            .flat_map(|(&c, n)| std::iter::repeat_n(c, n))
            .collect();
        assert_eq!(labels.len(), 13000);
        let s = stratified_split(&labels, 0.7, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (9100, 3900));
    }

    #[test]
    fn half_split_is_balanced() {
        let labels = [vec![Normal; 5], vec![Pvc; 5]].concat();
        let s = stratified_split(&labels, 0.5, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (5, 5));
        for part in [&s.train, &s.test] {
            assert!(part.iter().any(|&i| labels[i] == Normal));
            assert!(part.iter().any(|&i| labels[i] == Pvc));
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let labels: Vec<BeatClass> = (0..200)
            .map(|i| if i % 3 == 0 { Apc } else { Normal })
            .collect();
        assert_eq!(
            stratified_split(&labels, 0.7, 5).unwrap(),
            stratified_split(&labels, 0.7, 5).unwrap()
        );
        assert_ne!(
            stratified_split(&labels, 0.7, 5).unwrap(),
            stratified_split(&labels, 0.7, 6).unwrap()
        );
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let labels = [Normal, Normal, Normal, Pvc];
        let s = stratified_split(&labels, 0.7, 0).unwrap();
        assert!(s.train.contains(&3));
    }

    #[test]
    fn bad_fraction() {
        assert!(stratified_split(&[Normal], 1.0, 0).is_err());
        assert!(stratified_split(&[Normal], 0.0, 0).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let labels = [vec![Normal; 10], vec![Lbbb; 5]].concat();
        let f = stratified_folds(&labels, 5, 3).unwrap();
        for k in 0..5 {
            assert_eq!(f[..10].iter().filter(|&&x| x == k).count(), 2);
            assert_eq!(f[10..].iter().filter(|&&x| x == k).count(), 1);
        }
    }
}
