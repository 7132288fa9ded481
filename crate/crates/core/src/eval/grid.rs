use rayon::prelude::*;

use super::split::stratified_folds;
use crate::classify::{train, ClassifierConfig, SvmConfig};
use crate::dataio::BeatClass;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    /// Correct cross-validated predictions out of `total`.
    pub correct: usize,
    pub total: usize,
}

impl GridPoint {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: SvmConfig,
    /// Sorted by C then gamma.
    pub points: Vec<GridPoint>,
}

/// k-fold cross-validated SVM accuracy over `c_grid × gamma_grid`.
///
/// The best point maximises accuracy; ties go to the smaller C, then the smaller gamma.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_svm<T: Scalar>(
    x: &Matrix<T>,
    y: &[BeatClass],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    base: &SvmConfig,
    standardize: bool,
    seed: u64,
) -> Result<GridResult> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::Config(
            "grid search needs non-empty C and gamma grids".into(),
        ));
    }
    let assignment = stratified_folds(y, folds, seed)?;
    let mut grid: Vec<(f64, f64)> = c_grid
        .iter()
        .flat_map(|&c| gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let fold_scores: Vec<Result<(usize, usize, usize)>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (c, gamma) = grid[g];
            let train_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
            let test_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
            if test_rows.is_empty() {
                return Ok((g, 0, 0));
            }
            let ty: Vec<BeatClass> = train_rows.iter().map(|&i| y[i]).collect();
            let cfg = ClassifierConfig::Svm(SvmConfig { c, gamma, ..*base });
            let model = train(&x.select_rows(&train_rows), &ty, &cfg, standardize)?;
            let pred = model.predict(&x.select_rows(&test_rows))?;
            let correct = pred
                .iter()
                .zip(&test_rows)
                .filter(|(p, &i)| **p == y[i])
                .count();
            Ok((g, correct, test_rows.len()))
        })
        .collect();

    let mut points: Vec<GridPoint> = grid
        .iter()
        .map(|&(c, gamma)| GridPoint {
            c,
            gamma,
            correct: 0,
            total: 0,
        })
        .collect();
    for r in fold_scores {
        let (g, correct, total) = r?;
        points[g].correct += correct;
        points[g].total += total;
    }
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        // compare correct/total by cross-multiplication to keep ties exact
        if p.correct * points[best].total > points[best].correct * p.total {
            best = i;
        }
    }
    Ok(GridResult {
        best: SvmConfig {
            c: points[best].c,
            gamma: points[best].gamma,
            ..*base
        },
        points,
    })
}
