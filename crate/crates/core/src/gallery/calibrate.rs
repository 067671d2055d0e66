use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{l2_unchecked, Embedding, TypeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 2 distinct classes, got {0}")]
    TooFewClasses(usize),
    #[error("embedding for class {label}: {source}")]
    Dimension { label: String, source: TypeError },
}

/// Mean over classes of the distance from each class centroid to its nearest
/// other class centroid.
///
/// Classes are visited in label order, so the result does not depend on the
/// order of `labeled` beyond the order of embeddings within one class.
pub fn calibrate_th_emb<L>(labeled: &[(L, Embedding)]) -> Result<f64, CalibrationError>
where
    L: Ord + Clone + std::fmt::Debug,
{
    let mut classes: BTreeMap<&L, Vec<&Embedding>> = BTreeMap::new();
    for (label, e) in labeled {
        classes.entry(label).or_default().push(e);
    }
    if classes.len() < 2 {
        return Err(CalibrationError::TooFewClasses(classes.len()));
    }
    let dim = labeled[0].1.dim();

    let mut centroids = Vec::with_capacity(classes.len());
    for (label, members) in &classes {
        let mut sum = vec![0.0; dim];
        for e in members {
            e.check_dim(dim).map_err(|source| CalibrationError::Dimension {
                label: format!("{label:?}"),
                source,
            })?;
            for (acc, v) in sum.iter_mut().zip(e.as_slice()) {
                *acc += v;
            }
        }
        let n = members.len() as f64;
        sum.iter_mut().for_each(|v| *v /= n);
        centroids.push(sum);
    }

    let mut total = 0.0;
    for (i, ci) in centroids.iter().enumerate() {
        let nearest = centroids
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, cj)| l2_unchecked(ci, cj))
            .fold(f64::INFINITY, f64::min);
        total += nearest;
    }
    Ok(total / centroids.len() as f64)
}
