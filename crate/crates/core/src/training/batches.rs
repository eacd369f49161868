use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};

/// One optimisation step's worth of pairs. Joint pairs are
/// `(theta[joint[k]], x[joint[k]])`; marginal pairs reuse the same parameters
/// against `x[marginal_x[k]]`, with `marginal_x[k] != joint[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub joint: Vec<usize>,
    pub marginal_x: Vec<usize>,
}

/// Uniform permutation of `0..n` without fixed points (identity for `n < 2`).
pub fn random_derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    if n < 2 {
        return p;
    }
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Splits a fresh permutation of `indices` into batches of `batch_size / 2`
/// joint pairs. Marginal observables come from a derangement within the
/// batch; a trailing batch of one borrows the observable of another sample.
pub fn make_batches<R: Rng + ?Sized>(indices: &[usize], batch_size: usize, rng: &mut R) -> Result<Vec<Batch>> {
    if batch_size < 2 || batch_size % 2 != 0 {
        return Err(invalid("batch size must be even and >= 2"));
    }
    if indices.len() < batch_size {
        return Err(invalid(format!("{} samples cannot fill a batch of {batch_size}", indices.len())));
    }
    let mut perm = indices.to_vec();
    perm.shuffle(rng);
    let half = batch_size / 2;
    let mut out = Vec::with_capacity(perm.len().div_ceil(half));
    for chunk in perm.chunks(half) {
        let marginal_x = if chunk.len() == 1 {
            let mut other = chunk[0];
            while other == chunk[0] {
                other = indices[rng.random_range(0..indices.len())];
            }
            vec![other]
        } else {
            random_derangement(chunk.len(), rng).into_iter().map(|k| chunk[k]).collect()
        };
        out.push(Batch { joint: chunk.to_vec(), marginal_x });
    }
    Ok(out)
}
