use crate::diffnet::{bce_term, NodeId, Tape};
use crate::error::{invalid, Result};
use crate::scalar::Real;

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap()
}

/// Mean binary cross-entropy of logits against 0/1 labels.
pub fn bce_loss<T: Real>(logits: &[T], labels: &[T]) -> Result<T> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(invalid("bce_loss needs equally many logits and labels, at least one"));
    }
    Ok(mean(&logits.iter().zip(labels).map(|(&z, &y)| bce_term(z, y)).collect::<Vec<_>>()))
}

/// `B = E_joint[d] + E_marginal[d]` over a batch of classifier outputs.
pub fn balance_statistic<T: Real>(joint_probs: &[T], marginal_probs: &[T]) -> Result<T> {
    if joint_probs.is_empty() || marginal_probs.is_empty() {
        return Err(invalid("balance statistic needs joint and marginal outputs"));
    }
    Ok(mean(joint_probs) + mean(marginal_probs))
}

/// Cross-entropy over all pairs plus `lambda * (B - 1)^2`. With `lambda = 0`
/// the penalty is not evaluated at all.
pub fn bnre_loss<T: Real>(joint_logits: &[T], marginal_logits: &[T], lambda: T) -> Result<T> {
    if joint_logits.is_empty() || marginal_logits.is_empty() {
        return Err(invalid("loss needs joint and marginal logits"));
    }
    let (nj, nm) = (joint_logits.len(), marginal_logits.len());
    let total = T::from_usize(nj + nm).unwrap();
    let bce = (joint_logits.iter().map(|&z| bce_term(z, T::one())).sum::<T>()
        + marginal_logits.iter().map(|&z| bce_term(z, T::zero())).sum::<T>())
        / total;
    if lambda == T::zero() {
        return Ok(bce);
    }
    let pj: Vec<T> = joint_logits.iter().map(|&z| crate::scalar::sigmoid(z)).collect();
    let pm: Vec<T> = marginal_logits.iter().map(|&z| crate::scalar::sigmoid(z)).collect();
    let gap = balance_statistic(&pj, &pm)? - T::one();
    Ok(bce + lambda * gap * gap)
}

/// Same objective as [`bnre_loss`], recorded on a tape for differentiation.
pub fn bnre_loss_node<T: Real>(tape: &mut Tape<'_, T>, joint: NodeId, marginal: NodeId, lambda: T) -> Result<NodeId> {
    let nj = tape.value(joint).data.len();
    let nm = tape.value(marginal).data.len();
    if nj == 0 || nm == 0 {
        return Err(invalid("loss needs joint and marginal logits"));
    }
    let total = T::from_usize(nj + nm).unwrap();
    let bj = tape.bce_with_logits(joint, vec![T::one(); nj])?;
    let bj = tape.mean(bj);
    let bj = tape.scale(bj, T::from_usize(nj).unwrap() / total);
    let bm = tape.bce_with_logits(marginal, vec![T::zero(); nm])?;
    let bm = tape.mean(bm);
    let bm = tape.scale(bm, T::from_usize(nm).unwrap() / total);
    let bce = tape.add(bj, bm)?;
    if lambda == T::zero() {
        return Ok(bce);
    }
    let dj = tape.sigmoid(joint);
    let dj = tape.mean(dj);
    let dm = tape.sigmoid(marginal);
    let dm = tape.mean(dm);
    let b = tape.add(dj, dm)?;
    let gap = tape.add_const(b, -T::one());
    let sq = tape.square(gap);
    let penalty = tape.scale(sq, lambda);
    tape.add(bce, penalty)
}
