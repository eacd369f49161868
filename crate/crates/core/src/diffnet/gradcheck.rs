use super::net::ClassifierNet;
use super::tape::{NodeId, Tape};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Largest relative disagreement between tape gradients and central
/// differences, `|analytic - numeric| / max(1e-12, |numeric|)`, over all
/// parameters.
///
/// `loss` builds the scalar loss on a fresh tape; the batch it uses is
/// whatever the closure captures.
pub fn finite_diff_check<T, F>(net: &ClassifierNet<T>, loss: F, eps: T) -> Result<T>
where
    T: Real,
    F: Fn(&mut Tape<'_, T>) -> Result<NodeId>,
{
    if !(eps > T::zero()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let analytic: Vec<T> = {
        let mut tape = Tape::new(net);
        let node = loss(&mut tape)?;
        let grads = tape.backward(node)?;
        grads.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    };
    let eval = |n: &ClassifierNet<T>| -> Result<T> {
        let mut tape = Tape::new(n);
        let node = loss(&mut tape)?;
        Ok(tape.value(node).data[0])
    };
    let floor = T::lit(1e-12);
    let two = T::lit(2.0);
    let mut probe = net.clone();
    let mut worst = T::zero();
    for (j, &a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().nth(j).unwrap();
        *probe.params_mut().nth(j).unwrap() = orig + eps;
        let up = eval(&probe)?;
        *probe.params_mut().nth(j).unwrap() = orig - eps;
        let down = eval(&probe)?;
        *probe.params_mut().nth(j).unwrap() = orig;
        let numeric = (up - down) / (two * eps);
        let rel = (a - numeric).abs() / numeric.abs().max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::net::Activation;
    use crate::scalar::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_zero_step() {
        let net = ClassifierNet::<f64>::zeros(1, &[], Activation::Relu);
        let r = finite_diff_check(&net, |t| {
            let x = t.input(Matrix::from_vec(1, 1, vec![1.0]));
            t.forward(x)
        }, 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn linear_net_squared_error_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = ClassifierNet::<f64>::init(3, &[], Activation::Relu, &mut rng);
        let batch = Matrix::from_vec(4, 3, vec![0.5, -1.0, 2.0, 1.5, 0.2, -0.3, -0.7, 0.9, 0.1, 1.1, 1.2, -2.0]);
        let err = finite_diff_check(
            &net,
            |t| {
                let x = t.input(batch.clone());
                let z = t.forward(x)?;
                let r = t.add_const(z, -0.25);
                let sq = t.square(r);
                Ok(t.mean(sq))
            },
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-7, "{err}");
    }
}
