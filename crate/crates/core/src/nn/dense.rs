use super::activation::Activation;
use super::tape::{ParamVars, Tape, Var};
use super::tensor::Tensor;
use crate::error::NnError;

fn check_shapes(
    layer: &str,
    in_dim: usize,
    w_shape: &[usize],
    b_len: usize,
) -> Result<(), NnError> {
    if w_shape.len() != 2 {
        return Err(NnError::Shape {
            layer: layer.to_string(),
            detail: format!("weights must be 2-D, got shape {w_shape:?}"),
        });
    }
    if w_shape[1] != in_dim {
        return Err(NnError::Shape {
            layer: layer.to_string(),
            detail: format!("weights expect {} inputs, got {in_dim}", w_shape[1]),
        });
    }
    if w_shape[0] != b_len {
        return Err(NnError::Shape {
            layer: layer.to_string(),
            detail: format!("{} output rows but bias has length {b_len}", w_shape[0]),
        });
    }
    Ok(())
}

/// `activation(W·x + b)` on plain values.
pub fn dense_forward(
    layer: &str,
    input: &[f64],
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
) -> Result<Vec<f64>, NnError> {
    let mut out = Vec::with_capacity(weights.rows());
    dense_forward_into(layer, input, weights, bias, activation, &mut out)?;
    Ok(out)
}

/// [`dense_forward`] into a reused buffer.
pub fn dense_forward_into(
    layer: &str,
    input: &[f64],
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
    out: &mut Vec<f64>,
) -> Result<(), NnError> {
    check_shapes(layer, input.len(), weights.shape(), bias.len())?;
    out.clear();
    out.extend((0..weights.rows()).map(|r| {
        let z: f64 = weights
            .row(r)
            .iter()
            .zip(input)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + bias.data()[r];
        activation.apply(z)
    }));
    Ok(())
}

/// Same computation recorded on a tape.
pub fn dense_tape(
    tape: &mut Tape,
    layer: &str,
    input: &[Var],
    weights: &ParamVars,
    bias: &ParamVars,
    activation: Activation,
) -> Result<Vec<Var>, NnError> {
    check_shapes(layer, input.len(), weights.shape(), bias.vars().len())?;
    let cols = weights.cols();
    Ok((0..weights.rows())
        .map(|r| {
            let row = &weights.vars()[r * cols..(r + 1) * cols];
            let d = tape.dot(row, input);
            let z = tape.add(d, bias.at(r));
            match activation {
                Activation::Sigmoid => tape.sigmoid(z),
                Activation::Linear => z,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_like() {
        let w = Tensor::matrix(2, 2, vec![1.0, 1.0, 0.0, 1.0]);
        let b = Tensor::vector(vec![0.0, 0.0]);
        let y = dense_forward("l", &[1.0, 0.0], &w, &b, Activation::Linear).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
    }

    #[test]
    fn sigmoid_of_zero() {
        let w = Tensor::matrix(1, 1, vec![0.0]);
        let b = Tensor::vector(vec![0.0]);
        let y = dense_forward("l", &[0.0], &w, &b, Activation::Sigmoid).unwrap();
        assert_eq!(y, vec![0.5]);
    }

    #[test]
    fn direct_substitution() {
        let w = Tensor::matrix(1, 2, vec![1.0, -1.0]);
        let b = Tensor::vector(vec![0.5]);
        let y = dense_forward("l", &[2.0, 3.0], &w, &b, Activation::Linear).unwrap();
        assert_eq!(y, vec![-0.5]);
    }

    #[test]
    fn shape_error_names_layer() {
        let w = Tensor::matrix(1, 2, vec![1.0, -1.0]);
        let b = Tensor::vector(vec![0.5, 0.1]);
        match dense_forward("hidden1", &[2.0, 3.0], &w, &b, Activation::Linear) {
            Err(NnError::Shape { layer, .. }) => assert_eq!(layer, "hidden1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(dense_forward("x", &[1.0], &w, &Tensor::vector(vec![0.0]), Activation::Linear).is_err());
    }

    #[test]
    fn tape_matches_plain_and_finite_differences() {
        let w = Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6]);
        let b = Tensor::vector(vec![0.05, -0.1]);
        let x = [0.7, -1.2, 0.4];
        // loss = sum of outputs weighted by [1, -2]
        let loss = |w: &Tensor, b: &Tensor| {
            let y = dense_forward("d", &x, w, b, Activation::Sigmoid).unwrap();
            y[0] - 2.0 * y[1]
        };
        let mut tape = Tape::new();
        let wv = tape.param("w", &w);
        let bv = tape.param("b", &b);
        let xv = tape.constants(&x);
        let y = dense_tape(&mut tape, "d", &xv, &wv, &bv, Activation::Sigmoid).unwrap();
        let plain = dense_forward("d", &x, &w, &b, Activation::Sigmoid).unwrap();
        assert_eq!(tape.value(y[0]), plain[0]);
        assert_eq!(tape.value(y[1]), plain[1]);
        let grads = tape.backward_multi(&[(y[0], 1.0), (y[1], -2.0)]).unwrap();

        let h = 1e-5;
        for (name, base) in [("w", &w), ("b", &b)] {
            for i in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus.data_mut()[i] += h;
                minus.data_mut()[i] -= h;
                let fd = if name == "w" {
                    (loss(&plus, &b) - loss(&minus, &b)) / (2.0 * h)
                } else {
                    (loss(&w, &plus) - loss(&w, &minus)) / (2.0 * h)
                };
                let an = grads[name].data()[i];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "{name}[{i}]: {an} vs {fd}");
            }
        }
    }
}
