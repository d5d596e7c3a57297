mod oracles;

use ppgstress::model::{Layer, ModelBuilder, Tensor};
use ppgstress::train::backward;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn backprop_matches_finite_differences() {
    let mut model = ModelBuilder::new([8, 8, 1])
        .conv(2)
        .pool()
        .conv(3)
        .flatten()
        .dense(4)
        .output(2)
        .build(5)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // Zero biases can park a dead unit exactly on the ReLU kink, where the
    // central difference is meaningless.
    for layer in model.layers_mut() {
        if let Layer::Conv2d { bias, .. } | Layer::Dense { bias, .. } = layer {
            bias.iter_mut().for_each(|b| *b = rng.random_range(0.05f32..0.2));
        }
    }
    let xs: Vec<Vec<f32>> = (0..3)
        .map(|_| (0..64).map(|_| rng.random_range(0.0f32..1.0)).collect())
        .collect();
    let labels = [0, 1, 1];
    let batch = Tensor::stack(
        &xs.iter()
            .map(|x| Tensor::new(vec![8, 8, 1], x.clone()).unwrap())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let grads = backward(&model, &batch, &labels).unwrap();
    let xs64: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|&v| v as f64).collect()).collect();
    let fd = oracles::fd_gradients(&model, &xs64, &labels, 1e-6);

    assert_eq!(grads.tensors.len(), 8);
    for (t, (g, f)) in grads.tensors.iter().zip(&fd).enumerate() {
        let e = oracles::rel_err(g, f);
        assert!(e <= 1e-4, "tensor {t}: relative error {e}");
        assert!(oracles::norm(f) > 0.0, "tensor {t} has no gradient signal");
    }
}
