mod oracles;

use ppgstress::model::{conv2d, dense, maxpool2, softmax, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: &[f32], b: &[f64]) -> f64 {
    let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    oracles::rel_err(&a, b)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

#[test]
fn conv_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let (h, w, c, f) = (rng.random_range(3..9), rng.random_range(3..9), rng.random_range(1..4), rng.random_range(1..5));
        let (kh, kw) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let x = rand_vec(&mut rng, h * w * c);
        let k = rand_vec(&mut rng, kh * kw * c * f);
        let b = rand_vec(&mut rng, f);
        let got = conv2d(
            &Tensor::new(vec![h, w, c], x.clone()).unwrap(),
            &Tensor::new(vec![kh, kw, c, f], k.clone()).unwrap(),
            &b,
        )
        .unwrap();
        assert_eq!(got.shape(), &[h - kh + 1, w - kw + 1, f]);
        let want = oracles::conv(&widen(&x), (h, w, c), &widen(&k), (kh, kw, f), &widen(&b));
        assert!(rel(got.data(), &want) <= 1e-6);
    }
}

#[test]
fn dense_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (i, o) = (rng.random_range(1..40), rng.random_range(1..10));
        let x = rand_vec(&mut rng, i);
        let w = rand_vec(&mut rng, i * o);
        let b = rand_vec(&mut rng, o);
        let got = dense(&x, &Tensor::new(vec![o, i], w.clone()).unwrap(), &b).unwrap();
        let e = rel(&got, &oracles::dense(&widen(&x), &widen(&w), &widen(&b)));
        assert!(e <= 1e-6, "{i}->{o}: {e}");
    }
}

#[test]
fn maxpool_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (h, w, c) = (rng.random_range(2..11), rng.random_range(2..11), rng.random_range(1..4));
        let x = rand_vec(&mut rng, h * w * c);
        let got = maxpool2(&Tensor::new(vec![h, w, c], x.clone()).unwrap()).unwrap();
        assert_eq!(got.shape(), &[h / 2, w / 2, c]);
        assert_eq!(widen(got.data()), oracles::pool(&widen(&x), (h, w, c)));
    }
}

#[test]
fn softmax_matches_textbook() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let n = rng.random_range(1..8);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = softmax(&z);
        assert!(oracles::rel_err(&got, &oracles::softmax(&z)) <= 1e-6);
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn softmax_is_stable_for_large_logits() {
    let p = softmax(&[1000.0, 1000.0]);
    assert_eq!(p, vec![0.5, 0.5]);
}
