//! Collapse the three-convolution re-parameterizable block into one
//! standard 3x3 convolution and measure the agreement.

use ndarray::Array5;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtrack::snn::RepConv;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rep = RepConv::new(8, 8, 3).randomize_with_bn(&mut rng);
    let fused = rep.fuse().unwrap();

    println!(
        "composed: 1x1 ({} params) -> 3x3 depthwise ({}) -> 1x1 ({}) -> batch-norm",
        rep.pw1.weights.len(),
        rep.dw.weights.len(),
        rep.pw2.weights.len(),
    );
    println!(
        "fused:    one 3x3 standard conv ({} params + {} biases)",
        fused.weights.len(),
        fused.bias.as_ref().map(|b| b.len()).unwrap_or(0)
    );

    let mut worst = 0.0f32;
    for _ in 0..50 {
        let x = Array5::from_shape_fn((1, 1, 8, 10, 10), |_| rng.random_range(-2.0..2.0));
        let a = rep.forward(&x).unwrap();
        let b = fused.forward(&x).unwrap();
        let diff = a
            .iter()
            .zip(b.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f32, f32::max);
        worst = worst.max(diff);
    }
    println!("max |composed - fused| over 50 random inputs: {worst:.2e}");
    assert!(worst < 1e-5);
}
