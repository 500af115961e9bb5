//! Integer training mode and binary-spike inference mode are the same
//! computation: run a stack of meta blocks both ways and compare every
//! convolution pre-activation bit for bit.

use ndarray::Array5;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtrack::snn::blocks::{ExecMode, MetaBlock, Trace};
use smtrack::snn::tensor::SpikeTensor;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let blocks = vec![
        MetaBlock::low(3, 3, 4).randomize(&mut rng),
        MetaBlock::high(3, 3, 4).randomize(&mut rng),
    ];
    let x = Array5::from_shape_fn((2, 1, 3, 6, 6), |_| rng.random_range(-1.5..2.5));

    let run = |mode: ExecMode| {
        let mut trace: Trace = Vec::new();
        let mut cur = x.clone();
        for b in &blocks {
            cur = b.forward(&cur, mode, Some(&mut trace)).unwrap();
        }
        (cur, trace)
    };
    let (out_int, trace_int) = run(ExecMode::Integer);
    let (out_spk, trace_spk) = run(ExecMode::Spike);

    println!("comparing {} convolution pre-activations:", trace_int.len());
    for ((name, a), (_, b)) in trace_int.iter().zip(trace_spk.iter()) {
        let equal = a == b;
        println!("  {name:<10} bit-identical: {equal}");
        assert!(equal);
    }
    assert_eq!(out_int, out_spk);
    println!("block-stack outputs identical across modes");

    // the representation switch itself: integers <-> spike trains
    let ints = Array5::from_shape_fn((1, 1, 1, 1, 4), |(_, _, _, _, i)| i as f32);
    let t = SpikeTensor::integer(ints, 4);
    let spikes = t.expand_to_spikes().unwrap();
    println!(
        "integers {:?} expand to {} binary sub-steps and collapse back exactly: {}",
        t.data.iter().collect::<Vec<_>>(),
        spikes.data.shape()[0],
        spikes.collapse_spikes().unwrap().data == t.data
    );
}
