//! Fits a two-layer network to XOR with the tape graph and Adam.
//!
//! `cargo run --example autodiff_adam`

use pdac::numerics::{AdamConfig, AdamState, Graph, NumericsError, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), NumericsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let w1 = store.insert_glorot("w1", 2, 8, &mut rng);
    let b1 = store.insert_zeros("b1", 1, 8);
    let w2 = store.insert_glorot("w2", 8, 2, &mut rng);
    let b2 = store.insert_zeros("b2", 1, 2);
    let xs = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let ys = [0, 1, 1, 0];

    let mut adam = AdamState::new(
        &store,
        AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        },
    );
    for step in 0..=300 {
        store.zero_grads();
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let mut g = Graph::new();
            let input = g.input(Tensor::row_vector(x.to_vec()));
            let (w1n, b1n, w2n, b2n) = (
                g.param(&store, w1),
                g.param(&store, b1),
                g.param(&store, w2),
                g.param(&store, b2),
            );
            let h = g.matmul(input, w1n)?;
            let h = g.add(h, b1n)?;
            let h = g.tanh(h)?;
            let z = g.matmul(h, w2n)?;
            let z = g.add(z, b2n)?;
            let loss = g.cross_entropy(z, y)?;
            total += g.value(loss).item();
            let grads = g.backward(loss)?.into_params();
            store.accumulate(&grads)?;
        }
        store.scale_grads(0.25);
        adam.step(&mut store);
        if step % 50 == 0 {
            println!("step {step:>3}  mean loss {:.5}", total / 4.0);
        }
    }
    Ok(())
}
