use pdac::features::{extract_features, Waveform};
use pdac::model::{Ablation, Model, ModelConfig, ModelInput, PaddedBatch};
use pdac::numerics::{check_gradients, Axis, Graph, NodeId, NumericsError, ParamStore, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Store with named random parameters.
fn store(rng: &mut impl Rng, shapes: &[(&str, usize, usize)]) -> ParamStore {
    let mut s = ParamStore::new();
    for &(name, r, c) in shapes {
        s.insert(name, random(rng, r, c));
    }
    s
}

/// Reduces `out` to a scalar through a fixed random weighting so every
/// output entry has a distinct gradient.
fn project<'a>(g: &mut Graph<'a>, out: NodeId, probe_seed: u64) -> Result<NodeId, NumericsError> {
    let (r, c) = (g.value(out).rows(), g.value(out).cols());
    let w = g.input(random(&mut ChaCha8Rng::seed_from_u64(probe_seed), r, c));
    let m = g.mul(out, w)?;
    g.sum_all(m)
}

fn assert_grads<F>(s: &ParamStore, f: F) -> Result<(), TestCaseError>
where
    F: for<'a> Fn(&mut Graph<'a>, &'a ParamStore) -> Result<NodeId, NumericsError>,
{
    let report = check_gradients(s, f, STEP, TOL).unwrap();
    prop_assert!(
        report.passed(),
        "max rel err {}: {:?}",
        report.max_rel_error(),
        report.failing().collect::<Vec<_>>()
    );
    Ok(())
}

fn p<'a>(g: &mut Graph<'a>, s: &'a ParamStore, name: &str) -> NodeId {
    g.param(s, s.id(name).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_gradients(seed in any::<u64>(), n in 1usize..6, k in 1usize..6, m in 1usize..6) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("a", n, k), ("b", k, m), ("c", m, k)]);
        assert_grads(&s, |g, s| {
            let (a, b, c) = (p(g, s, "a"), p(g, s, "b"), p(g, s, "c"));
            let ab = g.matmul(a, b)?;
            let abt = g.matmul_t(a, c)?;
            let both = g.concat(&[ab, abt], Axis::Cols)?;
            project(g, both, seed ^ 1)
        })?;
    }

    #[test]
    fn elementwise_gradients(seed in any::<u64>(), r in 1usize..6, c in 1usize..6) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("x", r, c), ("y", r, c), ("row", 1, c), ("k", 1, 1)]);
        assert_grads(&s, |g, s| {
            let (x, y) = (p(g, s, "x"), p(g, s, "y"));
            let sum = g.add(x, y)?;
            let (row, k) = (p(g, s, "row"), p(g, s, "k"));
            let bro = g.add(sum, row)?;
            let sca = g.add(bro, k)?;
            let prod = g.mul(sca, y)?;
            let scaled = g.scale(prod, -1.7)?;
            project(g, scaled, seed ^ 2)
        })?;
    }

    #[test]
    fn activation_gradients(seed in any::<u64>(), r in 1usize..6, c in 1usize..6) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("x", r, c)]);
        assert_grads(&s, |g, s| {
            let x = p(g, s, "x");
            let parts = [g.relu(x)?, g.sigmoid(x)?, g.tanh(x)?, g.softmax(x)?];
            let all = g.concat(&parts, Axis::Rows)?;
            project(g, all, seed ^ 3)
        })?;
    }

    #[test]
    fn reduction_gradients(seed in any::<u64>(), r in 1usize..7, c in 1usize..6) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("x", r, c)]);
        assert_grads(&s, |g, s| {
            let x = p(g, s, "x");
            let pooled = g.max_pool_time(x)?;
            let centred = g.center(x)?;
            let mean = g.mean_all(x)?;
            let a = project(g, pooled, seed ^ 4)?;
            let b = project(g, centred, seed ^ 5)?;
            let ab = g.add(a, b)?;
            let m2 = g.scale(mean, 3.0)?;
            g.add(ab, m2)
        })?;
    }

    #[test]
    fn l1_gradients(seed in any::<u64>(), n in 1usize..6, m in 1usize..6, d in 1usize..6) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("a", n, d), ("b", m, d)]);
        assert_grads(&s, |g, s| {
            let (a, b) = (p(g, s, "a"), p(g, s, "b"));
            let dist = g.l1_pairwise(a, b)?;
            project(g, dist, seed ^ 6)
        })?;
    }

    #[test]
    fn recurrent_gradients(seed in any::<u64>(), t in 1usize..5, d in 1usize..5, h in 1usize..4) {
        let s = store(
            &mut ChaCha8Rng::seed_from_u64(seed),
            &[("x", t, d), ("w_ih", d, 4 * h), ("w_hh", h, 4 * h), ("b", 1, 4 * h)],
        );
        assert_grads(&s, |g, s| {
            let (x, wi, wh, b) = (p(g, s, "x"), p(g, s, "w_ih"), p(g, s, "w_hh"), p(g, s, "b"));
            let mut prev = None;
            let mut states = Vec::new();
            for i in 0..t {
                let st = g.lstm_cell(x, i, prev, wi, wh, b)?;
                states.push(st);
                prev = Some(st);
            }
            let hs = g.stack_states(&states, h)?;
            let last = project(g, *states.last().unwrap(), seed ^ 7)?;
            let all = project(g, hs, seed ^ 8)?;
            g.add(last, all)
        })?;
    }

    #[test]
    fn convolution_gradients(seed in any::<u64>(), t in 1usize..9, d in 1usize..4, k in 1usize..6, f in 1usize..4) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("x", t, d), ("w", k * d, f), ("b", 1, f)]);
        assert_grads(&s, |g, s| {
            let (x, w, b) = (p(g, s, "x"), p(g, s, "w"), p(g, s, "b"));
            let windows = g.unfold_time(x, k)?;
            let z = g.matmul(windows, w)?;
            let z = g.add(z, b)?;
            project(g, z, seed ^ 9)
        })?;
    }

    #[test]
    fn cross_entropy_gradients(seed in any::<u64>(), d in 2usize..7, target in 0usize..7) {
        let s = store(&mut ChaCha8Rng::seed_from_u64(seed), &[("z", 1, d)]);
        let target = target % d;
        assert_grads(&s, |g, s| {
            let z = p(g, s, "z");
            g.cross_entropy(z, target)
        })?;
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>(), r in 1usize..6, c in 1usize..8, scale in 0.1f64..50.0) {
        let x = random(&mut ChaCha8Rng::seed_from_u64(seed), r, c).map(|v| v * scale);
        let mut g = Graph::new();
        let xn = g.input(x);
        let sm = g.softmax(xn).unwrap();
        for i in 0..r {
            let row = g.value(sm).row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}

fn random_input(rng: &mut impl Rng, t: usize) -> ModelInput {
    let lfbe = random(rng, t, 40).map(|v| 2.0 * v);
    let prosody = Tensor::matrix(
        t,
        6,
        (0..t * 6)
            .map(|i| {
                if i % 6 < 3 {
                    rng.random_range(-6.0..0.0)
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect(),
    )
    .unwrap();
    ModelInput::new(lfbe, prosody).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn padded_batch_matches_single_utterances(
        seed in any::<u64>(),
        lens in prop::collection::vec(10usize..120, 1..5),
        ablation in prop::sample::select(vec![Ablation::Full, Ablation::Baseline, Ablation::NoGlobalGate]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig { ablation, ..ModelConfig::tiny(4) };
        let model = Model::new(cfg, &mut rng).unwrap();
        let inputs: Vec<ModelInput> = lens.iter().map(|&t| random_input(&mut rng, t)).collect();
        let batch = PaddedBatch::new(&inputs.iter().collect::<Vec<_>>());
        let batched = model.forward_batch(&batch, false).unwrap();
        for (input, out) in inputs.iter().zip(&batched) {
            let single = model.forward(input, false).unwrap();
            for (a, b) in single.logits.iter().zip(&out.logits) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn gain_shifts_lfbe_and_keeps_energy(seed in any::<u64>(), gain in 0.05f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f0 = rng.random_range(90.0..300.0);
        let samples: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 / 8000.0;
                (2.0 * std::f64::consts::PI * f0 * t).sin() * 0.8 + rng.random_range(-0.1..0.1)
            })
            .collect();
        let wave = Waveform::new(samples, 8000).unwrap();
        let a = extract_features(&wave).unwrap();
        let b = extract_features(&wave.scaled(gain)).unwrap();
        let shift = 2.0 * gain.ln();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (x, y) in fa.lfbe.iter().zip(&fb.lfbe) {
                prop_assert!((y - x - shift).abs() < 1e-6, "{x} {y} {shift}");
            }
            for (x, y) in fa.energy.iter().zip(&fb.energy) {
                prop_assert!((x - y).abs() < 1e-6);
            }
            for (x, y) in fa.pitch.iter().zip(&fb.pitch) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
