//! Small hand-built networks and a seeded random-network generator used by
//! tests, the benchmark harness, and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::network::{Activation, Dense, Layer, Network, Pool};

/// 2 -> 2 (ReLU) -> 1 (linear) over `[0,1]^2`.
///
/// `W1 = [[1,-1],[-1,1]]`, `W2 = [[1,1]]`, zero biases. The output is
/// `|x1 - x2|`, so interval propagation overestimates its maximum.
pub fn tiny_2_2_1() -> Network {
    Network::new(
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![
            Layer::Dense(Dense::new(
                vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
                vec![0.0, 0.0],
                Activation::Relu,
            )),
            Layer::Dense(Dense::new(vec![vec![1.0, 1.0]], vec![0.0], Activation::Linear)),
        ],
    )
}

/// Same hidden layer as [`tiny_2_2_1`] with an identity output head of width 2.
pub fn tiny_2_2_identity() -> Network {
    let mut net = tiny_2_2_1();
    net.layers[1] = Layer::Dense(Dense::new(
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![0.0, 0.0],
        Activation::Linear,
    ));
    net
}

/// Layer 1 is the single unit `relu(x1 - x2)` over `[0,1]^2`, layer 2 the
/// single ReLU unit `relu(w2 * x + b2)`, followed by an identity output.
pub fn chain(w2: f64, b2: f64) -> Network {
    Network::new(
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![
            Layer::Dense(Dense::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::Relu)),
            Layer::Dense(Dense::new(vec![vec![w2]], vec![b2], Activation::Relu)),
            Layer::Dense(Dense::new(vec![vec![1.0]], vec![0.0], Activation::Linear)),
        ],
    )
}

/// 4 inputs -> 4 ReLU -> max-pool over pairs -> 3 linear outputs.
pub fn max_pool_net() -> Network {
    pool_net(true)
}

/// As [`max_pool_net`] with average pooling.
pub fn avg_pool_net() -> Network {
    pool_net(false)
}

fn pool_net(max: bool) -> Network {
    let hidden = Dense::new(
        vec![
            vec![1.0, -1.0, 0.5, 0.0],
            vec![-1.0, 1.0, 0.0, 0.5],
            vec![0.5, 0.5, -1.0, -0.5],
            vec![0.0, -0.5, 1.0, -1.0],
        ],
        vec![0.1, -0.2, 0.3, 0.0],
        Activation::Relu,
    );
    let pool = Pool {
        inputs: 4,
        groups: vec![vec![0, 1], vec![2, 3]],
    };
    let head = Dense::new(
        vec![vec![1.0, -1.0], vec![-0.5, 1.5], vec![0.8, 0.3]],
        vec![0.0, 0.1, -0.2],
        Activation::Linear,
    );
    Network::new(
        vec![0.0; 4],
        vec![1.0; 4],
        vec![
            Layer::Dense(hidden),
            if max { Layer::MaxPool(pool) } else { Layer::AvgPool(pool) },
            Layer::Dense(head),
        ],
    )
}

/// Dense network with ReLU hidden layers, a linear output layer and input box
/// `[0,1]^n0`. Weights are drawn He-style, `N(0, 2 / fan_in)`; biases `N(0, 0.1^2)`.
pub fn random_network(sizes: &[usize], seed: u64) -> Network {
    assert!(sizes.len() >= 2, "need at least input and output sizes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias_dist = Normal::new(0.0, 0.1).expect("valid std");
    let last = sizes.len() - 2;
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w_dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
            let weights = (0..fan_out * fan_in).map(|_| w_dist.sample(&mut rng)).collect();
            let bias = (0..fan_out).map(|_| bias_dist.sample(&mut rng)).collect();
            Layer::Dense(Dense {
                inputs: fan_in,
                outputs: fan_out,
                weights,
                bias,
                activation: if i == last { Activation::Linear } else { Activation::Relu },
            })
        })
        .collect();
    let n0 = sizes[0];
    Network::new(vec![0.0; n0], vec![1.0; n0], layers)
}

/// The 64 -> 8 -> 8 -> 8 -> 10 benchmark network.
pub fn bench_network(seed: u64) -> Network {
    random_network(&[64, 8, 8, 8, 10], seed)
}

/// Uniform sample from the network's input box.
pub fn sample_input<R: Rng>(net: &Network, rng: &mut R) -> Vec<f64> {
    net.input_lower
        .iter()
        .zip(&net.input_upper)
        .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect()
}
