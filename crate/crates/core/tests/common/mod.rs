#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sparse_snn::tensor::{MultibitTensor, SpikeTensor};
use sparse_snn::weights::LayerWeights;

pub fn random_spikes(
    rng: &mut ChaCha8Rng,
    t: usize,
    c: usize,
    h: usize,
    w: usize,
    p: f64,
) -> SpikeTensor {
    let data = (0..t * c * h * w).map(|_| rng.gen_bool(p)).collect();
    SpikeTensor::from_vec(t, c, h, w, data).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> MultibitTensor {
    let data = (0..c * h * w).map(|_| rng.gen()).collect();
    MultibitTensor::from_vec(c, h, w, data).unwrap()
}

/// Weights in [-127, 127] with roughly `density` of them nonzero.
pub fn random_weights(
    rng: &mut ChaCha8Rng,
    out_c: usize,
    in_c: usize,
    k: usize,
    density: f64,
) -> LayerWeights {
    let values = (0..out_c * in_c * k * k)
        .map(|_| {
            if rng.gen_bool(density) {
                let v: i8 = rng.gen_range(1..=127);
                if rng.gen_bool(0.5) {
                    -v
                } else {
                    v
                }
            } else {
                0
            }
        })
        .collect();
    LayerWeights::new(out_c, in_c, k, 1.0, values).unwrap()
}
