use super::forward::check_weights;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::tensor::SpikeTensor;
use crate::weights::SparseLayer;

/// Spike-pattern similarity across time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MiouReport {
    pub per_channel: Vec<f64>,
    pub mean: f64,
}

/// Per channel, neurons firing at every step count as intersection and
/// neurons firing at some but not all steps as the remainder of the union:
/// `IoU = I / (I + P)`, 0 for a silent channel.
pub fn miout(spikes: &SpikeTensor) -> Result<MiouReport> {
    let (t, c, h, w) = spikes.dims();
    if t < 2 {
        return Err(Error::Metric(format!(
            "mIoUT needs at least 2 time steps, got {t}"
        )));
    }
    let per_channel: Vec<f64> = (0..c)
        .map(|ch| {
            let mut counts = vec![0usize; h * w];
            for step in 0..t {
                for (n, &s) in counts.iter_mut().zip(spikes.plane(step, ch)) {
                    *n += s as usize;
                }
            }
            let inter = counts.iter().filter(|&&n| n == t).count();
            let partial = counts.iter().filter(|&&n| n > 0 && n < t).count();
            if inter + partial == 0 {
                0.0
            } else {
                inter as f64 / (inter + partial) as f64
            }
        })
        .collect();
    let mean = per_channel.iter().sum::<f64>() / c as f64;
    Ok(MiouReport { per_channel, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpMode {
    Dense,
    /// Only nonzero weights count.
    Sparse,
}

/// Operations per frame, two per multiply-accumulate. The time factor is the
/// number of convolution executions (`in_T`), and the encoding layer counts
/// all 8 bit planes.
pub fn op_count(net: &NetworkSpec, weights: &[SparseLayer], mode: OpMode) -> Result<u64> {
    check_weights(net, weights)?;
    Ok(net
        .stages()
        .iter()
        .zip(weights)
        .map(|(stage, w)| {
            let s = stage.shape();
            let macs = match mode {
                OpMode::Dense => (s.k * s.k * s.in_c * s.out_c) as u64,
                OpMode::Sparse => w.nnz() as u64,
            };
            2 * macs * (s.height * s.width * s.in_t * s.bits) as u64
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::{LayerKind, LayerSpec};
    use crate::weights::LayerWeights;

    fn counts_tensor(t: usize, counts: &[usize]) -> SpikeTensor {
        let n = counts.len();
        let mut s = SpikeTensor::zeros(t, 1, 1, n).unwrap();
        for (x, &c) in counts.iter().enumerate() {
            for step in 0..c {
                s.set(step, 0, 0, x, true);
            }
        }
        s
    }

    #[test]
    fn worked_example() {
        let s = counts_tensor(3, &[3, 3, 3, 3, 1, 2, 0, 0, 0]);
        let r = miout(&s).unwrap();
        assert!((r.mean - 0.67).abs() < 0.005);
    }

    #[test]
    fn extremes() {
        assert_eq!(miout(&counts_tensor(3, &[3, 0, 3])).unwrap().mean, 1.0);
        assert_eq!(miout(&counts_tensor(3, &[1, 2, 0])).unwrap().mean, 0.0);
        assert_eq!(miout(&counts_tensor(3, &[0, 0])).unwrap().mean, 0.0);
        assert!(matches!(
            miout(&counts_tensor(1, &[1])),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn one_by_one_op_count() {
        let net = NetworkSpec::new(
            4,
            4,
            1,
            vec![LayerSpec::new(LayerKind::Encode, 1, 1, 1, 1, false)],
        )
        .unwrap();
        let w = vec![LayerWeights::new(1, 1, 1, 1.0, vec![1])
            .unwrap()
            .to_sparse()];
        // 2 * 1 * 16 positions * 8 bit planes
        assert_eq!(op_count(&net, &w, OpMode::Dense).unwrap(), 32 * 8);
        assert_eq!(op_count(&net, &w, OpMode::Sparse).unwrap(), 32 * 8);
    }
}
