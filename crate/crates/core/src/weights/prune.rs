use super::RealLayerWeights;
use crate::error::{Error, Result};

/// Whether the magnitude threshold is ranked within each layer or across
/// every 3x3 weight of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneScope {
    #[default]
    PerLayer,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDensity {
    pub layer: usize,
    pub kernel_size: usize,
    pub total: usize,
    pub nonzero: usize,
}

impl LayerDensity {
    pub fn density(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.nonzero as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PruneReport {
    pub layers: Vec<LayerDensity>,
}

impl PruneReport {
    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.total).sum()
    }

    pub fn nonzero(&self) -> usize {
        self.layers.iter().map(|l| l.nonzero).sum()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!(
            "pruning rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

fn prune_count(rate: f64, n: usize) -> usize {
    // small epsilon so that e.g. 0.29 * 100 floors to 29
    ((rate * n as f64) + 1e-9).floor() as usize
}

/// Zeroes the `floor(rate * n)` smallest-magnitude weights of one 3x3 layer.
/// Ties go to the lower index first. 1x1 layers are returned untouched.
pub fn prune_layer(layer: &RealLayerWeights, rate: f64) -> Result<RealLayerWeights> {
    check_rate(rate)?;
    let mut out = layer.clone();
    if layer.k == 3 {
        prune_slice(&mut out.values, rate);
    }
    Ok(out)
}

fn prune_slice(values: &mut [f64], rate: f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps index order among equal magnitudes
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    for &i in order.iter().take(prune_count(rate, order.len())) {
        values[i] = 0.0;
    }
}

/// Magnitude pruning of every 3x3 layer. `PerLayer` ranks weights within
/// each layer; `Global` ranks all 3x3 weights of the network together (ties
/// broken by layer then index).
pub fn prune_magnitude(
    layers: &[RealLayerWeights],
    rate: f64,
    scope: PruneScope,
) -> Result<(Vec<RealLayerWeights>, PruneReport)> {
    check_rate(rate)?;
    let pruned = match scope {
        PruneScope::PerLayer => layers
            .iter()
            .map(|l| prune_layer(l, rate))
            .collect::<Result<Vec<_>>>()?,
        PruneScope::Global => {
            let mut out = layers.to_vec();
            let mut order: Vec<(usize, usize)> = layers
                .iter()
                .enumerate()
                .filter(|(_, l)| l.k == 3)
                .flat_map(|(li, l)| (0..l.values.len()).map(move |i| (li, i)))
                .collect();
            order.sort_by(|&(la, a), &(lb, b)| {
                layers[la].values[a]
                    .abs()
                    .total_cmp(&layers[lb].values[b].abs())
            });
            let n = prune_count(rate, order.len());
            for &(li, i) in order.iter().take(n) {
                out[li].values[i] = 0.0;
            }
            out
        }
    };
    let report = PruneReport {
        layers: pruned
            .iter()
            .enumerate()
            .map(|(i, l)| LayerDensity {
                layer: i,
                kernel_size: l.k,
                total: l.values.len(),
                nonzero: l.nnz(),
            })
            .collect(),
    };
    Ok((pruned, report))
}
