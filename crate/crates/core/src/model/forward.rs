use super::spec::{ConvStage, LayerKind, NetworkSpec};
use crate::engine::{encode_forward, layer_forward, output_forward, GateStats, StageTiming};
use crate::error::{Error, Result};
use crate::neuron::{FixedPoint, LifParams};
use crate::sim::{
    dram_traffic, ktbc_schedule, DramTraffic, KtbcSchedule, MemoryConfig, SimReport, StageShape,
};
use crate::tensor::{FeatureMap, MultibitTensor, SpikeTensor};
use crate::weights::{LayerWeights, SparseLayer, StorageFormat};

/// Result of one layer: spikes, or time-averaged potentials for the output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerOutput {
    Spikes(SpikeTensor),
    Potentials(FeatureMap<FixedPoint>),
}

impl LayerOutput {
    pub fn spikes(&self) -> Option<&SpikeTensor> {
        match self {
            LayerOutput::Spikes(s) => Some(s),
            LayerOutput::Potentials(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageRun {
    pub stage: ConvStage,
    pub stats: GateStats,
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    /// One entry per layer; a CSP block reports its aggregated output.
    pub outputs: Vec<LayerOutput>,
    pub stages: Vec<StageRun>,
    pub traffic: DramTraffic,
    pub report: SimReport,
}

impl NetworkRun {
    pub fn total_stats(&self) -> GateStats {
        self.stages.iter().map(|s| s.stats).sum()
    }
}

/// Checks that `weights` holds one layer per convolution stage with matching
/// dimensions.
pub fn check_weights(net: &NetworkSpec, weights: &[SparseLayer]) -> Result<()> {
    let stages = net.stages();
    if stages.len() != weights.len() {
        return Err(Error::shape(format!(
            "network has {} convolution stages but {} weight layers were given",
            stages.len(),
            weights.len()
        )));
    }
    for (i, (s, w)) in stages.iter().zip(weights).enumerate() {
        let got = (w.out_channels(), w.in_channels(), w.kernel_size());
        if got != (s.out_c, s.in_c, s.k) {
            return Err(Error::shape(format!(
                "weight layer {i} ({}) is {got:?}, stage needs ({}, {}, {})",
                s.name, s.out_c, s.in_c, s.k
            )));
        }
    }
    Ok(())
}

pub fn stage_shapes(net: &NetworkSpec) -> Vec<StageShape> {
    net.stages().iter().map(ConvStage::shape).collect()
}

/// Cycle schedule of every stage.
pub fn network_schedule(net: &NetworkSpec, weights: &[SparseLayer]) -> Result<Vec<KtbcSchedule>> {
    check_weights(net, weights)?;
    stage_shapes(net)
        .iter()
        .zip(weights)
        .map(|(s, w)| ktbc_schedule(s, w))
        .collect()
}

/// Per-frame DRAM traffic with weights fetched in bitmask form.
pub fn network_traffic(
    net: &NetworkSpec,
    weights: &[SparseLayer],
    mem: &MemoryConfig,
) -> Result<DramTraffic> {
    check_weights(net, weights)?;
    let dense: Vec<LayerWeights> = weights.iter().map(SparseLayer::to_dense).collect();
    dram_traffic(&stage_shapes(net), &dense, mem, StorageFormat::Bitmask)
}

/// Runs a whole frame through the network.
pub fn network_forward(
    img: &MultibitTensor,
    net: &NetworkSpec,
    weights: &[SparseLayer],
    lif: &LifParams,
    mem: &MemoryConfig,
) -> Result<NetworkRun> {
    check_weights(net, weights)?;
    let img_dims = (img.channels(), img.height(), img.width());
    if img_dims != (net.channels, net.height, net.width) {
        return Err(Error::shape(format!(
            "image is {img_dims:?}, network expects ({}, {}, {})",
            net.channels, net.height, net.width
        )));
    }
    let traffic = network_traffic(net, weights, mem)?;
    let stages = net.stages();

    let mut outputs = Vec::with_capacity(net.layers().len());
    let mut runs = Vec::with_capacity(stages.len());
    let mut next = 0;
    let mut current: Option<SpikeTensor> = None;
    for layer in net.layers() {
        let prev = current
            .as_ref()
            .ok_or_else(|| Error::shape("layer has no spiking input"));
        let timing = StageTiming::new(layer.in_t, layer.out_t)?;
        let steady = StageTiming::new(layer.out_t, layer.out_t)?;
        let w = &weights[next..];
        let (out, stats) = match layer.kind {
            LayerKind::Encode => {
                let (s, st) = encode_forward(img, layer.out_t, layer.pool(), &w[0], lif)?;
                (LayerOutput::Spikes(s), vec![st])
            }
            LayerKind::Conv => {
                let (s, st) = layer_forward(prev?, timing, layer.pool(), &w[0], lif)?;
                (LayerOutput::Spikes(s), vec![st])
            }
            LayerKind::CspBlock => {
                let x = prev?;
                let (a, st_a) = layer_forward(x, timing, None, &w[0], lif)?;
                let (b, st_b) = layer_forward(&a, steady, None, &w[1], lif)?;
                let (short, st_s) = layer_forward(x, timing, None, &w[2], lif)?;
                let merged = short.concat_channels(&b)?;
                let (agg, st_g) = layer_forward(&merged, steady, layer.pool(), &w[3], lif)?;
                (LayerOutput::Spikes(agg), vec![st_a, st_b, st_s, st_g])
            }
            LayerKind::Output => {
                let (p, st) = output_forward(prev?, &w[0])?;
                (LayerOutput::Potentials(p), vec![st])
            }
        };
        for st in stats {
            runs.push(StageRun {
                stage: stages[next],
                stats: st,
            });
            next += 1;
        }
        current = out.spikes().cloned();
        outputs.push(out);
    }

    let total: GateStats = runs.iter().map(|r| r.stats).sum();
    let report = SimReport::new(total, &traffic, mem.clock_hz);
    Ok(NetworkRun {
        outputs,
        stages: runs,
        traffic,
        report,
    })
}
