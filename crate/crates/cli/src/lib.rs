//! Command-line front end: pruning, compression reports, inference and
//! analyses over the sparse SNN model.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_snn::format::{
    decode_tensor, decode_weights, encode_tensor, encode_weights, TensorData,
};
use sparse_snn::model::{
    check_weights, miout, network_forward, network_schedule, network_traffic, LayerOutput,
    NetworkRun, NetworkSpec, StageRole,
};
use sparse_snn::neuron::LifParams;
use sparse_snn::sim::{parallelism_latency, MemoryConfig, PeOrg, ReportFormat, Workload};
use sparse_snn::tensor::MultibitTensor;
use sparse_snn::weights::{
    dequantize, prune_magnitude, quantize8, storage_bits, LayerWeights, PruneScope,
    RealLayerWeights, SparseLayer, StorageFormat,
};

/// Bad flags or flag combinations.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Two independent code paths disagree.
#[derive(Debug, thiserror::Error)]
#[error("internal invariant violated: {0}")]
pub struct InternalError(pub String);

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub const WEIGHTS_FILE: &str = "weights.snnw";

#[derive(Debug, Parser)]
#[command(
    name = "sparse-snn",
    version,
    about = "Sparse spiking neural network accelerator model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Magnitude-prune and quantize weights, then write them in bit-mask form.
    Prune(PruneArgs),
    /// Run one frame through the network and write per-layer outputs.
    Infer(CommonArgs),
    /// Compare dense, bit-mask and CSR weight storage.
    CompressReport(CommonArgs),
    /// mIoUT, PE-organization latency, or DRAM traffic analysis.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Network description; the built-in reference network when omitted.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Weight file; synthesized from the seed when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Input image tensor; synthesized from the seed when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pruning rate applied to synthesized weights.
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clock frequency in Hz.
    #[arg(long, default_value_t = 500e6)]
    pub clock: f64,
    /// Input SRAM capacity in bits.
    #[arg(long)]
    pub input_sram_bits: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerLayer)]
    pub scope: ScopeArg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    PerLayer,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    Miout,
    Parallelism,
    Traffic,
}

/// Maps an error chain to a process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<InternalError>() {
            return EXIT_INTERNAL;
        }
        if let Some(e) = cause.downcast_ref::<sparse_snn::Error>() {
            return match e {
                sparse_snn::Error::Param(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<io::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Prune(a) => cmd_prune(&a.common, a.scope, stdout),
        Command::Infer(c) => cmd_infer(&c, stdout),
        Command::CompressReport(c) => cmd_compress_report(&c, stdout),
        Command::Analyze(a) => cmd_analyze(&a.common, a.mode, stdout),
    }
}

impl CommonArgs {
    fn memory(&self) -> Result<MemoryConfig> {
        let mut mem = MemoryConfig {
            clock_hz: self.clock,
            ..MemoryConfig::default()
        };
        if let Some(bits) = self.input_sram_bits {
            mem.input_sram_bits = bits;
        }
        mem.validate()?;
        Ok(mem)
    }

    fn network(&self) -> Result<NetworkSpec> {
        match &self.net {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                NetworkSpec::parse(&text)
                    .map_err(|e| sparse_snn::Error::Corrupt(e.to_string()))
                    .with_context(|| format!("parsing {}", p.display()))
            }
            None => Ok(NetworkSpec::reference()),
        }
    }

    fn load_weights(&self, net: Option<&NetworkSpec>) -> Result<Vec<LayerWeights>> {
        match &self.weights {
            Some(p) => read_weights(p),
            None => {
                let net = match net {
                    Some(n) => n.clone(),
                    None => self.network()?,
                };
                synthetic_weights(&net, self.seed, self.rate)
            }
        }
    }

    fn image(&self, net: &NetworkSpec) -> Result<MultibitTensor> {
        match &self.input {
            Some(p) => {
                let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                match decode_tensor(&bytes).with_context(|| format!("decoding {}", p.display()))? {
                    TensorData::Image(img) => Ok(img),
                    _ => Err(sparse_snn::Error::Corrupt(
                        "input tensor must hold 8-bit pixels".into(),
                    ))
                    .with_context(|| format!("decoding {}", p.display())),
                }
            }
            None => Ok(synthetic_image(net, self.seed)),
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| UsageError("--out DIR is required for this command".into()))?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

fn read_weights(path: &Path) -> Result<Vec<LayerWeights>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_weights(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integers in [-64, 64] per weight, magnitude-pruned per layer at
/// `rate`, then quantized to 8 bits.
pub fn synthetic_weights(net: &NetworkSpec, seed: u64, rate: f64) -> Result<Vec<LayerWeights>> {
    let mut rng = rng_stream(seed, 0);
    let real = net
        .stages()
        .iter()
        .map(|s| {
            let n = s.out_c * s.in_c * s.k * s.k;
            let values = (0..n)
                .map(|_| f64::from(rng.gen_range(-64i32..=64)))
                .collect();
            RealLayerWeights::new(s.out_c, s.in_c, s.k, values)
        })
        .collect::<sparse_snn::Result<Vec<_>>>()?;
    let (pruned, _) = prune_magnitude(&real, rate, PruneScope::PerLayer)?;
    Ok(pruned
        .iter()
        .map(quantize8)
        .collect::<sparse_snn::Result<_>>()?)
}

pub fn synthetic_image(net: &NetworkSpec, seed: u64) -> MultibitTensor {
    let mut rng = rng_stream(seed, 1);
    let n = net.channels * net.height * net.width;
    let px = (0..n).map(|_| rng.gen()).collect();
    MultibitTensor::from_vec(net.channels, net.height, net.width, px)
        .expect("network dims are valid")
}

/// Plain column table rendered as aligned text or CSV.
struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn render(&self, format: FormatArg) -> String {
        let mut s = String::new();
        match format {
            FormatArg::Csv => {
                let _ = writeln!(s, "{}", self.headers.join(","));
                for r in &self.rows {
                    let _ = writeln!(s, "{}", r.join(","));
                }
            }
            FormatArg::Text => {
                let widths: Vec<usize> = (0..self.headers.len())
                    .map(|i| {
                        self.rows
                            .iter()
                            .map(|r| r[i].len())
                            .chain([self.headers[i].len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: Vec<&str>| {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                let _ = writeln!(s, "{}", line(self.headers.clone()));
                for r in &self.rows {
                    let _ = writeln!(s, "{}", line(r.iter().map(String::as_str).collect()));
                }
            }
        }
        s
    }
}

fn pct(part: u64, whole: u64) -> String {
    if whole == 0 {
        "0.0".into()
    } else {
        format!("{:.1}", 100.0 * (1.0 - part as f64 / whole as f64))
    }
}

pub fn cmd_prune(args: &CommonArgs, scope: ScopeArg, stdout: &mut dyn Write) -> Result<()> {
    if !(0.0..1.0).contains(&args.rate) {
        return Err(
            sparse_snn::Error::Param(format!("pruning rate {} outside [0, 1)", args.rate)).into(),
        );
    }
    let scope = match scope {
        ScopeArg::PerLayer => PruneScope::PerLayer,
        ScopeArg::Global => PruneScope::Global,
    };
    let dir = args.out_dir()?;
    let pruned: Vec<LayerWeights> = match &args.weights {
        Some(p) => {
            // zero the pruned positions but keep each layer's stored scale
            let layers = read_weights(p)?;
            let real: Vec<RealLayerWeights> = layers.iter().map(dequantize).collect();
            let (kept, _) = prune_magnitude(&real, args.rate, scope)?;
            layers
                .iter()
                .zip(&kept)
                .map(|(l, r)| {
                    let values = l
                        .values()
                        .iter()
                        .zip(&r.values)
                        .map(|(&q, &v)| if v == 0.0 { 0 } else { q })
                        .collect();
                    LayerWeights::new(
                        l.out_channels(),
                        l.in_channels(),
                        l.kernel_size(),
                        l.scale(),
                        values,
                    )
                })
                .collect::<sparse_snn::Result<_>>()?
        }
        None => {
            let net = args.network()?;
            let synth = synthetic_weights(&net, args.seed, 0.0)?;
            let real: Vec<RealLayerWeights> = synth.iter().map(dequantize).collect();
            let (kept, _) = prune_magnitude(&real, args.rate, scope)?;
            kept.iter()
                .map(quantize8)
                .collect::<sparse_snn::Result<_>>()?
        }
    };
    write_atomic(
        &dir.join(WEIGHTS_FILE),
        &encode_weights(&pruned, StorageFormat::Bitmask),
    )?;

    let mut t = Table::new(&["layer", "k", "total", "nonzero", "density"]);
    let (mut total, mut nonzero) = (0, 0);
    for (i, l) in pruned.iter().enumerate() {
        let n = l.values().len();
        total += n;
        nonzero += l.nnz();
        t.row(vec![
            i.to_string(),
            l.kernel_size().to_string(),
            n.to_string(),
            l.nnz().to_string(),
            format!("{:.4}", l.density()),
        ]);
    }
    let density = if total == 0 {
        0.0
    } else {
        nonzero as f64 / total as f64
    };
    t.row(vec![
        "all".into(),
        "-".into(),
        total.to_string(),
        nonzero.to_string(),
        format!("{density:.4}"),
    ]);
    stdout.write_all(t.render(args.format).as_bytes())?;
    Ok(())
}

fn run_network(
    args: &CommonArgs,
) -> Result<(NetworkSpec, Vec<SparseLayer>, NetworkRun, MemoryConfig)> {
    let net = args.network()?;
    let mem = args.memory()?;
    let weights: Vec<SparseLayer> = args
        .load_weights(Some(&net))?
        .iter()
        .map(LayerWeights::to_sparse)
        .collect();
    check_weights(&net, &weights)?;
    let img = args.image(&net)?;
    let run = network_forward(&img, &net, &weights, &LifParams::default(), &mem)?;
    if run.report.saturations > 0 {
        eprintln!(
            "warning: {} fixed-point saturation events during inference",
            run.report.saturations
        );
    }
    Ok((net, weights, run, mem))
}

pub fn cmd_infer(args: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let dir = args.out_dir()?.to_path_buf();
    let (net, weights, run, _) = run_network(args)?;

    let predicted: u64 = network_schedule(&net, &weights)?
        .iter()
        .map(|s| s.cycles)
        .sum();
    if predicted != run.report.cycles {
        return Err(InternalError(format!(
            "schedule predicts {predicted} cycles, execution took {}",
            run.report.cycles
        ))
        .into());
    }

    for (i, out) in run.outputs.iter().enumerate() {
        let data = match out {
            LayerOutput::Spikes(s) => TensorData::Spikes(s.clone()),
            LayerOutput::Potentials(p) => TensorData::Potentials(p.clone()),
        };
        write_atomic(
            &dir.join(format!("layer_{i:02}.snnt")),
            &encode_tensor(&data),
        )?;
    }
    write_atomic(&dir.join("report.txt"), run.report.to_text().as_bytes())?;
    write_atomic(&dir.join("report.csv"), run.report.to_csv().as_bytes())?;
    stdout.write_all(run.report.render(args.format.into()).as_bytes())?;
    Ok(())
}

pub fn cmd_compress_report(args: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let layers = args.load_weights(None)?;
    let mut t = Table::new(&[
        "layer",
        "kernels",
        "nonzero",
        "dense_bits",
        "bitmask_bits",
        "csr_bits",
        "saving_vs_dense_pct",
        "saving_vs_csr_pct",
    ]);
    let mut totals = [0u64; 4];
    for (i, l) in layers.iter().enumerate() {
        let bits = StorageFormat::ALL.map(|f| storage_bits(l, f));
        let [dense, bitmask, csr] = bits;
        totals[0] += l.nnz() as u64;
        totals[1] += dense;
        totals[2] += bitmask;
        totals[3] += csr;
        t.row(vec![
            i.to_string(),
            (l.out_channels() * l.in_channels()).to_string(),
            l.nnz().to_string(),
            dense.to_string(),
            bitmask.to_string(),
            csr.to_string(),
            pct(bitmask, dense),
            pct(bitmask, csr),
        ]);
    }
    if !layers.is_empty() {
        let kernels: usize = layers
            .iter()
            .map(|l| l.out_channels() * l.in_channels())
            .sum();
        t.row(vec![
            "total".into(),
            kernels.to_string(),
            totals[0].to_string(),
            totals[1].to_string(),
            totals[2].to_string(),
            totals[3].to_string(),
            pct(totals[2], totals[1]),
            pct(totals[2], totals[3]),
        ]);
    }
    stdout.write_all(t.render(args.format).as_bytes())?;
    Ok(())
}

/// Input-channel and output-channel organizations analyzed against the
/// spatial baseline, as `(lanes, h_par, w_par)`.
const ORGS: [(usize, usize, usize); 4] = [(1, 18, 32), (2, 18, 16), (4, 9, 16), (8, 9, 8)];
const FIFO_DEPTHS: [Option<usize>; 5] = [Some(0), Some(1), Some(2), Some(4), None];

pub fn cmd_analyze(args: &CommonArgs, mode: AnalyzeMode, stdout: &mut dyn Write) -> Result<()> {
    let table = match mode {
        AnalyzeMode::Miout => {
            let (net, _, run, _) = run_network(args)?;
            let mut t = Table::new(&["layer", "kind", "in_t", "input_miout"]);
            for (i, layer) in net.layers().iter().enumerate() {
                let value = match i.checked_sub(1).and_then(|p| run.outputs[p].spikes()) {
                    Some(s) if s.steps() >= 2 => format!("{:.4}", miout(s)?.mean),
                    _ => "n/a".into(),
                };
                t.row(vec![
                    i.to_string(),
                    layer.kind.to_string(),
                    layer.in_t.to_string(),
                    value,
                ]);
            }
            t
        }
        AnalyzeMode::Parallelism => {
            let net = args.network()?;
            let weights: Vec<SparseLayer> = args
                .load_weights(Some(&net))?
                .iter()
                .map(LayerWeights::to_sparse)
                .collect();
            check_weights(&net, &weights)?;
            let workloads = net
                .stages()
                .iter()
                .zip(&weights)
                .map(|(s, w)| {
                    let bits = if s.role == StageRole::Encode { 8 } else { 1 };
                    let per_tile = (s.shape().tiles() * s.in_t * bits) as u64;
                    Workload::new(w.nnz_matrix()).map(|wl| (wl, per_tile))
                })
                .collect::<sparse_snn::Result<Vec<_>>>()?;
            let total = |org: &PeOrg| -> Result<u64> {
                let mut sum = 0;
                for (wl, reps) in &workloads {
                    sum += parallelism_latency(org, wl)? * reps;
                }
                Ok(sum)
            };
            let spatial = total(&PeOrg::spatial())?;
            let mut t = Table::new(&[
                "scheme",
                "channel_par",
                "h_par",
                "w_par",
                "fifo_depth",
                "cycles",
                "relative",
            ]);
            let mut push = |scheme: &str, org: &PeOrg, cycles: u64| {
                t.row(vec![
                    scheme.into(),
                    org.channel_par.to_string(),
                    org.h_par.to_string(),
                    org.w_par.to_string(),
                    org.fifo_depth.map_or("inf".into(), |d| d.to_string()),
                    cycles.to_string(),
                    format!("{:.4}", cycles as f64 / spatial.max(1) as f64),
                ]);
            };
            push("spatial", &PeOrg::spatial(), spatial);
            for &(p, h, w) in &ORGS {
                for depth in FIFO_DEPTHS {
                    let org = PeOrg::input_parallel(p, h, w, depth)?;
                    push("input", &org, total(&org)?);
                }
            }
            for &(p, h, w) in &ORGS[1..] {
                let org = PeOrg::output_parallel(p, h, w)?;
                push("output", &org, total(&org)?);
            }
            t
        }
        AnalyzeMode::Traffic => {
            let net = args.network()?;
            let mem = args.memory()?;
            let weights: Vec<SparseLayer> = args
                .load_weights(Some(&net))?
                .iter()
                .map(LayerWeights::to_sparse)
                .collect();
            let traffic = network_traffic(&net, &weights, &mem)?;
            let mut t = Table::new(&[
                "stage",
                "name",
                "input_bits",
                "refetch",
                "output_bits",
                "weight_bits",
                "weights_fit",
                "energy_j",
            ]);
            for (i, (s, tr)) in net.stages().iter().zip(&traffic.stages).enumerate() {
                let bits = tr.input_bits + tr.output_bits + tr.weight_bits;
                t.row(vec![
                    i.to_string(),
                    format!("{}:{}", s.layer, s.name),
                    tr.input_bits.to_string(),
                    tr.refetch_factor.to_string(),
                    tr.output_bits.to_string(),
                    tr.weight_bits.to_string(),
                    tr.weights_fit.to_string(),
                    format!("{:e}", sparse_snn::sim::dram_energy(bits as f64)),
                ]);
            }
            t.row(vec![
                "total".into(),
                "-".into(),
                traffic.input_bits().to_string(),
                "-".into(),
                traffic.output_bits().to_string(),
                traffic.weight_bits().to_string(),
                "-".into(),
                format!("{:e}", traffic.energy()),
            ]);
            t
        }
    };
    stdout.write_all(table.render(args.format).as_bytes())?;
    Ok(())
}
