//! End-to-end acceptance criteria, each checked against an independent
//! oracle or a published figure. Prints one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_snn::engine::{block_conv, encode_layer_conv, layer_forward, StageTiming};
use sparse_snn::model::{miout, NetworkSpec};
use sparse_snn::neuron::{FixedPoint, LifParams};
use sparse_snn::oracle::{dense_conv_oracle, Padding};
use sparse_snn::sim::{
    dram_energy, input_sram_bits, megabytes_to_bits, parallelism_latency, PeOrg, Workload,
};
use sparse_snn::tensor::{FeatureMap, MultibitTensor, SpikeTensor};
use sparse_snn::weights::{
    kernel_storage_bits, prune_layer, quantize8, BitmaskKernel, CsrKernel, DenseKernel,
    LayerWeights, RealLayerWeights, StorageFormat,
};
use sparse_snn_cli::synthetic_weights;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn random_weights(
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

fn random_spikes(
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

struct Instance {
    spikes: SpikeTensor,
    weights: LayerWeights,
}

/// Random single-tile instances: maps up to 32x18, up to 8 channels, 1x1
/// and 3x3 kernels at densities 0.1, 0.3 and 1.0.
fn instances(n: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..n)
        .map(|i| {
            let h = rng.gen_range(1..=18);
            let w = rng.gen_range(1..=32);
            let in_c = rng.gen_range(1..=8);
            let out_c = rng.gen_range(1..=8);
            let k = if i % 2 == 0 { 3 } else { 1 };
            let density = [0.1, 0.3, 1.0][i % 3];
            let p = rng.gen_range(0.05..0.95);
            Instance {
                spikes: random_spikes(&mut rng, 1, in_c, h, w, p),
                weights: random_weights(&mut rng, out_c, in_c, k, density),
            }
        })
        .collect()
}

fn oracle_equivalence() -> Check {
    let cases = instances(1000);
    let start = Instant::now();
    for (i, c) in cases.iter().enumerate() {
        let (got, _) =
            block_conv(&c.spikes, 0, &c.weights.to_sparse()).map_err(|e| e.to_string())?;
        let want = dense_conv_oracle(
            &FeatureMap::from_spikes(&c.spikes, 0),
            &c.weights,
            Padding::Replicate,
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            got.map(i64::from) == want,
            "instance {i}: sparse result differs from dense oracle"
        );
    }
    let took = start.elapsed();
    ensure!(
        took < Duration::from_secs(10),
        "1000 instances took {took:?}"
    );
    Ok(())
}

fn cycle_law() -> Check {
    for (i, c) in instances(1000).iter().enumerate() {
        let (_, stats) =
            block_conv(&c.spikes, 0, &c.weights.to_sparse()).map_err(|e| e.to_string())?;
        // one tile, one step, one plane: every nonzero weight costs one cycle
        let nnz = c.weights.values().iter().filter(|&&v| v != 0).count() as u64;
        ensure!(
            stats.cycles == nnz,
            "instance {i}: {} cycles for {nnz} nonzeros",
            stats.cycles
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_spikes(&mut rng, 1, 10, 36, 64, 0.4);
    // magnitudes 1..=127 quantize to themselves, so the dense layer has no zeros
    let real: Vec<f64> = (0..900)
        .map(|i| (1 + i % 127) as f64 * if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let full = RealLayerWeights::new(10, 10, 3, real).unwrap();
    let dense = quantize8(&full).unwrap();
    ensure!(
        dense.nnz() == 900,
        "dense layer has {} nonzeros",
        dense.nnz()
    );
    let (_, base) = block_conv(&x, 0, &dense.to_sparse()).map_err(|e| e.to_string())?;
    for (rate, kept) in [(0.7, 270u64), (0.5, 450), (0.9, 90)] {
        let pruned = quantize8(&prune_layer(&full, rate).unwrap()).unwrap();
        let (_, s) = block_conv(&x, 0, &pruned.to_sparse()).map_err(|e| e.to_string())?;
        ensure!(
            s.cycles * 900 == base.cycles * kept,
            "rate {rate}: {} cycles vs {} dense, expected factor {kept}/900",
            s.cycles,
            base.cycles
        );
    }
    Ok(())
}

fn gating_statistics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // center-tap kernels: the enable map is exactly the input tile
    let mut center = vec![0i8; 9];
    center[4] = 1;
    let layers = [
        LayerWeights::new(1, 1, 1, 1.0, vec![1]).unwrap(),
        LayerWeights::new(1, 1, 3, 1.0, center).unwrap(),
    ];
    for p in [0.1, 0.226, 0.5] {
        for layer in &layers {
            let tiles = 64;
            let mut enabled = 0u64;
            let mut total = 0u64;
            for _ in 0..tiles {
                let x = random_spikes(&mut rng, 1, 1, 18, 32, p);
                let (_, s) = block_conv(&x, 0, &layer.to_sparse()).map_err(|e| e.to_string())?;
                ensure!(
                    s.enabled_accum == x.count_ones() as u64,
                    "enabled count differs from popcount"
                );
                enabled += s.enabled_accum;
                total += s.enabled_accum + s.gated_accum;
            }
            let n = total as f64;
            let frac = enabled as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            ensure!(
                (frac - p).abs() <= 3.0 * sigma,
                "p={p}: enabled fraction {frac:.5} outside {p} +/- {:.5}",
                3.0 * sigma
            );
        }
    }
    Ok(())
}

fn miout_worked_example() -> Check {
    // 4 neurons fire at all 3 steps, 2 fire once or twice, 3 stay silent
    let counts = [3, 3, 3, 3, 1, 2, 0, 0, 0];
    let mut s = SpikeTensor::zeros(3, 1, 3, 3).unwrap();
    for (i, &c) in counts.iter().enumerate() {
        for t in 0..c {
            s.set(t, 0, i / 3, i % 3, true);
        }
    }
    let m = miout(&s).map_err(|e| e.to_string())?.mean;
    ensure!((m - 0.67).abs() <= 0.005, "mIoUT {m}");
    Ok(())
}

fn energy_formula() -> Check {
    let small_sram = 188.928 + 3.327 + 1.292;
    let large_sram = 5.456 + 3.327 + 1.292;
    for (mb, mj) in [(small_sram, 108.38), (large_sram, 5.64)] {
        let e = dram_energy(megabytes_to_bits(mb)) * 1e3;
        ensure!((e - mj).abs() <= 0.01, "{mb} MB -> {e} mJ, expected {mj}");
    }
    Ok(())
}

fn sram_sizing() -> Check {
    let kb = |bits: u64| bits as f64 / 8.0 / 1024.0;
    let a = input_sram_bits(18, 32, 512, 1);
    let b = input_sram_bits(18, 32, 384, 3);
    ensure!(a == 36 * 1024 * 8, "512 channels x 1 step = {} KB", kb(a));
    ensure!(b == 81 * 1024 * 8, "384 channels x 3 steps = {} KB", kb(b));
    Ok(())
}

fn codec_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..10_000 {
        let k = if i % 2 == 0 { 3 } else { 1 };
        let density = rng.gen_range(0.0..=1.0);
        let values: Vec<i8> = (0..k * k)
            .map(|_| {
                if rng.gen_bool(density) {
                    rng.gen_range(-127..=127)
                } else {
                    0
                }
            })
            .collect();
        let kernel = DenseKernel::new(k, values).unwrap();
        let bm = BitmaskKernel::encode(&kernel);
        ensure!(
            bm.decode() == kernel,
            "bitmask round trip failed on kernel {i}"
        );
        ensure!(
            bm.mask().count_ones() as usize == bm.values().len(),
            "popcount mismatch on kernel {i}"
        );
        ensure!(
            CsrKernel::encode(&kernel).decode() == kernel,
            "CSR round trip failed on kernel {i}"
        );
        let nnz = kernel.values().iter().filter(|&&v| v != 0).count() as u64;
        let k = k as u64;
        let ptr_bits = if k == 3 { 4 } else { 1 };
        let idx_bits = if k == 3 { 2 } else { 0 };
        ensure!(
            kernel_storage_bits(k as usize, nnz as usize, StorageFormat::Dense) == 8 * k * k,
            "dense bits"
        );
        ensure!(
            kernel_storage_bits(k as usize, nnz as usize, StorageFormat::Bitmask)
                == k * k + 8 * nnz,
            "bitmask bits"
        );
        ensure!(
            kernel_storage_bits(k as usize, nnz as usize, StorageFormat::Csr)
                == (k + 1) * ptr_bits + nnz * (idx_bits + 8),
            "CSR bits"
        );
    }
    ensure!(
        kernel_storage_bits(3, 2, StorageFormat::Bitmask) == 25,
        "3x3 with 2 nonzeros"
    );
    Ok(())
}

/// Plain integer convolution of an 8-bit image with edge replication.
fn image_conv(img: &MultibitTensor, w: &LayerWeights) -> Vec<i64> {
    let (c_in, h, wd) = (img.channels(), img.height(), img.width());
    let k = w.kernel_size() as isize;
    let mut out = Vec::new();
    for o in 0..w.out_channels() {
        for y in 0..h as isize {
            for x in 0..wd as isize {
                let mut acc = 0i64;
                for c in 0..c_in {
                    let kernel = w.kernel(o, c);
                    for r in 0..k {
                        for s in 0..k {
                            let yy = (y + r - k / 2).clamp(0, h as isize - 1) as usize;
                            let xx = (x + s - k / 2).clamp(0, wd as isize - 1) as usize;
                            acc += img.get(c, yy, xx) as i64
                                * kernel.get(r as usize, s as usize) as i64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn bit_serial_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..200 {
        let (c, h, w) = (
            rng.gen_range(1..=3),
            rng.gen_range(1..=18),
            rng.gen_range(1..=32),
        );
        let px = (0..c * h * w).map(|_| rng.gen()).collect();
        let img = MultibitTensor::from_vec(c, h, w, px).unwrap();
        let k = if i % 2 == 0 { 3 } else { 1 };
        let out_c = rng.gen_range(1..=4);
        let wt = random_weights(&mut rng, out_c, c, k, 0.5);
        let (got, _) = encode_layer_conv(&img, &wt.to_sparse()).map_err(|e| e.to_string())?;
        let got: Vec<i64> = got.as_slice().iter().map(|&v| v as i64).collect();
        ensure!(
            got == image_conv(&img, &wt),
            "instance {i}: bit-serial result differs"
        );
    }
    Ok(())
}

fn mixed_step_trace() -> Check {
    let lif = LifParams::default();
    ensure!(lif.threshold == FixedPoint::from_f64(0.5), "threshold");
    ensure!((lif.leak() - 0.25).abs() < 1e-12, "leak");
    let current = FixedPoint::from_f64(0.4);
    let w = LayerWeights::new(1, 1, 1, 1.0, vec![current.raw() as i8])
        .unwrap()
        .to_sparse();
    let x = SpikeTensor::from_vec(1, 1, 2, 2, vec![true; 4]).unwrap();
    let timing = StageTiming::new(1, 3).map_err(|e| e.to_string())?;
    let (s, stats) = layer_forward(&x, timing, None, &w, &lif).map_err(|e| e.to_string())?;
    ensure!(s.dims() == (3, 1, 2, 2), "output dims {:?}", s.dims());
    for t in 0..3 {
        let expect = t == 2;
        ensure!(
            s.plane(t, 0).iter().all(|&b| b == expect),
            "step {t}: expected spikes {expect}"
        );
    }
    ensure!(
        stats.cycles == 1,
        "convolution should run once, took {} cycles",
        stats.cycles
    );
    Ok(())
}

fn parallelism_ordering() -> Check {
    let net = NetworkSpec::reference();
    let layers = synthetic_weights(&net, 2024, 0.7).map_err(|e| e.to_string())?;
    let orgs = [(2, 18, 16), (4, 9, 16), (8, 9, 8)];
    for (i, l) in layers.iter().enumerate() {
        let wl = Workload::new(l.to_sparse().nnz_matrix()).map_err(|e| e.to_string())?;
        let spatial = parallelism_latency(&PeOrg::spatial(), &wl).map_err(|e| e.to_string())?;
        for (p, h, w) in orgs {
            let mut prev = u64::MAX;
            for depth in 0..=8 {
                let org = PeOrg::input_parallel(p, h, w, Some(depth)).map_err(|e| e.to_string())?;
                let lat = parallelism_latency(&org, &wl).map_err(|e| e.to_string())?;
                ensure!(
                    spatial <= lat,
                    "layer {i}, {p} lanes, depth {depth}: {lat} < spatial {spatial}"
                );
                ensure!(
                    lat <= prev,
                    "layer {i}, {p} lanes: latency rose to {lat} at depth {depth}"
                );
                prev = lat;
            }
        }
    }
    Ok(())
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = Command::new(env!("CARGO_BIN_EXE_sparse-snn"))
            .args(["infer", "--seed", "11", "--rate", "0.7", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            o.status.success(),
            "infer failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        results.push((o.stdout, dir_bytes(&out)));
    }
    ensure!(results[0].0 == results[1].0, "stdout reports differ");
    ensure!(results[0].1 == results[1].1, "output files differ");
    ensure!(
        results[0].1.len() == 6,
        "expected 4 layer tensors and 2 reports"
    );
    Ok(())
}

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "oracle equivalence (1000 instances, < 10 s)",
            oracle_equivalence,
        ),
        ("cycle law", cycle_law),
        ("gating statistics within 3 sigma", gating_statistics),
        ("mIoUT worked example = 0.67", miout_worked_example),
        ("DRAM energy 108.38 mJ / 5.64 mJ", energy_formula),
        ("input SRAM 36 KB / 81 KB", sram_sizing),
        (
            "codec round trip and storage bits (10000 kernels)",
            codec_round_trip,
        ),
        ("bit-serial identity (200 instances)", bit_serial_identity),
        ("one-step input expanded to three steps", mixed_step_trace),
        ("parallelism ordering", parallelism_ordering),
        ("inference determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("[PASS] {:>2}. {name}", i + 1),
            Err(msg) => {
                println!("[FAIL] {:>2}. {name}: {msg}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
