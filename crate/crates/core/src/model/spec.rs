use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::neuron::PoolConfig;
use crate::sim::StageShape;
use crate::tensor::PIXEL_BITS;
use crate::weights::MAX_CHANNELS;

pub const MAX_STEPS: usize = 4;
pub const MAX_INPUT_W: usize = 1024;
pub const MAX_INPUT_H: usize = 576;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    /// Bit-serial convolution of the multibit input image.
    Encode,
    Conv,
    /// CSP basic block: two stacked convolutions, a 1x1 shortcut with half
    /// the channels, and a 1x1 aggregation over both.
    CspBlock,
    /// Convolution with time-averaged, non-spiking readout.
    Output,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Encode => "encode",
            LayerKind::Conv => "conv",
            LayerKind::CspBlock => "csp_block",
            LayerKind::Output => "output",
        })
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encode" => Ok(LayerKind::Encode),
            "conv" => Ok(LayerKind::Conv),
            "csp_block" => Ok(LayerKind::CspBlock),
            "output" => Ok(LayerKind::Output),
            other => Err(Error::param(format!("unknown layer kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Filled in by [`NetworkSpec::new`] from the preceding layer.
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub in_t: usize,
    pub out_t: usize,
    pub maxpool: bool,
}

impl LayerSpec {
    pub fn new(
        kind: LayerKind,
        out_c: usize,
        k: usize,
        in_t: usize,
        out_t: usize,
        maxpool: bool,
    ) -> Self {
        LayerSpec {
            kind,
            in_c: 0,
            out_c,
            k,
            in_t,
            out_t,
            maxpool,
        }
    }

    pub fn pool(&self) -> Option<PoolConfig> {
        self.maxpool.then(PoolConfig::default)
    }
}

/// What a convolution stage does with its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageRole {
    Encode,
    Spiking,
    Output,
}

/// One physical convolution. Plain layers map to one stage; a CSP block
/// expands to four, in the order stacked_a, stacked_b, shortcut, aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub layer: usize,
    pub name: &'static str,
    pub role: StageRole,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub in_t: usize,
    pub out_t: usize,
    pub pool: Option<PoolConfig>,
    pub height: usize,
    pub width: usize,
}

impl ConvStage {
    pub fn shape(&self) -> StageShape {
        let output = self.role == StageRole::Output;
        StageShape {
            height: self.height,
            width: self.width,
            in_c: self.in_c,
            out_c: self.out_c,
            k: self.k,
            in_t: self.in_t,
            out_t: self.out_t,
            bits: if self.role == StageRole::Encode {
                PIXEL_BITS
            } else {
                1
            },
            pool: self.pool,
            output_value_bits: if output { 16 } else { 1 },
            output_steps: if output { 1 } else { self.out_t },
        }
    }
}

/// Ordered layer list plus the input image geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        mut layers: Vec<LayerSpec>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || width > MAX_INPUT_W || height > MAX_INPUT_H {
            return Err(Error::param(format!(
                "input {width}x{height} outside 1..={MAX_INPUT_W} x 1..={MAX_INPUT_H}"
            )));
        }
        if channels == 0 || channels > MAX_CHANNELS {
            return Err(Error::param(format!(
                "input channels {channels} out of range"
            )));
        }
        let n = layers.len();
        let (mut prev_c, mut prev_t) = (channels, 1);
        for (i, l) in layers.iter_mut().enumerate() {
            l.in_c = prev_c;
            let ctx = |msg: String| Error::param(format!("layer {i} ({}): {msg}", l.kind));
            if l.kind == LayerKind::Encode && i != 0 {
                return Err(ctx("encode layer must come first".into()));
            }
            if i == 0 && l.kind != LayerKind::Encode {
                return Err(ctx("first layer must be an encode layer".into()));
            }
            if l.kind == LayerKind::Output && i + 1 != n {
                return Err(ctx("output layer must come last".into()));
            }
            if l.k != 1 && l.k != 3 {
                return Err(ctx(format!("kernel size {} not in {{1, 3}}", l.k)));
            }
            if l.out_c == 0 || l.out_c > MAX_CHANNELS {
                return Err(ctx(format!("out_C {} out of range", l.out_c)));
            }
            if l.in_t == 0 || l.out_t == 0 || l.in_t > MAX_STEPS || l.out_t > MAX_STEPS {
                return Err(ctx(format!("time steps must be in 1..={MAX_STEPS}")));
            }
            if l.in_t > l.out_t || (l.in_t != l.out_t && l.in_t != 1) {
                return Err(ctx(format!(
                    "in_T={} out_T={} unsupported; need in_T == out_T or in_T == 1",
                    l.in_t, l.out_t
                )));
            }
            if l.in_t != prev_t {
                return Err(ctx(format!(
                    "in_T={} but previous layer produces {prev_t}",
                    l.in_t
                )));
            }
            if l.kind == LayerKind::Output && (l.in_t != l.out_t || l.maxpool) {
                return Err(ctx("output layer needs in_T == out_T and no pooling".into()));
            }
            if l.kind == LayerKind::CspBlock && l.out_c % 2 != 0 {
                return Err(ctx("CSP block needs an even channel count".into()));
            }
            prev_c = l.out_c;
            prev_t = l.out_t;
        }
        let net = NetworkSpec {
            width,
            height,
            channels,
            layers,
        };
        for s in net.stages() {
            if s.in_c > MAX_CHANNELS {
                return Err(Error::param(format!(
                    "layer {} stage {} has {} input channels, limit {MAX_CHANNELS}",
                    s.layer, s.name, s.in_c
                )));
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Input `(height, width)` of every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers.len());
        let (mut h, mut w) = (self.height, self.width);
        for l in &self.layers {
            dims.push((h, w));
            if let Some(p) = l.pool() {
                h = p.output_len(h);
                w = p.output_len(w);
            }
        }
        dims
    }

    pub fn stages(&self) -> Vec<ConvStage> {
        let mut out = Vec::new();
        for ((i, l), (h, w)) in self.layers.iter().enumerate().zip(self.layer_dims()) {
            let base = ConvStage {
                layer: i,
                name: "conv",
                role: StageRole::Spiking,
                in_c: l.in_c,
                out_c: l.out_c,
                k: l.k,
                in_t: l.in_t,
                out_t: l.out_t,
                pool: l.pool(),
                height: h,
                width: w,
            };
            match l.kind {
                LayerKind::Encode => out.push(ConvStage {
                    name: "encode",
                    role: StageRole::Encode,
                    ..base
                }),
                LayerKind::Conv => out.push(base),
                LayerKind::Output => out.push(ConvStage {
                    name: "output",
                    role: StageRole::Output,
                    ..base
                }),
                LayerKind::CspBlock => {
                    let (c, half) = (l.out_c, l.out_c / 2);
                    let steady = (l.out_t, l.out_t);
                    out.push(ConvStage {
                        name: "csp.stacked_a",
                        pool: None,
                        ..base
                    });
                    out.push(ConvStage {
                        name: "csp.stacked_b",
                        in_c: c,
                        in_t: steady.0,
                        pool: None,
                        ..base
                    });
                    out.push(ConvStage {
                        name: "csp.shortcut",
                        out_c: half,
                        k: 1,
                        pool: None,
                        ..base
                    });
                    out.push(ConvStage {
                        name: "csp.aggregate",
                        in_c: half + c,
                        k: 1,
                        in_t: steady.0,
                        out_t: steady.1,
                        ..base
                    });
                }
            }
        }
        out
    }

    /// Spatial output of the last layer.
    pub fn output_dims(&self) -> (usize, usize) {
        let last = self.stages().last().map(|s| s.shape().output_dims());
        last.unwrap_or((self.height, self.width))
    }

    /// The small stand-in network: encode(3->16, 3x3), conv(16->32, 3x3,
    /// pool, 1 -> 3 steps), CSP block(32), output(32->24, 1x1), on a 64x36
    /// image.
    pub fn reference() -> Self {
        NetworkSpec::new(
            64,
            36,
            3,
            vec![
                LayerSpec::new(LayerKind::Encode, 16, 3, 1, 1, false),
                LayerSpec::new(LayerKind::Conv, 32, 3, 1, 3, true),
                LayerSpec::new(LayerKind::CspBlock, 32, 3, 3, 3, false),
                LayerSpec::new(LayerKind::Output, 24, 1, 3, 3, false),
            ],
        )
        .expect("reference network is valid")
    }

    /// Rebuilds the network with modified layers, re-validating the chain.
    pub fn with_layers(&self, layers: Vec<LayerSpec>) -> Result<Self> {
        NetworkSpec::new(self.width, self.height, self.channels, layers)
    }

    /// Text form: a version line, an `input W H C` line, then one
    /// `kind out_C k in_T out_T pool_flag` line per layer.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "snn-net {FORMAT_VERSION}\ninput {} {} {}\n",
            self.width, self.height, self.channels
        );
        for l in &self.layers {
            s.push_str(&format!(
                "{} {} {} {} {} {}\n",
                l.kind, l.out_c, l.k, l.in_t, l.out_t, l.maxpool as u8
            ));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let bad = |n: usize, msg: &str| Error::corrupt(format!("network line {}: {msg}", n + 1));

        let (n, header) = lines
            .next()
            .ok_or_else(|| Error::corrupt("empty network file"))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["snn-net", v] if v.parse::<u32>().ok() == Some(FORMAT_VERSION) => {}
            ["snn-net", v] => return Err(bad(n, &format!("unsupported version {v}"))),
            _ => return Err(bad(n, "expected 'snn-net <version>'")),
        }

        let (n, input) = lines
            .next()
            .ok_or_else(|| Error::corrupt("missing input line"))?;
        let dims: Vec<&str> = input.split_whitespace().collect();
        if dims.len() != 4 || dims[0] != "input" {
            return Err(bad(n, "expected 'input <width> <height> <channels>'"));
        }
        let num = |n: usize, s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(n, &format!("bad number '{s}'")))
        };
        let (w, h, c) = (num(n, dims[1])?, num(n, dims[2])?, num(n, dims[3])?);

        let mut layers = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad(n, "expected 'kind out_C k in_T out_T pool_flag'"));
            }
            let kind: LayerKind = f[0]
                .parse()
                .map_err(|_| bad(n, &format!("unknown kind '{}'", f[0])))?;
            let pool = match f[5] {
                "0" => false,
                "1" => true,
                other => return Err(bad(n, &format!("pool flag must be 0 or 1, got '{other}'"))),
            };
            layers.push(LayerSpec::new(
                kind,
                num(n, f[1])?,
                num(n, f[2])?,
                num(n, f[3])?,
                num(n, f[4])?,
                pool,
            ));
        }
        NetworkSpec::new(w, h, c, layers)
    }
}
