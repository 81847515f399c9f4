use std::fmt;
use std::str::FromStr;

use super::spec::{LayerKind, NetworkSpec};
use crate::error::{Error, Result};

/// Last layer that still runs a single time step. `Conv(n)` names the n-th
/// plain convolutional layer (encode or conv, 1-based); `Block(n, m)` the
/// m-th CSP block after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutPoint {
    None,
    Conv(usize),
    Block(usize, usize),
}

impl fmt::Display for CutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutPoint::None => f.write_str("none"),
            CutPoint::Conv(n) => write!(f, "C{n}"),
            CutPoint::Block(n, m) => write!(f, "C{n}B{m}"),
        }
    }
}

impl FromStr for CutPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::param(format!(
                "bad cut point '{s}', expected none, C<n> or C<n>B<m>"
            ))
        };
        if s.eq_ignore_ascii_case("none") {
            return Ok(CutPoint::None);
        }
        let rest = s.strip_prefix('C').ok_or_else(bad)?;
        let positive = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(bad);
        match rest.split_once('B') {
            Some((n, m)) => Ok(CutPoint::Block(positive(n)?, positive(m)?)),
            None => Ok(CutPoint::Conv(positive(rest)?)),
        }
    }
}

impl CutPoint {
    /// Index of the named layer in `net`.
    pub fn layer_index(&self, net: &NetworkSpec) -> Result<Option<usize>> {
        let layers = net.layers();
        let nth_conv = |n: usize| {
            layers
                .iter()
                .enumerate()
                .filter(|(_, l)| matches!(l.kind, LayerKind::Encode | LayerKind::Conv))
                .nth(n - 1)
                .map(|(i, _)| i)
                .ok_or_else(|| Error::param(format!("network has no convolutional layer C{n}")))
        };
        match *self {
            CutPoint::None => Ok(None),
            CutPoint::Conv(n) => nth_conv(n).map(Some),
            CutPoint::Block(n, m) => {
                let c = nth_conv(n)?;
                layers[c + 1..]
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.kind == LayerKind::CspBlock)
                    .nth(m - 1)
                    .map(|(i, _)| Some(c + 1 + i))
                    .ok_or_else(|| Error::param(format!("no CSP block B{m} after C{n}")))
            }
        }
    }
}

/// Runs every layer up to and including the cut at one time step; the next
/// layer expands one step into `full_t`, and the rest run `full_t` steps.
pub fn mixed_timestep_plan(net: &NetworkSpec, cut: CutPoint, full_t: usize) -> Result<NetworkSpec> {
    let Some(idx) = cut.layer_index(net)? else {
        return Ok(net.clone());
    };
    let mut layers = net.layers().to_vec();
    let transition = idx + 1;
    match layers.get(transition) {
        None => {
            return Err(Error::param(format!(
                "cut point {cut} leaves no multi-step layer"
            )))
        }
        Some(l) if l.kind == LayerKind::Output => {
            return Err(Error::param(format!(
                "cut point {cut} would make the output layer expand time steps"
            )))
        }
        Some(_) => {}
    }
    for (i, l) in layers.iter_mut().enumerate() {
        (l.in_t, l.out_t) = match i {
            i if i < transition => (1, 1),
            i if i == transition => (1, full_t),
            _ => (full_t, full_t),
        };
    }
    net.with_layers(layers)
}
