//! Latency of alternative PE organizations for sparse weights.
//!
//! All organizations share the same 576 PEs. An organization with
//! `h_par x w_par` positions per channel lane needs `576 / (h_par * w_par)`
//! passes to cover one 18x32 tile, so every nonzero weight costs that many
//! cycles on its lane.
//!
//! Input-channel lanes each push one partial result per input channel into
//! a FIFO. An adder-tree merger pops one entry from every lane (one channel
//! group) per merge, taking `merge_cycles`. A lane whose FIFO is full stalls
//! until a merge frees a slot; with depth 0 a lane waits until its own
//! result has been merged.

use crate::error::{Error, Result};
use crate::tensor::TILE_POSITIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelScheme {
    Spatial,
    InputChannel,
    OutputChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeOrg {
    pub scheme: ParallelScheme,
    /// Lanes along the channel dimension (input or output, by scheme).
    pub channel_par: usize,
    pub h_par: usize,
    pub w_par: usize,
    /// FIFO entries per lane; `None` is unbounded.
    pub fifo_depth: Option<usize>,
    pub merge_cycles: u64,
}

impl PeOrg {
    /// (1, 18, 32): the whole tile processed by all PEs at once.
    pub fn spatial() -> Self {
        PeOrg {
            scheme: ParallelScheme::Spatial,
            channel_par: 1,
            h_par: 18,
            w_par: 32,
            fifo_depth: Some(0),
            merge_cycles: 1,
        }
    }

    pub fn input_parallel(
        channel_par: usize,
        h_par: usize,
        w_par: usize,
        fifo_depth: Option<usize>,
    ) -> Result<Self> {
        let org = PeOrg {
            scheme: ParallelScheme::InputChannel,
            channel_par,
            h_par,
            w_par,
            fifo_depth,
            merge_cycles: 1,
        };
        org.validate()?;
        Ok(org)
    }

    pub fn output_parallel(channel_par: usize, h_par: usize, w_par: usize) -> Result<Self> {
        let org = PeOrg {
            scheme: ParallelScheme::OutputChannel,
            channel_par,
            h_par,
            w_par,
            fifo_depth: Some(0),
            merge_cycles: 1,
        };
        org.validate()?;
        Ok(org)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_par * self.h_par * self.w_par != TILE_POSITIONS {
            return Err(Error::param(format!(
                "PE organization ({}, {}, {}) must use exactly {TILE_POSITIONS} PEs",
                self.channel_par, self.h_par, self.w_par
            )));
        }
        if self.scheme == ParallelScheme::Spatial && self.channel_par != 1 {
            return Err(Error::param(
                "spatial organization has a single channel lane",
            ));
        }
        if self.merge_cycles == 0 {
            return Err(Error::param("merge must take at least one cycle"));
        }
        Ok(())
    }

    /// Passes needed to cover one tile with `h_par x w_par` PEs per lane.
    pub fn passes(&self) -> u64 {
        TILE_POSITIONS.div_ceil(self.h_par * self.w_par) as u64
    }
}

/// Nonzero weight counts indexed `[output channel][input channel]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    nnz: Vec<Vec<usize>>,
}

impl Workload {
    pub fn new(nnz: Vec<Vec<usize>>) -> Result<Self> {
        let c = nnz.first().map_or(0, Vec::len);
        if nnz.iter().any(|row| row.len() != c) {
            return Err(Error::shape("workload rows differ in input-channel count"));
        }
        Ok(Workload { nnz })
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.nnz
    }

    pub fn total(&self) -> u64 {
        self.nnz.iter().flatten().map(|&n| n as u64).sum()
    }
}

/// Cycles to process one tile of `workload` with organization `org`.
pub fn parallelism_latency(org: &PeOrg, workload: &Workload) -> Result<u64> {
    org.validate()?;
    if org.channel_par == 1 {
        return Ok(workload.total() * org.passes());
    }
    Ok(match org.scheme {
        ParallelScheme::Spatial => unreachable!("validated to a single lane"),
        ParallelScheme::InputChannel => workload
            .rows()
            .iter()
            .map(|row| input_channel_latency(row, org))
            .sum(),
        ParallelScheme::OutputChannel => output_channel_latency(workload, org),
    })
}

fn input_channel_latency(nnz: &[usize], org: &PeOrg) -> u64 {
    let lanes = org.channel_par;
    let passes = org.passes();
    let m = org.merge_cycles;
    let groups = nnz.len().div_ceil(lanes);
    if groups == 0 {
        return 0;
    }
    let job = |g: usize, lane: usize| nnz.get(g * lanes + lane).map_or(0, |&n| n as u64 * passes);

    // start time of each lane's next job, and start time of each merge
    let mut lane_free = vec![0u64; lanes];
    let mut merge_start: Vec<u64> = Vec::with_capacity(groups);
    let mut pushed = vec![0u64; lanes];
    for g in 0..groups {
        for lane in 0..lanes {
            let done = lane_free[lane] + job(g, lane);
            pushed[lane] = match org.fifo_depth {
                Some(d) if d > 0 && g >= d => done.max(merge_start[g - d] + m),
                _ => done,
            };
        }
        let prev = merge_start.last().map_or(0, |&s| s + m);
        let start = pushed.iter().copied().max().unwrap_or(0).max(prev);
        merge_start.push(start);
        for lane in 0..lanes {
            lane_free[lane] = match org.fifo_depth {
                Some(0) => start + m,
                _ => pushed[lane],
            };
        }
    }
    merge_start[groups - 1] + m
}

fn output_channel_latency(workload: &Workload, org: &PeOrg) -> u64 {
    let passes = org.passes();
    let rows = workload.rows();
    let in_c = rows.first().map_or(0, Vec::len);
    rows.chunks(org.channel_par)
        .map(|group| {
            (0..in_c)
                .map(|c| group.iter().map(|row| row[c]).max().unwrap_or(0) as u64 * passes)
                .sum::<u64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wl(rows: Vec<Vec<usize>>) -> Workload {
        Workload::new(rows).unwrap()
    }

    #[test]
    fn spatial_is_sum_of_nnz() {
        let w = wl(vec![vec![3, 0, 5, 1], vec![2, 2, 2, 2]]);
        assert_eq!(parallelism_latency(&PeOrg::spatial(), &w).unwrap(), 17);
    }

    #[test]
    fn single_input_lane_reduces_to_spatial() {
        let w = wl(vec![vec![3, 0, 5, 1]]);
        let org = PeOrg::input_parallel(1, 18, 32, Some(4)).unwrap();
        assert_eq!(parallelism_latency(&org, &w).unwrap(), 9);
    }

    #[test]
    fn balanced_unbounded_fifo_is_lane_sum_plus_drain() {
        // 16 channels of 3 nonzeros on 8 lanes, 8 passes per job
        let w = wl(vec![vec![3; 16]]);
        let org = PeOrg::input_parallel(8, 9, 8, None).unwrap();
        let total_lane_work = 16 * 3 * 8;
        assert_eq!(
            parallelism_latency(&org, &w).unwrap(),
            total_lane_work / 8 + 1
        );
    }

    #[test]
    fn concentrated_workload_gets_no_speedup() {
        let mut row = vec![0; 8];
        row[0] = 9;
        let w = wl(vec![row]);
        let spatial = parallelism_latency(&PeOrg::spatial(), &w).unwrap();
        let org = PeOrg::input_parallel(8, 9, 8, None).unwrap();
        let lat = parallelism_latency(&org, &w).unwrap();
        // one lane carries everything at 8 passes per weight
        assert_eq!(lat, 8 * spatial + 1);
    }

    #[test]
    fn hand_traced_fifo_stall() {
        // 2 lanes, 288 PEs each -> 2 passes per weight.
        // lane 0 jobs: 2, 0, 2 (x2 passes = 4, 0, 4); lane 1 jobs: 0, 3, 0 (0, 6, 0)
        let w = wl(vec![vec![2, 0, 0, 3, 2, 0]]);
        let depth0 = PeOrg::input_parallel(2, 18, 16, Some(0)).unwrap();
        // g0: pushes (4, 0) merge@4; lanes free at 5
        // g1: pushes (5, 11) merge@11; lanes free at 12
        // g2: pushes (16, 12) merge@16 -> done 17
        assert_eq!(parallelism_latency(&depth0, &w).unwrap(), 17);
        let depth1 = PeOrg::input_parallel(2, 18, 16, Some(1)).unwrap();
        // g0: pushes (4, 0) merge@4
        // g1: lane0 done 4, slot frees at 5 -> 5; lane1 done 6 -> 6; merge@6
        // g2: lane0 5+4=9 vs 6+1=7 -> 9; lane1 6+0 vs 7 -> 7; merge@9 -> done 10
        assert_eq!(parallelism_latency(&depth1, &w).unwrap(), 10);
    }

    #[test]
    fn output_parallel_waits_for_slowest_channel() {
        let w = wl(vec![vec![1, 4], vec![3, 2]]);
        let org = PeOrg::output_parallel(2, 18, 16).unwrap();
        // (max(1,3) + max(4,2)) * 2 passes
        assert_eq!(parallelism_latency(&org, &w).unwrap(), 14);
        let even = wl(vec![vec![2, 3], vec![2, 3]]);
        assert_eq!(
            parallelism_latency(&org, &even).unwrap(),
            parallelism_latency(&PeOrg::spatial(), &even).unwrap()
        );
    }

    #[test]
    fn organizations_must_use_all_pes() {
        assert!(PeOrg::input_parallel(8, 9, 9, None).is_err());
        assert!(PeOrg::output_parallel(4, 9, 16).is_ok());
    }
}
