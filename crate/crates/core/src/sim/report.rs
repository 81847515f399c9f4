use std::fmt::Write as _;
use std::str::FromStr;

use super::DramTraffic;
use crate::engine::GateStats;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::param(format!("unknown report format '{other}'"))),
        }
    }
}

/// Frame-level simulation summary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimReport {
    pub cycles: u64,
    pub enabled_accum: u64,
    pub gated_accum: u64,
    pub dram_bits_in: u64,
    pub dram_bits_out: u64,
    pub dram_bits_w: u64,
    pub energy_dram_j: f64,
    pub fps: f64,
    /// Saturation events; not part of the serialized report.
    pub saturations: u64,
}

impl SimReport {
    pub const FIELDS: [&'static str; 8] = [
        "cycles",
        "enabled_accum",
        "gated_accum",
        "dram_bits_in",
        "dram_bits_out",
        "dram_bits_w",
        "energy_dram_j",
        "fps",
    ];

    pub fn new(stats: GateStats, traffic: &DramTraffic, clock_hz: f64) -> Self {
        SimReport {
            cycles: stats.cycles,
            enabled_accum: stats.enabled_accum,
            gated_accum: stats.gated_accum,
            dram_bits_in: traffic.input_bits(),
            dram_bits_out: traffic.output_bits(),
            dram_bits_w: traffic.weight_bits(),
            energy_dram_j: traffic.energy(),
            fps: if stats.cycles == 0 {
                f64::INFINITY
            } else {
                clock_hz / stats.cycles as f64
            },
            saturations: stats.saturations,
        }
    }

    pub fn dram_bits_total(&self) -> u64 {
        self.dram_bits_in + self.dram_bits_out + self.dram_bits_w
    }

    fn values(&self) -> [String; 8] {
        [
            self.cycles.to_string(),
            self.enabled_accum.to_string(),
            self.gated_accum.to_string(),
            self.dram_bits_in.to_string(),
            self.dram_bits_out.to_string(),
            self.dram_bits_w.to_string(),
            self.energy_dram_j.to_string(),
            self.fps.to_string(),
        ]
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in Self::FIELDS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    /// Header row plus one value row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::FIELDS.join(","), self.values().join(","))
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.to_text(),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    fn from_pairs<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut r = SimReport::default();
        let mut seen = [false; 8];
        for (k, v) in pairs {
            let idx = Self::FIELDS
                .iter()
                .position(|f| *f == k)
                .ok_or_else(|| Error::corrupt(format!("unknown report field '{k}'")))?;
            let int = || {
                v.parse::<u64>()
                    .map_err(|e| Error::corrupt(format!("{k}: {e}")))
            };
            let float = || {
                v.parse::<f64>()
                    .map_err(|e| Error::corrupt(format!("{k}: {e}")))
            };
            match idx {
                0 => r.cycles = int()?,
                1 => r.enabled_accum = int()?,
                2 => r.gated_accum = int()?,
                3 => r.dram_bits_in = int()?,
                4 => r.dram_bits_out = int()?,
                5 => r.dram_bits_w = int()?,
                6 => r.energy_dram_j = float()?,
                _ => r.fps = float()?,
            }
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::corrupt(format!(
                "report missing field '{}'",
                Self::FIELDS[i]
            )));
        }
        Ok(r)
    }

    pub fn parse_text(s: &str) -> Result<Self> {
        let pairs = s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once(':')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::corrupt(format!("malformed report line '{l}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(pairs.into_iter())
    }

    pub fn parse_csv(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::corrupt("empty CSV report"))?;
        let values = lines
            .next()
            .ok_or_else(|| Error::corrupt("CSV report has no data row"))?;
        let keys: Vec<&str> = header.split(',').collect();
        let vals: Vec<&str> = values.split(',').collect();
        if keys.len() != vals.len() {
            return Err(Error::corrupt("CSV header and row differ in length"));
        }
        Self::from_pairs(keys.into_iter().zip(vals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimReport {
        SimReport {
            cycles: 1234,
            enabled_accum: 99,
            gated_accum: 1,
            dram_bits_in: 10,
            dram_bits_out: 20,
            dram_bits_w: 30,
            energy_dram_j: 4.2e-9,
            fps: 405186.4,
            saturations: 0,
        }
    }

    #[test]
    fn text_and_csv_carry_the_same_numbers() {
        let r = sample();
        let text = r.to_text();
        assert!(text.starts_with("cycles: 1234\n"));
        assert!(text.contains("dram_bits_w: 30\n"));
        assert_eq!(SimReport::parse_text(&text).unwrap(), r);
        assert_eq!(SimReport::parse_csv(&r.to_csv()).unwrap(), r);
        assert!(r.to_csv().starts_with(
            "cycles,enabled_accum,gated_accum,dram_bits_in,dram_bits_out,dram_bits_w,energy_dram_j,fps\n"
        ));
    }

    #[test]
    fn energy_follows_traffic() {
        use crate::sim::StageTraffic;
        let traffic = DramTraffic {
            stages: vec![StageTraffic {
                input_bits: 1_000_000,
                refetch_factor: 1,
                output_bits: 0,
                weight_bits: 0,
                weights_fit: true,
            }],
        };
        let stats = GateStats {
            cycles: 500,
            ..GateStats::default()
        };
        let r = SimReport::new(stats, &traffic, 500e6);
        assert!((r.energy_dram_j - 70e-6).abs() < 1e-15);
        assert_eq!(r.fps, 1e6);
    }

    #[test]
    fn missing_field_rejected() {
        assert!(SimReport::parse_text("cycles: 1\n").is_err());
        assert!(SimReport::parse_text("bogus: 1\n").is_err());
    }
}
