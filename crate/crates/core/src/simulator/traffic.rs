//! Post-handshake data traffic over one shared FIFO medium.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::config::TrafficConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub source: u32,
    pub seq: u32,
    pub bytes: u32,
    pub sent_us: u64,
    pub recv_us: u64,
}

/// Throughput in bytes per second and mean end-to-end delay in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficStats<F> {
    pub packets: usize,
    pub bytes: u64,
    pub duration_s: F,
    pub throughput_bytes_per_s: F,
    pub eed_s: F,
}

fn cast<F: Float>(v: u64) -> F {
    F::from(v).expect("u64 fits a float")
}

fn seconds<F: Float>(us: u64) -> F {
    cast::<F>(us) / cast::<F>(1_000_000)
}

impl<F: Float> TrafficStats<F> {
    /// `N * |packet| / T` over the span from first send to last receipt,
    /// and the mean of `recv - send`. `None` when nothing was received.
    pub fn from_records(records: &[PacketRecord]) -> Option<Self> {
        let first = records.iter().map(|r| r.sent_us).min()?;
        let last = records.iter().map(|r| r.recv_us).max()?;
        let bytes: u64 = records.iter().map(|r| u64::from(r.bytes)).sum();
        let delay: u64 = records.iter().map(|r| r.recv_us - r.sent_us).sum();
        let n = cast::<F>(records.len() as u64);
        let duration_s = seconds::<F>(last - first);
        Some(Self {
            packets: records.len(),
            bytes,
            duration_s,
            throughput_bytes_per_s: cast::<F>(bytes) / duration_s,
            eed_s: seconds::<F>(delay) / n,
        })
    }

    /// Field-wise mean over repetitions.
    pub fn mean(runs: &[Self]) -> Option<Self> {
        let n = cast::<F>(runs.len() as u64);
        let first = runs.first()?;
        let sum = |f: fn(&Self) -> F| runs.iter().map(f).fold(F::zero(), |a, b| a + b) / n;
        Some(Self {
            packets: first.packets,
            bytes: first.bytes,
            duration_s: sum(|s| s.duration_s),
            throughput_bytes_per_s: sum(|s| s.throughput_bytes_per_s),
            eed_s: sum(|s| s.eed_s),
        })
    }
}

/// Transmission time of `bytes` at `bandwidth_bps`, rounded up to whole
/// microseconds.
pub fn transmission_us(bytes: u32, bandwidth_bps: u64) -> u64 {
    (u64::from(bytes) * 8 * 1_000_000).div_ceil(bandwidth_bps)
}

/// Every source emits `packets_per_sensor` packets every `interval_us`
/// from `start_us`. Packets cross the medium one at a time in creation
/// order, sources breaking ties in the order given.
pub fn simulate(sources: &[u32], start_us: u64, cfg: &TrafficConfig) -> Vec<PacketRecord> {
    let tx = transmission_us(cfg.packet_bytes, cfg.bandwidth_bps);
    let mut free_at = 0u64;
    let mut out = Vec::with_capacity(sources.len() * cfg.packets_per_sensor as usize);
    for seq in 0..cfg.packets_per_sensor {
        let created = start_us + u64::from(seq) * cfg.interval_us;
        for &source in sources {
            let begin = created.max(free_at);
            free_at = begin + tx;
            out.push(PacketRecord {
                source,
                seq,
                bytes: cfg.packet_bytes,
                sent_us: created,
                recv_us: free_at + cfg.propagation_us,
            });
        }
    }
    out
}
