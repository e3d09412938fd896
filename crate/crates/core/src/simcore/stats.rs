//! Run statistics: transmission tallies and protocol observations.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::agent::{DropReason, PacketId, QueryKey};
use super::NodeId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindTally {
    pub count: u64,
    pub bytes: u64,
    pub control: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    /// Transmissions by message kind. A broadcast counts once.
    pub by_kind: BTreeMap<&'static str, KindTally>,
    pub control_packets: u64,
    pub control_bytes: u64,
    pub data_packets: u64,
    pub data_bytes: u64,
    /// Unicasts whose target was out of range at send time.
    pub link_losses: u64,
    pub data_generated: u64,
    pub data_delivered: u64,
    pub duplicate_deliveries: u64,
    pub drops: BTreeMap<DropReason, u64>,
    pub unreachable_reports: u64,
    pub unreachable_pairs: BTreeSet<(NodeId, NodeId)>,
    /// Unreachable reports for a pair that was connected at report time.
    pub connected_unreachables: u64,
    pub discoveries: u64,
    pub discovery_latency_sum: f64,
    pub cache_inserts: u64,
    /// Cache insertions whose route was not a path of the graph at that time.
    pub stale_cache_inserts: u64,
    pub queries_processed: u64,
    /// A janitor processed the same query twice.
    pub query_reprocessing: u64,
    pub hello_sessions: u64,
    pub events_processed: u64,
    pub invariant_violations: Vec<String>,
    #[doc(hidden)]
    pub delivered_ids: HashSet<PacketId>,
    #[doc(hidden)]
    pub processed_queries: HashSet<(NodeId, QueryKey)>,
}

impl SimStats {
    pub fn tally(&mut self, kind: &'static str, bytes: u32, control: bool) {
        let entry = self.by_kind.entry(kind).or_insert(KindTally {
            control,
            ..KindTally::default()
        });
        entry.count += 1;
        entry.bytes += u64::from(bytes);
        if control {
            self.control_packets += 1;
            self.control_bytes += u64::from(bytes);
        } else {
            self.data_packets += 1;
            self.data_bytes += u64::from(bytes);
        }
    }

    pub fn count_of(&self, kind: &str) -> u64 {
        self.by_kind.get(kind).map_or(0, |t| t.count)
    }

    pub fn bytes_of(&self, kind: &str) -> u64 {
        self.by_kind.get(kind).map_or(0, |t| t.bytes)
    }

    pub fn dropped(&self, reason: DropReason) -> u64 {
        self.drops.get(&reason).copied().unwrap_or(0)
    }

    pub fn total_drops(&self) -> u64 {
        self.drops.values().sum()
    }

    /// Delivered over generated; 1 when nothing was generated.
    pub fn delivery_ratio(&self) -> f64 {
        if self.data_generated == 0 {
            1.0
        } else {
            self.data_delivered as f64 / self.data_generated as f64
        }
    }

    pub fn discovery_latency_mean(&self) -> f64 {
        if self.discoveries == 0 {
            0.0
        } else {
            self.discovery_latency_sum / self.discoveries as f64
        }
    }

    pub(crate) fn violation(&mut self, what: String) {
        if self.invariant_violations.len() < 100 {
            self.invariant_violations.push(what);
        }
    }
}
