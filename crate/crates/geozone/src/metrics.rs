//! Metrics over trace records: geographic link cost, route locality with
//! respect to the lowest common zone, shared path prefixes for convergence,
//! and trace well-formedness. Everything here reads traces only, so `run`
//! and `replay` produce identical reports from the same trace file.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::ids::ZoneId;
use crate::trace::{RouteTrace, TraceKind};

/// Propagation speed used for the per-hop latency estimate (metadata only):
/// distance at 200,000 km/s plus 5 ms per-hop overhead.
pub const KM_PER_SECOND: f64 = 200_000.0;
pub const PER_HOP_MS: f64 = 5.0;

/// Sum of per-hop great-circle distance over all phases.
pub fn link_cost_km(trace: &RouteTrace) -> f64 {
    trace.hops.iter().map(|h| h.km).sum()
}

/// Depth of the shallowest zone containing the source and every hop
/// endpoint of the primary phase.
pub fn locality_depth(trace: &RouteTrace) -> usize {
    let mut prefix: Option<ZoneId> = Some(trace.source_zone.clone());
    for hop in trace.hops.iter().filter(|h| h.phase == 1) {
        let p = prefix.take().expect("set above");
        let d = p.common_depth(&hop.to_zone);
        prefix = Some(p.ancestor_at(d));
    }
    prefix.expect("set above").depth()
}

/// Whether every primary-phase hop endpoint stayed inside the lowest
/// common zone of source and target. `None` for kinds without a single
/// destination.
pub fn locality_pass(trace: &RouteTrace) -> Option<bool> {
    let target_zone = trace.target_zone.as_ref()?;
    if !matches!(trace.kind, TraceKind::Point | TraceKind::Peer | TraceKind::Join) {
        return None;
    }
    let want = trace.source_zone.common_depth(target_zone);
    let lcz = trace.source_zone.ancestor_at(want);
    let ok = trace
        .hops
        .iter()
        .filter(|h| h.phase == 1)
        .all(|h| lcz.contains_zone(&h.to_zone));
    Some(ok)
}

/// Index of the offending hop when locality fails.
pub fn locality_offender(trace: &RouteTrace) -> Option<usize> {
    let target_zone = trace.target_zone.as_ref()?;
    let want = trace.source_zone.common_depth(target_zone);
    let lcz = trace.source_zone.ancestor_at(want);
    trace
        .hops
        .iter()
        .enumerate()
        .filter(|(_, h)| h.phase == 1)
        .find(|(_, h)| !lcz.contains_zone(&h.to_zone))
        .map(|(i, _)| i)
}

/// Length of the identical leading (from, to) hop sequence of two traces'
/// primary phases.
pub fn shared_prefix_len(a: &RouteTrace, b: &RouteTrace) -> usize {
    a.primary_path()
        .iter()
        .zip(b.primary_path().iter())
        .take_while(|(x, y)| x == y)
        .count()
}

/// Latency estimate in milliseconds: the longest root-to-delivery chain,
/// summing per-hop distance/speed plus fixed overhead.
pub fn latency_estimate_ms(trace: &RouteTrace) -> f64 {
    let mut cumulative: BTreeMap<(u8, crate::ids::PeerName), f64> = BTreeMap::new();
    let mut worst: f64 = 0.0;
    for hop in &trace.hops {
        let base = cumulative.get(&(hop.phase, hop.from)).copied().unwrap_or(0.0);
        let t = base + hop.km / KM_PER_SECOND * 1_000.0 + PER_HOP_MS;
        cumulative.insert((hop.phase, hop.to), t);
        worst = worst.max(t);
    }
    worst
}

/// Structural checks on one trace: levels strictly increase along each
/// forwarding chain, no (from, to) pair repeats within a phase, and every
/// hop hangs off the phase root or an earlier receiver.
pub fn well_formed(trace: &RouteTrace) -> Result<(), String> {
    let mut seen_pairs: BTreeSet<(u8, crate::ids::PeerName, crate::ids::PeerName)> =
        BTreeSet::new();
    let mut level_at: BTreeMap<(u8, crate::ids::PeerName), u32> = BTreeMap::new();
    for (i, hop) in trace.hops.iter().enumerate() {
        if !seen_pairs.insert((hop.phase, hop.from, hop.to)) {
            return Err(format!(
                "hop {i}: duplicate ({}, {}) within phase {}",
                hop.from, hop.to, hop.phase
            ));
        }
        let from_level = level_at.get(&(hop.phase, hop.from)).copied().unwrap_or(1);
        if hop.level <= from_level {
            return Err(format!(
                "hop {i}: level {} does not increase over {} at {}",
                hop.level, from_level, hop.from
            ));
        }
        match level_at.get(&(hop.phase, hop.to)) {
            // A peer receives at most once per phase in a well-formed run.
            Some(_) => {
                return Err(format!("hop {i}: {} already received in phase {}", hop.to, hop.phase))
            }
            None => {
                level_at.insert((hop.phase, hop.to), hop.level);
            }
        }
    }
    Ok(())
}

/// One row of the per-query CSV table.
#[derive(Debug, Clone)]
pub struct QueryRow {
    pub msg_id: String,
    pub kind: &'static str,
    pub hops: usize,
    pub link_km: f64,
    pub locality_pass: Option<bool>,
    /// Shared leading hops with the previous same-source point/peer query.
    pub prefix_len: Option<usize>,
    pub latency_ms: f64,
}

pub fn csv_header() -> &'static str {
    "msg_id,kind,hops,link_km,locality_pass,prefix_len,latency_ms"
}

pub fn to_csv(rows: &[QueryRow]) -> String {
    let mut out = String::from(csv_header());
    out.push('\n');
    for r in rows {
        let locality = r
            .locality_pass
            .map(|b| if b { "pass" } else { "fail" })
            .unwrap_or("");
        let prefix = r.prefix_len.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.3},{},{},{:.3}\n",
            r.msg_id, r.kind, r.hops, r.link_km, locality, prefix, r.latency_ms
        ));
    }
    out
}

/// Builds the JSON summary and per-query rows from a trace list. Join
/// traces count toward totals but not toward query aggregates.
pub fn build_report(traces: &[RouteTrace], scenario: &str, seed: u64) -> (Value, Vec<QueryRow>) {
    let mut rows = Vec::new();
    let mut last_by_source: BTreeMap<crate::ids::PeerName, &RouteTrace> = BTreeMap::new();
    let mut kind_counts: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut total_link = 0.0;
    let mut total_hops = 0usize;
    let mut deliveries = 0usize;
    let mut missing = 0usize;
    let mut replies = 0u64;
    let mut locality_evaluated = 0usize;
    let mut locality_passed = 0usize;

    for trace in traces {
        *kind_counts.entry(trace.kind.as_str()).or_insert(0) += 1;
        missing += trace.missing_contacts.len();
        if trace.kind == TraceKind::Join {
            continue;
        }
        let pass = locality_pass(trace);
        if let Some(p) = pass {
            locality_evaluated += 1;
            if p {
                locality_passed += 1;
            }
        }
        let prefix_len = if matches!(trace.kind, TraceKind::Point | TraceKind::Peer) {
            let p = last_by_source
                .get(&trace.source)
                .map(|prev| shared_prefix_len(prev, trace));
            last_by_source.insert(trace.source, trace);
            p
        } else {
            None
        };
        let link = link_cost_km(trace);
        total_link += link;
        total_hops += trace.hops.len();
        deliveries += trace.deliveries.len();
        replies += trace.replies as u64;
        rows.push(QueryRow {
            msg_id: trace.msg_id.clone(),
            kind: trace.kind.as_str(),
            hops: trace.hops.len(),
            link_km: link,
            locality_pass: pass,
            prefix_len,
            latency_ms: latency_estimate_ms(trace),
        });
    }

    let summary = json!({
        "format_version": 1,
        "scenario": scenario,
        "seed": seed,
        "totals": {
            "traces": traces.len(),
            "queries": rows.len(),
            "hops": total_hops,
            "deliveries": deliveries,
            "replies": replies,
            "missing_contacts": missing,
            "link_km": round3(total_link),
        },
        "by_kind": kind_counts,
        "locality": {
            "evaluated": locality_evaluated,
            "passed": locality_passed,
            "pass_rate": if locality_evaluated > 0 {
                round3(locality_passed as f64 / locality_evaluated as f64)
            } else {
                1.0
            },
        },
    });
    (summary, rows)
}

fn round3(v: f64) -> f64 {
    (v * 1_000.0).round() / 1_000.0
}
