//! Per-message trace records: every simulated hop of every routed message,
//! self-contained enough to recompute all metrics offline (`replay`).

use serde::{Deserialize, Serialize};

use crate::ids::{PeerName, ZoneId};
use crate::router::{RouteVia, Target};

/// One forwarding hop. `step` is the propagation step within the phase
/// (each overlay hop advances it by one); `to_zone` is the receiver's leaf
/// zone at delivery time, which lets locality checks run from the trace
/// file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub hop: u32,
    pub phase: u8,
    pub from: PeerName,
    pub to: PeerName,
    pub level: u32,
    pub step: u32,
    pub km: f64,
    pub to_zone: ZoneId,
    pub via: RouteVia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingContactRecord {
    pub zone: ZoneId,
    pub dead: PeerName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Join,
    Area,
    Point,
    Peer,
    Nearest,
    ContentMulticast,
    ContentRequest,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Join => "join",
            TraceKind::Area => "area",
            TraceKind::Point => "point",
            TraceKind::Peer => "peer",
            TraceKind::Nearest => "nearest",
            TraceKind::ContentMulticast => "content_multicast",
            TraceKind::ContentRequest => "content_request",
        }
    }
}

/// Full record of one routed message: the forwarding forest (phase 1),
/// any secondary phase (the circular query of a nearest search, or the
/// response leg of a content request), deliveries, and error events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub format_version: u32,
    pub msg_id: String,
    pub kind: TraceKind,
    pub source: PeerName,
    pub source_zone: ZoneId,
    pub target: Target,
    /// Leaf zone of the target (point's leaf, destination peer's leaf) at
    /// trace time, when the kind has one.
    pub target_zone: Option<ZoneId>,
    pub hops: Vec<HopRecord>,
    pub deliveries: Vec<PeerName>,
    /// Out-of-band responses (nearest-query responders).
    pub replies: u32,
    /// Kind-specific outcome: nearest answer, content serving summary,
    /// or an error notice.
    pub result: Option<String>,
    pub missing_contacts: Vec<MissingContactRecord>,
    /// Unicast-star baseline for multicast traces.
    pub star_km: Option<f64>,
    pub link_km: f64,
    pub latency_ms_est: f64,
}

impl RouteTrace {
    pub fn new(
        msg_id: String,
        kind: TraceKind,
        source: PeerName,
        source_zone: ZoneId,
        target: Target,
        target_zone: Option<ZoneId>,
    ) -> Self {
        RouteTrace {
            format_version: 1,
            msg_id,
            kind,
            source,
            source_zone,
            target,
            target_zone,
            hops: Vec::new(),
            deliveries: Vec::new(),
            replies: 0,
            result: None,
            missing_contacts: Vec::new(),
            star_km: None,
            link_km: 0.0,
            latency_ms_est: 0.0,
        }
    }

    /// Phase-1 hop list as (from, to) pairs, for prefix comparison.
    pub fn primary_path(&self) -> Vec<(PeerName, PeerName)> {
        self.hops
            .iter()
            .filter(|h| h.phase == 1)
            .map(|h| (h.from, h.to))
            .collect()
    }
}

pub fn to_jsonl(traces: &[RouteTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).expect("trace serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<RouteTrace>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
