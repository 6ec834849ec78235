use std::collections::BTreeMap;
use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::policy::AdaptationPolicy;
use crate::table::RoutingTable;
use crate::tree::ZoneTree;
use crate::Rect;

fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

/// 96 peers in four clusters with sub-structure, split to 2-3 levels.
fn network() -> (ZoneTree, BTreeMap<PeerName, RoutingTable>) {
    let mut tree = ZoneTree::new();
    let centers = [(-30.0, -60.0), (45.0, 100.0), (10.0, 10.0), (-5.0, 140.0)];
    for i in 0..96u32 {
        let (clat, clon) = centers[(i % 4) as usize];
        let j = (i / 4) as f64;
        tree.add_peer(
            PeerName(i),
            pt(
                clat + 0.13 * j + 0.41 * ((i % 3) as f64),
                clon + 0.09 * j + 0.23 * ((i % 5) as f64),
            ),
        )
        .unwrap();
    }
    let pol = AdaptationPolicy::new(12, 3, 2).unwrap();
    loop {
        let over: Vec<ZoneId> = tree
            .leaves()
            .iter()
            .filter(|l| l.peers.len() > pol.split_threshold)
            .map(|l| l.id.clone())
            .collect();
        if over.is_empty() {
            break;
        }
        for zone in over {
            let _ = tree.split_leaf(&zone, &pol);
        }
    }
    assert!(tree.validate(3_000, 1).is_valid());
    let tables = tree
        .coordinates()
        .keys()
        .map(|&n| (n, RoutingTable::build(&tree, n).unwrap()))
        .collect();
    (tree, tables)
}

type Hop = (PeerName, PeerName, u32);

/// Executes an area multicast over pure tables, collecting deliveries and
/// hops; asserts strict level increase along each chain.
fn run_area(
    tables: &BTreeMap<PeerName, RoutingTable>,
    source: PeerName,
    area: &Region,
) -> (Vec<PeerName>, Vec<Hop>) {
    let mut deliveries = Vec::new();
    let mut hops = Vec::new();
    let mut queue: VecDeque<(PeerName, u32)> = VecDeque::new();
    queue.push_back((source, 1));
    while let Some((peer, level)) = queue.pop_front() {
        let step = route_area(&tables[&peer], area, level);
        if step.deliver_local {
            deliveries.push(peer);
        }
        for f in step.forwards {
            assert!(f.level > level, "level must increase: {level} -> {}", f.level);
            hops.push((peer, f.to, f.level));
            queue.push_back((f.to, f.level));
        }
    }
    (deliveries, hops)
}

/// Follows a point route to its final recipient.
fn run_point(
    tables: &BTreeMap<PeerName, RoutingTable>,
    source: PeerName,
    point: GeoPoint,
) -> (PeerName, Vec<Hop>) {
    let mut hops = Vec::new();
    let mut at = source;
    let mut level = 1u32;
    loop {
        match route_point(&tables[&at], point, level) {
            PointStep::DeliverLocal => return (at, hops),
            PointStep::Forward(f) => {
                assert!(f.level > level);
                hops.push((at, f.to, f.level));
                level = f.level;
                at = f.to;
            }
            PointStep::EmptyZone(zone) => panic!("query routing must not report {zone}"),
        }
        assert!(hops.len() <= 64, "runaway point route");
    }
}

fn run_peer(
    tables: &BTreeMap<PeerName, RoutingTable>,
    source: PeerName,
    dest: &OverlayId,
) -> (Option<PeerName>, Vec<Hop>) {
    let mut hops = Vec::new();
    let mut at = source;
    loop {
        match route_peer(&tables[&at], dest) {
            PeerStep::DeliverLocal => return (Some(at), hops),
            PeerStep::NotFound => return (None, hops),
            PeerStep::Forward(f) => {
                hops.push((at, f.to, f.level));
                at = f.to;
            }
        }
        assert!(hops.len() <= 64, "runaway peer route");
    }
}

#[test]
fn one_peer_universe_delivers_locally_only() {
    let mut tree = ZoneTree::new();
    tree.add_peer(PeerName(0), pt(1.0, 2.0)).unwrap();
    let table = RoutingTable::build(&tree, PeerName(0)).unwrap();
    let step = route_area(&table, &Region::universe(), 1);
    assert!(step.deliver_local);
    assert!(step.forwards.is_empty());
}

#[test]
fn terminal_levels_stop_forwarding() {
    let (_, tables) = network();
    let table = tables.values().next().unwrap();
    let d = table.leaf_depth() as u32;
    // A leaf member receiving the member-tier send: both loops vacuous.
    let step = route_area(table, &Region::universe(), d + 2);
    assert!(step.deliver_local);
    assert!(step.forwards.is_empty());
    // A peer receiving at its own zone's level still serves its leaf row.
    let step = route_area(table, &Region::universe(), d + 1);
    assert!(step.forwards.iter().all(|f| matches!(f.via, RouteVia::LeafMember)));
    assert_eq!(step.forwards.len(), table.leaf.members.len() - 1);
}

#[test]
fn area_multicast_matches_brute_force_scan() {
    let (tree, tables) = network();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sources: Vec<PeerName> = tables.keys().copied().collect();
    for case in 0..50 {
        let lat0: f64 = rng.gen_range(-80.0..70.0);
        let lon0: f64 = rng.gen_range(-170.0..130.0);
        let rect = Rect::new(
            lat0,
            (lat0 + rng.gen_range(1.0..60.0)).min(90.0),
            lon0,
            (lon0 + rng.gen_range(1.0..80.0)).min(180.0),
        )
        .unwrap();
        let area = Region::whole(rect);
        let source = sources[case % sources.len()];
        let (mut deliveries, _) = run_area(&tables, source, &area);
        let before = deliveries.len();
        deliveries.sort();
        deliveries.dedup();
        assert_eq!(deliveries.len(), before, "duplicate delivery in case {case}");
        let want: Vec<PeerName> = tree
            .coordinates()
            .iter()
            .filter(|(_, c)| area.contains(**c))
            .map(|(n, _)| *n)
            .collect();
        assert_eq!(deliveries, want, "case {case} from {source}");
    }
}

#[test]
fn point_route_to_own_coordinate_is_local() {
    let (_, tables) = network();
    let table = &tables[&PeerName(0)];
    assert_eq!(
        route_point(table, table.owner_coord, 1),
        PointStep::DeliverLocal
    );
}

#[test]
fn point_in_sibling_zone_single_forward() {
    let (_, tables) = network();
    let table = &tables[&PeerName(0)];
    let entry = table.rows[0]
        .siblings
        .iter()
        .find(|e| e.designated().is_some())
        .expect("populated level-1 sibling");
    let inside = entry.region.to_rects()[0].center();
    match route_point(table, inside, 1) {
        PointStep::Forward(f) => {
            assert_eq!(f.to, entry.designated().unwrap().name);
            assert_eq!(f.level, 2);
            assert_eq!(f.via, RouteVia::Sibling(entry.zone.clone()));
        }
        other => panic!("expected a single forward, got {other:?}"),
    }
}

#[test]
fn point_routes_reach_closest_member_of_target_leaf() {
    let (tree, tables) = network();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let sources: Vec<PeerName> = tables.keys().copied().collect();
    let populated: Vec<crate::ZoneId> = tree
        .leaves()
        .iter()
        .filter(|l| !l.peers.is_empty())
        .map(|l| l.id.clone())
        .collect();
    let mut strict_checked = 0;
    for case in 0..500 {
        let source = sources[rng.gen_range(0..sources.len())];
        // Mix of targeted points (inside populated leaves) and global ones.
        let point = if case % 2 == 0 {
            let leaf = &populated[rng.gen_range(0..populated.len())];
            let region = tree.node(leaf).unwrap().region.clone();
            crate::tree::sample_region(&region, &mut rng).unwrap()
        } else {
            pt(rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0))
        };
        let (recipient, hops) = run_point(&tables, source, point);
        let leaf = tree.locate_leaf(point);
        if !leaf.peers.is_empty() {
            let want = leaf
                .peers
                .iter()
                .map(|&n| (crate::distance_km(tree.coordinate(n).unwrap(), point), n))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(recipient, want, "point {point} from {source}");
            assert!(
                tree.leaf_of(recipient).unwrap().id == leaf.id,
                "recipient must live in the point's leaf"
            );
            // Hop bound: destination leaf depth + 1.
            assert!(
                hops.len() <= leaf.id.depth() + 1,
                "{} hops exceeds bound {}",
                hops.len(),
                leaf.id.depth() + 1
            );
            strict_checked += 1;
        }
    }
    assert!(strict_checked >= 250, "want mostly populated-leaf cases, got {strict_checked}");
}

#[test]
fn point_route_stays_inside_lowest_common_zone() {
    let (tree, tables) = network();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let sources: Vec<PeerName> = tables.keys().copied().collect();
    for _ in 0..300 {
        let source = sources[rng.gen_range(0..sources.len())];
        let point = pt(rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0));
        let (_, hops) = run_point(&tables, source, point);
        let source_leaf = tree.leaf_of(source).unwrap().id.clone();
        let dest_leaf = tree.locate_leaf(point).id.clone();
        let lcz_depth = source_leaf.common_depth(&dest_leaf);
        let lcz = source_leaf.ancestor_at(lcz_depth);
        for (_, to, _) in &hops {
            let leaf = tree.leaf_of(*to).unwrap().id.clone();
            assert!(
                lcz.contains_zone(&leaf),
                "hop endpoint {to} (leaf {leaf}) escaped LCZ {lcz}"
            );
        }
    }
}

#[test]
fn peer_route_examples_and_bound() {
    let (tree, tables) = network();
    // Self delivery.
    let t0 = &tables[&PeerName(0)];
    assert_eq!(route_peer(t0, &t0.overlay_id()), PeerStep::DeliverLocal);
    // Same-leaf: one direct forward.
    let mate = t0.leaf_mates().next().expect("leaf has a mate");
    let dest = OverlayId::new(t0.leaf.zone.clone(), mate.name);
    match route_peer(t0, &dest) {
        PeerStep::Forward(f) => {
            assert_eq!(f.to, mate.name);
            assert_eq!(f.via, RouteVia::DirectPeer);
        }
        other => panic!("expected direct forward, got {other:?}"),
    }
    // Unknown peer in own leaf: reported.
    let ghost = OverlayId::new(t0.leaf.zone.clone(), PeerName(9999));
    assert_eq!(route_peer(t0, &ghost), PeerStep::NotFound);

    // 500 random pairs: delivery succeeds, hop count within bound, and
    // levels increase along the chain.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let names: Vec<PeerName> = tables.keys().copied().collect();
    for _ in 0..500 {
        let source = names[rng.gen_range(0..names.len())];
        let target = names[rng.gen_range(0..names.len())];
        let dest = tree.overlay_id(target).unwrap();
        let (got, hops) = run_peer(&tables, source, &dest);
        assert_eq!(got, Some(target));
        assert!(
            hops.len() <= dest.zone.depth() + 1,
            "{} -> {}: {} hops over bound {}",
            source,
            target,
            hops.len(),
            dest.zone.depth() + 1
        );
        let mut prev = 1u32;
        for (_, _, level) in &hops {
            assert!(*level > prev || hops.len() == 1, "levels not increasing");
            prev = *level;
        }
    }
}

#[test]
fn paths_from_one_source_share_prefixes_into_common_zones() {
    let (tree, tables) = network();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let names: Vec<PeerName> = tables.keys().copied().collect();
    let mut checked = 0;
    for _ in 0..2_000 {
        let s = names[rng.gen_range(0..names.len())];
        let t1 = names[rng.gen_range(0..names.len())];
        let t2 = names[rng.gen_range(0..names.len())];
        let s_leaf = tree.leaf_of(s).unwrap().id.clone();
        let l1 = tree.leaf_of(t1).unwrap().id.clone();
        let l2 = tree.leaf_of(t2).unwrap().id.clone();
        let dest_common = l1.common_depth(&l2);
        if dest_common <= s_leaf.common_depth(&l1) || t1 == t2 {
            continue; // need LCZ(t1,t2) strictly deeper than LCZ(s,t1)
        }
        checked += 1;
        let z = l1.ancestor_at(dest_common);
        let (_, hops1) = run_peer(&tables, s, &tree.overlay_id(t1).unwrap());
        let (_, hops2) = run_peer(&tables, s, &tree.overlay_id(t2).unwrap());
        // Index of the first hop landing inside Z on path 1.
        let entry_idx = hops1
            .iter()
            .position(|(_, to, _)| z.contains_zone(&tree.leaf_of(*to).unwrap().id))
            .expect("route must enter the common zone");
        for i in 0..=entry_idx {
            assert!(
                i < hops2.len() && hops1[i].0 == hops2[i].0 && hops1[i].1 == hops2[i].1,
                "paths diverged before entering {z}: {hops1:?} vs {hops2:?}"
            );
        }
        if checked >= 200 {
            break;
        }
    }
    assert!(checked >= 50, "fixture produced too few nested triples: {checked}");
}

#[test]
fn empty_zone_point_query_falls_back_to_nearest_populated() {
    let (tree, tables) = network();
    // Remainder zones are empty; aim a query point inside one.
    let rem = tree
        .leaves()
        .iter()
        .find(|l| l.is_remainder && l.peers.is_empty())
        .expect("an empty remainder exists")
        .id
        .clone();
    let region = tree.node(&rem).unwrap().region.clone();
    let point = region.to_rects()[0].center();
    assert!(tree.locate_leaf(point).peers.is_empty());
    let source = *tables.keys().next().unwrap();
    let (recipient, _) = run_point(&tables, source, point);
    assert!(
        tables.contains_key(&recipient),
        "fallback must still deliver to a live peer"
    );

    // The join variant reports the empty zone at the peer that tracks it.
    let tracker = tables
        .values()
        .find(|t| t.contacts_for(&rem).is_some())
        .expect("some peer tracks the remainder directly");
    match route_point_join(tracker, point, 1) {
        PointStep::EmptyZone(zone) => assert_eq!(zone, rem),
        other => panic!("expected EmptyZone, got {other:?}"),
    }
}
