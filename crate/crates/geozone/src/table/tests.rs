use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::policy::AdaptationPolicy;
use crate::Rect;

fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

fn policy(split: usize, merge: usize) -> AdaptationPolicy {
    AdaptationPolicy::new(split, merge, 2).unwrap()
}

/// 48 peers in four clusters, split down to two or three levels.
fn deep_tree() -> ZoneTree {
    let mut tree = ZoneTree::new();
    let centers = [(-30.0, -60.0), (45.0, 100.0), (10.0, 10.0), (-5.0, 140.0)];
    for i in 0..48u32 {
        let (clat, clon) = centers[(i % 4) as usize];
        let j = (i / 4) as f64;
        tree.add_peer(
            PeerName(i),
            pt(clat + 0.11 * j, clon + 0.07 * j + 0.01 * (i % 4) as f64),
        )
        .unwrap();
    }
    let pol = policy(8, 2);
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
    assert!(tree.validate(5_000, 1).is_valid());
    tree
}

/// Independent enumeration of a zone's members: every peer whose located
/// leaf sits under the zone.
fn zone_members_by_scan(tree: &ZoneTree, zone: &ZoneId) -> Vec<PeerName> {
    let mut names: Vec<PeerName> = tree
        .coordinates()
        .iter()
        .filter(|(_, coord)| {
            let leaf = tree.locate_leaf(**coord).id.clone();
            zone.contains_zone(&leaf)
        })
        .map(|(name, _)| *name)
        .collect();
    names.sort();
    names
}

#[test]
fn single_leaf_universe_has_only_leaf_row() {
    let mut tree = ZoneTree::new();
    for i in 0..5u32 {
        tree.add_peer(PeerName(i), pt(i as f64, i as f64)).unwrap();
    }
    let table = RoutingTable::build(&tree, PeerName(2)).unwrap();
    assert!(table.rows.is_empty());
    assert_eq!(table.leaf.members.len(), 5);
    assert_eq!(table.leaf.zone, ZoneId::root());
    assert_eq!(table.overlay_id().to_string(), "U/p0002");
    assert!(RoutingTable::build(&tree, PeerName(99)).is_err());
}

#[test]
fn completeness_against_tree_scan_oracle() {
    let tree = deep_tree();
    for (&owner, _) in tree.coordinates() {
        let table = RoutingTable::build(&tree, owner).unwrap();
        assert_eq!(table.leaf_depth(), table.leaf.zone.depth());
        for row in &table.rows {
            for entry in &row.siblings {
                let members = zone_members_by_scan(&tree, &entry.zone);
                let want: Vec<PeerName> =
                    members.iter().take(1 + SIBLING_BACKUPS).copied().collect();
                let got: Vec<PeerName> = entry.contacts.iter().map(|c| c.name).collect();
                assert_eq!(
                    got, want,
                    "peer {owner}, zone {}: contacts diverge from scan",
                    entry.zone
                );
                if !members.is_empty() {
                    assert_eq!(entry.designated().unwrap().name, members[0]);
                }
            }
        }
        // Leaf row lists the whole leaf including the owner.
        let leaf_members = zone_members_by_scan(&tree, &table.leaf.zone);
        let got: Vec<PeerName> = table.leaf.members.iter().map(|m| m.name).collect();
        assert_eq!(got, leaf_members);
        assert!(got.contains(&owner));
    }
}

#[test]
fn rows_tile_the_universe() {
    let tree = deep_tree();
    let table = RoutingTable::build(&tree, PeerName(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let p = pt(rng.gen_range(-90.0..90.0), rng.gen_range(-180.0..180.0));
        let mut holders = 0;
        for row in &table.rows {
            holders += row.siblings.iter().filter(|e| e.region.contains(p)).count();
        }
        if table.leaf.region.contains(p) {
            holders += 1;
        }
        assert_eq!(holders, 1, "point {p} resolves to {holders} table zones");
    }
    // No sibling region may intersect the self zone at its level.
    for row in &table.rows {
        for entry in &row.siblings {
            assert!(
                !entry.region.intersects_region(&row.self_region),
                "sibling {} overlaps self zone {}",
                entry.zone,
                row.self_zone
            );
        }
    }
}

#[test]
fn leaf_mates_hold_identical_designated_contacts() {
    let tree = deep_tree();
    let tables: Vec<RoutingTable> = tree
        .coordinates()
        .keys()
        .map(|&n| RoutingTable::build(&tree, n).unwrap())
        .collect();
    for a in &tables {
        for b in &tables {
            if a.leaf.zone != b.leaf.zone || a.owner == b.owner {
                continue;
            }
            assert_eq!(a.rows.len(), b.rows.len());
            for (ra, rb) in a.rows.iter().zip(&b.rows) {
                assert_eq!(ra.siblings, rb.siblings, "leaf-mates disagree on a row");
            }
        }
    }
}

#[test]
fn select_contact_predicates() {
    // Three clusters, k=3: the top row holds three sibling zones (plus the
    // remainder, populated afterwards so it carries a contact too).
    let mut tree = ZoneTree::new();
    let centers = [(-30.0, -60.0), (45.0, 100.0), (10.0, 10.0)];
    for i in 0..27u32 {
        let (clat, clon) = centers[(i % 3) as usize];
        let j = (i / 3) as f64;
        tree.add_peer(PeerName(i), pt(clat + 0.11 * j, clon + 0.07 * j)).unwrap();
    }
    let pol = AdaptationPolicy::new(16, 4, 3).unwrap();
    tree.split_leaf(&ZoneId::root(), &pol).unwrap();
    // Populate the remainder as well.
    let rem_region = tree.node(&ZoneId::from_path(vec![0])).unwrap().region.clone();
    tree.add_peer(PeerName(100), rem_region.to_rects()[0].center())
        .unwrap();
    assert!(tree.validate(2_000, 1).is_valid());

    let table = RoutingTable::build(&tree, PeerName(0)).unwrap();
    let row = &table.rows[0];
    assert_eq!(row.siblings.len(), 3, "remainder plus two cluster siblings");

    // No sibling holds the owner's own coordinate.
    let miss = select_contact(row, &SiblingPredicate::ContainsPoint(table.owner_coord));
    assert_eq!(miss.unwrap_err(), TableError::NoMatch);

    // Point containment matches exactly the one sibling holding the point.
    let target = &row.siblings[row.siblings.len() - 1];
    let inside = target.region.to_rects()[0].center();
    let picked = select_contact(row, &SiblingPredicate::ContainsPoint(inside)).unwrap();
    assert_eq!(picked.overlay_id.zone, target.zone);
    assert_eq!(picked.address, target.designated().unwrap().name);

    // An area spanning all three siblings enumerates their designated
    // contacts in label order; verified against direct per-entry evaluation.
    let area = Region::whole(Rect::universe());
    let pred = SiblingPredicate::IntersectsArea(&area);
    let got: Vec<PeerName> = matching_contacts(row, &pred).map(|c| c.address).collect();
    let want: Vec<PeerName> = row
        .siblings
        .iter()
        .filter(|e| e.region.intersects_region(&area))
        .filter_map(|e| e.designated().map(|c| c.name))
        .collect();
    assert_eq!(got, want);
    assert_eq!(got.len(), 3);
    let labels: Vec<u32> = row
        .siblings
        .iter()
        .filter(|e| e.designated().is_some())
        .map(|e| e.label())
        .collect();
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted, "scan must run in label order");

    // Id-prefix: route toward a peer in a sibling zone.
    let dest_zone = target.zone.child(1);
    let picked = select_contact(row, &SiblingPredicate::IdPrefix(&dest_zone)).unwrap();
    assert_eq!(picked.overlay_id.zone, target.zone);
}

#[test]
fn every_sibling_zone_at_every_level_has_a_contact() {
    // The overlay-neighborhood shape: one designated contact per populated
    // sibling zone at every level of the owner's branch.
    let tree = deep_tree();
    let deepest = tree
        .coordinates()
        .keys()
        .map(|&n| (tree.leaf_of(n).unwrap().id.depth(), n))
        .max()
        .unwrap()
        .1;
    let table = RoutingTable::build(&tree, deepest).unwrap();
    assert!(table.leaf_depth() >= 2, "want a multi-level branch");
    for row in &table.rows {
        assert!(!row.siblings.is_empty());
        for entry in &row.siblings {
            let populated = !zone_members_by_scan(&tree, &entry.zone).is_empty();
            assert_eq!(
                entry.designated().is_some(),
                populated,
                "zone {} contact presence must track population",
                entry.zone
            );
        }
    }
}

#[test]
fn ancestor_contacts_match_scan() {
    let tree = deep_tree();
    for (&owner, _) in tree.coordinates() {
        let table = RoutingTable::build(&tree, owner).unwrap();
        for depth in 1..=table.leaf_depth() {
            let zone = table.rows[depth - 1].self_zone.clone();
            let want: Vec<PeerName> = zone_members_by_scan(&tree, &zone)
                .into_iter()
                .take(1 + SIBLING_BACKUPS)
                .collect();
            let got: Vec<PeerName> = table
                .ancestor_contacts(depth, None)
                .iter()
                .map(|s| s.name)
                .collect();
            assert_eq!(got, want, "peer {owner} ancestor {zone}");
        }
    }
}

#[test]
fn drop_contact_promotes_backup() {
    let tree = deep_tree();
    let table = RoutingTable::build(&tree, PeerName(0)).unwrap();
    let (zone, old) = {
        let entry = table.rows[0]
            .siblings
            .iter()
            .find(|e| e.contacts.len() >= 2)
            .expect("some sibling with a backup");
        (entry.zone.clone(), entry.contacts.clone())
    };
    let mut table = table;
    let promoted = table.drop_contact(&zone, old[0].name).unwrap();
    assert_eq!(promoted.name, old[1].name);
    assert_eq!(table.contacts_for(&zone).unwrap().len(), old.len() - 1);
}

#[test]
fn table_json_dump_is_stable() {
    let tree = deep_tree();
    let table = RoutingTable::build(&tree, PeerName(0)).unwrap();
    let a = serde_json::to_string(&table.to_canonical_json()).unwrap();
    let b = serde_json::to_string(&table.to_canonical_json()).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"format_version\":1"));
    assert!(a.contains("U/p0000") || a.contains("/p0000"));
}
