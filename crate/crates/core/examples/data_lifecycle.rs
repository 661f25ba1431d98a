//! Walks one storage element through writes, rules, expiry and deletion,
//! printing occupancy by replica class after each step.
//!
//! `cargo run --example data_lifecycle`

use tcosim::datamgmt::{DataState, Format, ReplicaClass};
use tcosim::time::HOUR;
use tcosim::topology::{SeId, SeKind, SiteId, StorageElement};

fn show(step: &str, d: &DataState, se: SeId) {
    let c = d.stored_by_class(se);
    println!(
        "{step:<34} persistent {:>5.1}  temporary {:>5.1}  cached {:>5.1}  free {:>5.1}",
        c[ReplicaClass::Persistent.index()],
        c[ReplicaClass::Temporary.index()],
        c[ReplicaClass::Cached.index()],
        d.free(se)
    );
}

fn main() {
    let se = SeId(0);
    let mut config = StorageElement {
        name: "CLOUD_DATADISK".into(),
        site: SiteId(0),
        capacity_tb: 100.0,
        greedy_deletion: false,
        kind: SeKind::Datadisk,
        high_watermark: 0.9,
        low_watermark: 0.7,
        consolidation: None,
    };
    let mut d = DataState::new([config.capacity_tb]);

    let input = d.create_dataset(Format::Aod, 30.0, 0, true);
    let output = d.create_dataset(Format::Daod, 20.0, 0, true);
    let archive = d.create_dataset(Format::Hits, 25.0, 0, true);
    for ds in [input, output, archive] {
        d.write_replica(ds, se, 0).expect("fits");
    }
    d.add_rule(input, se, Some(14 * 24 * HOUR), 0);
    d.add_rule(output, se, Some(3 * 24 * HOUR), 0);
    d.add_rule(archive, se, None, 0);
    show("written with rules", &d, se);

    d.expire_rules(4 * 24 * HOUR);
    show("day 4: output rule lapsed", &d, se);

    let extra = d.create_dataset(Format::Aod, 30.0, 4 * 24 * HOUR, true);
    let freed: f64 = d.evict_for(se, 30.0).iter().map(|x| x.tb).sum();
    d.write_replica(extra, se, 4 * 24 * HOUR)
        .expect("room made");
    show(&format!("LRU eviction freed {freed} TB"), &d, se);

    d.expire_rules(15 * 24 * HOUR);
    show("day 15: input rule lapsed", &d, se);

    config.greedy_deletion = true;
    let gone = d.run_deletion(se, &config).len();
    show(&format!("greedy pass deleted {gone}"), &d, se);
}
