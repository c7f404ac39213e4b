use std::path::PathBuf;

use relu_milp::fixtures;
use relu_milp::io::load_network;
use relu_milp::network::Network;

fn shipped(name: &str) -> Network {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    load_network(&p).unwrap()
}

#[test]
fn shipped_fixtures_match_builders() {
    assert_eq!(shipped("tiny_2_2_1.json"), fixtures::tiny_2_2_1());
    assert_eq!(shipped("tiny_2_2_identity.json"), fixtures::tiny_2_2_identity());
    assert_eq!(shipped("max_pool.json"), fixtures::max_pool_net());
    assert_eq!(shipped("avg_pool.json"), fixtures::avg_pool_net());
    assert_eq!(shipped("bench_64_8_8_8_10.json"), fixtures::bench_network(2024));
}
