use thermograph::refine::*;
use thermograph::testkit::*;

fn main() {
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[1], &patterns).unwrap();
    println!("flip family: {}", family.len());
    for me in &family {
        println!("  t = {}   balance = {:?}", me.ext.t, me.balance);
        println!("    prov: {:?}", me.provenance);
    }
}
