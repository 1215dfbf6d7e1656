// debug: print psl(3,4) certificates
use abelsup::certify::*;
use abelsup::outgroup::{out_model, Family};

fn main() {
    let om = out_model(Family::Psl, 3, 4).unwrap();
    for t in om.enumerate_maximal_abelian().unwrap() {
        let gens: Vec<String> = t.gens.iter().map(|g| om.format_element(g)).collect();
        match certify_supplement(Family::Psl, 3, 4, &t, default_bound()) {
            Ok(c) => println!("T=<{}> route={} verdict={:?} fail={:?}", gens.join(","), c.route, c.verdict, c.failure),
            Err(e) => println!("T=<{}> ERR {e}", gens.join(",")),
        }
    }
}
