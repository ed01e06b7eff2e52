use pneumann::model::{C1Regime, RadialDomain};
use pneumann::phase::{classify, find_solutions, BranchLabel, Problem, ScanSpec};

#[test]
fn vanishing_c1_gives_pairs_on_a_long_interval() {
    let pb = Problem::prototype(1.5, 3.0, RadialDomain::new(0.0, 40.0, 1).unwrap()).unwrap();
    let rep = find_solutions(&pb, 1, &ScanSpec::default()).unwrap();
    assert_eq!(rep.regime, C1Regime::Zero);
    let level: Vec<_> = rep.at_level(1).collect();
    eprintln!("d_min {:e}: {:?}", rep.d_min, level.iter().map(|r| (r.d, r.label)).collect::<Vec<_>>());
    assert!(level.len() >= 2);
    assert_eq!(level[0].label, BranchLabel::Minus);
    assert!(level[0].d < level[1].d);
    for r in level {
        assert!(r.positive);
        assert_eq!(classify(&r.profile).zeros, 1);
    }
}

#[test]
fn nearly_quadratic_exponent_splits_the_first_branch() {
    let pb = Problem::prototype(1.97, 50.0, RadialDomain::new(0.0, 1.0, 1).unwrap()).unwrap();
    let rep = find_solutions(&pb, 1, &ScanSpec::default()).unwrap();
    let level: Vec<_> = rep.at_level(1).collect();
    eprintln!("d_min {:e}: {:?}", rep.d_min, level.iter().map(|r| (r.d, r.label, r.boundary_residual, r.equation_residual)).collect::<Vec<_>>());
    assert!(level.len() >= 2 && level.len() % 2 == 0);
    assert!(level.iter().all(|r| r.d > 0.0 && r.positive));
}
