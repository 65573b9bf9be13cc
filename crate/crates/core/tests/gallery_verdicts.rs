use torsio_core::diagnostics::{Decision, DiagnoseConfig};
use torsio_core::gallery::{self, PresetParams};
use torsio_core::{cross_check, diagnose_l2, Grid, MeasureSpec, Region};

fn run(name: &str) -> gallery::GalleryRun {
    let p = gallery::preset(name, &PresetParams::default()).unwrap();
    gallery::run(&p, &DiagnoseConfig::default(), false).unwrap()
}

#[test]
fn bounded_domain_is_compact_in_both_embeddings() {
    let r = run("bounded_domain");
    assert_eq!(r.cross.l2.decision, Decision::Compact);
    assert_eq!(r.cross.l1.decision, Decision::Compact);
    assert!(r.matches);
}

#[test]
fn plain_strip_is_not_compact() {
    let r = run("plain_strip");
    assert_eq!(r.cross.l2.decision, Decision::NotCompact);
    assert!(r.matches);
}

#[test]
fn log_slits_close_the_strip() {
    let r = run("slit_strip_log");
    assert_eq!(r.cross.l2.decision, Decision::Compact);
    assert!(r.matches);
}

#[test]
fn every_preset_has_a_rationale_and_round_trips() {
    for info in gallery::list() {
        assert!(!info.rationale.is_empty(), "{}", info.name);
        let p = gallery::preset(&info.name, &PresetParams::default()).unwrap();
        let text = serde_json::to_string(&p.measure).unwrap();
        let back: MeasureSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p.measure, "{}", info.name);
    }
}

#[test]
fn verdicts_are_reproducible() {
    let a = serde_json::to_string(&run("finite_measure")).unwrap();
    let b = serde_json::to_string(&run("finite_measure")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn l1_compactness_implies_l2_compactness_on_a_disk() {
    let g = Grid::new(&[-4.0, -4.0], &[4.0, 4.0], 0.125).unwrap();
    let mu = MeasureSpec::inf_outside(Region::ball(vec![0.0, 0.0], 1.0));
    let cc = cross_check(&mu, &g, &DiagnoseConfig::default()).unwrap();
    assert_eq!(cc.l1.decision, Decision::Compact);
    assert_eq!(cc.l2.decision, Decision::Compact);
    assert!(cc.agreement);
    let l2 = diagnose_l2(&mu, &g, &DiagnoseConfig::default()).unwrap();
    assert_eq!(l2.decision, cc.l2.decision);
}
