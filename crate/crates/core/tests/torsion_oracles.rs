use std::f64::consts::PI;

use torsio_core::torsion::{
    l1_profile, tail_sup_profile, torsion_function, torsional_rigidity,
};
use torsio_core::{Grid, MeasureSpec, Region};

fn aligned_grid(dim: usize, lo_k: i64, hi_k: i64, h: f64) -> Grid {
    let lo = vec![(lo_k as f64 - 0.5) * h; dim];
    let hi = vec![(hi_k as f64 + 0.5) * h; dim];
    Grid::new(&lo, &hi, h).unwrap()
}

fn unit_interval() -> MeasureSpec {
    MeasureSpec::inf_outside(Region::boxed(vec![0.0], vec![1.0]))
}

#[test]
fn interval_rigidity_is_one_twelfth() {
    let h = 1e-3;
    let g = aligned_grid(1, -1100, 1100, h);
    assert!(torsional_rigidity(&unit_interval(), &g, &[0.5, 1.2]).is_err());
    let res = torsional_rigidity(&unit_interval(), &g, &[0.5, 1.05]).unwrap();
    assert!((res.p - 1.0 / 12.0).abs() < 1e-5, "P = {}", res.p);
    assert!(res.per_r[0].1 < res.per_r[1].1);
}

#[test]
fn interval_rigidity_scales_like_t_cubed() {
    let h = 1e-3;
    let g = aligned_grid(1, -2100, 2100, h);
    let p1 = torsional_rigidity(&unit_interval(), &g, &[2.05]).unwrap().p;
    let two = MeasureSpec::inf_outside(Region::boxed(vec![0.0], vec![2.0]));
    let p2 = torsional_rigidity(&two, &g, &[2.05]).unwrap().p;
    assert!((p2 / p1 / 8.0 - 1.0).abs() < 0.01, "ratio {}", p2 / p1);
}

#[test]
fn disk_rigidity_is_pi_over_eight() {
    let h = 1.0 / 256.0;
    let g = aligned_grid(2, -270, 270, h);
    let disk = MeasureSpec::inf_outside(Region::ball(vec![0.0, 0.0], 1.0));
    let res = torsional_rigidity(&disk, &g, &[1.02]).unwrap();
    let rel = (res.p / (PI / 8.0) - 1.0).abs();
    assert!(rel < 0.01, "P = {}, rel err {rel}", res.p);
}

#[test]
fn torsion_of_the_interval_and_its_integral() {
    let h = 1e-3;
    let g = aligned_grid(1, -1100, 1100, h);
    let res = torsion_function(&unit_interval(), &g, &[0.5, 1.02, 1.05]).unwrap();
    assert!(res.converged);
    let l1 = l1_profile(&res);
    let limit = 1.0 - 2.0 * 0.5f64.tanh();
    assert!((l1.last().unwrap().1 - limit).abs() < 1e-4, "{l1:?}");
    assert!((res.w.max() - (1.0 - 1.0 / 0.5f64.cosh())).abs() < 1e-4);
    assert!(res.w.min() >= 0.0);
    // independent of R once R > 1
    assert!(res.increments[1] < 1e-12);
    let tail = tail_sup_profile(&res, &[0.5]).unwrap();
    assert!(tail[0].1 > 0.1);
}

#[test]
fn free_space_torsion_tends_to_one() {
    let g = Grid::new(&[-40.0], &[40.0], 0.05).unwrap();
    let res = torsion_function(&MeasureSpec::Zero, &g, &[10.0, 20.0, 30.0]).unwrap();
    let bulk = res.w.values()[g.len() / 2];
    assert!((bulk - 1.0).abs() < 1e-8);
    let tail = tail_sup_profile(&res, &[5.0, 10.0, 20.0]).unwrap();
    assert!(tail.iter().all(|&(_, s)| s > 0.99));
    let l1 = l1_profile(&res);
    // w ≡ 1 inside B_R up to boundary layers: ∫ ≈ 2R − 2
    for (r, v) in l1 {
        assert!((v - (2.0 * r - 2.0)).abs() < 0.1, "R = {r}, ∫w = {v}");
    }
}

#[test]
fn everything_masked_torsion_is_zero() {
    let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], 0.1).unwrap();
    let res = torsion_function(&MeasureSpec::inf_on(Region::Space { dim: 2 }), &g, &[1.0]).unwrap();
    assert!(res.w.values().iter().all(|&v| v == 0.0));
}

#[test]
fn harmonic_potential_tail_decreases() {
    let g = Grid::new(&[-12.0], &[12.0], 0.01).unwrap();
    let mu = MeasureSpec::potential("x1^2").unwrap();
    let res = torsion_function(&mu, &g, &[5.0, 10.0]).unwrap();
    let tail = tail_sup_profile(&res, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    for w in tail.windows(2) {
        assert!(w[1].1 < w[0].1, "{tail:?}");
    }
}

#[test]
fn bounded_domain_tail_vanishes() {
    let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], 0.05).unwrap();
    let mu = MeasureSpec::inf_outside(Region::ball(vec![0.0, 0.0], 1.0));
    let res = torsion_function(&mu, &g, &[1.5, 2.5]).unwrap();
    let tail = tail_sup_profile(&res, &[1.0, 2.0]).unwrap();
    assert_eq!(tail[0].1, 0.0);
    assert_eq!(tail[1].1, 0.0);
}
