use std::f64::consts::PI;
use std::time::Instant;

use torsio_core::measure::rasterize;
use torsio_core::spectral::{
    dirichlet_eigenvalues, local_probe, spectral_abscissa, tail_abscissa_profile, ProbeShape,
};
use torsio_core::torsion::torsion_function;
use torsio_core::{apply_neg_laplacian, Field, Grid, MeasureSpec, Region, SlitSequence, SlitStrip};

const J01_SQ: f64 = 5.783_185_962_946_784;

fn aligned_grid(dim: usize, lo_k: i64, hi_k: i64, h: f64) -> Grid {
    let lo = vec![(lo_k as f64 - 0.5) * h; dim];
    let hi = vec![(hi_k as f64 + 0.5) * h; dim];
    Grid::new(&lo, &hi, h).unwrap()
}

fn interval(a: f64, b: f64) -> Region {
    Region::boxed(vec![a], vec![b])
}

#[test]
fn interval_abscissa_is_one_plus_pi_squared() {
    let g = aligned_grid(1, -200, 1200, 1e-3);
    let res = spectral_abscissa(&MeasureSpec::inf_outside(interval(0.0, 1.0)), &g).unwrap();
    assert!(res.converged);
    let exact = 1.0 + PI * PI;
    assert!((res.lambda1() / exact - 1.0).abs() < 1e-3, "{}", res.lambda1());
}

#[test]
fn free_abscissa_is_the_box_mode() {
    for l in [2.0, 8.0] {
        let g = Grid::new(&[-l], &[l], 0.01).unwrap();
        let res = spectral_abscissa(&MeasureSpec::Zero, &g).unwrap();
        // ghost nodes sit half a cell outside the box
        let eff = 2.0 * l + 0.01;
        let exact = 1.0 + PI * PI / (eff * eff);
        assert!((res.lambda1() / exact - 1.0).abs() < 1e-4, "L = {l}: {}", res.lambda1());
    }
}

#[test]
fn interval_dirichlet_modes() {
    let g = aligned_grid(1, -100, 1100, 1e-3);
    let res = dirichlet_eigenvalues(&interval(0.0, 1.0), &g, 3).unwrap();
    for (k, v) in res.eigenvalues.iter().enumerate() {
        let exact = ((k + 1) as f64 * PI).powi(2);
        assert!((v / exact - 1.0).abs() < 5e-3, "k = {}: {v}", k + 1);
    }
}

#[test]
fn interval_scaling_law() {
    let g = aligned_grid(1, -100, 2100, 1e-3);
    let l1 = dirichlet_eigenvalues(&interval(0.0, 1.0), &g, 1).unwrap().lambda1();
    let l2 = dirichlet_eigenvalues(&interval(0.0, 2.0), &g, 1).unwrap().lambda1();
    assert!((l1 / l2 / 4.0 - 1.0).abs() < 0.01);
}

#[test]
fn disk_first_eigenvalue_is_bessel_zero_squared() {
    let h = 1.0 / 256.0;
    let g = aligned_grid(2, -264, 264, h);
    let t = Instant::now();
    let res = dirichlet_eigenvalues(&Region::ball(vec![0.0, 0.0], 1.0), &g, 1).unwrap();
    let rel = (res.lambda1() / J01_SQ - 1.0).abs();
    eprintln!("disk λ₁ = {} (rel {rel:.2e}) in {:?}, {} its", res.lambda1(), t.elapsed(), res.iterations);
    assert!(res.converged);
    assert!(rel < 0.01);
}

#[test]
fn two_disjoint_disks_have_a_double_eigenvalue() {
    let h = 1.0 / 128.0;
    let g = Grid::new(&[-3.0, -1.5], &[3.0, 1.5], h).unwrap();
    let omega = Region::Union {
        parts: vec![Region::ball(vec![-1.5, 0.0], 1.0), Region::ball(vec![1.5, 0.0], 1.0)],
    };
    let res = dirichlet_eigenvalues(&omega, &g, 2).unwrap();
    let split = (res.eigenvalues[1] - res.eigenvalues[0]) / res.eigenvalues[0];
    assert!(split.abs() < 0.01, "{:?}", res.eigenvalues);
    assert!((res.eigenvalues[0] / J01_SQ - 1.0).abs() < 0.02);
}

#[test]
fn rayleigh_quotient_of_eigenfields() {
    let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], 0.05).unwrap();
    let mu = MeasureSpec::Sum {
        terms: vec![
            MeasureSpec::potential("x1^2 + 2*abs(x2)").unwrap(),
            MeasureSpec::inf_on(Region::ball(vec![0.5, 0.5], 0.3)),
        ],
    };
    let res = spectral_abscissa(&mu, &g).unwrap();
    let u = &res.eigenfields.as_ref().unwrap()[0];
    let raster = rasterize(&mu, &g).unwrap();
    let mask = raster.mask();
    let lap = apply_neg_laplacian(&g, u, &mask).unwrap();
    let pu: Vec<f64> = (0..g.len())
        .map(|i| if mask[i] { 0.0 } else { (1.0 + raster.penalty()[i]) * u.values()[i] })
        .collect();
    let au = lap.combine(1.0, &Field::new(g.clone(), pu).unwrap(), 1.0).unwrap();
    let rq = au.inner(u).unwrap() / u.inner(u).unwrap();
    assert!((rq / res.lambda1() - 1.0).abs() < 1e-6, "{rq} vs {}", res.lambda1());
    assert!(res.lambda1() >= 1.0);
}

#[test]
fn monotone_in_the_measure_and_the_domain() {
    let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], 0.05).unwrap();
    let small = MeasureSpec::potential("r^2").unwrap();
    let big = MeasureSpec::potential("r^2 + 3").unwrap();
    let a = spectral_abscissa(&small, &g).unwrap().lambda1();
    let b = spectral_abscissa(&big, &g).unwrap().lambda1();
    assert!(b >= a);
    let outer = dirichlet_eigenvalues(&Region::ball(vec![0.0, 0.0], 1.5), &g, 3).unwrap();
    let inner = dirichlet_eigenvalues(&Region::ball(vec![0.2, 0.0], 1.0), &g, 3).unwrap();
    for k in 0..3 {
        assert!(inner.eigenvalues[k] >= outer.eigenvalues[k]);
    }
}

#[test]
fn faber_krahn_on_a_test_family() {
    let h = 1.0 / 64.0;
    let g = Grid::new(&[-2.0, -2.0], &[2.0, 2.0], h).unwrap();
    let area = PI; // unit disk
    let s = area.sqrt();
    let (a, b) = ((area / 2.0).sqrt(), (area * 2.0).sqrt());
    let l_side = (area / 3.0).sqrt();
    let family = [
        ("disk", Region::ball(vec![0.0, 0.0], 1.0)),
        ("square", Region::boxed(vec![-s / 2.0, -s / 2.0], vec![s / 2.0, s / 2.0])),
        ("rectangle", Region::boxed(vec![-b / 2.0, -a / 2.0], vec![b / 2.0, a / 2.0])),
        (
            "l_shape",
            Region::Union {
                parts: vec![
                    Region::boxed(vec![-l_side, -l_side], vec![l_side, 0.0]),
                    Region::boxed(vec![-l_side, -1e-9], vec![0.0, l_side]),
                ],
            },
        ),
    ];
    let mut vals = Vec::new();
    for (name, omega) in &family {
        let raster = rasterize(&MeasureSpec::inf_outside(omega.clone()), &g).unwrap();
        let cells = raster.active_count() as f64;
        // rescale to the common area through λ ∝ 1/area
        let lambda = dirichlet_eigenvalues(omega, &g, 1).unwrap().lambda1();
        vals.push((name.to_string(), lambda * cells * h * h / area));
    }
    let disk = vals[0].1;
    for (name, v) in &vals[1..] {
        assert!(disk <= v * 1.02, "{name}: {v} vs disk {disk}");
    }
}

#[test]
fn abscissa_times_max_torsion_is_at_least_one() {
    let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], 0.05).unwrap();
    let radii = [1.0, 2.7];
    for mu in [
        MeasureSpec::inf_outside(Region::ball(vec![0.0, 0.0], 1.0)),
        MeasureSpec::potential("r^2").unwrap(),
        MeasureSpec::potential("abs(x1)*abs(x2) + 4").unwrap(),
    ] {
        let w = torsion_function(&mu, &g, &radii).unwrap();
        let eps = w.w.max();
        let lambda = spectral_abscissa(&mu, &g).unwrap().lambda1();
        assert!(eps < 1.0);
        assert!(lambda >= (1.0 / eps) * 0.95, "λ = {lambda}, 1/ε = {}", 1.0 / eps);
    }
}

#[test]
fn harmonic_tail_abscissa_grows() {
    let g = Grid::new(&[-8.0], &[8.0], 0.01).unwrap();
    let prof = tail_abscissa_profile(&MeasureSpec::potential("x1^2").unwrap(), &g, &[1.0, 2.0, 4.0, 6.0]).unwrap();
    for w in prof.windows(2) {
        assert!(w[1].value > w[0].value);
    }
    for p in &prof {
        assert!(p.value >= 1.0 + p.r * p.r);
    }
}

#[test]
fn strip_tail_abscissa_is_flat() {
    let h = 1.0 / 32.0;
    let g = Grid::new(&[-1.0, -1.0], &[16.0, 2.0], h).unwrap();
    let strip = Region::boxed(vec![0.0, 0.0], vec![1e9, 1.0]);
    let prof = tail_abscissa_profile(&MeasureSpec::inf_outside(strip), &g, &[0.25, 0.5, 0.9]).unwrap();
    let exact = 1.0 + PI * PI;
    for p in &prof {
        assert!((p.value / exact - 1.0).abs() < 0.1, "{prof:?}");
    }
}

#[test]
fn bounded_domain_tail_abscissa_is_infinite() {
    let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], 0.1).unwrap();
    let prof = tail_abscissa_profile(
        &MeasureSpec::inf_outside(Region::ball(vec![0.0, 0.0], 1.0)),
        &g,
        &[0.5, 1.0, 2.0],
    )
    .unwrap();
    assert!(prof[0].value.is_finite());
    assert_eq!(prof[1].value, f64::INFINITY);
    assert_eq!(prof[2].value, f64::INFINITY);
}

#[test]
fn slit_probes_grow_along_the_strip() {
    let h = 1.0 / 32.0;
    let g = Grid::new(&[-1.0, -2.0], &[40.0, 3.0], h).unwrap();
    let strip = Region::SlitStrip(SlitStrip {
        dim: 2,
        start: 0.0,
        width: 1.0,
        slits: SlitSequence::Log,
        slit_width: None,
    });
    let xs = [1.5f64, 2.5, 3.5];
    let centers: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 0.5]).collect();
    let vals = local_probe(&MeasureSpec::inf_outside(strip), &g, &centers, 1.0, ProbeShape::Ball).unwrap();
    for w in vals.windows(2) {
        assert!(w[1].lambda > w[0].lambda, "{vals:?}");
    }
}

#[test]
fn axes_potential_diagonal_probes_grow() {
    let g = Grid::new(&[-6.0, -6.0], &[6.0, 6.0], 1.0 / 16.0).unwrap();
    let mu = MeasureSpec::potential("abs(x1)*abs(x2)").unwrap();
    let centers: Vec<Vec<f64>> = [0.0, 1.5, 3.0, 4.5].iter().map(|&t| vec![t, t]).collect();
    let vals = local_probe(&mu, &g, &centers, 1.0, ProbeShape::Ball).unwrap();
    for w in vals.windows(2) {
        assert!(w[1].lambda > w[0].lambda, "{vals:?}");
    }
}
