mod common;

use common::*;
use proptest::prelude::*;
use unrect::arrangement::{pa_dist_to_lines, Affine, PiecewiseAffine, PwAffine};
use unrect::construction::{Construction, StageSpec, StripSchedule};
use unrect::detectors::*;
use unrect::real::{real, Real};
use unrect::{Line, UnitVector, Vec2, Window};

/// `dist` to diagonal lines through dyadic points. All bisectors are
/// diagonal, horizontal or vertical, so every breakpoint on an axis-parallel
/// path through a dyadic point is a multiple of 2^-9.
fn dyadic_pa(offsets: &[(u8, i32)]) -> PwAffine {
    let lines: Vec<Line> = offsets
        .iter()
        .map(|&(kind, c)| {
            let c = c as f64 / 256.0;
            let d = if kind % 2 == 0 { [1.0, 1.0] } else { [1.0, -1.0] };
            Line::through(Vec2::from_f64(c, 0.0), UnitVector::from_f64(d[0], d[1]).unwrap())
        })
        .collect();
    pa_dist_to_lines(&lines, real(1.0), Window::unit()).unwrap()
}

/// Sup of chord-slope differences over a 2048-step endpoint grid.
fn zeta_grid<F: PiecewiseAffine>(f: &F, z: Vec2, eps: f64, e: UnitVector) -> Real {
    let n = 2048i64;
    let step = real(2.0 * eps / n as f64);
    let g = |i: i64| f.value(z + e.v() * (step * i as f64));
    let vals: Vec<Real> = (-n / 2..=n / 2).map(g).collect();
    let (mut lo, mut hi) = (real(f64::INFINITY), real(f64::NEG_INFINITY));
    for a in -n / 2..=0 {
        for b in 0.max(a + 1)..=(a + n / 2) {
            let s = (vals[(b + n / 2) as usize] - vals[(a + n / 2) as usize]) / (step * (b - a) as f64);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    hi - lo
}

struct Plus<'a, G: Fn(Vec2) -> Real> {
    f: &'a PwAffine,
    g: G,
}

impl<G: Fn(Vec2) -> Real> PiecewiseAffine for Plus<'_, G> {
    fn breaklines_near(&self, z: Vec2, r: Real) -> Vec<Line> {
        self.f.breaklines_near(z, r)
    }

    fn value(&self, z: Vec2) -> Real {
        self.f.value(z) + (self.g)(z)
    }
}

fn offsets() -> impl Strategy<Value = Vec<(u8, i32)>> {
    prop::collection::vec((0u8..2, -64i32..320), 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zeta_matches_grid_enumeration(offs in offsets(), zx in 96i32..160, zy in 96i32..160, horizontal in any::<bool>()) {
        let f = dyadic_pa(&offs);
        let z = Vec2::from_f64(zx as f64 / 256.0, zy as f64 / 256.0);
        let e = if horizontal { UnitVector::e1() } else { UnitVector::from_f64(0.0, 1.0).unwrap() };
        let eps = 0.125;
        let (v, w) = zeta(&f, z, real(eps), e);
        let brute = zeta_grid(&f, z, eps, e);
        prop_assert!((v - brute).abs() <= real(1e-9), "exact {} grid {}", v, brute);
        prop_assert!(w.contains_z(1e-20));
        prop_assert!(w.t.abs() <= real(eps) && w.s.abs() <= real(eps));
        prop_assert!((w.defect_of(&f) - v).abs() <= real(1e-28));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zeta_invariants(offs in offsets(), zx in 0.3f64..0.7, zy in 0.3f64..0.7, ang in 0.0f64..6.3, eps in 0.01f64..0.2, gx in -3.0f64..3.0, gy in -3.0f64..3.0) {
        let f = dyadic_pa(&offs);
        let z = Vec2::from_f64(zx, zy);
        let e = UnitVector::from_angle(ang);
        let (v, _) = zeta(&f, z, real(eps), e);
        let (vn, _) = zeta(&f, z, real(eps), -e);
        prop_assert!((v - vn).abs() <= real(1e-26));
        let (vs, _) = zeta(&f, z, real(eps * 0.5), e);
        prop_assert!(vs <= v + real(1e-26));
        let aff = Affine::new(Vec2::from_f64(gx, gy), real(0.3));
        let shifted = Plus { f: &f, g: |p: Vec2| aff.eval(p) };
        let (va, _) = zeta(&shifted, z, real(eps), e);
        prop_assert!((va - v).abs() <= real(1e-26));
    }

    #[test]
    fn bounded_perturbation_keeps_witness(offs in offsets(), zx in 0.3f64..0.7, zy in 0.3f64..0.7, ang in 0.0f64..6.3, theta in 0.0f64..1e-3, seed in any::<u64>()) {
        let f = dyadic_pa(&offs);
        let z = Vec2::from_f64(zx, zy);
        let (_, w) = zeta(&f, z, real(0.1), UnitVector::from_angle(ang));
        let bound = perturbation_stability(&w, real(theta));
        // arbitrary (discontinuous) g with |g| <= theta
        let g = move |p: Vec2| {
            let h = (p.x.hi().to_bits() ^ p.y.hi().to_bits().rotate_left(17) ^ seed).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            real(theta * ((h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0))
        };
        let perturbed = Plus { f: &f, g };
        prop_assert!(w.defect_of(&perturbed) >= bound - real(1e-24));
    }
}

#[test]
fn upsilon_monotone_in_budget() {
    let f = dyadic_pa(&[(0, 128), (1, 100), (0, 150)]);
    let z = Vec2::from_f64(0.49, 0.51);
    let mut last = real(-1.0);
    for b in [8, 16, 32, 64] {
        let r = upsilon(&f, z, real(0.1), &direction_set(b, &[]).unwrap());
        assert!(r.value >= last);
        last = r.value;
    }
}

/// Piecewise-linear interpolant of `x^2` on nodes `i/1024`.
struct Square;

impl PiecewiseAffine for Square {
    fn breaklines_near(&self, z: Vec2, r: Real) -> Vec<Line> {
        let lo = ((z.x - r).hi() * 1024.0).floor() as i64;
        let hi = ((z.x + r).hi() * 1024.0).ceil() as i64;
        (lo..=hi)
            .map(|i| {
                Line::through(
                    Vec2::from_f64(i as f64 / 1024.0, 0.0),
                    UnitVector::from_f64(0.0, 1.0).unwrap(),
                )
            })
            .collect()
    }

    fn value(&self, z: Vec2) -> Real {
        let x = z.x * 1024.0;
        let i = x.hi().floor();
        let (a, b) = (real(i) / 1024.0, real(i + 1.0) / 1024.0);
        let fa = a * a;
        let fb = b * b;
        fa + (fb - fa) * (z.x - a) * 1024.0
    }
}

#[test]
fn smooth_interpolant_zeta_is_linear_in_scale() {
    let z = Vec2::from_f64(0.3, 0.0);
    for k in 0..6 {
        let eps = 0.125 / 4f64.powi(k);
        let (v, _) = zeta(&Square, z, real(eps), UnitVector::e1());
        // chord slopes of x^2 through z span at most 2 eps (+ interpolation)
        assert!(v <= real(2.0 * eps + 2.0 / 1024.0), "eps {eps}: {v}");
    }
    let scales: Vec<Real> = (0..6).map(|k| real(0.125 / 4f64.powi(k))).collect();
    let p = directional_derivative_probe(
        &Square,
        Vec2::from_f64(0.3 + 1.0 / 2048.0, 0.0),
        UnitVector::e1(),
        &scales,
        real(1e-20),
    )
    .unwrap();
    assert_eq!(p.verdict, Verdict::DerivativeConsistent);
}

fn admissible(c: &Construction, ang: f64) -> Option<UnitVector> {
    let v = UnitVector::from_angle(ang);
    admissible_direction(c, v).then_some(v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn phi_witness_suite(k in 1..=DEPTH, t in 0.0f64..1.0, o in -0.999f64..0.999, ang in 0.0f64..6.3) {
        let c = construction();
        let z = near_strip(c, k, t, o);
        prop_assume!(!c.stage(k).guarded(z));
        let Some(v) = admissible(c, ang) else { return Ok(()); };
        let pw = nondiff_witness_phi(c, k, z, v).unwrap();
        for row in &pw.checks {
            prop_assert!(row.pass, "{:?}", row);
        }
        let w = pw.witness;
        prop_assert_eq!(w.s, w.t * 2.0);
        prop_assert_eq!(w.x, w.y);
        // coordinates near 0.5 carry about 1e-32 absolute error
        prop_assert!(w.contains_z(1e-20f64.max(1e-30 / w.min_len().hi())));
        prop_assert!(w.defect >= c.eta().sqrt() * 0.5);
        prop_assert!((w.e.v().dot(v.v()).abs() - 1.0).abs() <= real(1e-30));
    }
}

#[test]
fn phi_witness_perpendicular_crossing() {
    let s = StripSchedule {
        w: [1.0, 0.0],
        eta: 0.04,
        depth: 1,
        stages: vec![StageSpec {
            x: [0.5, 0.5],
            e: [1.0, 0.0],
            rho: 2f64.powi(-10),
            delta: 0.25,
        }],
        eps0: 4.0,
        window: Window::unit(),
        tail_ratio: 2f64.powi(-10),
        delta_budget: 1.0,
        line_cap: 100,
        certificate: None,
    };
    let c = Construction::build(&s).unwrap();
    let z = Vec2::from_f64(0.3, 0.5 + 2f64.powi(-12));
    let pw = nondiff_witness_phi(&c, 1, z, UnitVector::from_f64(0.0, 1.0).unwrap()).unwrap();
    assert_eq!(pw.witness.t, real(2f64.powi(-10)));
    assert_eq!(pw.witness.x, Vec2::from_f64(0.3, 0.5));
    assert!(nondiff_witness_phi(&c, 1, z, UnitVector::e1()).is_err());
    assert_eq!(
        nondiff_witness_phi(&c, 1, Vec2::from_f64(0.3, 0.9), UnitVector::from_f64(0.0, 1.0).unwrap()).unwrap_err(),
        DetectorError::OutsideStrip(1)
    );

    // phi_1 is affine near the axis below the strip width; at every scale
    // that reaches across the strip the chord slopes split by sqrt(eta)/2
    let scales: Vec<Real> = (0..4).map(|i| real(2f64.powi(-5 - i))).collect();
    let on_axis = Vec2::from_f64(0.3, 0.5);
    let view = c.phi_view(1);
    let p = directional_derivative_probe(&view, on_axis, UnitVector::from_angle(1.2), &scales, real(1e-20)).unwrap();
    match p.verdict {
        Verdict::NonDifferentiable { limsup } => assert!(limsup >= c.eta().sqrt() * 0.5),
        v => panic!("{v:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn h_witness_suite(k in (DEPTH.div_ceil(2))..=DEPTH, t in 0.0f64..1.0, o in -0.999f64..0.999, ang in 0.0f64..6.3) {
        for c in both() {
            let z = near_strip(c, k, t, o);
            let Some(v) = admissible(c, ang) else { return Ok(()); };
            match nondiff_witness_h(c, z, DEPTH, None, v, real(0.5)) {
                Ok(hw) => {
                    for row in hw.checks() {
                        prop_assert!(row.pass, "{:?}", row);
                    }
                    prop_assert!(hw.witness.defect >= hw.bound);
                }
                Err(DetectorError::NoStage(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}

#[test]
fn h_witness_needs_a_stage() {
    let c = construction();
    let far = Vec2::from_f64(0.0, 1.0 - 1e-9);
    let v = UnitVector::from_f64(0.0, 1.0).unwrap();
    assert_eq!(
        nondiff_witness_h(c, far, DEPTH, None, v, real(0.5)).unwrap_err(),
        DetectorError::NoStage(DEPTH)
    );
}

/// Breakpoints within roundoff of `z +- eps` used to produce chords of
/// length ~1e-33 whose slopes are noise.
#[test]
fn near_endpoint_breakpoints_do_not_make_degenerate_chords() {
    type Case = (&'static [(u8, i32)], (f64, f64), bool);
    let cases: [Case; 3] = [
        (&[(0, 53), (1, 7), (0, 147), (0, -35)], (133.0, 112.0), true),
        (&[(0, -27), (1, 57)], (148.0, 143.0), false),
        (
            &[(1, 4), (0, 214), (0, 270), (1, 287), (0, 211), (0, 308)],
            (124.0, 96.0),
            true,
        ),
    ];
    for (offs, (zx, zy), horizontal) in cases {
        let f = dyadic_pa(offs);
        let z = Vec2::from_f64(zx / 256.0, zy / 256.0);
        let e = if horizontal {
            UnitVector::e1()
        } else {
            UnitVector::from_f64(0.0, 1.0).unwrap()
        };
        let (v, w) = zeta(&f, z, real(0.125), e);
        assert!((v - zeta_grid(&f, z, 0.125, e)).abs() <= real(1e-9), "{offs:?}: {v}");
        assert!(w.s.abs() > real(1e-20) && w.t.abs() > real(1e-20));
    }
}
