use ewlab_core::charts::{
    convergence_order, eval_jet, fd_jet3, Chart, ConvergenceOrder, Differentiation, Jet3, ScalarField,
    Taylor,
};
use ewlab_core::ward::{catalog, LABELS};
use proptest::prelude::*;

fn cart() -> Chart {
    Chart::cartesian([(-2.0, 2.0); 3]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Per-order difference scaled by `max(1, largest analytic entry of that order)`.
fn scaled_difference(exact: &Jet3, fd: &Jet3) -> [f64; 4] {
    let d = exact.max_difference(fd);
    let mut size = [exact.value.abs(), 0.0f64, 0.0, 0.0];
    for i in 0..3 {
        size[1] = size[1].max(exact.grad[i].abs());
        for j in 0..3 {
            size[2] = size[2].max(exact.hess[i][j].abs());
            for k in 0..3 {
                size[3] = size[3].max(exact.third[i][j][k].abs());
            }
        }
    }
    std::array::from_fn(|k| d[k] / size[k].max(1.0))
}

/// Random polynomial of total degree at most 4 as text.
fn polynomial() -> impl Strategy<Value = String> {
    prop::collection::vec((-3i32..=3, 0u32..=2, 0u32..=2, 0u32..=2), 1..6).prop_map(|terms| {
        terms
            .into_iter()
            .map(|(c, a, b, d)| {
                let (b, d) = if a + b + d > 4 { (0, 0) } else { (b, d) };
                format!("({c})*x^{a}*y^{b}*z^{d}")
            })
            .collect::<Vec<_>>()
            .join(" + ")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stencils_are_exact_on_quartics(text in polynomial(), p in prop::array::uniform3(-1.5f64..1.5)) {
        let c = cart();
        // a coarse step keeps round-off out of the exactness check
        let fd = ScalarField::parse(&text, &c)
            .unwrap()
            .with_mode(Differentiation::FiniteDifference { step: 0.1 });
        let fd = eval_jet(&fd, &c, p).unwrap();
        let exact = eval_jet(&ScalarField::builtin("poly", c.parse(&text).unwrap()), &c, p).unwrap();
        for i in 0..3 {
            prop_assert!(rel(fd.grad[i], exact.grad[i]) < 1e-10);
            for j in 0..3 {
                prop_assert!(rel(fd.hess[i][j], exact.hess[i][j]) < 1e-10);
                for k in 0..3 {
                    prop_assert!(rel(fd.third[i][j][k], exact.third[i][j][k]) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn entire_functions_converge_at_fourth_order(
        a in 0.3f64..1.5,
        p in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let c = cart();
        let text = format!("sin({a}*x)*exp(y) + cos(z*x)");
        let f = ScalarField::builtin("probe", c.parse(&text).unwrap());
        match convergence_order(&f, &c, p).unwrap() {
            ConvergenceOrder::Order(k) => {
                let ratio = 2f64.powf(k);
                prop_assert!((12.0..=20.0).contains(&ratio), "ratio {}", ratio);
            }
            ConvergenceOrder::Saturated => {}
        }
    }
}

#[test]
fn catalog_fields_agree_with_finite_differences() {
    // every metric and Weyl form component of the closed-form entries
    for label in LABELS {
        let e = catalog(label, &[]).unwrap();
        let Some(closed) = e.closed_form.as_ref() else { continue };
        let pts = closed.chart.sample_points(20, 3).unwrap();
        for p in pts {
            let exact = closed.local(p, 4).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let f = |q: [f64; 3]| closed.local(q, 0).unwrap().g[i][j].value();
                    let d = scaled_difference(&Jet3::from_taylor(&exact.g[i][j]), &fd_jet3(f, p, 1e-3));
                    assert!(d.iter().all(|x| *x < 1e-6), "{label} g{i}{j}: {d:?}");
                }
                let f = |q: [f64; 3]| closed.local(q, 1).unwrap().omega[i].value();
                let d = scaled_difference(&Jet3::from_taylor(&exact.omega[i]), &fd_jet3(f, p, 1e-3));
                // ω enters the geometry with at most two derivatives
                assert!(d[..3].iter().all(|x| *x < 1e-6), "{label} omega{i}: {d:?}");
            }
        }
    }
}

#[test]
fn profile_fields_agree_with_finite_differences() {
    for label in LABELS {
        let e = catalog(label, &[]).unwrap();
        let Some(profile) = e.profile.as_ref() else { continue };
        let fd = profile
            .v
            .clone()
            .with_mode(Differentiation::FiniteDifference { step: 1e-3 });
        for p in profile.chart.sample_points(30, 4).unwrap() {
            let a = eval_jet(&profile.v, &profile.chart, p).unwrap();
            let b = eval_jet(&fd, &profile.chart, p).unwrap();
            let d = scaled_difference(&a, &b);
            assert!(d.iter().all(|x| *x < 1e-6), "{label} at {p:?}: {d:?}");
        }
    }
}

#[test]
fn seeded_sampling_is_reproducible() {
    let c = Chart::axial((0.2, 3.0), (-2.0, 2.0)).unwrap();
    assert_eq!(c.sample_points(25, 11).unwrap(), c.sample_points(25, 11).unwrap());
    assert_ne!(c.sample_points(25, 11).unwrap(), c.sample_points(25, 12).unwrap());
    for p in c.sample_points(200, 1).unwrap() {
        c.check(p).unwrap();
    }
}

#[test]
fn taylor_composition_matches_chain_rule() {
    let [x, y, _] = Taylor::variables([0.3, -0.4, 0.0], 4);
    let f = (x * y).sin().exp();
    // ∂_x at the point
    let s = 0.3 * -0.4f64;
    let expect = s.sin().exp() * s.cos() * -0.4;
    assert!((f.partial([1, 0, 0]) - expect).abs() < 1e-14);
}
