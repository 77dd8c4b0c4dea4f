use curvhom::curvature::evaluate;
use curvhom::expr::{parse_scalar_expr, Expr, Func, Params, SymbolTable};
use curvhom::models::{extract_model, kv_equivalent, EquivalenceConfig, Mode};
use curvhom::{MetricField, Signature};
use proptest::prelude::*;

fn symbols() -> SymbolTable {
    SymbolTable::new(["x", "y", "z"], ["a"])
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.1f64..4.0).prop_map(Expr::Num),
        (0usize..3).prop_map(|i| Expr::Coord {
            index: i,
            name: ["x", "y", "z"][i].into()
        }),
        Just(Expr::Param("a".into())),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |e| Expr::Neg(b(e))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Add(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Sub(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Mul(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Div(b(l), b(r))),
            (inner.clone(), -3i32..4).prop_map(move |(l, n)| Expr::Pow(b(l), b(Expr::Num(n as f64)))),
            (inner.clone(), prop_oneof![Just(Func::Exp), Just(Func::Sin), Just(Func::Cos)])
                .prop_map(move |(e, f)| Expr::Call(f, b(e))),
        ]
    })
}

/// Positive-definite 3-metric with off-diagonal terms, parameterized by `c`.
fn general_metric(c: [f64; 4]) -> MetricField {
    let s = symbols();
    let p = |t: String| parse_scalar_expr(&t, &s).unwrap();
    MetricField::from_upper(
        vec!["x".into(), "y".into(), "z".into()],
        [
            ((0, 0), p(format!("2 + {}*y^2", c[0]))),
            ((0, 1), p(format!("{}*sin(z)", c[1]))),
            ((1, 1), p(format!("exp({}*x)", c[2]))),
            ((1, 2), p(format!("{}*x*y", c[3]))),
            ((2, 2), p("1 + x^2".into())),
        ],
        Signature::riemannian(3),
    )
    .unwrap()
}

fn scaled(g: &MetricField, c: f64) -> MetricField {
    let m = g.dim();
    let entries = (0..m * m)
        .map(|k| Expr::Mul(Box::new(Expr::Num(c)), Box::new(g.component(k / m, k % m).clone())))
        .collect();
    MetricField::new(g.coords().to_vec(), entries, g.signature()).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, 3)
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    [-0.5f64..0.5, -0.3f64..0.3, -1.0f64..1.0, -0.3f64..0.3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(e in tree(), pt in point(), a in 0.5f64..2.0) {
        let params: Params = [("a".to_string(), a)].into();
        let text = e.to_string();
        let back = parse_scalar_expr(&text, &symbols()).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        if let Ok(v) = e.eval(&pt, &params) {
            if v.is_finite() && v.abs() < 1e12 {
                let w = back.eval(&pt, &params).unwrap();
                prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0), "{} : {} vs {}", text, v, w);
            }
        }
    }

    #[test]
    fn riemann_symmetries_and_bianchi(c in coeffs(), pt in point()) {
        let data = evaluate(&general_metric(c), &pt, &Params::new(), 1).unwrap();
        let r = &data.chain[0];
        let tol = 1e-11 * r.max_abs().max(1.0);
        for i in 0..3 { for j in 0..3 { for k in 0..3 { for l in 0..3 {
            let v = r.get(&[i, j, k, l]);
            prop_assert!((v + r.get(&[j, i, k, l])).abs() <= tol);
            prop_assert!((v + r.get(&[i, j, l, k])).abs() <= tol);
            prop_assert!((v - r.get(&[k, l, i, j])).abs() <= tol);
            prop_assert!((v + r.get(&[j, k, i, l]) + r.get(&[k, i, j, l])).abs() <= tol);
        }}}}
        let dr = &data.chain[1];
        let tol = 1e-9 * dr.max_abs().max(1.0);
        for i in 0..3 { for j in 0..3 { for k in 0..3 { for l in 0..3 { for u in 0..3 {
            let s = dr.get(&[i, j, k, l, u]) + dr.get(&[i, j, l, u, k]) + dr.get(&[i, j, u, k, l]);
            prop_assert!(s.abs() <= tol, "second Bianchi {:?}: {}", [i, j, k, l, u], s);
        }}}}}
    }

    #[test]
    fn rescaled_metric_is_kv_equivalent(c in coeffs(), pt in point(), s in 0.3f64..3.0) {
        prop_assume!((s - 1.0).abs() > 0.05);
        let g = general_metric(c);
        let cfg = EquivalenceConfig::default();
        let m1 = extract_model(&g, &pt, &Params::new(), 1).unwrap();
        let m2 = extract_model(&scaled(&g, s), &pt, &Params::new(), 1).unwrap();
        let kv = kv_equivalent(&m1, &m2, Mode::Homothety, &cfg).unwrap();
        let (_, lambda) = kv.witness().expect("rescaling is a homothety");
        prop_assert!((lambda * lambda - s).abs() <= 1e-8 * s, "lambda^2 {} vs {}", lambda * lambda, s);
        let iso = kv_equivalent(&m1, &m2, Mode::Isometry, &cfg).unwrap();
        prop_assert!(!iso.is_equivalent());
    }

    #[test]
    fn witnesses_are_symmetric(c in coeffs(), p1 in point(), p2 in point()) {
        let g = general_metric(c);
        let cfg = EquivalenceConfig::default();
        let m1 = extract_model(&g, &p1, &Params::new(), 0).unwrap();
        let m2 = extract_model(&g, &p2, &Params::new(), 0).unwrap();
        let ab = kv_equivalent(&m1, &m2, Mode::Homothety, &cfg).unwrap();
        let ba = kv_equivalent(&m2, &m1, Mode::Homothety, &cfg).unwrap();
        prop_assert_eq!(ab.label(), ba.label());
        if let (Some((_, l1)), Some((_, l2))) = (ab.witness(), ba.witness()) {
            prop_assert!((l1 * l2 - 1.0).abs() <= 1e-8, "{} * {}", l1, l2);
        }
    }
}
