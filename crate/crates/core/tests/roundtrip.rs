use std::path::Path;

use maflow_core::config::{parse_config_str, Axes, DomainConfig, RunConfig};
use maflow_core::flow::{run_flow, RunOptions};
use maflow_core::grid::{build_grid, DomainSpec, GridField};
use maflow_core::problem::{FieldExpr, ProblemSpec, Scheme, SourceG};
use maflow_core::snapshot::{decode_snapshot, format_trace, read_snapshot, write_snapshot, Snapshot};
use proptest::prelude::*;

fn base_config() -> RunConfig {
    parse_config_str("[domain]\nshape = \"radial\"\nn = 1\nnodes = 9\n", Path::new(".")).unwrap()
}

fn field_expr() -> impl Strategy<Value = FieldExpr> {
    prop_oneof![
        (0.1f64..4.0, -2.0f64..2.0).prop_map(|(a, c)| FieldExpr::Quadratic { a, c }),
        (0.0f64..1.0, 0.1f64..2.0, -1.0f64..1.0).prop_map(|(a, b, c)| FieldExpr::Quartic { a, b, c }),
        (-1.0f64..1.0).prop_map(|value| FieldExpr::Constant { value }),
        (0.0f64..0.5, 0.5f64..2.0).prop_map(|(amplitude, a)| FieldExpr::BoxBubble { amplitude, a, c: 0.0 }),
    ]
}

fn domain() -> impl Strategy<Value = DomainConfig> {
    prop_oneof![
        (1usize..=2, 0.5f64..3.0, 3usize..600).prop_map(|(n, radius, nodes)| DomainConfig::Radial { n, radius, nodes }),
        (1usize..=2, 1u32..5).prop_map(|(n, k)| DomainConfig::Box {
            n,
            lower: Axes::Uniform(-1.0),
            upper: Axes::PerAxis(vec![1.0; 2 * n]),
            h: Axes::Uniform(1.0 / f64::from(1 << k)),
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip(
        domain in domain(),
        initial in proptest::option::of(field_expr()),
        sub in proptest::option::of(field_expr()),
        a in -3.0f64..=0.0,
        b in -1.0f64..1.0,
        coef in -2.0f64..2.0,
        seed in 0u64..(1 << 62),
        every in 1usize..1000,
        implicit in any::<bool>(),
        steady in any::<bool>(),
        horizon in 0.01f64..100.0,
        m in 1usize..8,
    ) {
        let mut cfg = base_config();
        cfg.domain = domain;
        cfg.initial = initial;
        cfg.subsolution = sub;
        cfg.source.a = a;
        cfg.source.b = b;
        cfg.source.g = SourceG::Log1p { coef };
        cfg.seed = seed;
        cfg.snapshot_every = every;
        cfg.flow.scheme = if implicit { Scheme::Implicit } else { Scheme::Explicit };
        cfg.flow.steady = steady;
        cfg.flow.horizon = Some(horizon);
        cfg.functionals.simpson_nodes = 2 * m + 1;
        cfg.tolerances.tol_q = Some(1e-9);
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(parse_config_str(&text, Path::new(".")).unwrap(), cfg);
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(
        radial in any::<bool>(),
        bits in proptest::collection::vec(any::<u64>(), 25),
    ) {
        let spec = if radial {
            DomainSpec::radial(1, 1.0, 25)
        } else {
            DomainSpec::cube(1, -1.0, 1.0, 0.5)
        };
        let g = build_grid(&spec).unwrap();
        let vals: Vec<f64> = bits
            .iter()
            .map(|&b| f64::from_bits(b))
            .map(|x| if x.is_finite() { x } else { 0.0 })
            .collect();
        let f = GridField::new(&g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_snapshot(&path, &g, "f", &f).unwrap();
        let back = read_snapshot(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        prop_assert_eq!(decode_snapshot(&bytes).unwrap(), back.clone());
        let again = back.into_field(&g).unwrap();
        prop_assert!(again.values().iter().zip(f.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert_eq!(Snapshot::of(&g, "f", &f).unwrap().encode(), bytes);
    }
}

#[test]
fn identical_runs_give_identical_trace_bytes() {
    let run = || {
        let mut spec = ProblemSpec::radial_disc(1, 33, FieldExpr::quadratic(2.0, -1.0));
        spec.stepping.scheme = Scheme::Explicit;
        spec.steady = false;
        spec.horizon = Some(0.02);
        let p = spec.materialize().unwrap();
        let out = run_flow(&p, RunOptions { snapshot_every: 7, override_subsolution: false }, |_, _| Ok(())).unwrap();
        format_trace(&out.trace).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_and_single_row_traces() {
    let empty = format_trace(&[]).unwrap();
    assert_eq!(empty.lines().count(), 1);
    let mut spec = ProblemSpec::radial_disc(1, 33, FieldExpr::quadratic(1.0, 0.0));
    spec.steady = true;
    let p = spec.materialize().unwrap();
    let out = run_flow(&p, RunOptions::default(), |_, _| Ok(())).unwrap();
    assert_eq!(out.trace.len(), 1);
    let text = format_trace(&out.trace).unwrap();
    assert_eq!(text.lines().count(), 2);
    let f = maflow_core::functionals::energy_f(&p.grid, &p.u0, &p.u0, &p.source, 9).unwrap();
    assert_eq!(out.trace[0].f, f);
}
