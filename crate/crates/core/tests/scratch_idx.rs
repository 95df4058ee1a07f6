use lefix_core::index::*;

#[test]
fn dbg_translation() {
    let report = run_scenario(&translation_r1()).unwrap();
    println!("TRANSLATION verdicts: {:#?}", report.verdicts);
    println!("per-t extrapolated: {:?} slope {:?}", report.analytic_extrapolated, report.analytic_trend_slope);
}

#[test]
fn dbg_compact() {
    let report = run_scenario(&reflection_torus_compact()).unwrap();
    println!("COMPACT verdicts: {:#?}", report.verdicts);
    println!("analytic acc {:?} geo acc {:?}", report.analytic_accumulation, report.geometric_accumulation);
    println!("truncation: {:?}", report.truncation);
    for row in report.analytic.iter().filter(|r| r.j == 7) {
        println!("  t2={} certified={} v={}", row.t_squared, row.certified, row.value_re);
    }
}

#[test]
fn dbg_infvol() {
    let report = run_scenario(&super_spec()).unwrap();
    println!("INFVOL verdicts: {:#?}", report.verdicts);
    println!("analytic acc {:?} geo acc {:?}", report.analytic_accumulation, report.geometric_accumulation);
}

fn super_spec() -> ScenarioSpec {
    use lefix_core::clifford::BundleKind;
    use lefix_core::dirac::Scheme;
    use lefix_core::geometry::LatticeKind;
    use lefix_core::isometry::LiftSpec;
    ScenarioSpec {
        id: "infvol-identity-box".into(),
        geometry: GeometrySpec { kind: LatticeKind::Box, extents: vec![6.0], spacing: 0.1, site_budget: None },
        isometry: IsometrySpec { orthogonal: vec![vec![1.0]], translation: vec![0.0], lift: LiftSpec::identity() },
        operator: OperatorSpec { bundle: BundleKind::Exterior, scheme: Scheme::Staggered, mass: 0.0 },
        exhaustion: ExhaustionSpec {
            u: USpec::Full,
            family: FamilySpec::Cubes { start: 1.0, step: 0.625, count: 9 },
            burn_in: 0.25,
            selection: "first".into(),
        },
        grids: GridsSpec::default(),
        tolerances: Tolerances::default(),
    }
}
