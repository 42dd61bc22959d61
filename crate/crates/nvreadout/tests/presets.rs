use nvreadout::config::ScenarioConfig;
use nvreadout::runner;

#[test]
fn fig2b_has_interior_maximum() {
    let out = runner::run(&ScenarioConfig::preset("fig2b").unwrap()).unwrap();
    let s = &out.summary_rows()[0];
    assert_eq!(s.variant, "plain");
    assert!(s.n_opt > 1500 && s.n_opt < 3500, "{s:?}");
    assert!(s.f_max > 0.32 && s.f_max < 0.48, "{s:?}");
    let last = out.trace_rows().last().unwrap().fidelity;
    assert!(last < s.f_max);
}

#[test]
fn fig3c_improvement_falls_with_period() {
    let rows = runner::sweep(&ScenarioConfig::preset("fig3c").unwrap()).unwrap();
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.variant != "plain")
        .map(|r| r.improvement)
        .collect();
    assert_eq!(ratios.len(), 5);
    for w in ratios.windows(2) {
        assert!(w[1] < w[0], "{ratios:?}");
    }
    assert!(ratios[0] > 1.5);
}
