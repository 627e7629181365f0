use diffuser::diffusion::DiffusionConfig;
use diffuser::experiments::*;
use diffuser::graph::pattern_stats;
use diffuser::layer::LayerShape;

#[test]
fn wider_windows_widen_the_gap_at_2048() {
    let patterns: Vec<_> = [8, 32, 128]
        .iter()
        .map(|w| NamedPattern::new(&format!("local-{w}"), PatternSpec::local(*w)))
        .chain([NamedPattern::new("full", PatternSpec::complete())])
        .collect();
    let c = pattern_spectra_compare(2048, &patterns, &[0]).unwrap();
    let m = &c.report.trials[0].metrics;
    assert!(m["local-8.lambda_2"] < m["local-32.lambda_2"]);
    assert!(m["local-32.lambda_2"] < m["local-128.lambda_2"]);
    assert!((m["full.lambda_2"] - 2048.0 / 2047.0).abs() < 1e-10);
}

#[test]
fn diffuser_pattern_has_the_largest_gap() {
    let patterns: Vec<_> = ["diffuser", "longformer", "bigbird"]
        .iter()
        .map(|p| NamedPattern::new(p, PatternSpec::preset(p, 16, 16, 16, 8).unwrap()))
        .collect();
    let seeds = [0, 1, 2, 3, 4];
    let c = pattern_spectra_compare(512, &patterns, &seeds).unwrap();
    for t in &c.report.trials {
        let d = t.metrics["diffuser.lambda_2"];
        assert!(d > t.metrics["longformer.lambda_2"], "seed {}", t.seed);
        assert!(d > t.metrics["bigbird.lambda_2"], "seed {}", t.seed);
    }
    // Budgets match to within the edges lost to overlaps.
    let nnz: Vec<usize> = patterns.iter().map(|p| p.spec.build(512, 0).unwrap().nnz()).collect();
    let max = *nnz.iter().max().unwrap() as f64;
    let min = *nnz.iter().min().unwrap() as f64;
    assert!(max / min < 1.15, "{nnz:?}");
}

#[test]
fn storage_counts() {
    let cfg = DiffusionConfig::default();
    for spec in [PatternSpec::complete(), PatternSpec::diffuser(64, 64, 64)] {
        let r = bench(1024, &spec, 8, &cfg, 3, &[0]).unwrap();
        let m = &r.trials[0].metrics;
        let g = spec.build(1024, diffuser::seed::derive(0, "pattern", 0)).unwrap();
        assert_eq!(m["nnz"], g.nnz() as f64);
        assert_eq!(m["storage_ratio"], g.nnz() as f64 / (1024.0 * 1024.0));
        assert_eq!(m["pct_total"], pattern_stats(&g).pct_total);
    }
    let diffuser = PatternSpec::diffuser(64, 64, 64).build(4096, 0).unwrap();
    let window = PatternSpec::local(512).build(4096, 0).unwrap();
    // About 6.2% against 12.1% of n².
    let (d, w) = (pattern_stats(&diffuser).pct_total, pattern_stats(&window).pct_total);
    assert!(d < 0.55 * w, "{d} vs {w}");
}

#[test]
fn roll_experiment_is_reproducible() {
    let shape = LayerShape::new(8, 2, 4, 16).unwrap();
    let cfg = DiffusionConfig::default();
    let spec = PatternSpec::diffuser(8, 4, 4);
    let a = roll_robustness(128, shape, &spec, &cfg, &[1, 7], &[0, 3, 5]).unwrap();
    let b = roll_robustness(128, shape, &spec, &cfg, &[1, 7], &[0, 3, 5]).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.aggregate, aggregate(&a.trials));
    let local = roll_robustness(256, shape, &PatternSpec::local(8), &cfg, &[1], &[0]).unwrap();
    assert!(local.trials[0].metrics["shift_1"] > 0.0);
}
