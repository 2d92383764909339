//! A small benchmark grid on synthetic data, summarized with bootstrap
//! intervals. Pass `--csv` to print the raw rows instead.

use bed::bench::{self, DatasetSpec, ExperimentSpec};

fn main() -> bed::Result<()> {
    let spec = ExperimentSpec::from_toml(
        r#"
        trials = 10
        seed = 4
        k_grid = [6, 12, 18]
        prior_scale = 1e-3
        [dataset]
        d = 6
        s = 2
        eps = 0.05
        n = 300
        seed = 1
        "#,
    )?;
    assert!(matches!(spec.dataset, DatasetSpec::Synthetic { .. }));
    let rows = bench::run(&spec)?;

    if std::env::args().any(|a| a == "--csv") {
        return bench::write_csv(&rows, std::io::stdout().lock());
    }
    println!("{:<17} {:>4} {:>10} {:>22} {:>8} {:>9}", "method", "k", "median", "95% ci of mean", "ratio", "ms");
    for s in bench::summarize(&rows, 1000, 0) {
        let ci = s.ci.map_or("-".to_string(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
        println!(
            "{:<17} {:>4} {:>10.4} {:>22} {:>8.3} {:>9.3}",
            s.method.name(),
            s.k,
            s.median_value,
            ci,
            s.median_ratio,
            s.median_runtime_ms
        );
    }
    Ok(())
}
