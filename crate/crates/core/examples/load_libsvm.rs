//! Loads a LIBSVM file (or a small inline sample), normalizes it and runs
//! the greedy A-optimal design.
//!
//! ```text
//! cargo run --example load_libsvm -- path/to/mg_scale 12
//! ```

use bed::baselines::greedy_bottom_up;
use bed::dataset::{load_libsvm, parse_libsvm, Prior};
use bed::Criterion;

const SAMPLE: &str = "\
-0.71 1:0.12 2:-0.40 3:0.88
0.25 1:-0.53 3:0.10
1.30 2:0.77 3:-0.25
-0.02 1:0.91 2:0.05
0.66 1:-0.14 2:-0.63 3:0.47
0.12 1:0.30 2:0.30 3:0.30
";

fn main() -> bed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let x = match args.first() {
        Some(path) => load_libsvm(path)?,
        None => parse_libsvm(SAMPLE.as_bytes())?,
    };
    let k = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(x.d());
    println!("loaded n = {}, d = {}", x.n(), x.d());

    let x = x.normalized();
    let prior = Prior::scaled_identity(x.d(), 1.0 / x.n() as f64);
    let res = greedy_bottom_up(&x, &prior, &Criterion::A, k)?;
    println!("greedy subset {:?}", res.subset);
    println!("A value {:.5}", res.value);
    if let Some(labels) = x.labels() {
        let picked: Vec<f64> = res.subset.iter().map(|&i| labels[i]).collect();
        println!("labels {picked:?}");
    }
    Ok(())
}
