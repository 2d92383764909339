//! Compares the scaled effective dimension for an isotropic and a low-rank
//! covariance as k grows.

use bed::bench::{deff_compare, write_deff_csv};

fn main() -> bed::Result<()> {
    let k_grid: Vec<usize> = (10..=100).step_by(10).collect();
    let rows = deff_compare(100, 10, 1e-2, 1e-2, 200, &k_grid)?;
    for r in &rows {
        let note = if r.d_scaled <= r.k as f64 { "" } else { "  (above k)" };
        println!("{:>8} k={:<4} {:>8.3} of {:>8.3}{note}", r.covariance, r.k, r.d_scaled, r.d_full);
    }
    write_deff_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}
