//! A small mean-field scaling study, with CSV/JSON/SVG output when a
//! directory is given.
//!
//! cargo run --release --example scaling -- [out_dir]

use riesz_torus::experiments::{run, ExperimentKind, ExperimentSpec, Rows};

fn main() -> riesz_torus::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentKind::Theorem3Meanfield, 1, 0.0);
    spec.n_list = vec![8, 16, 32, 64];
    spec.slope_target = Some(-1.0);
    spec.svg = true;
    let report = run(&spec)?;
    if let Rows::MeanField(rows) = &report.rows {
        for r in rows {
            println!("N={:<3} E_N={:+.8} d_inf in [{:.5}, {:.5}]  1/(2N)={:.5}", r.n, r.e_n, r.dinf_lower, r.dinf_upper, 0.5 / r.n as f64);
        }
    }
    if let Some(f) = &report.fit {
        println!("slope {:.4} ± {:.4}  pass={}", f.slope, f.stderr, report.pass);
    }
    if let Some(dir) = std::env::args().nth(1) {
        for p in report.write(dir.as_ref())? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
