//! Analytic gradients against finite differences on a small random instance.
//!
//! cargo run --release --example gradcheck -- [seed]

use tlsan::model::Variant;
use tlsan::train::{grad_check, GradCheckConfig};

fn main() -> tlsan::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);

    let report = grad_check(&GradCheckConfig::default(), seed)?;
    print!("{}", report.table());
    println!("central difference, worst {:.2e}\n", report.max_rel_error());

    let report = grad_check(&GradCheckConfig::kink_free(), seed)?;
    println!("away from ReLU kinks, five-point stencil: worst {:.2e}", report.max_rel_error());

    for variant in [Variant::NoShort, Variant::NoGamma, Variant::NoPosition] {
        let config = GradCheckConfig { variant, ..GradCheckConfig::default() };
        println!("{variant:>4}: worst {:.2e}", grad_check(&config, seed)?.max_rel_error());
    }
    Ok(())
}
