//! Minimal library usage: simulate the inflated level for one optional
//! extra observation of a Gauss test at n = 100.

use optstop_core::families::{TestConfig, TestFamilyId};
use optstop_core::mc::{simulate_alpha_nk, RngSpec};
use optstop_core::special::Probability;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha = Probability::new(0.05)?;
    let config = TestConfig::with_default_null(TestFamilyId::Gauss, alpha, 100, 1)?;
    let est = simulate_alpha_nk(&config, 1_000_000, RngSpec::new(42), 8)?;
    println!("alpha_nk = {:.5} +- {:.5}", est.alpha_hat_nk, est.se);
    println!("rho = {:.4}", est.rho_hat);
    Ok(())
}
