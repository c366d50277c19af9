//! A strict coupling attack hides a Paninski alternative from the uniformity
//! tester.

use robust_dist::adversary::{build_maximal_coupling, coupling_attack, AttackBudget, BudgetPolicy, CouplingPlan};
use robust_dist::dist::{paninski_dist, sample, Distribution, PaninskiIndex};
use robust_dist::testing::{TesterConfig, UniformityTester};
use robust_dist::Seed;

fn main() -> robust_dist::Result<()> {
    let (k, n) = (20, 2000);
    let seed = Seed(7);
    let p = paninski_dist(&PaninskiIndex::random(k, 0.15, seed.derive("z", 0))?, k)?;
    let y = sample(&p, n, seed.derive("x", 0))?.values;

    // rewrite up to 30% of the messages so they look uniform
    let u = Distribution::uniform(k)?;
    let plan = CouplingPlan::shared(build_maximal_coupling(&p, &u)?, n)?;
    let z = coupling_attack(&y, &plan, &AttackBudget::new(0.3, n)?, seed.derive("attack", 0), BudgetPolicy::Strict)?.z;

    let tester = UniformityTester::new(k, n, TesterConfig::calibrated(0.15, 0.0, seed.derive("tester", 0)))?;
    println!("honest: {:?}, attacked: {:?}", tester.test(&y)?.answer, tester.test(&z)?.answer);
    Ok(())
}
