//! The two lower-bound constructions: the randomized grid instance and the
//! two-center universal instance.

use threshold_kmedians::harness::generators::{
    certified_bound_holds, check_center_separation, gen_lower_bound_lp, gen_universal_lb,
};
use threshold_kmedians::{cost_unconstrained, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    for k in [8, 16] {
        let lb = gen_lower_bound_lp(k, 1.0, None, 3, &mut RngHandle::new(k as u64))?;
        let sep = check_center_separation(&lb.instance.centers, 1.0);
        let (cost, holds) = certified_bound_holds(&lb)?;
        println!(
            "k={k}: d = {}, eps = {:.4}, min normalized distance {:.4} (needs {:.4}), cost {cost:.2} <= {:.2}: {holds}",
            lb.d, lb.epsilon, sep.normalized, sep.threshold, lb.certified_bound
        );
    }

    let u = gen_universal_lb(16, 1)?;
    let special = [u.special.clone()];
    println!(
        "universal instance, d = 16: l1 cost {}, l2 cost {}",
        cost_unconstrained(&special, &u.centers, 1.0)?,
        cost_unconstrained(&special, &u.centers, 2.0)?
    );
    Ok(())
}
