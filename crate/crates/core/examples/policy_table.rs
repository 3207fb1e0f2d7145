use cma_core::mdp::{value_iteration, SolverConfig};
use cma_core::model::{FactoredState, Mdp, StateId};

fn main() {
    let mdp = Mdp::default_model();
    let vf = value_iteration(&mdp, &SolverConfig::default()).unwrap();
    println!("iterations {} residual {:e}", vf.iterations, vf.residual);
    for f in FactoredState::all() {
        let s = StateId::from(f).index();
        println!("{:3} {:32} {:10} v={:.5} q={:?}", s, f.to_string(), vf.policy[s].to_string(), vf.v[s], vf.q[s]);
    }
}
