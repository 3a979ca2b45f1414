use spinflip::dressed::DressingParams;
use spinflip::grape::{qsl_search, ControlProblem, OptimizeOptions, QslOptions};
use spinflip::propagator::GateSystem;

fn main() {
    let t0 = std::time::Instant::now();
    let params = DressingParams::new(10.0, -5.9, 1.0, 0.0);
    let problem = ControlProblem::new(GateSystem::microwave(params), 40, 1.0);
    let opts = QslOptions {
        optimize: OptimizeOptions { seed: 7, ..Default::default() },
        ..Default::default()
    };
    let r = qsl_search(&problem, (0.6, 2.5), &opts).unwrap();
    println!("tau* = {:.4} us  F = {:.6}  bracket = ({:.4}, {:.4})  probes = {}  elapsed = {:?}",
        r.tau_star, r.fidelity, r.bracket.0, r.bracket.1, r.probes.len(), t0.elapsed());
    for (t, f) in &r.probes {
        println!("  tau {:.4} -> 1-F {:.3e}", t, 1.0 - f);
    }

    // resonant dressing
    let t1 = std::time::Instant::now();
    let params0 = DressingParams::new(10.0, 0.0, 1.0, 0.0);
    let problem0 = ControlProblem::new(GateSystem::microwave(params0), 40, 1.0);
    let r0 = qsl_search(&problem0, (0.8, 3.0), &opts).unwrap();
    println!("resonant tau* = {:.4} us (ratio {:.3})  elapsed = {:?}", r0.tau_star, r0.tau_star / r.tau_star, t1.elapsed());
}
