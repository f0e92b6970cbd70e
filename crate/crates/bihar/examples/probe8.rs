use bihar::bubble::constants;
use bihar::energy::{evaluate_j, grad_j};
use bihar::grid::{make_domain, sample, ShapeSpec};
use bihar::solver::{e_inner, e_norm};
use rand::{Rng, SeedableRng};

fn main() {
    let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 15 }).unwrap();
    let consts = constants(5).unwrap();
    for seed in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = sample(&d, |_| rng.gen_range(-0.3..1.0));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
        let hdir = sample(&d, |_| rng.gen_range(-0.05..0.05));
        let g = grad_j(&u, &consts).unwrap();
        let lhs = e_inner(&g, &hdir).unwrap();
        let j0 = evaluate_j(&u, &consts).unwrap().j;
        let gn = e_norm(&g) * e_norm(&hdir);
        print!("seed {seed}: J={j0:.3e} dJ={lhs:.3e} |dJ|/(|g||h|)={:.2e} ", lhs.abs()/gn);
        for eps in [1e-4f64, 1e-5, 1e-6] {
            let jp = evaluate_j(&u.add_scaled(&hdir, eps).unwrap(), &consts).unwrap().j;
            let jm = evaluate_j(&u.add_scaled(&hdir, -eps).unwrap(), &consts).unwrap().j;
            let fd = (jp - jm) / (2.0 * eps);
            print!("e{:.0}:{:.1e} ", eps.log10(), (lhs - fd).abs() / fd.abs());
        }
        println!();
    }
}
