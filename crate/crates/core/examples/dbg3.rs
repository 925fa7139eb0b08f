use conefold::config::RunConfig;
use conefold::continuation::*;
use conefold::poisson::build_laplacian;
use conefold::solver::*;
use conefold::eigen::first_eigenpair;

fn main() {
    let cfg = RunConfig::canonical();
    let (spec, _, _) = cfg.build_problem().unwrap();
    let op = build_laplacian(&spec.grid).unwrap();
    let bracket = bisect_kappa_star(&op, &spec, (0.1, 10.0), 1e-3, &IterOpts::default()).unwrap();
    let ds = 0.04 * bracket.midpoint;
    let opts = TraceOpts { ds, max_steps: 400, ..TraceOpts::default() };
    let diagram = trace_branch(&op, &spec, 0.5 * bracket.midpoint, &opts).unwrap();
    let fi = diagram.fold_index.unwrap();
    let fold = diagram.kappa_star_estimate.unwrap();
    let target = 0.9 * fold;
    println!("fold {fold:.6}, target {target:.6}, points {}", diagram.points.len());
    for (k, p) in diagram.points.iter().enumerate().skip(fi) {
        if k < fi + 40 {
            println!("  idx {k} kappa {:.5} sup {:.5} lambda {:.4} tk {:+.3}", p.kappa, p.sup_u, p.lambda, p.tangent_kappa);
        }
    }
    // Newton from each candidate on the descending segment
    let mut best: Option<usize> = None;
    for k in fi + 1..diagram.points.len() {
        if diagram.points[k].kappa >= diagram.points[k - 1].kappa { break; }
        best = Some(k);
        if diagram.points[k].kappa <= target { break; }
    }
    let k = best.unwrap();
    let p = &diagram.points[k];
    println!("candidate idx {k} kappa {:.5}", p.kappa);
    match newton_continue(&op, &spec, &p.u, p.kappa, target, 0.02 * fold) {
        Ok((u, r)) => {
            let pair = first_eigenpair(&op, &u, spec.p, spec.a).unwrap();
            println!("converged: res {r:.2e} sup {:.5} lambda {:.4}", u.sup_norm(), pair.lambda);
        }
        Err(e) => println!("failed: {e}"),
    }
}
