use std::path::Path as FsPath;

use goalinfer::commands::plan_runs;
use goalinfer::geom::Point;
use goalinfer::scenario::{Scale, Scenario};
use goalinfer::stats::mann_whitney_p_greater;

#[test]
fn probe_fig1_trend() {
    let t0 = std::time::Instant::now();
    let mut means = vec![];
    let mut all = vec![];
    for name in ["fig1_n10_r1", "fig1_n1000_r1", "fig1_n1000_r10"] {
        let scenario =
            Scenario::load(FsPath::new(&format!("../../scenarios/{name}.json"))).unwrap();
        let goal = Point::new(0.9, 0.9);
        let runs = plan_runs(&scenario, goal, Scale::Desk, 60).unwrap();
        let lengths: Vec<f64> = runs.iter().filter_map(|r| r.length).collect();
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        println!(
            "{name}: found {}/60 mean {:.4} elapsed {:.1}s",
            lengths.len(),
            mean,
            t0.elapsed().as_secs_f64()
        );
        means.push(mean);
        all.push(lengths);
    }
    let p = mann_whitney_p_greater(&all[0], &all[2]);
    println!("ordering: {:.4} > {:.4} > {:.4}; MW p = {:.2e}", means[0], means[1], means[2], p);
}
