use std::path::Path as FsPath;

use goalinfer::neural::*;
use goalinfer::rng::seeded;
use goalinfer::scenario::{Scale, Scenario};

#[test]
fn probe_w_head_learnability() {
    let scenario = Scenario::load(FsPath::new("../../scenarios/fig3_waypoint.json")).unwrap();
    let (start, observations, noise_std) = scenario.single_agent_parts().unwrap();
    let times = scenario.time_grid();
    let params = scenario.planner_params(Scale::Desk);
    let map = scenario.world_map();

    let mut rng = seeded(scenario.seed);
    let data = generate_training_data(&map, start, &times, &params, noise_std, 10_000, &mut rng);

    for (epochs, lr, hidden) in [(50usize, 0.01, 64usize), (200, 0.02, 64), (200, 0.05, 64), (400, 0.05, 128)] {
        let cfg = TrainConfig {
            learning_rate: lr,
            batch_size: 64,
            epochs,
            validation_fraction: 0.1,
            seed: scenario.seed,
        };
        let net = ProposalNet::new(2 + 2 * observations.len(), hidden, 99);
        let t0 = std::time::Instant::now();
        let out = train(net, &data, &cfg).unwrap();
        // Bernoulli-head-only NLL on held-out slice: how well is w predicted?
        let mut rng2 = seeded(777);
        let fresh = generate_training_data(&map, start, &times, &params, noise_std, 1000, &mut rng2);
        let mut w_nll = 0.0;
        let mut w_acc = 0usize;
        for ex in &fresh.examples {
            let h = out.net.heads(&encode_input(ex.goal, &ex.observed));
            let p = h.w_prob;
            w_nll -= if ex.used_waypoint { p.ln() } else { (1.0 - p).ln() };
            if (p > 0.5) == ex.used_waypoint {
                w_acc += 1;
            }
        }
        println!(
            "epochs={epochs} lr={lr} hidden={hidden}: val_nll={:.4} w_nll={:.4} (coin=0.693) w_acc={:.3} [{:.0}s]",
            out.curve.last().unwrap().val_nll,
            w_nll / fresh.examples.len() as f64,
            w_acc as f64 / fresh.examples.len() as f64,
            t0.elapsed().as_secs_f64()
        );
    }
}
