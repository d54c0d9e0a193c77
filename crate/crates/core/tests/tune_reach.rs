use cermic::config::{LabConfig, Variant};
use cermic::harness::{run_training, RunSpec};

#[test]
#[ignore]
fn probe_reach() {
    let mut lab = LabConfig::lab_default();
    lab.training.episodes = 300;
    lab.training.variant = Variant::CermicQ;
    let mut spec = RunSpec::new(lab.clone(), 0);
    spec.collect_trace = true;
    let log = run_training(&spec).unwrap();
    // Visit heatmap over the last 100 episodes + simultaneity histogram.
    let goals: Vec<(usize, usize)> = lab.gridworld.goal_cells.clone();
    let mut heat = vec![0usize; 81];
    let mut simult = [0usize; 4]; // count of steps with k agents on goals
    let mut per_step: std::collections::HashMap<(usize, usize), usize> = Default::default();
    for row in &log.trace {
        if row.episode >= 200 {
            heat[row.y * 9 + row.x] += 1;
        }
        if goals.contains(&(row.x, row.y)) {
            *per_step.entry((row.episode, row.step)).or_insert(0) += 1;
        }
    }
    for (_, k) in per_step {
        simult[k.min(3)] += 1;
    }
    println!("simultaneity histogram (steps with 1,2,3 agents on goals): {:?}", &simult[1..]);
    println!("visit heatmap (episodes 200-299), start corner top-left:");
    for y in 0..9 {
        let row: Vec<String> = (0..9).map(|x| format!("{:>5}", heat[y * 9 + x])).collect();
        println!("{}", row.join(""));
    }
    let zone_visits: usize = goals.iter().map(|&(x, y)| heat[y * 9 + x]).sum();
    let total: usize = heat.iter().sum();
    println!("goal-zone visit share: {:.4}", zone_visits as f64 / total as f64);
}
