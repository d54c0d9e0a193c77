use cermic::config::{LabConfig, Variant};
use cermic::harness::{run_training, RunSpec};

#[test]
#[ignore]
fn probe_late_behavior() {
    let mut lab = LabConfig::lab_default();
    lab.training.episodes = 300;
    lab.training.variant = Variant::CermicQ;
    let mut spec = RunSpec::new(lab.clone(), 1); // seed 1: first success at ep 16
    spec.collect_trace = true;
    let log = run_training(&spec).unwrap();
    println!("first_success {:?}", log.first_success);
    let succ: Vec<usize> = log.rows.iter().filter(|r| r.ret > 0.0).map(|r| r.episode).collect();
    println!("success episodes ({}): {:?}", succ.len(), succ);
    // Late-episode occupancy: how close to the goal zone do agents hover?
    let goals = lab.gridworld.goal_cells.clone();
    for ep in [280usize, 290, 299] {
        let rows: Vec<_> = log.trace.iter().filter(|r| r.episode == ep).collect();
        let last_step = rows.iter().map(|r| r.step).max().unwrap_or(0);
        let finals: Vec<_> = rows.iter().filter(|r| r.step == last_step).collect();
        let on_goal = finals.iter().filter(|r| goals.contains(&(r.x, r.y))).count();
        println!(
            "ep {ep}: steps {last_step}, final positions {:?}, on-goal {}",
            finals.iter().map(|r| (r.agent, r.x, r.y)).collect::<Vec<_>>(),
            on_goal
        );
        // count per-step on-goal occupancy
        let mut hist = [0usize; 4];
        for s in 1..=last_step {
            let k = rows.iter().filter(|r| r.step == s && goals.contains(&(r.x, r.y))).count();
            hist[k.min(3)] += 1;
        }
        println!("   occupancy histogram 0/1/2/3: {:?}", hist);
    }
}
