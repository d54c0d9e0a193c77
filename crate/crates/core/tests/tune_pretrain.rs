use cermic::config::{LabConfig, Variant};
use cermic::harness::{make_pretrain_corpus, parallel_map, run_training, RunSpec};
use cermic::memory::{pretrain_memory, MemoryModule};

#[test]
#[ignore]
fn probe_pretrain_effect() {
    let mut lab = LabConfig::lab_default();
    lab.training.episodes = 300;
    lab.training.variant = Variant::CermicQ;
    // Pretrain once on an oracle-labeled corpus.
    let corpus = make_pretrain_corpus(&lab, 777, lab.pretrain.corpus_size).unwrap();
    let mut module = {
        let mut r = cermic::rng::stream(777, "pretrain-init", 0);
        MemoryModule::new(
            lab.gridworld.obs_len(),
            lab.gridworld.n_agents,
            lab.memory.d_node,
            2 + cermic::gridworld::N_ACTIONS,
            lab.model.hidden,
            lab.memory.tau_det,
            &mut r,
        )
    };
    let mut r = cermic::rng::stream(777, "pretrain-train", 0);
    let report = pretrain_memory(&mut module, &corpus, lab.pretrain.epochs, lab.pretrain.lr, 0.2, &mut r).unwrap();
    println!("pretrain report: bce {:.4} node {:.4} edge {:.4}", report.detector_bce, report.node_mse, report.edge_mse);
    let groups = module.checkpoint_groups();
    let seeds: Vec<u64> = (0..12).collect();
    let specs: Vec<(bool, RunSpec)> = seeds
        .iter()
        .flat_map(|&s| {
            let cold = RunSpec::new(lab.clone(), s);
            let mut warm = RunSpec::new(lab.clone(), s);
            warm.pretrained_memory = Some(groups.clone());
            [(false, cold), (true, warm)]
        })
        .collect();
    let results: Vec<(bool, f64)> = parallel_map(specs, 2, |(warm, spec)| {
        let log = run_training(&spec).unwrap();
        (warm, log.first_success_censored(300))
    });
    let cold: Vec<f64> = results.iter().filter(|(w, _)| !w).map(|(_, f)| *f).collect();
    let warm: Vec<f64> = results.iter().filter(|(w, _)| *w).map(|(_, f)| *f).collect();
    println!("cold fs {:?} median {}", cold.iter().map(|v| *v as i64).collect::<Vec<_>>(), cermic::stats::median(&cold));
    println!("warm fs {:?} median {}", warm.iter().map(|v| *v as i64).collect::<Vec<_>>(), cermic::stats::median(&warm));
}
