use hyperneat::backprop::HeadNetwork;
use hyperneat::cppn::{
    CompatibilityCoeffs, Coords, Cppn, CppnGenome, InnovationRegistry, MutationParams,
    compatibility_distance, crossover, mutate, seed_genome,
};
use hyperneat::evolution::{
    EvolutionParams, Population, allocate_offspring, checkpoint_text, evolve_generation,
    parse_checkpoint,
};
use hyperneat::experiment::{GenerationRow, parse_generation_csv, generation_csv};
use hyperneat::metrics::{FitnessForm, Scores, argmax, confusion, fitness_score};
use hyperneat::mnist::{LabelSet, disjoint_sample, sample_balanced};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lineage(seed: u64, steps: usize) -> (CppnGenome, InnovationRegistry) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = InnovationRegistry::new();
    let params = MutationParams {
        add_node_rate: 0.4,
        add_connection_rate: 0.6,
        ..MutationParams::default()
    };
    let mut g = seed_genome(&mut rng);
    for _ in 0..steps {
        g = mutate(&g, &params, &mut rng, &mut reg);
    }
    (g, reg)
}

fn samples() -> impl Strategy<Value = (Vec<usize>, Vec<Scores>)> {
    (1usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..10, n),
            prop::collection::vec(prop::array::uniform10(-1.0f64..1.0), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutation_keeps_genomes_valid(seed in any::<u64>(), steps in 0usize..40) {
        let (g, _) = lineage(seed, steps);
        prop_assert!(g.validate().is_ok());
        prop_assert!(Cppn::new(&g).is_ok());
    }

    #[test]
    fn crossover_keeps_genomes_valid(a in any::<u64>(), b in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(a ^ b);
        let mut reg = InnovationRegistry::new();
        let params = MutationParams { add_node_rate: 0.4, add_connection_rate: 0.6, ..MutationParams::default() };
        let mut x = seed_genome(&mut rng);
        let mut y = x.clone();
        for _ in 0..15 {
            x = mutate(&x, &params, &mut rng, &mut reg);
            y = mutate(&y, &params, &mut rng, &mut reg);
        }
        let child = crossover(&x, &y, &params, &mut rng);
        prop_assert!(child.validate().is_ok());
    }

    #[test]
    fn genome_text_round_trip(seed in any::<u64>(), steps in 0usize..30) {
        let (g, _) = lineage(seed, steps);
        let back = CppnGenome::from_text(&g.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), g.to_text());
    }

    #[test]
    fn cppn_outputs_bounded(seed in any::<u64>(), c in prop::array::uniform8(-1.0f64..1.0)) {
        let (g, _) = lineage(seed, 20);
        let coords: Coords = c;
        let (w, e) = Cppn::new(&g).unwrap().query(&coords);
        prop_assert!((-1.0..=1.0).contains(&w) && (-1.0..=1.0).contains(&e));
    }

    #[test]
    fn compatibility_is_a_symmetric_premetric(a in any::<u64>(), b in any::<u64>()) {
        let (x, _) = lineage(a, 10);
        let (y, _) = lineage(b, 10);
        let k = CompatibilityCoeffs::default();
        prop_assert_eq!(compatibility_distance(&x, &x, &k), 0.0);
        let d = compatibility_distance(&x, &y, &k);
        prop_assert!(d >= 0.0);
        prop_assert!((d - compatibility_distance(&y, &x, &k)).abs() < 1e-12);
    }

    #[test]
    fn allocation_sums_to_total(shares in prop::collection::vec(0.0f64..10.0, 1..20), total in 0usize..500) {
        let alloc = allocate_offspring(&shares, total);
        prop_assert_eq!(alloc.len(), shares.len());
        prop_assert_eq!(alloc.iter().sum::<usize>(), total);
        let sum: f64 = shares.iter().sum();
        if sum > 0.0 {
            for (a, s) in alloc.iter().zip(&shares) {
                // largest remainder never strays more than one from the exact quota
                prop_assert!((*a as f64 - s / sum * total as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn fitness_within_bounds((labels, scores) in samples()) {
        let preds: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
        let f = fitness_score(&scores, &preds, &labels, FitnessForm::default()).unwrap();
        prop_assert!(f.fitness >= 0.0 && f.fitness <= 7.0 + 1e-12);
        for m in &f.per_class {
            for r in [m.tpr, m.tnr, m.ppv, m.npv, m.acc] {
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn fitness_invariant_under_sample_order((labels, scores) in samples(), seed in any::<u64>()) {
        let preds: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
        let a = fitness_score(&scores, &preds, &labels, FitnessForm::default()).unwrap();
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let pick = |v: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let s2: Vec<Scores> = order.iter().map(|&i| scores[i]).collect();
        let b = fitness_score(&s2, &pick(&preds), &pick(&labels), FitnessForm::default()).unwrap();
        prop_assert_eq!(a.confusion, b.confusion);
        prop_assert!((a.fitness - b.fitness).abs() < 1e-9);
    }

    #[test]
    fn confusion_total_matches_samples(labels in prop::collection::vec(0usize..10, 1..300), shift in 0usize..10) {
        let preds: Vec<usize> = labels.iter().map(|l| (l + shift) % 10).collect();
        let cm = confusion(&preds, &labels).unwrap();
        prop_assert_eq!(cm.total(), labels.len() as u64);
        prop_assert_eq!(cm.trace() == labels.len() as u64, shift == 0);
    }

    #[test]
    fn subsets_balanced_and_disjoint(seed in any::<u64>(), a in 1usize..6, b in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelSet::new((0..400).map(|_| rng.random_range(0..10u8)).collect()).unwrap();
        let hist = labels.histogram();
        prop_assume!(hist.iter().all(|&h| h >= a + b));
        let first = sample_balanced(&labels, a, &mut rng).unwrap();
        let second = disjoint_sample(&labels, b, &first, &mut rng).unwrap();
        prop_assert!(first.is_disjoint(&second));
        for (set, k) in [(&first, a), (&second, b)] {
            let mut per = [0usize; 10];
            for &i in &set.indices {
                per[labels.get(i)] += 1;
            }
            prop_assert!(per.iter().all(|&c| c == k));
        }
    }

    #[test]
    fn head_text_round_trip(seed in any::<u64>(), hidden in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = HeadNetwork::random(&[7, hidden, 10], &mut rng);
        let back = HeadNetwork::from_text(&head.to_text()).unwrap();
        prop_assert_eq!(back, head);
    }

    #[test]
    fn generation_rows_round_trip(
        g in 0usize..5000, best in -10.0f64..10.0, mean in -10.0f64..10.0, species in 0usize..50,
        acc in prop::option::of(0.0f64..1.0), test in prop::option::of(0.0f64..1.0),
    ) {
        let rows = vec![GenerationRow {
            generation: g,
            best_fitness: best,
            mean_fitness: mean,
            species_count: species,
            champion_fitness: best,
            champion_accuracy: acc,
            test_accuracy: test,
        }];
        prop_assert_eq!(parse_generation_csv(&generation_csv(&rows)).unwrap(), rows);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_invariants(seed in any::<u64>(), size in 6usize..30) {
        let params = EvolutionParams { population_size: size, target_species: Some(3), ..EvolutionParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reg = InnovationRegistry::new();
        let mut pop = Population::new(&params, &mut rng).unwrap();
        // fitness favors a strong positive weight output at one point
        let eval = |g: &CppnGenome| -> Result<f64, String> {
            Ok(1.0 + Cppn::new(g).map_err(|e| e.to_string())?.query(&[0.5; 8]).0)
        };
        let mut last = f64::NEG_INFINITY;
        for _ in 0..8 {
            let (next, stats) = evolve_generation(pop, &eval, &params, &mut rng, &mut reg).unwrap();
            prop_assert_eq!(next.len(), size);
            prop_assert!(stats.champion_fitness >= last);
            prop_assert!(stats.best_fitness <= stats.champion_fitness);
            last = stats.champion_fitness;
            for g in &next.genomes {
                prop_assert!(g.validate().is_ok());
            }
            pop = next;
        }
        let text = checkpoint_text(&pop, &reg);
        let (back, reg2) = parse_checkpoint(&text).unwrap();
        prop_assert_eq!(checkpoint_text(&back, &reg2), text);
    }
}
