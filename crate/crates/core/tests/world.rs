mod common;

use std::collections::HashSet;
use std::fs;

use alqueue::dataset::{dedup_key, Origin, Thresholds};
use alqueue::domain::{
    fine_tune, load_bundle, make_world, sample_candidates, tanimoto, validity_check,
    FineTuneParams, Generator, IdAllocator, ReferenceSet, WorldParams,
};
use alqueue::rng;

fn small_params() -> WorldParams {
    WorldParams {
        n_reference: 300,
        n_holdout: 200,
        n_pool: 200,
        ..WorldParams::default()
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    make_world(5, &small_params())
        .unwrap()
        .save(a.path())
        .unwrap();
    make_world(5, &small_params())
        .unwrap()
        .save(b.path())
        .unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(
            fs::read(a.path().join(&n)).unwrap(),
            fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn datasets_are_disjoint() {
    let w = common::world();
    assert_eq!(w.pretrain.len(), 3000);
    assert_eq!(w.holdout.len(), 3000);
    for k in w.holdout.keys() {
        assert!(!w.pretrain.contains_key(k));
    }
    for k in w.pool.keys() {
        assert!(!w.pretrain.contains_key(k) && !w.holdout.contains_key(k));
    }
}

#[test]
fn saved_world_reloads_to_the_same_oracle() {
    let w = make_world(9, &small_params()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    w.save(dir.path()).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back.world.scale, w.world.scale);
    assert_eq!(back.world.z_star, w.world.z_star);
    for (a, b) in w.holdout.iter().zip(back.holdout.iter()) {
        assert_eq!(a.candidate.embedding, b.candidate.embedding);
        assert_eq!(a.candidate.fingerprint, b.candidate.fingerprint);
        assert_eq!(a.s_is(), b.s_is());
        assert_eq!(back.world.oracle_strain(&b.candidate), b.s_is().unwrap());
        assert_eq!(back.world.novelty_score(&b.candidate).unwrap(), a.s_t);
    }
}

#[test]
fn initial_stable_rate_is_calibrated() {
    // Fresh 10k draws from a stream the calibration never used.
    let w = common::world();
    let rate = w
        .world
        .measure_stable_rate(&w.world.initial, 10_000, 0.25, rng::label("acceptance-mc"))
        .unwrap();
    assert!((0.04..=0.06).contains(&rate), "stable rate {rate}");
    assert!((0.04..=0.06).contains(&w.world.calibration.stable_rate));
}

#[test]
fn sa_mean_is_below_half() {
    let w = common::world();
    let mut r = rng::stream(77);
    let n = 5000;
    let mean: f64 = (0..n)
        .map(|i| {
            let c = w
                .world
                .candidate(i, w.world.initial.sample_latent(&mut r), Origin::Generated)
                .unwrap();
            w.world.sa_score(&c)
        })
        .sum::<f64>()
        / n as f64;
    assert!(mean < 0.5, "{mean}");
    assert!((mean - w.world.calibration.sa_mean).abs() < 0.02);
}

#[test]
fn oracle_hand_values() {
    let mut w = common::world().world.clone();
    w.noise_sd = 0.0;
    let at_opt = w.candidate(0, w.z_star.clone(), Origin::Generated).unwrap();
    assert_eq!(w.oracle_strain(&at_opt), 0.0);

    let mut z = w.z_star.clone();
    z[0] += (w.scale / 4.0).sqrt();
    let c = w.candidate(1, z, Origin::Generated).unwrap();
    let s = w.oracle_strain(&c);
    assert!((s - 0.25).abs() < 1e-12, "{s}");
    assert!(!Thresholds::default().accepts(0.25, 0.0, 0.0));

    let noisy = &common::world().world;
    assert_eq!(noisy.oracle_strain(&c), noisy.oracle_strain(&c.clone()));
}

#[test]
fn no_spurious_key_collisions() {
    let w = common::world();
    let mut r = rng::stream(3);
    let mut keys = HashSet::new();
    for i in 0..10_000u64 {
        let z: Vec<f64> = (0..8).map(|_| 2.0 * rng::normal(&mut r)).collect();
        let c = w.world.candidate(i, z, Origin::Generated).unwrap();
        assert!(keys.insert(dedup_key(&c)), "collision at draw {i}");
    }
}

#[test]
fn initial_generator_rejects_under_one_percent() {
    let w = common::world();
    let mut r = rng::stream(4);
    let mut ids = IdAllocator::starting_at(0);
    let batch = sample_candidates(
        &w.world.initial,
        10_000,
        &mut r,
        &w.world.space,
        &mut ids,
        Origin::Generated,
    )
    .unwrap();
    let invalid = batch.iter().filter(|c| !validity_check(c)).count();
    assert!((invalid as f64) < 0.01 * 10_000.0, "{invalid}");
}

#[test]
fn novelty_matches_brute_force() {
    let w = common::world();
    let mut r = rng::stream(5);
    let draw = |r: &mut rng::Rng, i: u64| {
        let z = w.world.reference_mixture.sample_latent(r);
        w.world.candidate(i, z, Origin::Generated).unwrap()
    };
    let reference: Vec<_> = (0..100).map(|i| draw(&mut r, i).fingerprint).collect();
    let set = ReferenceSet::new(reference.clone());
    for i in 0..100 {
        let c = draw(&mut r, 1000 + i);
        let brute = reference
            .iter()
            .map(|&f| tanimoto(c.fingerprint, f))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(set.novelty(c.fingerprint).unwrap(), brute);
    }
}

fn elite_near_optimum(w: &alqueue::domain::WorldSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed);
    (0..n)
        .map(|_| {
            w.z_star
                .iter()
                .map(|z| z + 0.3 * rng::normal(&mut r))
                .collect()
        })
        .collect()
}

#[test]
fn fine_tune_toward_optimum_raises_stable_rate() {
    let w = &common::world().world;
    for seed in 0..5 {
        let elite = elite_near_optimum(w, 200, seed);
        let g = fine_tune(&w.initial, &elite, FineTuneParams { eta: 0.5, seed }).unwrap();
        let before = w
            .measure_stable_rate(&w.initial, 4000, 0.25, 100 + seed)
            .unwrap();
        let after = w.measure_stable_rate(&g, 4000, 0.25, 100 + seed).unwrap();
        assert!(after > before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn fine_tune_on_own_samples_is_near_fixed_point() {
    let w = &common::world().world;
    let g: &Generator = &w.initial;
    let mut r = rng::stream(6);
    let n = 8000;
    let elite: Vec<Vec<f64>> = (0..n).map(|_| g.sample_latent(&mut r)).collect();
    let ft = fine_tune(g, &elite, FineTuneParams { eta: 1.0, seed: 6 }).unwrap();
    let (m0, m1) = (g.mixture_mean(), ft.mixture_mean());
    let var = g.mixture_variance();
    for j in 0..m0.len() {
        // Five standard errors of the sample mean.
        let tol = 5.0 * (var[j] / n as f64).sqrt();
        assert!(
            (m0[j] - m1[j]).abs() < tol,
            "coord {j}: {} vs {} (tol {tol})",
            m0[j],
            m1[j]
        );
    }
}
