use hcpfactor::caqr::ml_caqr;
use hcpfactor::cost::*;
use hcpfactor::dense::Mat;
use hcpfactor::platform::{lower_bounds, Platform};
use hcpfactor::schedule::BlockSchedule;
use rand::{Rng, SeedableRng};

#[test]
fn recursive_model_dominates_leading_terms() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let l = rng.random_range(1..=3);
        let grids: Vec<(usize, usize)> = (0..l)
            .map(|_| (1 << rng.random_range(1..=3), 1 << rng.random_range(1..=3)))
            .collect();
        let p = Platform::synthetic(&grids).unwrap();
        let n = 1 << rng.random_range(10..=14);
        let r = mlcaqr_cost(&ModelInputs::new(n, &p)).unwrap();
        let rec = r.recursive.as_ref().unwrap();
        let nf = n as f64;
        let pf = p.total_nodes() as f64;
        assert!(rec.flops >= 4.0 / 3.0 * nf.powi(3) / pf, "{grids:?} n={n}");
        for k in 1..=l {
            let bound = lower_bounds(n, k, &p).unwrap().words_bound;
            assert!(rec.words[k - 1] >= bound, "{grids:?} n={n} level {k}");
        }
    }
}

#[test]
fn closed_form_never_beats_the_bound() {
    for p in [Platform::exascale(), Platform::synthetic(&[(4, 4), (2, 2), (8, 8)]).unwrap()] {
        for n in [1 << 16, 1 << 20] {
            for r in [
                mlcaqr_cost(&ModelInputs::new(n, &p)).unwrap(),
                mlcalu_cost(&ModelInputs::new(n, &p)).unwrap(),
                onelevel_cost(OneLevel::Caqr, n, &p).unwrap(),
            ] {
                assert!(r.bound_ratio.iter().all(|&x| x >= 1.0), "{:?} {:?}", r.algorithm, r.bound_ratio);
            }
        }
    }
}

#[test]
fn caqr_ccr_grows_with_machine_size() {
    let ex = Platform::exascale();
    let tops = [16, 64, 256, 1024, 4096, 16384, 32768];
    let reports = sweep(Algorithm::Caqr, &ex, &[1 << 20], &tops).unwrap();
    for w in reports.windows(2) {
        assert!(w[1].ccr > w[0].ccr);
        assert!(w[1].p > w[0].p);
    }
}

#[test]
fn sweep_order_is_deterministic() {
    let p = Platform::synthetic(&[(2, 2), (4, 4)]).unwrap();
    let a = sweep_with(Algorithm::Mlcalu2d, &p, &[256, 512], &[4, 16], hcpfactor::exec::Exec::Sequential).unwrap();
    let b = sweep_with(Algorithm::Mlcalu2d, &p, &[256, 512], &[4, 16], hcpfactor::exec::Exec::Parallel).unwrap();
    assert_eq!(a, b);
    let order: Vec<(usize, usize)> = a.iter().map(|r| (r.n, r.p)).collect();
    assert_eq!(order, vec![(256, 16), (256, 64), (512, 16), (512, 64)]);
}

#[test]
fn mlcannon_model_matches_simulation() {
    let p = Platform::synthetic(&[(2, 2), (2, 2)]).unwrap();
    let n = 32;
    let m = mlcannon_cost(&ModelInputs::new(n, &p)).unwrap();
    let mut ledger = hcpfactor::vm::Ledger::new(&p);
    let z = Mat::zeros(n, n);
    hcpfactor::cannon::ml_cannon(&z, &Mat::identity(n), &Mat::identity(n), &p, 2, &mut ledger).unwrap();
    assert_eq!(ledger.price().unwrap(), m.cost);
}

#[test]
fn simulation_is_covered_by_recursive_model() {
    for (grids, blocks) in [(vec![(2, 2), (4, 4)], vec![2, 8]), (vec![(4, 4), (2, 2)], vec![4, 16])] {
        let p = Platform::synthetic(&grids).unwrap();
        let s = BlockSchedule::new(blocks).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = Mat::from_fn(128, 128, |_, _| rng.random_range(-1.0..1.0));
        let sim = ml_caqr(&a, &p, &s).unwrap().ledger.counts().unwrap().clone();
        let inputs = ModelInputs {
            n: 128,
            platform: p.clone(),
            schedule: Some(s),
        };
        let rec = mlcaqr_cost(&inputs).unwrap().recursive.unwrap();
        for k in 0..2 {
            assert!(sim.words[k] <= 2.0 * rec.words[k]);
        }
    }
}
