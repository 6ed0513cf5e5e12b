use cemm_precoder::cache::{
    availability_mask, hfit_transfer_plan, random_cache_placement, sample_requests, CacheState, RequestProfile,
};
use cemm_precoder::channel::{generate_channel, sample_geometry};
use cemm_precoder::scalar::Cplx;
use cemm_precoder::{Channel, Geometry, SystemConfig, TransferRule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn requests_are_uniform() {
    let mut cfg = SystemConfig::default();
    cfg.files = 4;
    cfg.users = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 4];
    let mut total = 0usize;
    while total < 100_000 {
        for f in sample_requests(&cfg, &mut rng).requested_file {
            counts[f] += 1;
            total += 1;
        }
    }
    for c in counts {
        let freq = c as f64 / total as f64;
        assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
    }
}

#[test]
fn seeded_requests_repeat() {
    let cfg = SystemConfig::default();
    let a = sample_requests(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
    let b = sample_requests(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(a, b);
    assert!(a.requested_set.len() <= cfg.users.min(cfg.files));
}

#[test]
fn cooperation_beyond_network_is_rejected() {
    let cfg = SystemConfig::default();
    let (ch, cache, req) = instance(&cfg, 0);
    assert!(hfit_transfer_plan(&ch, &cache, &req, cfg.errhs + 1, TransferRule::RankThenExclude).is_err());
    let zero = hfit_transfer_plan(&ch, &cache, &req, 0, TransferRule::RankThenExclude).unwrap();
    assert_eq!((0..cfg.errhs).map(|i| zero.transfer.count_for_errh(i)).sum::<usize>(), 0);
}

fn instance(cfg: &SystemConfig, seed: u64) -> (Channel, CacheState, RequestProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Geometry = sample_geometry(cfg, &mut rng);
    let ch = generate_channel(cfg, &g).unwrap();
    let cache = random_cache_placement(cfg, &mut rng).unwrap();
    let req = sample_requests(cfg, &mut rng);
    (ch, cache, req)
}

fn config(errhs: usize, files: usize, subfiles: usize, users: usize, xi: f64) -> SystemConfig {
    let mut c = SystemConfig::default();
    c.errhs = errhs;
    c.files = files;
    c.subfiles = subfiles;
    c.users = users;
    c.cache_fraction = xi;
    c.tx_antennas = 4;
    c.rx_antennas = 2;
    c
}

fn rule() -> impl Strategy<Value = TransferRule> {
    prop_oneof![Just(TransferRule::RankThenExclude), Just(TransferRule::ExcludeThenRank)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn placement_fills_exact_capacity(errhs in 1usize..5, files in 1usize..6, subfiles in 1usize..4, xi in 0.0f64..=1.0, seed in 0u64..500) {
        let cfg = config(errhs, files, subfiles, 2, xi);
        let cache = random_cache_placement(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for i in 0..errhs {
            prop_assert_eq!(cache.cached.count_for_errh(i), cfg.cached_per_errh());
        }
    }

    #[test]
    fn plan_respects_cache_and_cooperation(
        errhs in 1usize..5, files in 1usize..5, subfiles in 1usize..3, users in 1usize..4,
        xi in 0.0f64..=1.0, n_f_frac in 0.0f64..=1.0, rule in rule(), seed in 0u64..500,
    ) {
        let cfg = config(errhs, files, subfiles, users, xi);
        let n_f = (n_f_frac * errhs as f64).round() as usize;
        let (ch, cache, req) = instance(&cfg, seed);
        let plan = hfit_transfer_plan(&ch, &cache, &req, n_f, rule).unwrap();
        for f in 0..files {
            for l in 0..subfiles {
                prop_assert!(plan.transfer.count_for_subfile(f, l) <= n_f);
                for i in 0..errhs {
                    if plan.transfer.get(f, l, i) {
                        prop_assert!(!cache.cached.get(f, l, i));
                        prop_assert!(req.requested_set.contains(&f));
                    }
                }
            }
        }
    }

    #[test]
    fn full_cache_needs_no_transfer(errhs in 1usize..4, files in 1usize..5, users in 1usize..4, seed in 0u64..500) {
        let cfg = config(errhs, files, 2, users, 1.0);
        let (ch, cache, req) = instance(&cfg, seed);
        let plan = hfit_transfer_plan(&ch, &cache, &req, errhs, TransferRule::RankThenExclude).unwrap();
        let mask = availability_mask(&cache, &plan).unwrap();
        for f in 0..files {
            for l in 0..2 {
                prop_assert_eq!(plan.transfer.count_for_subfile(f, l), 0);
                prop_assert_eq!(mask.count_for_subfile(f, l), errhs);
            }
        }
    }

    #[test]
    fn plan_ignores_per_user_gain_scaling(scale in 0.01f64..100.0, user_frac in 0.0f64..1.0, seed in 0u64..500) {
        let cfg = config(4, 4, 2, 3, 0.25);
        let (ch, cache, req) = instance(&cfg, seed);
        let k = ((user_frac * cfg.users as f64) as usize).min(cfg.users - 1);
        let mut scaled = ch.clone();
        for i in 0..cfg.errhs {
            *scaled.block_mut(k, i) *= Cplx::new(scale, 0.0);
        }
        let a = hfit_transfer_plan(&ch, &cache, &req, 2, TransferRule::RankThenExclude).unwrap();
        let b = hfit_transfer_plan(&scaled, &cache, &req, 2, TransferRule::RankThenExclude).unwrap();
        prop_assert_eq!(a, b);
    }
}
