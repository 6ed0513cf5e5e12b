#![allow(dead_code)]

pub mod oracle;

use cemm_precoder::harness::{build_scenario, draw_instance};
use cemm_precoder::scalar::RMat;
use cemm_precoder::{Analog, Channel, Matrix, Precoder, PrecoderMode, Scenario, Strategy, SystemConfig};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub struct Dims {
    pub users: usize,
    pub errhs: usize,
    pub nt: usize,
    pub nr: usize,
    pub nrf: usize,
    pub files: usize,
    pub subfiles: usize,
    pub xi: f64,
}

pub fn config(d: &Dims) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.users = d.users;
    cfg.errhs = d.errhs;
    cfg.tx_antennas = d.nt;
    cfg.rx_antennas = d.nr;
    cfg.errh_rf_chains = d.nrf;
    cfg.user_rf_chains = d.nrf * d.errhs;
    cfg.files = d.files;
    cfg.subfiles = d.subfiles;
    cfg.cache_fraction = d.xi;
    cfg.cooperation = cfg.cooperation.min(d.errhs);
    cfg.validate().unwrap();
    cfg
}

/// A small random instance with mixed caching and several streams per user.
pub fn small_config() -> SystemConfig {
    config(&Dims { users: 3, errhs: 2, nt: 4, nr: 2, nrf: 2, files: 3, subfiles: 2, xi: 0.5 })
}

pub fn scenario(cfg: &SystemConfig, seed: u64, strategy: Strategy, mode: PrecoderMode) -> Scenario {
    let inst = draw_instance(cfg, seed, 0).unwrap();
    build_scenario(cfg, &inst, strategy, mode).unwrap()
}

/// Same requests and cache as a drawn instance, with the channel replaced by `blocks[k][i]`.
pub fn with_channel(cfg: &SystemConfig, blocks: Vec<Vec<Matrix>>, strategy: Strategy, mode: PrecoderMode) -> Scenario {
    let mut inst = draw_instance(cfg, 0, 0).unwrap();
    let geometry = inst.channel.geometry.clone();
    let pathloss = inst.channel.pathloss.clone();
    inst.channel = Channel::from_blocks(blocks, geometry, pathloss).unwrap();
    build_scenario(cfg, &inst, strategy, mode).unwrap()
}

pub fn gauss<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random Hermitian positive definite matrix.
pub fn random_pd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let a = gauss(rng, n, n);
    let m = &a * a.adjoint() + Matrix::identity(n, n) * c(0.1);
    (&m + m.adjoint()) * c(0.5)
}

pub fn random_phases<R: Rng>(rng: &mut R, scn: &Scenario) -> Analog {
    match scn.mode {
        PrecoderMode::Hybrid => Analog::Phases(
            (0..scn.errhs())
                .map(|_| RMat::from_fn(scn.tx_antennas, scn.rf_chains, |_, _| std::f64::consts::TAU * rng.gen::<f64>()))
                .collect(),
        ),
        PrecoderMode::FullyDigital => Analog::Identity { antennas: scn.tx_antennas, errhs: scn.errhs() },
    }
}

/// Random phases, Gaussian digital blocks and (SFIT) random positive definite Ω.
pub fn random_precoder<R: Rng>(rng: &mut R, scn: &Scenario) -> Precoder {
    let analog = random_phases(rng, scn);
    let mut pre = Precoder::zeros(scn, analog);
    let (n, d) = (scn.rf_chains, scn.stream_dim);
    for row in pre.digital_err.iter_mut() {
        for b in row.iter_mut() {
            *b = gauss(rng, n, d);
        }
    }
    if let Some(u) = pre.digital_bbu.as_mut() {
        for row in u.iter_mut() {
            for b in row.iter_mut() {
                *b = gauss(rng, n, d);
            }
        }
    }
    if let Some(q) = pre.quant_cov.as_mut() {
        for om in q.iter_mut() {
            *om = random_pd(rng, n) * c(0.3);
        }
    }
    pre
}

pub fn logdet(m: &Matrix) -> f64 {
    m.clone().lu().determinant().ln().re
}

pub fn inverse(m: &Matrix) -> Matrix {
    m.clone().try_inverse().expect("invertible")
}

pub fn min_eig(m: &Matrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn trace(m: &Matrix) -> f64 {
    m.trace().re
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Single user, single eRRH, full cache, N_r = 1, N_eRF = 1, S̄ effectively unbounded.
pub fn matched_filter_config(nt: usize) -> SystemConfig {
    let mut cfg = config(&Dims { users: 1, errhs: 1, nt, nr: 1, nrf: 1, files: 1, subfiles: 1, xi: 1.0 });
    cfg.file_size = 1e3;
    cfg
}

/// (oracle, optimized) R_min in bits for the matched-filter instance of `seed`.
///
/// Hybrid keeps the all-ones analog column fixed and runs the digital stage;
/// fully digital runs the whole driver and compares with f = hᴴ.
pub fn matched_filter_rates(nt: usize, mode: PrecoderMode, seed: u64) -> (f64, f64) {
    use cemm_precoder::hfit::solve_digital_hfit;
    use cemm_precoder::optim::Optimizer;
    use rand::SeedableRng;

    let cfg = matched_filter_config(nt);
    let scn = scenario(&cfg, seed, Strategy::Hfit, mode);
    let h = scn.channel.block(0, 0).clone();
    let p = cfg.power_linear();
    let opt = Optimizer::new(&cfg);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    match mode {
        PrecoderMode::Hybrid => {
            let f = Matrix::from_element(nt, 1, c(1.0));
            let oracle = (1.0 + (&h * &f).norm_squared() * p / (f.norm_squared() * cfg.noise_var)).log2();
            let mut init = opt.initial_precoder(&scn, &mut rng).unwrap();
            init.analog = Analog::Phases(vec![RMat::zeros(nt, 1)]);
            let out = solve_digital_hfit(&opt, &scn, init).unwrap();
            (oracle, out.allocation.min_rate)
        }
        PrecoderMode::FullyDigital => {
            let oracle = (1.0 + h.norm_squared() * p / cfg.noise_var).log2();
            let out = opt.optimize(&scn, &mut rng).unwrap();
            (oracle, out.min_rate())
        }
    }
}
