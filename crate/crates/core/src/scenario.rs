//! One delivery instance as seen by the optimizers, and the hybrid precoder.

use crate::cache::{CacheState, RequestProfile, TransferPlan};
use crate::channel::NetworkChannel;
use crate::config::SystemConfig;
use crate::error::{invalid, Result};
use crate::scalar::{cplx, CMat, RMat, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Hfit,
    Sfit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderMode {
    Hybrid,
    FullyDigital,
}

/// A requested subfile, encoded as one stream of `d` symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub file: usize,
    pub subfile: usize,
    /// Users requesting `file`, ascending.
    pub requesters: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub channel: NetworkChannel<T>,
    pub strategy: Strategy,
    pub mode: PrecoderMode,
    pub streams: Vec<Stream>,
    /// Stream indices grouped per requested file.
    pub file_streams: Vec<Vec<usize>>,
    /// Stream indices decoded by each user.
    pub user_streams: Vec<Vec<usize>>,
    /// `[s][i]`: eRRH `i` caches the subfile of stream `s`.
    pub cached: Vec<Vec<bool>>,
    /// `[s][i]`: the subfile is sent to eRRH `i` over fronthaul (HFIT only).
    pub transfer: Vec<Vec<bool>>,
    /// N_eRF, or N_t in fully digital mode.
    pub rf_chains: usize,
    pub tx_antennas: usize,
    /// d_{f,l}
    pub stream_dim: usize,
    pub noise_var: T,
    /// Linear per-eRRH power budget.
    pub power: T,
    /// C in bits/symbol.
    pub fronthaul: T,
    /// S̄ in bits/symbol.
    pub rate_cap: T,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        config: &SystemConfig,
        channel: NetworkChannel<T>,
        cache: &CacheState,
        requests: &RequestProfile,
        plan: Option<&TransferPlan>,
        strategy: Strategy,
        mode: PrecoderMode,
    ) -> Result<Self> {
        let kr = channel.errhs;
        if cache.cached.shape() != (config.files, config.subfiles, kr) {
            return Err(invalid("cache shape does not match config"));
        }
        if requests.requested_file.len() != channel.users {
            return Err(invalid("one request per user is required"));
        }
        if strategy == Strategy::Hfit && plan.is_none() {
            return Err(invalid("HFIT needs a transfer plan"));
        }
        let mut streams = Vec::new();
        let mut file_streams = Vec::new();
        for &f in &requests.requested_set {
            let mut ids = Vec::new();
            for l in 0..config.subfiles {
                ids.push(streams.len());
                streams.push(Stream { file: f, subfile: l, requesters: requests.requesters(f).collect() });
            }
            file_streams.push(ids);
        }
        let user_streams = requests
            .requested_file
            .iter()
            .map(|&f| (0..streams.len()).filter(|&s| streams[s].file == f).collect())
            .collect();
        let cached = streams
            .iter()
            .map(|st| (0..kr).map(|i| cache.cached.get(st.file, st.subfile, i)).collect())
            .collect();
        let transfer = streams
            .iter()
            .map(|st| {
                (0..kr)
                    .map(|i| strategy == Strategy::Hfit && plan.is_some_and(|p| p.transfer.get(st.file, st.subfile, i)))
                    .collect()
            })
            .collect();
        let rf_chains = match mode {
            PrecoderMode::Hybrid => config.errh_rf_chains,
            PrecoderMode::FullyDigital => config.tx_antennas,
        };
        Ok(Self {
            channel,
            strategy,
            mode,
            streams,
            file_streams,
            user_streams,
            cached,
            transfer,
            rf_chains,
            tx_antennas: config.tx_antennas,
            stream_dim: config.streams,
            noise_var: T::lit(config.noise_var),
            power: T::lit(config.power_linear()),
            fronthaul: T::lit(config.fronthaul),
            rate_cap: T::lit(config.subfile_size()),
        })
    }

    pub fn errhs(&self) -> usize {
        self.channel.errhs
    }

    pub fn users(&self) -> usize {
        self.channel.users
    }

    /// Whether eRRH `i` may precode stream `s` locally (cached or transferred).
    pub fn available(&self, s: usize, i: usize) -> bool {
        self.cached[s][i] || self.transfer[s][i]
    }

    /// Whether `(s, i)` carries a decision block for the strategy.
    pub fn active(&self, s: usize, i: usize) -> bool {
        match self.strategy {
            Strategy::Hfit => self.available(s, i),
            Strategy::Sfit => true,
        }
    }

    /// Uncached streams at eRRH `i`: the ones the BBU precodes under SFIT.
    pub fn uncached(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.streams.len()).filter(move |&s| !self.cached[s][i])
    }
}

/// Analog stage of the precoder.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalogPrecoder<T: Real> {
    /// Phase matrix φ (N_t x N_eRF) per eRRH; entries are `exp(jφ)`.
    Phases(Vec<RMat<T>>),
    /// Identity, used for fully digital precoding.
    Identity { antennas: usize, errhs: usize },
}

impl<T: Real> AnalogPrecoder<T> {
    pub fn errhs(&self) -> usize {
        match self {
            Self::Phases(p) => p.len(),
            Self::Identity { errhs, .. } => *errhs,
        }
    }

    pub fn matrix(&self, i: usize) -> CMat<T> {
        match self {
            Self::Phases(p) => p[i].map(|phi| cplx(phi.cos(), phi.sin())),
            Self::Identity { antennas, .. } => CMat::identity(*antennas, *antennas),
        }
    }

    pub fn matrices(&self) -> Vec<CMat<T>> {
        (0..self.errhs()).map(|i| self.matrix(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridPrecoder<T: Real> {
    pub analog: AnalogPrecoder<T>,
    /// G_{s,i}, N_eRF x d, indexed `[s][i]`.
    pub digital_err: Vec<Vec<CMat<T>>>,
    /// U_{s,i}, N_eRF x d (SFIT only).
    pub digital_bbu: Option<Vec<Vec<CMat<T>>>>,
    /// Ω_i (SFIT only).
    pub quant_cov: Option<Vec<CMat<T>>>,
}

impl<T: Real> HybridPrecoder<T> {
    /// All-zero digital blocks with the given analog stage.
    pub fn zeros(scenario: &Scenario<T>, analog: AnalogPrecoder<T>) -> Self {
        let (n, d) = (scenario.rf_chains, scenario.stream_dim);
        let blocks = vec![vec![CMat::zeros(n, d); scenario.errhs()]; scenario.streams.len()];
        let sfit = scenario.strategy == Strategy::Sfit;
        Self {
            analog,
            digital_bbu: sfit.then(|| blocks.clone()),
            quant_cov: sfit.then(|| vec![CMat::zeros(n, n); scenario.errhs()]),
            digital_err: blocks,
        }
    }

    /// Ū_{s,i}: `c G + (1 - c) U` with a BBU stage, otherwise the mask-gated `G`.
    pub fn combined(&self, scenario: &Scenario<T>, s: usize, i: usize) -> CMat<T> {
        match &self.digital_bbu {
            Some(u) if !scenario.cached[s][i] => u[s][i].clone(),
            Some(_) => self.digital_err[s][i].clone(),
            None if scenario.available(s, i) => self.digital_err[s][i].clone(),
            None => CMat::zeros(self.digital_err[s][i].nrows(), self.digital_err[s][i].ncols()),
        }
    }

    pub fn combined_all(&self, scenario: &Scenario<T>) -> Vec<Vec<CMat<T>>> {
        (0..scenario.streams.len())
            .map(|s| (0..scenario.errhs()).map(|i| self.combined(scenario, s, i)).collect())
            .collect()
    }

    /// Largest deviation of an analog entry from unit modulus.
    pub fn modulus_error(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.analog.errhs() {
            if let AnalogPrecoder::Phases(_) = self.analog {
                for z in self.analog.matrix(i).iter() {
                    let e = (z.norm_sqr().sqrt() - T::one()).abs();
                    if e > worst {
                        worst = e;
                    }
                }
            }
        }
        worst
    }
}
