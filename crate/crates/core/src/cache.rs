//! File library, per-eRRH caches, user requests and the hard-transfer plan.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkChannel;
use crate::config::{SystemConfig, TransferRule};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Binary indicator over (file, subfile, eRRH).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubfileIndicator {
    pub files: usize,
    pub subfiles: usize,
    pub errhs: usize,
    bits: Vec<bool>,
}

impl SubfileIndicator {
    pub fn zeros(files: usize, subfiles: usize, errhs: usize) -> Self {
        Self { files, subfiles, errhs, bits: vec![false; files * subfiles * errhs] }
    }

    pub fn ones(files: usize, subfiles: usize, errhs: usize) -> Self {
        Self { files, subfiles, errhs, bits: vec![true; files * subfiles * errhs] }
    }

    #[inline]
    fn index(&self, f: usize, l: usize, i: usize) -> usize {
        assert!(f < self.files && l < self.subfiles && i < self.errhs, "indicator index out of range");
        (f * self.subfiles + l) * self.errhs + i
    }

    pub fn get(&self, f: usize, l: usize, i: usize) -> bool {
        self.bits[self.index(f, l, i)]
    }

    pub fn set(&mut self, f: usize, l: usize, i: usize, bit: bool) {
        let idx = self.index(f, l, i);
        self.bits[idx] = bit;
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.files, self.subfiles, self.errhs)
    }

    /// Number of set bits held by eRRH `i`.
    pub fn count_for_errh(&self, i: usize) -> usize {
        (0..self.files)
            .flat_map(|f| (0..self.subfiles).map(move |l| (f, l)))
            .filter(|&(f, l)| self.get(f, l, i))
            .count()
    }

    pub fn count_for_subfile(&self, f: usize, l: usize) -> usize {
        (0..self.errhs).filter(|&i| self.get(f, l, i)).count()
    }

    /// CSV triples `file,subfile,errh,bit` (0-based indices).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for f in 0..self.files {
            for l in 0..self.subfiles {
                for i in 0..self.errhs {
                    w.serialize(IndicatorRow { file: f, subfile: l, errh: i, bit: u8::from(self.get(f, l, i)) })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let rows: Vec<IndicatorRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let files = rows.iter().map(|r| r.file + 1).max().unwrap_or(0);
        let subfiles = rows.iter().map(|r| r.subfile + 1).max().unwrap_or(0);
        let errhs = rows.iter().map(|r| r.errh + 1).max().unwrap_or(0);
        let mut out = Self::zeros(files, subfiles, errhs);
        for r in rows {
            if r.bit > 1 {
                return Err(invalid(format!("indicator bit must be 0 or 1, got {}", r.bit)));
            }
            out.set(r.file, r.subfile, r.errh, r.bit == 1);
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndicatorRow {
    file: usize,
    subfile: usize,
    errh: usize,
    bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    pub cached: SubfileIndicator,
}

/// Requested file per user (0-based) and the set of distinct requested files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestProfile {
    pub requested_file: Vec<usize>,
    pub requested_set: BTreeSet<usize>,
}

impl RequestProfile {
    pub fn new(requested_file: Vec<usize>) -> Self {
        let requested_set = requested_file.iter().copied().collect();
        Self { requested_file, requested_set }
    }

    /// Users asking for file `f`, ascending.
    pub fn requesters(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.requested_file.iter().enumerate().filter(move |(_, &g)| g == f).map(|(k, _)| k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferPlan {
    pub transfer: SubfileIndicator,
}

pub fn random_cache_placement<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<CacheState> {
    if !(0.0..=1.0).contains(&config.cache_fraction) {
        return Err(invalid(format!("cache fraction {} outside [0, 1]", config.cache_fraction)));
    }
    let (nf, nl, kr) = (config.files, config.subfiles, config.errhs);
    let per_errh = config.cached_per_errh();
    let mut cached = SubfileIndicator::zeros(nf, nl, kr);
    for i in 0..kr {
        for idx in sample(rng, nf * nl, per_errh) {
            cached.set(idx / nl, idx % nl, i, true);
        }
    }
    Ok(CacheState { cached })
}

pub fn sample_requests<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> RequestProfile {
    RequestProfile::new((0..config.users).map(|_| rng.gen_range(0..config.files)).collect())
}

/// Selects the transfer set for one subfile from per-eRRH gains and cache bits.
pub fn select_transfer(gains: &[f64], cached: &[bool], n_f: usize, rule: TransferRule) -> Vec<bool> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    if rule == TransferRule::ExcludeThenRank {
        order.retain(|&i| !cached[i]);
    }
    // stable sort keeps ascending index among equal gains
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut out = vec![false; gains.len()];
    for &i in order.iter().take(n_f) {
        out[i] = !cached[i];
    }
    out
}

/// For shared requests, the ranking uses the lowest-indexed requesting user.
pub fn hfit_transfer_plan<T: Real>(
    channel: &NetworkChannel<T>,
    cache: &CacheState,
    requests: &RequestProfile,
    n_f: usize,
    rule: TransferRule,
) -> Result<TransferPlan> {
    let (nf, nl, kr) = cache.cached.shape();
    if n_f > kr {
        return Err(invalid(format!("cooperation size {n_f} exceeds the {kr} eRRHs")));
    }
    if channel.errhs != kr || channel.users != requests.requested_file.len() {
        return Err(invalid("channel, cache and requests disagree on network size"));
    }
    let mut transfer = SubfileIndicator::zeros(nf, nl, kr);
    for &f in &requests.requested_set {
        let k = requests.requesters(f).next().expect("requested file has a requester");
        let gains: Vec<f64> = (0..kr).map(|i| channel.gain(k, i).to_f64_lossy()).collect();
        for l in 0..nl {
            let cached: Vec<bool> = (0..kr).map(|i| cache.cached.get(f, l, i)).collect();
            for (i, bit) in select_transfer(&gains, &cached, n_f, rule).into_iter().enumerate() {
                transfer.set(f, l, i, bit);
            }
        }
    }
    Ok(TransferPlan { transfer })
}

/// `1 - (1 - c)(1 - d)`: whether eRRH `i` holds subfile `(f, l)` locally.
pub fn availability_mask(cache: &CacheState, plan: &TransferPlan) -> Result<SubfileIndicator> {
    if cache.cached.shape() != plan.transfer.shape() {
        return Err(invalid("cache and transfer plan shapes differ"));
    }
    let (nf, nl, kr) = cache.cached.shape();
    let mut out = SubfileIndicator::zeros(nf, nl, kr);
    for f in 0..nf {
        for l in 0..nl {
            for i in 0..kr {
                out.set(f, l, i, cache.cached.get(f, l, i) || plan.transfer.get(f, l, i));
            }
        }
    }
    Ok(out)
}
