//! Clustered narrowband mmWave channels between every eRRH and every user.
//!
//! Each (user, eRRH) link is a sum of `N_c` single-path scatterers with
//! Rayleigh path gains and ULA steering vectors at both ends, scaled by a
//! distance-dependent path loss.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{invalid, Error, Result};
use crate::scalar::{cplx, creal, CMat, CVec, Cplx, Real};

/// Per-(path, user, eRRH) table.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable<X> {
    pub scatterers: usize,
    pub users: usize,
    pub errhs: usize,
    data: Vec<X>,
}

impl<X: Clone> PathTable<X> {
    pub fn filled(scatterers: usize, users: usize, errhs: usize, value: X) -> Self {
        Self { scatterers, users, errhs, data: vec![value; scatterers * users * errhs] }
    }

    #[inline]
    fn index(&self, p: usize, k: usize, i: usize) -> usize {
        (p * self.users + k) * self.errhs + i
    }

    pub fn get(&self, p: usize, k: usize, i: usize) -> &X {
        &self.data[self.index(p, k, i)]
    }

    pub fn set(&mut self, p: usize, k: usize, i: usize, value: X) {
        let idx = self.index(p, k, i);
        self.data[idx] = value;
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.scatterers, self.users, self.errhs)
    }

    pub fn values(&self) -> &[X] {
        &self.data
    }
}

/// Node positions and per-path parameters of one realization.
///
/// `aod` holds θ, the angle seen by the user array; `aoa` holds φ, the
/// angle seen by the eRRH array.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry<T: Real> {
    pub errh_positions: Vec<[T; 2]>,
    pub user_positions: Vec<[T; 2]>,
    pub aod: PathTable<T>,
    pub aoa: PathTable<T>,
    pub path_gains: PathTable<Cplx<T>>,
}

impl<T: Real> Geometry<T> {
    pub fn distance(&self, k: usize, i: usize) -> T {
        let u = self.user_positions[k];
        let e = self.errh_positions[i];
        let dx = u[0] - e[0];
        let dy = u[1] - e[1];
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkChannel<T: Real> {
    pub users: usize,
    pub errhs: usize,
    blocks: Vec<CMat<T>>,
    pub geometry: Geometry<T>,
    pub pathloss: Vec<T>,
}

impl<T: Real> NetworkChannel<T> {
    /// Builds a channel directly from blocks, indexed `[k][i]`.
    pub fn from_blocks(blocks: Vec<Vec<CMat<T>>>, geometry: Geometry<T>, pathloss: Vec<T>) -> Result<Self> {
        let users = blocks.len();
        let errhs = blocks.first().map_or(0, Vec::len);
        if users == 0 || errhs == 0 || blocks.iter().any(|row| row.len() != errhs) {
            return Err(invalid("channel blocks must form a non-empty K_U x K_R grid"));
        }
        let nr = blocks[0][0].nrows();
        for row in &blocks {
            if row.iter().any(|b| b.nrows() != nr) {
                return Err(invalid("all blocks of the grid must share N_r"));
            }
        }
        Ok(Self { users, errhs, blocks: blocks.into_iter().flatten().collect(), geometry, pathloss })
    }

    /// H_{k,i}, shape N_r x N_t.
    pub fn block(&self, k: usize, i: usize) -> &CMat<T> {
        &self.blocks[k * self.errhs + i]
    }

    pub fn block_mut(&mut self, k: usize, i: usize) -> &mut CMat<T> {
        &mut self.blocks[k * self.errhs + i]
    }

    /// H_k = [H_{k,1}, ..., H_{k,K_R}], shape N_r x N_tt.
    pub fn stacked(&self, k: usize) -> CMat<T> {
        let nr = self.block(k, 0).nrows();
        let ntt: usize = (0..self.errhs).map(|i| self.block(k, i).ncols()).sum();
        let mut out = CMat::zeros(nr, ntt);
        let mut col = 0;
        for i in 0..self.errhs {
            let b = self.block(k, i);
            out.view_mut((0, col), (nr, b.ncols())).copy_from(b);
            col += b.ncols();
        }
        out
    }

    /// ‖H_{k,i}‖_F
    pub fn gain(&self, k: usize, i: usize) -> T {
        self.block(k, i).norm()
    }

    pub fn rx_antennas(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn tx_antennas(&self, i: usize) -> usize {
        self.blocks[i].ncols()
    }

    /// Writes `user,errh,row,col,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for k in 0..self.users {
            for i in 0..self.errhs {
                let b = self.block(k, i);
                for r in 0..b.nrows() {
                    for c in 0..b.ncols() {
                        let z = b[(r, c)];
                        w.serialize(ChannelEntry {
                            user: k,
                            errh: i,
                            row: r,
                            col: c,
                            re: z.re.to_f64_lossy(),
                            im: z.im.to_f64_lossy(),
                        })?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the blocks written by [`write_csv`](Self::write_csv). Geometry is
    /// not part of the dump and comes back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let entries: Vec<ChannelEntry> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let users = entries.iter().map(|e| e.user + 1).max().unwrap_or(0);
        let errhs = entries.iter().map(|e| e.errh + 1).max().unwrap_or(0);
        let mut dims = vec![vec![(0usize, 0usize); errhs]; users];
        for e in &entries {
            let d = &mut dims[e.user][e.errh];
            d.0 = d.0.max(e.row + 1);
            d.1 = d.1.max(e.col + 1);
        }
        let mut blocks: Vec<Vec<CMat<T>>> = dims
            .iter()
            .map(|row| row.iter().map(|&(r, c)| CMat::zeros(r, c)).collect())
            .collect();
        for e in entries {
            blocks[e.user][e.errh][(e.row, e.col)] = cplx(T::lit(e.re), T::lit(e.im));
        }
        let geometry = Geometry {
            errh_positions: Vec::new(),
            user_positions: Vec::new(),
            aod: PathTable::filled(0, users, errhs, T::zero()),
            aoa: PathTable::filled(0, users, errhs, T::zero()),
            path_gains: PathTable::filled(0, users, errhs, creal(T::zero())),
        };
        Self::from_blocks(blocks, geometry, vec![T::one(); users * errhs])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelEntry {
    user: usize,
    errh: usize,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

/// Unit-norm ULA steering vector; element `m` is `exp(j 2π s m sin(angle)) / √n`.
pub fn ula_response<T: Real>(n_antennas: usize, angle: T, spacing_ratio: T) -> Result<CVec<T>> {
    if n_antennas == 0 {
        return Err(invalid("ULA needs at least one antenna"));
    }
    if spacing_ratio <= T::zero() {
        return Err(invalid("antenna spacing must be positive"));
    }
    let scale = T::one() / T::from_usize(n_antennas).expect("count").sqrt();
    let step = T::two_pi() * spacing_ratio * angle.sin();
    Ok(CVec::from_fn(n_antennas, |m, _| {
        let phase = step * T::from_usize(m).expect("index");
        cplx(phase.cos() * scale, phase.sin() * scale)
    }))
}

/// `1 / (1 + (d/d0)^α)`.
pub fn path_loss<T: Real>(distance: T, d0: T, alpha: T) -> Result<T> {
    if distance < T::zero() {
        return Err(invalid("distance must be non-negative"));
    }
    if d0 <= T::zero() || alpha <= T::zero() {
        return Err(invalid("reference distance and exponent must be positive"));
    }
    Ok(T::one() / (T::one() + (distance / d0).powf(alpha)))
}

fn uniform_disk<T: Real, R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [T; 2] {
    // area-uniform: r = R √u
    let r = radius * rng.gen::<f64>().sqrt();
    let a = std::f64::consts::TAU * rng.gen::<f64>();
    [T::lit(r * a.cos()), T::lit(r * a.sin())]
}

fn uniform_angle<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(std::f64::consts::TAU * rng.gen::<f64>())
}

/// Draws positions, angles and path gains for one realization.
pub fn sample_geometry<T: Real, R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Geometry<T> {
    let (nc, ku, kr) = (config.scatterers, config.users, config.errhs);
    let errh_positions = (0..kr).map(|_| uniform_disk(config.cell_radius, rng)).collect();
    let user_positions = (0..ku).map(|_| uniform_disk(config.cell_radius, rng)).collect();
    let mut aod = PathTable::filled(nc, ku, kr, T::zero());
    let mut aoa = PathTable::filled(nc, ku, kr, T::zero());
    let mut path_gains = PathTable::filled(nc, ku, kr, creal(T::zero()));
    let std = (config.path_gain_var / 2.0).sqrt();
    for p in 0..nc {
        for k in 0..ku {
            for i in 0..kr {
                aod.set(p, k, i, uniform_angle(rng));
                aoa.set(p, k, i, uniform_angle(rng));
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                path_gains.set(p, k, i, cplx(T::lit(std * re), T::lit(std * im)));
            }
        }
    }
    Geometry { errh_positions, user_positions, aod, aoa, path_gains }
}

/// `H_{k,i} = √(ρ N_t N_r) Σ_p α_p a_u(θ_p) a_r(φ_p)^H`.
pub fn generate_channel<T: Real>(config: &SystemConfig, geometry: &Geometry<T>) -> Result<NetworkChannel<T>> {
    let (nc, ku, kr) = (config.scatterers, config.users, config.errhs);
    if geometry.path_gains.shape() != (nc, ku, kr)
        || geometry.aod.shape() != (nc, ku, kr)
        || geometry.aoa.shape() != (nc, ku, kr)
        || geometry.errh_positions.len() != kr
        || geometry.user_positions.len() != ku
    {
        return Err(Error::InvalidArgument(format!(
            "geometry shape {:?} does not match config ({nc}, {ku}, {kr})",
            geometry.path_gains.shape()
        )));
    }
    let (nt, nr) = (config.tx_antennas, config.rx_antennas);
    let spacing = T::lit(config.spacing_ratio);
    let mut blocks = Vec::with_capacity(ku);
    let mut pathloss = Vec::with_capacity(ku * kr);
    for k in 0..ku {
        let mut row = Vec::with_capacity(kr);
        for i in 0..kr {
            let rho = path_loss(
                geometry.distance(k, i),
                T::lit(config.ref_distance),
                T::lit(config.pathloss_exp),
            )?;
            pathloss.push(rho);
            let scale = (rho * T::from_usize(nt * nr).expect("count")).sqrt();
            let mut h = CMat::zeros(nr, nt);
            for p in 0..nc {
                let au = ula_response(nr, *geometry.aod.get(p, k, i), spacing)?;
                let ar = ula_response(nt, *geometry.aoa.get(p, k, i), spacing)?;
                let gain = *geometry.path_gains.get(p, k, i) * creal(scale);
                h += (au * ar.adjoint()) * gain;
            }
            row.push(h);
        }
        blocks.push(row);
    }
    NetworkChannel::from_blocks(blocks, geometry.clone(), pathloss)
}
