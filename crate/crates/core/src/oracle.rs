//! Exact transient law of the rumor chain on tiny lattices.
//!
//! Configurations of an `N`-site box are numbered in base 3 with site 0 as
//! the least significant digit, so index 0 is the all-Ignorant state. The
//! transient distribution is computed by uniformization: with `q` at least
//! the largest exit rate and `P = I + Q/q`,
//!
//! ```text
//! p(t) = Σ_k  e^{-qt} (qt)^k / k!  ·  p(0) P^k
//! ```
//!
//! Every term is nonnegative, so truncating once the accumulated Poisson
//! weight exceeds `1 - tol` bounds the error of each entry by `tol`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Lattice, Params, SiteRates, SiteState};

/// Default limit on the number of sites (3^8 = 6561 states).
pub const DEFAULT_SITE_CAP: usize = 8;

/// Poisson tail mass left out of the uniformization sum.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Sparse generator of the configuration chain.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    lattice: Lattice,
    params: Params,
    // row-major sparse off-diagonal entries
    row_start: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

/// Base-3 code of a configuration.
pub fn encode(cfg: &Configuration) -> usize {
    cfg.states().iter().rev().fold(0, |acc, s| acc * 3 + s.digit() as usize)
}

pub fn decode(lattice: Lattice, mut code: usize) -> Configuration {
    let states = (0..lattice.sites())
        .map(|_| {
            let s = SiteState::from_digit((code % 3) as u8).expect("digit < 3");
            code /= 3;
            s
        })
        .collect();
    Configuration::from_states(lattice, states).expect("length matches lattice")
}

impl GeneratorMatrix {
    pub fn build(lattice: Lattice, params: Params) -> Result<Self> {
        Self::build_with_cap(lattice, params, DEFAULT_SITE_CAP)
    }

    pub fn build_with_cap(lattice: Lattice, params: Params, cap: usize) -> Result<Self> {
        let n = lattice.sites();
        if n > cap {
            return Err(Error::Capacity(format!(
                "{n} sites exceed the oracle cap of {cap} (3^{n} states)"
            )));
        }
        let states = 3usize.pow(n as u32);
        let mut powers = vec![1usize; n];
        for i in 1..n {
            powers[i] = powers[i - 1] * 3;
        }
        let mut row_start = Vec::with_capacity(states + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(states);
        row_start.push(0);
        for code in 0..states {
            let cfg = decode(lattice, code);
            let mut out = 0.0;
            for x in 0..n {
                let from = cfg.states()[x];
                let table: SiteRates = cfg.site_rates(&params, x)?;
                for (to, r) in table.moves() {
                    let next = code - from.digit() as usize * powers[x] + to.digit() as usize * powers[x];
                    targets.push(next as u32);
                    rates.push(r);
                    out += r;
                }
            }
            exit.push(out);
            row_start.push(targets.len());
        }
        Ok(GeneratorMatrix { lattice, params, row_start, targets, rates, exit })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn states(&self) -> usize {
        self.exit.len()
    }

    /// Off-diagonal entries of row `i` as `(column, rate)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_start[i]..self.row_start[i + 1];
        self.targets[span.clone()].iter().map(|&j| j as usize).zip(self.rates[span].iter().copied())
    }

    /// `Q[i][j]`, including the diagonal `-exit(i)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let off: f64 = self.row(i).filter(|&(c, _)| c == j).map(|(_, r)| r).sum();
        if i == j {
            off - self.exit[i]
        } else {
            off
        }
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// Largest deviation of a row sum from zero.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.states())
            .map(|i| (self.row(i).map(|(_, r)| r).sum::<f64>() - self.exit[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn transient_distribution(&self, initial: &Configuration, t: f64) -> Result<Vec<f64>> {
        if initial.lattice() != &self.lattice {
            return Err(Error::InvalidLattice("initial configuration is on a different lattice".into()));
        }
        let mut p0 = vec![0.0; self.states()];
        p0[encode(initial)] = 1.0;
        self.evolve(&p0, t)
    }

    /// Uniformized evolution of an arbitrary initial law.
    pub fn evolve(&self, p0: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!("time must be >= 0, got {t}")));
        }
        let q = self.exit.iter().copied().fold(0.0, f64::max);
        if t == 0.0 || q == 0.0 {
            return Ok(p0.to_vec());
        }
        let mean = q * t;
        let mut v = p0.to_vec();
        let mut next = vec![0.0; v.len()];
        let mut out = vec![0.0; v.len()];
        let mut log_fact = 0.0;
        let mut mass = 0.0;
        let mut k = 0u64;
        loop {
            if k > 0 {
                log_fact += (k as f64).ln();
            }
            let w = (-mean + k as f64 * mean.ln() - log_fact).exp();
            for (o, x) in out.iter_mut().zip(&v) {
                *o += w * x;
            }
            mass += w;
            if (k as f64) > mean && 1.0 - mass < TRUNCATION_TOL {
                break;
            }
            if k > 10_000_000 {
                return Err(Error::Capacity(format!("uniformization did not converge for qt = {mean}")));
            }
            // next = v P = v + v Q / q
            for (i, x) in v.iter().enumerate() {
                next[i] += x * (1.0 - self.exit[i] / q);
                if *x != 0.0 {
                    for (j, r) in self.row(i) {
                        next[j] += x * r / q;
                    }
                }
            }
            std::mem::swap(&mut v, &mut next);
            next.iter_mut().for_each(|x| *x = 0.0);
            k += 1;
        }
        Ok(out)
    }

    /// Mass on the all-Ignorant configuration at time `t`.
    pub fn extinction_probability_by(&self, initial: &Configuration, t: f64) -> Result<f64> {
        Ok(self.transient_distribution(initial, t)?[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StateProbability {
    pub index: usize,
    /// Site states as digits, site 0 first.
    pub states: String,
    pub probability: f64,
}

/// JSON: `{N, lambda, alpha, t, top_states, extinction_probability}`.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub t: f64,
    pub top_states: Vec<StateProbability>,
    pub extinction_probability: f64,
}

impl OracleReport {
    pub fn new(gen: &GeneratorMatrix, t: f64, dist: &[f64], top_k: usize) -> Self {
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        let top_states = order
            .into_iter()
            .take(top_k)
            .map(|i| StateProbability {
                index: i,
                states: decode(gen.lattice, i).states().iter().map(|s| char::from(b'0' + s.digit())).collect(),
                probability: dist[i],
            })
            .collect();
        OracleReport {
            n: gen.lattice.sites(),
            lambda: gen.params.lambda(),
            alpha: gen.params.alpha(),
            t,
            top_states,
            extinction_probability: dist[0],
        }
    }
}

/// Total variation distance `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different spaces");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical law of configuration codes.
pub fn empirical_distribution(codes: impl IntoIterator<Item = usize>, states: usize) -> Vec<f64> {
    let mut hist = vec![0u64; states];
    let mut n = 0u64;
    for c in codes {
        hist[c] += 1;
        n += 1;
    }
    hist.into_iter().map(|h| h as f64 / n.max(1) as f64).collect()
}
