//! Monte Carlo frequencies of the space-time block events used in the
//! survival and extinction arguments.
//!
//! Both estimators place `Z^d` coordinates `z` inside a finite box and run the
//! event engine on it.
//!
//! * Block A (survival side). The box is `(-4L, 4L)^d` with everything
//!   outside permanently Ignorant. `k = ⌊√L⌋` Spreaders start inside
//!   `I_0 = [-L, L]^d`. The block is open when, at time `T`, every neighbor
//!   block `I_{±e_i} = ±2L e_i + [-L, L]^d` holds at least `k` Spreaders and
//!   no Stiflers.
//! * Block B (extinction side). The box is `Λ1 = [-2L, 2L]^d × [0, 2T]`. Its
//!   boundary `Δ` (the faces `|z_i| = 2L` and the whole box at `t = 0`) is
//!   set by a [`BoundaryPolicy`], with the side faces held fixed for the whole
//!   run. The block is open when no site of `Λ2 = [-L, L]^d` is a Spreader or
//!   Stifler at any time in `[T, 2T]`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::{wilson_interval, Z95};
use crate::error::{Error, Result};
use crate::gillespie::{EventEngine, StepOutcome};
use crate::harris::sample_distinct;
use crate::lattice::{Boundary, Configuration, Lattice, Params, SiteState};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

/// Largest box either estimator will allocate.
pub const MAX_BLOCK_SITES: usize = 1 << 24;

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Where the `k` initial Spreaders of block A go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Distinct sites drawn uniformly from `I_0`.
    #[default]
    Uniform,
    /// A contiguous run along axis 0 centred at the origin.
    Packed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpecA {
    pub dim: usize,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub k: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub placement: Placement,
}

impl BlockSpecA {
    pub fn new(dim: usize, l: u64, t: f64) -> Result<Self> {
        if dim == 0 || l == 0 {
            return Err(Error::InvalidParams("block A needs d >= 1 and L >= 1".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!("block A needs T > 0, got {t}")));
        }
        let k = isqrt(l);
        Ok(BlockSpecA { dim, l, t, k, m: isqrt(k), placement: Placement::Uniform })
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    /// Half-width of the simulated box: coordinates run over `|z_i| <= 4L - 1`.
    fn radius(&self) -> i64 {
        4 * self.l as i64 - 1
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let side = 2 * self.radius() as usize + 1;
        let lattice = Lattice::new(self.dim, side, Boundary::FrozenIgnorant)?;
        if lattice.sites() > MAX_BLOCK_SITES {
            return Err(Error::Capacity(format!(
                "block A box has {} sites (limit {MAX_BLOCK_SITES})",
                lattice.sites()
            )));
        }
        Ok(lattice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Every site of `Δ` is a Spreader.
    #[default]
    AllSpreaders,
    /// Every site of `Δ` is a Stifler.
    AllStiflers,
    /// Each site of `Δ` draws its state uniformly from {0, 1, 2}, fresh for
    /// every replica.
    RandomResampled,
}

impl BoundaryPolicy {
    pub const ALL: [BoundaryPolicy; 3] =
        [BoundaryPolicy::AllSpreaders, BoundaryPolicy::AllStiflers, BoundaryPolicy::RandomResampled];

    fn draw(self, rng: &mut SimRng) -> SiteState {
        match self {
            BoundaryPolicy::AllSpreaders => SiteState::Spreader,
            BoundaryPolicy::AllStiflers => SiteState::Stifler,
            BoundaryPolicy::RandomResampled => {
                SiteState::from_digit(rng.random_range(0..3u8)).expect("digit < 3")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpecB {
    pub dim: usize,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub boundary_policy: BoundaryPolicy,
}

impl BlockSpecB {
    pub fn new(dim: usize, l: u64, t: f64) -> Result<Self> {
        if dim == 0 || l == 0 {
            return Err(Error::InvalidParams("block B needs d >= 1 and L >= 1".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!("block B needs T > 0, got {t}")));
        }
        Ok(BlockSpecB { dim, l, t, boundary_policy: BoundaryPolicy::default() })
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary_policy = policy;
        self
    }

    fn radius(&self) -> i64 {
        2 * self.l as i64
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let side = 2 * self.radius() as usize + 1;
        let lattice = Lattice::new(self.dim, side, Boundary::FrozenIgnorant)?;
        if lattice.sites() > MAX_BLOCK_SITES {
            return Err(Error::Capacity(format!(
                "block B box has {} sites (limit {MAX_BLOCK_SITES})",
                lattice.sites()
            )));
        }
        Ok(lattice)
    }
}

/// Centred integer coordinates of every site.
fn centred_coords(lattice: &Lattice, radius: i64) -> Vec<Vec<i64>> {
    (0..lattice.sites())
        .map(|x| {
            lattice.coords(x).expect("valid site").into_iter().map(|c| c as i64 - radius).collect()
        })
        .collect()
}

/// Block estimate JSON: the block geometry plus the estimate and its interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimate<S> {
    pub spec: S,
    pub lambda: f64,
    pub alpha: f64,
    pub replicas: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
}

impl<S> BlockEstimate<S> {
    fn new(spec: S, params: &Params, seed: u64, hits: &[bool]) -> Self {
        let replicas = hits.len() as u64;
        let successes = hits.iter().filter(|&&h| h).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(successes, replicas, Z95);
        BlockEstimate {
            spec,
            lambda: params.lambda(),
            alpha: params.alpha(),
            replicas,
            successes,
            estimate: successes as f64 / replicas as f64,
            ci_lo,
            ci_hi,
            seed,
        }
    }

    pub fn separated_from<U>(&self, other: &BlockEstimate<U>) -> bool {
        self.ci_hi < other.ci_lo || other.ci_hi < self.ci_lo
    }
}

/// Replica-level event for block A.
pub fn block_a_replica(spec: &BlockSpecA, params: &Params, seed: u64) -> Result<bool> {
    let lattice = spec.lattice()?;
    let coords = centred_coords(&lattice, spec.radius());
    let l = spec.l as i64;
    let in_i0: Vec<usize> =
        (0..lattice.sites()).filter(|&x| coords[x].iter().all(|c| c.abs() <= l)).collect();

    let mut rng = rng_from_seed(seed);
    let spreaders = match spec.placement {
        Placement::Uniform => sample_distinct(&in_i0, spec.k as usize, &mut rng),
        Placement::Packed => {
            let start = -(spec.k as i64 / 2);
            (0..spec.k as i64)
                .map(|i| {
                    let mut c = vec![spec.radius() as usize; spec.dim];
                    c[0] = (start + i + spec.radius()) as usize;
                    lattice.index(&c)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let cfg = Configuration::with_spreaders(lattice, &spreaders)?;
    let mut engine = EventEngine::with_rng(cfg, *params, rng);
    loop {
        if engine.counts().spreader == 0 {
            return Ok(spec.k == 0);
        }
        match engine.step_before(spec.t)? {
            StepOutcome::Event { .. } => {}
            StepOutcome::Horizon | StepOutcome::Absorbed => break,
        }
    }

    let states = engine.configuration().states();
    for axis in 0..spec.dim {
        for sign in [-1i64, 1] {
            let centre = 2 * l * sign;
            let (mut spreaders, mut stiflers) = (0u64, 0u64);
            for (x, c) in coords.iter().enumerate() {
                let inside = c.iter().enumerate().all(|(i, &z)| {
                    if i == axis {
                        (z - centre).abs() <= l
                    } else {
                        z.abs() <= l
                    }
                });
                if inside {
                    match states[x] {
                        SiteState::Spreader => spreaders += 1,
                        SiteState::Stifler => stiflers += 1,
                        SiteState::Ignorant => {}
                    }
                }
            }
            if stiflers > 0 || spreaders < spec.k {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Fraction of `replicas` runs in which block A is open.
pub fn estimate_open_probability_a(
    spec: &BlockSpecA,
    params: &Params,
    seed: u64,
    replicas: u64,
) -> Result<BlockEstimate<BlockSpecA>> {
    if replicas == 0 {
        return Err(Error::InvalidParams("at least one replica is required".into()));
    }
    spec.lattice()?;
    let hits = (0..replicas)
        .into_par_iter()
        .map(|i| block_a_replica(spec, params, derive_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockEstimate::new(*spec, params, seed, &hits))
}

/// Replica-level event for block B.
pub fn block_b_replica(spec: &BlockSpecB, params: &Params, seed: u64) -> Result<bool> {
    let lattice = spec.lattice()?;
    let coords = centred_coords(&lattice, spec.radius());
    let (l, r) = (spec.l as i64, spec.radius());
    let on_side: Vec<bool> = coords.iter().map(|c| c.iter().any(|z| z.abs() == r)).collect();
    let in_inner: Vec<bool> = coords.iter().map(|c| c.iter().all(|z| z.abs() <= l)).collect();

    let mut rng = rng_from_seed(seed);
    let states = (0..lattice.sites()).map(|_| spec.boundary_policy.draw(&mut rng)).collect();
    let cfg = Configuration::from_states(lattice, states)?;
    let mut engine = EventEngine::with_pinned(cfg, *params, on_side, rng)?;

    while let StepOutcome::Event { .. } = engine.step_before(spec.t)? {}
    let occupied = |x: usize, s: &[SiteState]| in_inner[x] && s[x] != SiteState::Ignorant;
    let states = engine.configuration().states();
    if (0..lattice.sites()).any(|x| occupied(x, states)) {
        return Ok(false);
    }
    loop {
        match engine.step_before(2.0 * spec.t)? {
            StepOutcome::Event { event, .. } => {
                if in_inner[event.site] && event.to != SiteState::Ignorant {
                    return Ok(false);
                }
            }
            StepOutcome::Horizon | StepOutcome::Absorbed => return Ok(true),
        }
    }
}

/// Fraction of `replicas` runs in which `Λ2` stays empty under the block's
/// boundary policy.
pub fn estimate_open_probability_b(
    spec: &BlockSpecB,
    params: &Params,
    seed: u64,
    replicas: u64,
) -> Result<BlockEstimate<BlockSpecB>> {
    if replicas == 0 {
        return Err(Error::InvalidParams("at least one replica is required".into()));
    }
    spec.lattice()?;
    let hits = (0..replicas)
        .into_par_iter()
        .map(|i| block_b_replica(spec, params, derive_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockEstimate::new(*spec, params, seed, &hits))
}

/// Runs every [`BoundaryPolicy`] with the same seed and returns the lowest
/// estimate.
pub fn estimate_open_probability_b_worst_case(
    spec: &BlockSpecB,
    params: &Params,
    seed: u64,
    replicas: u64,
) -> Result<BlockEstimate<BlockSpecB>> {
    let mut worst: Option<BlockEstimate<BlockSpecB>> = None;
    for policy in BoundaryPolicy::ALL {
        let est = estimate_open_probability_b(&spec.with_policy(policy), params, seed, replicas)?;
        if worst.as_ref().is_none_or(|w| est.estimate < w.estimate) {
            worst = Some(est);
        }
    }
    Ok(worst.expect("at least one policy"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_a_constants() {
        let s = BlockSpecA::new(1, 25, 50.0).unwrap();
        assert_eq!((s.k, s.m), (5, 2));
        let s = BlockSpecA::new(1, 24, 1.0).unwrap();
        assert_eq!((s.k, s.m), (4, 2));
        let s = BlockSpecA::new(1, 1, 1.0).unwrap();
        assert_eq!((s.k, s.m), (1, 1));
        assert_eq!(s.lattice().unwrap().side(), 7);
        assert!(BlockSpecA::new(1, 0, 1.0).is_err());
        assert!(BlockSpecA::new(1, 4, 0.0).is_err());
        assert!(matches!(BlockSpecA::new(4, 1000, 1.0).unwrap().lattice(), Err(Error::Capacity(_))));
    }

    #[test]
    fn spec_b_geometry() {
        let s = BlockSpecB::new(2, 3, 3.0).unwrap();
        let l = s.lattice().unwrap();
        assert_eq!(l.side(), 13);
        assert_eq!(s.boundary_policy, BoundaryPolicy::AllSpreaders);
    }

    #[test]
    fn a_without_spreading_is_closed() {
        let spec = BlockSpecA::new(1, 9, 2.0).unwrap();
        let est = estimate_open_probability_a(&spec, &Params::new(0.0, 0.0).unwrap(), 1, 200).unwrap();
        assert_eq!(est.successes, 0);
    }

    #[test]
    fn b_without_spreading_is_open() {
        for policy in BoundaryPolicy::ALL {
            let spec = BlockSpecB::new(1, 4, 8.0).unwrap().with_policy(policy);
            let est = estimate_open_probability_b(&spec, &Params::new(0.0, 1.0).unwrap(), 2, 300).unwrap();
            // the 9 initial occupants of Λ2 only have to forget by T = 8
            assert!(est.estimate > 0.95, "{policy:?}: {}", est.estimate);
        }
    }

    #[test]
    fn packed_placement_is_centred() {
        let spec = BlockSpecA::new(1, 16, 0.001).unwrap().with_placement(Placement::Packed);
        // no time to move: neighbours I_{±1} start empty
        assert!(!block_a_replica(&spec, &Params::new(3.0, 0.0).unwrap(), 3).unwrap());
    }

    #[test]
    fn worst_case_is_minimum() {
        let spec = BlockSpecB::new(1, 3, 3.0).unwrap();
        let p = Params::new(2.0, 5.0).unwrap();
        let worst = estimate_open_probability_b_worst_case(&spec, &p, 8, 200).unwrap();
        for policy in BoundaryPolicy::ALL {
            let e = estimate_open_probability_b(&spec.with_policy(policy), &p, 8, 200).unwrap();
            assert!(worst.estimate <= e.estimate);
        }
    }
}
