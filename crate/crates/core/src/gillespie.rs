//! Exact event-driven simulation (direct method).
//!
//! Per-site exit rates live in a [`FenwickTree`], so selecting the next site
//! costs `O(log N)`. A flip at `x` can only change the rates of `x` and its
//! neighbors, and those are the only entries refreshed after each event.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::fenwick::FenwickTree;
use crate::lattice::{Configuration, Counts, NeighborTable, Params, SiteRates, SiteState};
use crate::rng::{rng_from_seed, SimRng};
use crate::trajectory::{EventRecord, Sampling, Trajectory};

/// Events between full rebuilds of the rate tree.
pub const REBUILD_INTERVAL: u64 = 1 << 20;

/// Relative tolerance between the maintained and rebuilt global rate.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// An event was applied. `total_rate` is the global rate in force during
    /// the waiting time that preceded it.
    Event { event: EventRecord, total_rate: f64 },
    /// The next event would fall after the requested horizon; the clock now
    /// equals the horizon and the configuration is unchanged.
    Horizon,
    /// No transition has positive rate.
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Stop as soon as there are no Spreaders and no Stiflers.
    pub stop_on_extinction: bool,
    pub sampling: Sampling,
    pub record_events: bool,
}

#[derive(Debug, Clone)]
pub struct EventEngine {
    cfg: Configuration,
    params: Params,
    neighbors: NeighborTable,
    spreader_neighbors: Vec<u32>,
    pinned: Option<Vec<bool>>,
    rates: Vec<f64>,
    tree: FenwickTree,
    positive_sites: usize,
    counts: Counts,
    clock: f64,
    events: u64,
    since_rebuild: u64,
    rng: SimRng,
}

impl EventEngine {
    pub fn new(cfg: Configuration, params: Params, seed: u64) -> Self {
        Self::with_rng(cfg, params, rng_from_seed(seed))
    }

    pub fn with_rng(cfg: Configuration, params: Params, rng: SimRng) -> Self {
        Self::build(cfg, params, None, rng)
    }

    /// Engine in which every site with `pinned[x] == true` keeps its current
    /// state forever. Pinned sites still act as neighbors.
    pub fn with_pinned(
        cfg: Configuration,
        params: Params,
        pinned: Vec<bool>,
        rng: SimRng,
    ) -> Result<Self> {
        if pinned.len() != cfg.lattice().sites() {
            return Err(Error::InvalidLattice(format!(
                "pin mask has {} entries for {} sites",
                pinned.len(),
                cfg.lattice().sites()
            )));
        }
        Ok(Self::build(cfg, params, Some(pinned), rng))
    }

    fn build(cfg: Configuration, params: Params, pinned: Option<Vec<bool>>, rng: SimRng) -> Self {
        let neighbors = cfg.lattice().neighbor_table();
        let states = cfg.states();
        let spreader_neighbors = (0..states.len())
            .map(|x| {
                neighbors.of(x).iter().filter(|&&y| states[y] == SiteState::Spreader).count() as u32
            })
            .collect();
        let counts = cfg.counts();
        let n = states.len();
        let mut engine = EventEngine {
            cfg,
            params,
            neighbors,
            spreader_neighbors,
            pinned,
            rates: vec![0.0; n],
            tree: FenwickTree::new(&[]),
            positive_sites: 0,
            counts,
            clock: 0.0,
            events: 0,
            since_rebuild: 0,
            rng,
        };
        engine.rebuild_rates();
        engine
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn into_configuration(self) -> Configuration {
        self.cfg
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    /// Number of events applied so far.
    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        if self.positive_sites == 0 {
            0.0
        } else {
            self.tree.total()
        }
    }

    pub fn site_rate(&self, x: usize) -> f64 {
        self.rates[x]
    }

    fn is_pinned(&self, x: usize) -> bool {
        self.pinned.as_ref().is_some_and(|p| p[x])
    }

    #[inline]
    fn rates_of(&self, x: usize) -> SiteRates {
        if self.is_pinned(x) {
            SiteRates::default()
        } else {
            SiteRates::for_state(self.cfg.states()[x], self.spreader_neighbors[x] as usize, &self.params)
        }
    }

    /// Recomputes every site rate from the configuration and rebuilds the tree.
    pub fn rebuild_rates(&mut self) {
        let rates: Vec<f64> = (0..self.rates.len()).map(|x| self.rates_of(x).total()).collect();
        self.positive_sites = rates.iter().filter(|&&r| r > 0.0).count();
        self.tree = FenwickTree::new(&rates);
        self.rates = rates;
        self.since_rebuild = 0;
    }

    #[inline]
    fn refresh(&mut self, x: usize) {
        let new = self.rates_of(x).total();
        let old = self.rates[x];
        if new != old {
            match (old > 0.0, new > 0.0) {
                (false, true) => self.positive_sites += 1,
                (true, false) => self.positive_sites -= 1,
                _ => {}
            }
            self.rates[x] = new;
            self.tree.add(x, new - old);
        }
    }

    /// Checks the maintained rates against a from-scratch evaluation through
    /// [`Configuration::site_rates`].
    pub fn check_consistency(&self) -> Result<()> {
        let mut sum = 0.0;
        for x in 0..self.rates.len() {
            let expect =
                if self.is_pinned(x) { 0.0 } else { self.cfg.site_rates(&self.params, x)?.total() };
            if expect != self.rates[x] {
                return Err(Error::EngineInvariant(format!(
                    "site {x}: maintained rate {} but configuration gives {expect}",
                    self.rates[x]
                )));
            }
            sum += expect;
        }
        let total = self.total_rate();
        if (total - sum).abs() > RATE_TOLERANCE * sum.max(1.0) {
            return Err(Error::EngineInvariant(format!(
                "global rate {total} drifted from rebuilt sum {sum}"
            )));
        }
        if self.counts != self.cfg.counts() {
            return Err(Error::EngineInvariant("population counts out of sync".into()));
        }
        Ok(())
    }

    /// Applies the next event with no horizon.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.step_before(f64::INFINITY)
    }

    /// Samples the next event; applies it only if it happens at or before
    /// `horizon`. Otherwise the clock moves to `horizon`, which is exact by the
    /// memorylessness of the exponential waiting time.
    pub fn step_before(&mut self, horizon: f64) -> Result<StepOutcome> {
        if self.positive_sites == 0 {
            return Ok(StepOutcome::Absorbed);
        }
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(Error::EngineInvariant(format!(
                "{} sites have positive rate but the total is {total}",
                self.positive_sites
            )));
        }
        let wait: f64 = Exp1.sample(&mut self.rng);
        let t = self.clock + wait / total;
        if t > horizon {
            self.clock = horizon;
            return Ok(StepOutcome::Horizon);
        }
        self.clock = t;

        let site = self.select_site(total)?;
        let rates = self.rates_of(site);
        let pick = self.rng.random::<f64>() * rates.total();
        let mut acc = 0.0;
        let mut to = None;
        for (target, r) in rates.moves() {
            acc += r;
            to = Some(target);
            if pick < acc {
                break;
            }
        }
        let to = to.ok_or_else(|| {
            Error::EngineInvariant(format!("selected site {site} has no enabled transition"))
        })?;
        let from = self.apply(site, to);

        self.events += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.rebuild_rates();
        }
        Ok(StepOutcome::Event {
            event: EventRecord { time: t, site, from, to },
            total_rate: total,
        })
    }

    fn select_site(&mut self, total: f64) -> Result<usize> {
        let target = self.rng.random::<f64>() * total;
        let site = self.tree.find(target);
        if site < self.rates.len() && self.rates[site] > 0.0 {
            return Ok(site);
        }
        // Accumulated rounding pointed past the last positive weight or onto a
        // zero entry. Rebuild and retry once with the same target fraction.
        let frac = target / total;
        self.rebuild_rates();
        let total = self.tree.total();
        let site = self.tree.find(frac * total);
        if site < self.rates.len() && self.rates[site] > 0.0 {
            return Ok(site);
        }
        self.rates
            .iter()
            .rposition(|&r| r > 0.0)
            .ok_or_else(|| Error::EngineInvariant("no site with positive rate".into()))
    }

    fn apply(&mut self, x: usize, to: SiteState) -> SiteState {
        let from = self.cfg.states()[x];
        debug_assert!(from.can_jump_to(to));
        self.cfg.states_mut()[x] = to;
        self.counts.shift(from, to);
        let was = from == SiteState::Spreader;
        let is = to == SiteState::Spreader;
        if was != is {
            for i in 0..self.neighbors.of(x).len() {
                let y = self.neighbors.of(x)[i];
                if is {
                    self.spreader_neighbors[y] += 1;
                } else {
                    self.spreader_neighbors[y] -= 1;
                }
                self.refresh(y);
            }
        }
        self.refresh(x);
        from
    }

    /// Runs until the clock reaches `t_max`, the chain is absorbed, or (when
    /// requested) the rumor is extinct.
    pub fn run_until(&mut self, t_max: f64, opts: RunOptions) -> Result<Trajectory> {
        if !(t_max >= self.clock) {
            return Err(Error::InvalidParams(format!(
                "horizon {t_max} precedes the current clock {}",
                self.clock
            )));
        }
        let mut traj = Trajectory {
            points: Vec::new(),
            events: opts.record_events.then(Vec::new),
        };
        let t0 = self.clock;
        traj.push(t0, self.counts);
        let stop = |e: &Self| opts.stop_on_extinction && e.counts.is_extinct();

        match opts.sampling {
            Sampling::EveryEvent => loop {
                if stop(self) {
                    break;
                }
                match self.step_before(t_max)? {
                    StepOutcome::Event { event, .. } => {
                        traj.push(event.time, self.counts);
                        if let Some(log) = traj.events.as_mut() {
                            log.push(event);
                        }
                    }
                    StepOutcome::Horizon | StepOutcome::Absorbed => break,
                }
            },
            Sampling::Interval(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::InvalidParams(format!("sampling interval {dt} must be > 0")));
                }
                let mut k = 1u64;
                loop {
                    if stop(self) {
                        break;
                    }
                    let target = t0 + k as f64 * dt;
                    match self.step_before(target.min(t_max))? {
                        StepOutcome::Event { event, .. } => {
                            if let Some(log) = traj.events.as_mut() {
                                log.push(event);
                            }
                        }
                        StepOutcome::Horizon => {
                            if target > t_max {
                                break;
                            }
                            traj.push(target, self.counts);
                            k += 1;
                        }
                        StepOutcome::Absorbed => {
                            loop {
                                let target = t0 + k as f64 * dt;
                                if target > t_max {
                                    break;
                                }
                                traj.push(target, self.counts);
                                k += 1;
                            }
                            break;
                        }
                    }
                }
            }
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Lattice};
    use proptest::prelude::*;
    use rand::Rng;

    fn ring(side: usize) -> Lattice {
        Lattice::ring(side).unwrap()
    }

    #[test]
    fn all_ignorant_is_absorbed() {
        let mut e = EventEngine::new(Configuration::all_ignorant(ring(5)), Params::new(2.0, 3.0).unwrap(), 1);
        assert_eq!(e.step().unwrap(), StepOutcome::Absorbed);
        assert_eq!(e.clock(), 0.0);
        assert_eq!(e.total_rate(), 0.0);
    }

    #[test]
    fn single_spreader_total_rate() {
        let cfg = Configuration::with_spreaders(ring(5), &[0]).unwrap();
        let e = EventEngine::new(cfg, Params::new(2.0, 3.0).unwrap(), 1);
        assert_eq!(e.total_rate(), 5.0);
        assert_eq!(e.site_rate(0), 1.0);
        assert_eq!(e.site_rate(1), 2.0);
        assert_eq!(e.site_rate(4), 2.0);
    }

    #[test]
    fn lambda_zero_single_spreader_dies() {
        let cfg = Configuration::with_spreaders(ring(5), &[2]).unwrap();
        let mut e = EventEngine::new(cfg, Params::new(0.0, 4.0).unwrap(), 9);
        match e.step().unwrap() {
            StepOutcome::Event { event, total_rate } => {
                assert_eq!(total_rate, 1.0);
                assert_eq!((event.site, event.from, event.to), (2, SiteState::Spreader, SiteState::Ignorant));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(e.counts().is_extinct());
        assert_eq!(e.step().unwrap(), StepOutcome::Absorbed);
    }

    #[test]
    fn zero_horizon_gives_one_record() {
        let cfg = Configuration::with_spreaders(ring(5), &[0]).unwrap();
        let mut e = EventEngine::new(cfg, Params::new(2.0, 1.0).unwrap(), 3);
        let traj = e.run_until(0.0, RunOptions::default()).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].t, 0.0);
        assert!(e.run_until(-1.0, RunOptions::default()).is_err());
    }

    #[test]
    fn pure_death_process() {
        let l = ring(20);
        let cfg = Configuration::with_spreaders(l, &[1, 5, 9, 13]).unwrap();
        let mut e = EventEngine::new(cfg, Params::new(0.0, 0.0).unwrap(), 11);
        let opts = RunOptions { record_events: true, ..Default::default() };
        let traj = e.run_until(1e6, opts).unwrap();
        assert_eq!(traj.event_count(), Some(4));
        assert!(traj.last().unwrap().counts.is_extinct());
        assert!(traj.events.unwrap().iter().all(|ev| ev.to == SiteState::Ignorant));
    }

    #[test]
    fn interval_sampling_fills_after_absorption() {
        let cfg = Configuration::with_spreaders(ring(5), &[0]).unwrap();
        let mut e = EventEngine::new(cfg, Params::new(0.0, 0.0).unwrap(), 5);
        let opts = RunOptions { sampling: Sampling::Interval(0.5), ..Default::default() };
        let traj = e.run_until(100.0, opts).unwrap();
        assert_eq!(traj.points.len(), 201);
        assert!(traj.points.windows(2).all(|w| w[0].t < w[1].t));
        assert!(traj.last().unwrap().counts.is_extinct());

        let cfg = Configuration::with_spreaders(ring(5), &[0]).unwrap();
        let mut e = EventEngine::new(cfg, Params::new(0.0, 0.0).unwrap(), 5);
        let opts = RunOptions { stop_on_extinction: true, sampling: Sampling::Interval(0.5), ..Default::default() };
        let traj = e.run_until(100.0, opts).unwrap();
        assert!(traj.points.len() < 201);
    }

    #[test]
    fn pinned_sites_never_change() {
        let l = Lattice::new(1, 9, Boundary::FrozenIgnorant).unwrap();
        let mut cfg = Configuration::all_ignorant(l);
        cfg.set(0, SiteState::Spreader).unwrap();
        cfg.set(8, SiteState::Stifler).unwrap();
        let mut pins = vec![false; 9];
        pins[0] = true;
        pins[8] = true;
        let mut e = EventEngine::with_pinned(cfg, Params::new(2.0, 1.0).unwrap(), pins, rng_from_seed(2)).unwrap();
        for _ in 0..2000 {
            if let StepOutcome::Event { event, .. } = e.step().unwrap() {
                assert!(event.site != 0 && event.site != 8);
            }
        }
        assert_eq!(e.configuration().states()[0], SiteState::Spreader);
        assert_eq!(e.configuration().states()[8], SiteState::Stifler);
        e.check_consistency().unwrap();
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let run = |seed| {
            let cfg = Configuration::with_spreaders(ring(30), &[15]).unwrap();
            let mut e = EventEngine::new(cfg, Params::new(2.5, 0.5).unwrap(), seed);
            let opts = RunOptions { record_events: true, ..Default::default() };
            e.run_until(20.0, opts).unwrap().events.unwrap()
        };
        assert_eq!(run(77), run(77));
        assert_ne!(run(77), run(78));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn incremental_rates_match_rebuild(
            d in 1usize..=2, side in 3usize..=7, periodic in any::<bool>(),
            lambda in 0.0..4.0f64, alpha in 0.0..4.0f64, seed in any::<u64>(), steps in 1usize..600,
        ) {
            let b = if periodic { Boundary::Periodic } else { Boundary::FrozenIgnorant };
            let l = Lattice::new(d, side, b).unwrap();
            let mut cfg = Configuration::all_ignorant(l);
            let mut rng = rng_from_seed(seed);
            for x in 0..l.sites() {
                cfg.set(x, SiteState::from_digit(rng.random_range(0..3u8)).unwrap()).unwrap();
            }
            let mut e = EventEngine::new(cfg, Params::new(lambda, alpha).unwrap(), seed);
            let mut last = 0.0;
            for _ in 0..steps {
                match e.step().unwrap() {
                    StepOutcome::Event { event, total_rate } => {
                        prop_assert!(event.time > last);
                        prop_assert!(total_rate > 0.0);
                        last = event.time;
                    }
                    _ => break,
                }
            }
            e.check_consistency().unwrap();
            prop_assert_eq!(e.counts().total(), l.sites());
        }
    }
}
