//! Graphical construction from independent Poisson clocks, and the
//! shared-clock coupling of the rumor process with the contact process.
//!
//! Every ordered neighbor pair `(x, y)` carries a spreading clock of
//! intensity λ and a stifling clock of intensity α; every site carries a
//! forgetting clock of intensity 1. A run materializes all arrivals up to the
//! horizon, sorts them, and replays them against one or more configurations.
//! The contact process reads the same stream and ignores stifling marks,
//! which is what makes it dominate the rumor spreaders site by site.

use std::cmp::Ordering;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gillespie::RunOptions;
use crate::lattice::{Configuration, Lattice, Params, SiteState};
use crate::rng::{rng_from_seed, SimRng};
use crate::trajectory::{EventRecord, Sampling, Trajectory};

/// The three kinds of Poisson marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    /// Spreading mark on the ordered pair `src -> dst`.
    Spread { src: usize, dst: usize },
    /// Stifling mark on the ordered pair `src -> dst`.
    Stifle { src: usize, dst: usize },
    /// Forgetting mark at `site`.
    Forget { site: usize },
}

impl Mark {
    fn sort_key(&self) -> (u8, usize, usize) {
        match *self {
            Mark::Spread { src, dst } => (0, src, dst),
            Mark::Stifle { src, dst } => (1, src, dst),
            Mark::Forget { site } => (2, site, site),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Mark::Spread { .. } => "N1",
            Mark::Stifle { .. } => "N2",
            Mark::Forget { .. } => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub mark: Mark,
}

impl Arrival {
    /// Total order: time, then kind (N1 < N2 < D), then source, then target.
    pub fn cmp_order(&self, other: &Arrival) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.mark.sort_key().cmp(&other.mark.sort_key()))
    }
}

/// All arrivals of the construction inside `box × [0, horizon]`.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    lattice: Lattice,
    params: Params,
    horizon: f64,
    arrivals: Vec<Arrival>,
}

impl ArrivalStream {
    pub fn generate(lattice: Lattice, params: Params, horizon: f64, seed: u64) -> Result<Self> {
        Self::generate_with(lattice, params, horizon, &mut rng_from_seed(seed))
    }

    /// Clocks are drawn site by site in index order: the forgetting clock of
    /// `x`, then for each neighbor `y` (in [`Lattice::neighbors`] order) the
    /// spreading and stifling clocks of `x -> y`. Zero-intensity clocks draw
    /// nothing, so a contact stream and a rumor stream at α = 0 coincide.
    pub fn generate_with(
        lattice: Lattice,
        params: Params,
        horizon: f64,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
        }
        let table = lattice.neighbor_table();
        let per_site = 1.0 + table.of(0).len() as f64 * (params.lambda() + params.alpha());
        let expected = lattice.sites() as f64 * per_site * horizon;
        let mut arrivals = Vec::with_capacity((expected * 1.05) as usize + 16);

        let mut poisson = |rate: f64, mark: Mark, out: &mut Vec<Arrival>| {
            if rate <= 0.0 {
                return;
            }
            let mut t = 0.0;
            loop {
                let gap: f64 = Exp1.sample(rng);
                t += gap / rate;
                if t > horizon {
                    break;
                }
                out.push(Arrival { time: t, mark });
            }
        };
        for x in 0..lattice.sites() {
            poisson(1.0, Mark::Forget { site: x }, &mut arrivals);
            for &y in table.of(x) {
                poisson(params.lambda(), Mark::Spread { src: x, dst: y }, &mut arrivals);
                poisson(params.alpha(), Mark::Stifle { src: x, dst: y }, &mut arrivals);
            }
        }
        arrivals.sort_unstable_by(Arrival::cmp_order);
        Ok(ArrivalStream { lattice, params, horizon, arrivals })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn arrivals(&self) -> &[Arrival] {
        &self.arrivals
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&Mark) -> bool) -> usize {
        self.arrivals.iter().filter(|a| pred(&a.mark)).count()
    }

    /// Debug dump, header `t,kind,src,dst`. Forgetting marks leave `dst` empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,kind,src,dst")?;
        for a in &self.arrivals {
            match a.mark {
                Mark::Spread { src, dst } | Mark::Stifle { src, dst } => {
                    writeln!(w, "{},{},{},{}", a.time, a.mark.label(), src, dst)?
                }
                Mark::Forget { site } => writeln!(w, "{},D,{},", a.time, site)?,
            }
        }
        Ok(())
    }
}

fn flip(states: &mut [SiteState], x: usize, to: SiteState, time: f64) -> Option<EventRecord> {
    let from = std::mem::replace(&mut states[x], to);
    Some(EventRecord { time, site: x, from, to })
}

/// Rumor rules: a spreading mark turns an Ignorant target of a Spreader into
/// a Spreader; a stifling mark between two Spreaders turns the target into a
/// Stifler; a forgetting mark resets a Spreader or Stifler to Ignorant. All
/// other marks are no-ops. Returns the change, if any.
pub fn apply_arrival_rumor(eta: &mut Configuration, arrival: &Arrival) -> Option<EventRecord> {
    use SiteState::*;
    let s = eta.states_mut();
    match arrival.mark {
        Mark::Spread { src, dst } if s[src] == Spreader && s[dst] == Ignorant => {
            flip(s, dst, Spreader, arrival.time)
        }
        Mark::Stifle { src, dst } if s[src] == Spreader && s[dst] == Spreader => {
            flip(s, dst, Stifler, arrival.time)
        }
        Mark::Forget { site } if s[site] != Ignorant => flip(s, site, Ignorant, arrival.time),
        _ => None,
    }
}

/// Contact rules on a {0, 1} configuration: stifling marks are ignored.
pub fn apply_arrival_contact(xi: &mut Configuration, arrival: &Arrival) -> Option<EventRecord> {
    use SiteState::*;
    let s = xi.states_mut();
    match arrival.mark {
        Mark::Spread { src, dst } if s[src] == Spreader && s[dst] == Ignorant => {
            flip(s, dst, Spreader, arrival.time)
        }
        Mark::Forget { site } if s[site] == Spreader => flip(s, site, Ignorant, arrival.time),
        _ => None,
    }
}

/// Replays a stream against one configuration with `rule`, recording counts
/// the way the event engine does.
fn replay(
    mut cfg: Configuration,
    stream: &ArrivalStream,
    t_max: f64,
    opts: RunOptions,
    rule: fn(&mut Configuration, &Arrival) -> Option<EventRecord>,
) -> Result<(Trajectory, Configuration)> {
    if let Sampling::Interval(dt) = opts.sampling {
        if !(dt > 0.0) {
            return Err(Error::InvalidParams(format!("sampling interval {dt} must be > 0")));
        }
    }
    let mut counts = cfg.counts();
    let mut traj = Trajectory { points: Vec::new(), events: opts.record_events.then(Vec::new) };
    traj.push(0.0, counts);
    let mut k = 1u64;
    let flush_samples = |traj: &mut Trajectory, counts, upto: f64, k: &mut u64| {
        if let Sampling::Interval(dt) = opts.sampling {
            while (*k as f64) * dt < upto && (*k as f64) * dt <= t_max {
                traj.push(*k as f64 * dt, counts);
                *k += 1;
            }
        }
    };
    for a in stream.arrivals().iter().take_while(|a| a.time <= t_max) {
        if opts.stop_on_extinction && counts.is_extinct() {
            return Ok((traj, cfg));
        }
        flush_samples(&mut traj, counts, a.time, &mut k);
        if let Some(ev) = rule(&mut cfg, a) {
            counts.shift(ev.from, ev.to);
            if opts.sampling == Sampling::EveryEvent {
                traj.push(ev.time, counts);
            }
            if let Some(log) = traj.events.as_mut() {
                log.push(ev);
            }
        }
    }
    if !(opts.stop_on_extinction && counts.is_extinct()) {
        flush_samples(&mut traj, counts, f64::INFINITY, &mut k);
    }
    Ok((traj, cfg))
}

/// Rumor process from the graphical construction on a fresh stream.
pub fn run_harris(
    eta0: Configuration,
    params: Params,
    t_max: f64,
    seed: u64,
    opts: RunOptions,
) -> Result<Trajectory> {
    if t_max == 0.0 {
        return replay_empty(eta0, opts);
    }
    let stream = ArrivalStream::generate(*eta0.lattice(), params, t_max, seed)?;
    Ok(replay(eta0, &stream, t_max, opts, apply_arrival_rumor)?.0)
}

/// Final configuration of the rumor process driven by `stream`.
pub fn rumor_final_state(eta0: Configuration, stream: &ArrivalStream) -> Configuration {
    let mut eta = eta0;
    for a in stream.arrivals() {
        apply_arrival_rumor(&mut eta, a);
    }
    eta
}

/// Final configuration of the contact process driven by `stream`.
pub fn contact_final_state(xi0: Configuration, stream: &ArrivalStream) -> Configuration {
    let mut xi = xi0;
    for a in stream.arrivals() {
        apply_arrival_contact(&mut xi, a);
    }
    xi
}

fn replay_empty(eta0: Configuration, opts: RunOptions) -> Result<Trajectory> {
    let mut traj = Trajectory { points: Vec::new(), events: opts.record_events.then(Vec::new) };
    traj.push(0.0, eta0.counts());
    Ok(traj)
}

/// Rumor and contact configurations driven by the same stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub eta: Configuration,
    pub xi: Configuration,
}

impl CoupledState {
    /// The contact process starts from `eta0` with every Stifler replaced by 0.
    pub fn from_rumor(eta0: Configuration) -> Self {
        let xi = eta0.contact_projection();
        CoupledState { eta: eta0, xi }
    }

    pub fn apply(&mut self, a: &Arrival) -> (Option<EventRecord>, Option<EventRecord>) {
        (apply_arrival_rumor(&mut self.eta, a), apply_arrival_contact(&mut self.xi, a))
    }

    /// Sites where the rumor has a Spreader but the contact process has no 1.
    pub fn dominance_violations(&self) -> impl Iterator<Item = usize> + '_ {
        self.eta
            .states()
            .iter()
            .zip(self.xi.states())
            .enumerate()
            .filter(|(_, (e, c))| **e == SiteState::Spreader && **c != SiteState::Spreader)
            .map(|(x, _)| x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub replica: u64,
    pub time: f64,
    pub site: usize,
}

/// JSON: `{replicas, arrivals_applied, violations: [...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DominanceReport {
    pub replicas: u64,
    pub arrivals_applied: u64,
    pub violations: Vec<Violation>,
}

impl DominanceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Combines per-replica reports; violations are ordered by replica.
    pub fn merge(reports: impl IntoIterator<Item = DominanceReport>) -> DominanceReport {
        let mut out = DominanceReport::default();
        for r in reports {
            out.replicas += r.replicas;
            out.arrivals_applied += r.arrivals_applied;
            out.violations.extend(r.violations);
        }
        out.violations.sort_by(|a, b| a.replica.cmp(&b.replica).then(a.time.total_cmp(&b.time)));
        out
    }

    pub fn ensure_clean(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::DominanceViolation {
                count: self.violations.len(),
                site: v.site,
                time: v.time,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub rumor: Trajectory,
    pub contact: Trajectory,
    pub report: DominanceReport,
    pub final_state: CoupledState,
}

/// Drives both processes with `stream`, checks dominance over every site
/// after every arrival, and hands each post-arrival state to `observe`.
pub fn run_coupled_on(
    eta0: Configuration,
    stream: &ArrivalStream,
    replica: u64,
    record_events: bool,
    mut observe: impl FnMut(&Arrival, &CoupledState),
) -> CoupledRun {
    let mut state = CoupledState::from_rumor(eta0);
    let mut rumor_counts = state.eta.counts();
    let mut contact_counts = state.xi.counts();
    let mut rumor = Trajectory { points: Vec::new(), events: record_events.then(Vec::new) };
    let mut contact = Trajectory { points: Vec::new(), events: record_events.then(Vec::new) };
    rumor.push(0.0, rumor_counts);
    contact.push(0.0, contact_counts);
    let mut report = DominanceReport { replicas: 1, ..Default::default() };

    for site in state.dominance_violations() {
        report.violations.push(Violation { replica, time: 0.0, site });
    }
    for a in stream.arrivals() {
        let (re, ce) = state.apply(a);
        report.arrivals_applied += 1;
        if let Some(ev) = re {
            rumor_counts.shift(ev.from, ev.to);
            rumor.push(ev.time, rumor_counts);
            if let Some(log) = rumor.events.as_mut() {
                log.push(ev);
            }
        }
        if let Some(ev) = ce {
            contact_counts.shift(ev.from, ev.to);
            contact.push(ev.time, contact_counts);
            if let Some(log) = contact.events.as_mut() {
                log.push(ev);
            }
        }
        for site in state.dominance_violations() {
            report.violations.push(Violation { replica, time: a.time, site });
        }
        observe(a, &state);
    }
    CoupledRun { rumor, contact, report, final_state: state }
}

/// Coupled run on a fresh stream. A dominance violation is an error.
pub fn run_coupled(eta0: Configuration, params: Params, t_max: f64, seed: u64) -> Result<CoupledRun> {
    let stream = ArrivalStream::generate(*eta0.lattice(), params, t_max, seed)?;
    let run = run_coupled_on(eta0, &stream, 0, false, |_, _| {});
    run.report.ensure_clean()?;
    Ok(run)
}

/// Draws `count` distinct sites uniformly from `candidates`.
pub(crate) fn sample_distinct(candidates: &[usize], count: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut pool = candidates.to_vec();
    let count = count.min(pool.len());
    for i in 0..count {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}
