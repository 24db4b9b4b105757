//! Survival probabilities, extinction times and (λ, α) phase diagrams on
//! finite boxes.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::{wilson_interval, TimeSummary, Z95};
use crate::error::{Error, Result};
use crate::gillespie::{EventEngine, StepOutcome};
use crate::harris::{apply_arrival_contact, apply_arrival_rumor, ArrivalStream};
use crate::lattice::{Boundary, Configuration, Counts, Lattice, Params, SiteState};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivalCriterion {
    /// Alive iff at least one Spreader remains at the horizon.
    #[default]
    SpreadersOnly,
    /// Alive iff any Spreader or Stifler remains.
    SpreadersOrStiflers,
}

impl SurvivalCriterion {
    fn alive(self, c: &Counts) -> bool {
        match self {
            SurvivalCriterion::SpreadersOnly => c.spreader > 0,
            SurvivalCriterion::SpreadersOrStiflers => !c.is_extinct(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    #[default]
    Gillespie,
    Harris,
}

/// Which process a replica simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessMode {
    #[default]
    Rumor,
    /// Basic contact process: α forced to 0 and Stiflers in the initial
    /// condition replaced by Ignorants.
    Contact,
}

/// Initial condition of each replica.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// One Spreader at [`Lattice::center`].
    SingleCenter,
    /// Independent sites: Spreader with probability `spreader`, Stifler with
    /// probability `stifler`, otherwise Ignorant.
    Product { spreader: f64, stifler: f64 },
    Fixed(Configuration),
}

impl InitialCondition {
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        match self {
            InitialCondition::SingleCenter => Ok(()),
            InitialCondition::Product { spreader, stifler } => {
                let ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
                if ok(*spreader) && ok(*stifler) && spreader + stifler <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!(
                        "product densities ({spreader}, {stifler}) are not a distribution"
                    )))
                }
            }
            InitialCondition::Fixed(cfg) if cfg.lattice() == lattice => Ok(()),
            InitialCondition::Fixed(_) => {
                Err(Error::InvalidLattice("fixed initial condition is on a different lattice".into()))
            }
        }
    }

    /// Draws a configuration; only the product measure consumes randomness.
    pub fn sample(&self, lattice: Lattice, rng: &mut SimRng) -> Configuration {
        match self {
            InitialCondition::SingleCenter => {
                Configuration::with_spreaders(lattice, &[lattice.center()]).expect("center is a site")
            }
            InitialCondition::Product { spreader, stifler } => {
                let states = (0..lattice.sites())
                    .map(|_| {
                        let u: f64 = rng.random();
                        if u < *spreader {
                            SiteState::Spreader
                        } else if u < spreader + stifler {
                            SiteState::Stifler
                        } else {
                            SiteState::Ignorant
                        }
                    })
                    .collect();
                Configuration::from_states(lattice, states).expect("length matches lattice")
            }
            InitialCondition::Fixed(cfg) => cfg.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurvivalOptions {
    pub criterion: SurvivalCriterion,
    pub engine: EngineKind,
    pub mode: ProcessMode,
}

/// Outcome of one survival replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaOutcome {
    pub survived: bool,
    pub final_counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub lambda: f64,
    pub alpha: f64,
    pub dim: usize,
    pub side: usize,
    pub boundary: Boundary,
    pub horizon: f64,
    pub replicas: u64,
    pub survivals: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub criterion: SurvivalCriterion,
}

impl SurvivalEstimate {
    fn from_outcomes(
        params: &Params,
        lattice: &Lattice,
        horizon: f64,
        seed: u64,
        criterion: SurvivalCriterion,
        outcomes: &[ReplicaOutcome],
    ) -> Self {
        let replicas = outcomes.len() as u64;
        let survivals = outcomes.iter().filter(|o| o.survived).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(survivals, replicas, Z95);
        SurvivalEstimate {
            lambda: params.lambda(),
            alpha: params.alpha(),
            dim: lattice.dim(),
            side: lattice.side(),
            boundary: lattice.boundary(),
            horizon,
            replicas,
            survivals,
            p_hat: survivals as f64 / replicas as f64,
            ci_lo,
            ci_hi,
            seed,
            criterion,
        }
    }

    /// Whether the two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &SurvivalEstimate) -> bool {
        self.ci_hi < other.ci_lo || other.ci_hi < self.ci_lo
    }
}

/// One survival replica, seeded with `seed`.
pub fn survival_replica(
    params: &Params,
    lattice: Lattice,
    init: &InitialCondition,
    horizon: f64,
    seed: u64,
    opts: SurvivalOptions,
) -> Result<ReplicaOutcome> {
    let mut rng = rng_from_seed(seed);
    let mut cfg = init.sample(lattice, &mut rng);
    let params = match opts.mode {
        ProcessMode::Rumor => *params,
        ProcessMode::Contact => {
            cfg = cfg.contact_projection();
            Params::contact(params.lambda())?
        }
    };
    // Spreaders are only born next to Spreaders, so once they are gone the
    // Spreaders-only criterion is settled.
    let settled = |c: &Counts| match opts.criterion {
        SurvivalCriterion::SpreadersOnly => c.spreader == 0,
        SurvivalCriterion::SpreadersOrStiflers => c.is_extinct(),
    };
    let final_counts = match opts.engine {
        EngineKind::Gillespie => {
            let mut engine = EventEngine::with_rng(cfg, params, rng);
            while !settled(&engine.counts()) {
                match engine.step_before(horizon)? {
                    StepOutcome::Event { .. } => {}
                    StepOutcome::Horizon | StepOutcome::Absorbed => break,
                }
            }
            engine.counts()
        }
        EngineKind::Harris => {
            if horizon > 0.0 {
                let stream = ArrivalStream::generate_with(lattice, params, horizon, &mut rng)?;
                let rule = match opts.mode {
                    ProcessMode::Rumor => apply_arrival_rumor,
                    ProcessMode::Contact => apply_arrival_contact,
                };
                let mut counts = cfg.counts();
                for a in stream.arrivals() {
                    if settled(&counts) {
                        break;
                    }
                    if let Some(ev) = rule(&mut cfg, a) {
                        counts.shift(ev.from, ev.to);
                    }
                }
            }
            cfg.counts()
        }
    };
    Ok(ReplicaOutcome { survived: opts.criterion.alive(&final_counts), final_counts })
}

/// Runs `replicas` independent replicas in parallel; replica `i` is seeded
/// with `derive_seed(seed, i)`.
pub fn estimate_survival(
    params: &Params,
    lattice: Lattice,
    init: &InitialCondition,
    horizon: f64,
    replicas: u64,
    seed: u64,
    opts: SurvivalOptions,
) -> Result<SurvivalEstimate> {
    let outcomes = survival_outcomes(params, lattice, init, horizon, replicas, seed, opts)?;
    Ok(SurvivalEstimate::from_outcomes(params, &lattice, horizon, seed, opts.criterion, &outcomes))
}

/// Per-replica outcomes in replica order.
pub fn survival_outcomes(
    params: &Params,
    lattice: Lattice,
    init: &InitialCondition,
    horizon: f64,
    replicas: u64,
    seed: u64,
    opts: SurvivalOptions,
) -> Result<Vec<ReplicaOutcome>> {
    if replicas == 0 {
        return Err(Error::InvalidParams("at least one replica is required".into()));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
    }
    init.validate(&lattice)?;
    (0..replicas)
        .into_par_iter()
        .map(|i| survival_replica(params, lattice, init, horizon, derive_seed(seed, i), opts))
        .collect()
}

/// Time to the all-Ignorant state for each replica, censored at `t_cap`.
pub fn estimate_extinction_time(
    params: &Params,
    lattice: Lattice,
    init: &InitialCondition,
    replicas: u64,
    seed: u64,
    t_cap: f64,
) -> Result<TimeSummary> {
    if replicas == 0 {
        return Err(Error::InvalidParams("at least one replica is required".into()));
    }
    if !(t_cap >= 0.0) {
        return Err(Error::InvalidParams(format!("t_cap must be >= 0, got {t_cap}")));
    }
    init.validate(&lattice)?;
    let results: Vec<(f64, bool)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i));
            let cfg = init.sample(lattice, &mut rng);
            let mut engine = EventEngine::with_rng(cfg, *params, rng);
            loop {
                if engine.counts().is_extinct() {
                    return Ok((engine.clock(), false));
                }
                match engine.step_before(t_cap)? {
                    StepOutcome::Event { .. } => {}
                    StepOutcome::Horizon => return Ok((t_cap, true)),
                    StepOutcome::Absorbed => return Ok((engine.clock(), false)),
                }
            }
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = results.iter().map(|r| r.0).collect();
    let censored = results.iter().filter(|r| r.1).count();
    Ok(TimeSummary::from_times(&times, censored))
}

/// Survival estimates over a λ × α grid, λ-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub master_seed: u64,
    pub cells: Vec<SurvivalEstimate>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_lambda: usize, i_alpha: usize) -> &SurvivalEstimate {
        &self.cells[i_lambda * self.alphas.len() + i_alpha]
    }

    /// CSV, header `lambda,alpha,side,T,R,survivals,p_hat,ci_lo,ci_hi,seed`.
    /// `seed` is the cell seed; passing it to [`estimate_survival`]
    /// reproduces that row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "lambda,alpha,side,T,R,survivals,p_hat,ci_lo,ci_hi,seed")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                c.lambda, c.alpha, c.side, c.horizon, c.replicas, c.survivals, c.p_hat, c.ci_lo,
                c.ci_hi, c.seed
            )?;
        }
        Ok(())
    }
}

/// Cell `(i, j)` uses seed `derive_seed(master, i * alphas.len() + j)`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_phase_diagram(
    lambdas: &[f64],
    alphas: &[f64],
    lattice: Lattice,
    init: &InitialCondition,
    horizon: f64,
    replicas: u64,
    seed: u64,
    opts: SurvivalOptions,
) -> Result<PhaseDiagram> {
    if lambdas.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidParams("empty parameter grid".into()));
    }
    let cells = lambdas
        .iter()
        .flat_map(|&l| alphas.iter().map(move |&a| (l, a)))
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(idx, (l, a))| {
            let params = Params::new(l, a)?;
            estimate_survival(&params, lattice, init, horizon, replicas, derive_seed(seed, idx as u64), opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram { lambdas: lambdas.to_vec(), alphas: alphas.to_vec(), master_seed: seed, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(side: usize) -> Lattice {
        Lattice::ring(side).unwrap()
    }

    #[test]
    fn no_spreading_means_no_survival() {
        let p = Params::new(0.0, 1.0).unwrap();
        let est = estimate_survival(&p, ring(50), &InitialCondition::SingleCenter, 50.0, 1000, 4, Default::default())
            .unwrap();
        assert_eq!(est.survivals, 0);
        assert_eq!(est.p_hat, 0.0);
    }

    #[test]
    fn zero_replicas_rejected() {
        let p = Params::new(1.0, 1.0).unwrap();
        assert!(estimate_survival(&p, ring(5), &InitialCondition::SingleCenter, 1.0, 0, 1, Default::default()).is_err());
        let bad = InitialCondition::Product { spreader: 0.8, stifler: 0.5 };
        assert!(estimate_survival(&p, ring(5), &bad, 1.0, 3, 1, Default::default()).is_err());
    }

    #[test]
    fn extinction_time_of_all_ignorant_is_zero() {
        let p = Params::new(2.0, 1.0).unwrap();
        let init = InitialCondition::Fixed(Configuration::all_ignorant(ring(10)));
        let s = estimate_extinction_time(&p, ring(10), &init, 100, 3, 10.0).unwrap();
        assert_eq!((s.mean, s.median, s.q90, s.censored), (0.0, 0.0, 0.0, 0));
    }

    #[test]
    fn censoring_is_counted() {
        let p = Params::new(4.0, 0.0).unwrap();
        let init = InitialCondition::Product { spreader: 1.0, stifler: 0.0 };
        let s = estimate_extinction_time(&p, ring(40), &init, 20, 3, 5.0).unwrap();
        assert_eq!(s.censored, 20);
        assert_eq!(s.mean, 5.0);
    }

    #[test]
    fn single_cell_sweep_is_estimate_survival() {
        let l = ring(30);
        let init = InitialCondition::SingleCenter;
        let d = sweep_phase_diagram(&[2.5], &[0.5], l, &init, 10.0, 200, 99, Default::default()).unwrap();
        let direct = estimate_survival(&Params::new(2.5, 0.5).unwrap(), l, &init, 10.0, 200, d.cells[0].seed, Default::default())
            .unwrap();
        assert_eq!(d.cells[0], direct);
        assert_eq!(d.cells[0].seed, derive_seed(99, 0));
    }

    #[test]
    fn sweep_is_reproducible() {
        let l = ring(20);
        let init = InitialCondition::SingleCenter;
        let run = || sweep_phase_diagram(&[1.5, 3.0], &[0.0, 2.0], l, &init, 8.0, 100, 5, Default::default()).unwrap();
        let a = run();
        assert_eq!(a, run());
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("lambda,alpha,side,T,R,survivals,p_hat,ci_lo,ci_hi,seed\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn contact_mode_matches_alpha_zero_rumor_run_for_run() {
        let l = ring(40);
        let p = Params::new(2.2, 0.0).unwrap();
        let init = InitialCondition::Product { spreader: 0.2, stifler: 0.0 };
        for engine in [EngineKind::Harris, EngineKind::Gillespie] {
            let rumor = SurvivalOptions { engine, ..Default::default() };
            let contact = SurvivalOptions { engine, mode: ProcessMode::Contact, ..Default::default() };
            let a = survival_outcomes(&p, l, &init, 15.0, 200, 17, rumor).unwrap();
            let b = survival_outcomes(&p, l, &init, 15.0, 200, 17, contact).unwrap();
            assert_eq!(a, b);
        }
    }
}
