//! Engine-versus-oracle comparison on tiny boxes.

use rayon::prelude::*;
use serde::Serialize;

use super::survival::EngineKind;
use crate::error::{Error, Result};
use crate::gillespie::{EventEngine, StepOutcome};
use crate::harris::{rumor_final_state, ArrivalStream};
use crate::lattice::{Configuration, Params};
use crate::oracle::{empirical_distribution, encode, total_variation, GeneratorMatrix};
use crate::rng::derive_seed;

/// Oracle code of the configuration at time `t` for each of `replicas` runs.
pub fn final_configuration_codes(
    engine: EngineKind,
    eta0: &Configuration,
    params: &Params,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("time must be >= 0, got {t}")));
    }
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let replica_seed = derive_seed(seed, i);
            match engine {
                EngineKind::Gillespie => {
                    let mut e = EventEngine::new(eta0.clone(), *params, replica_seed);
                    while let StepOutcome::Event { .. } = e.step_before(t)? {}
                    Ok(encode(e.configuration()))
                }
                EngineKind::Harris if t == 0.0 => Ok(encode(eta0)),
                EngineKind::Harris => {
                    let stream = ArrivalStream::generate(*eta0.lattice(), *params, t, replica_seed)?;
                    Ok(encode(&rumor_final_state(eta0.clone(), &stream)))
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineComparison {
    pub engine: EngineKind,
    pub replicas: u64,
    pub seed: u64,
    /// Total variation distance to the oracle law.
    pub tv: f64,
    pub pass: bool,
    #[serde(skip)]
    pub empirical: Vec<f64>,
}

/// Empirical law of `engine` at time `t` compared with the exact law.
#[allow(clippy::too_many_arguments)]
pub fn compare_with_oracle(
    gen: &GeneratorMatrix,
    exact: &[f64],
    engine: EngineKind,
    eta0: &Configuration,
    t: f64,
    replicas: u64,
    seed: u64,
    threshold: f64,
) -> Result<EngineComparison> {
    let codes = final_configuration_codes(engine, eta0, gen.params(), t, replicas, seed)?;
    let empirical = empirical_distribution(codes, gen.states());
    let tv = total_variation(&empirical, exact);
    Ok(EngineComparison { engine, replicas, seed, tv, pass: tv < threshold, empirical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn zero_time_is_point_mass() {
        let l = Lattice::ring(3).unwrap();
        let eta0 = Configuration::with_spreaders(l, &[1]).unwrap();
        let p = Params::new(2.0, 1.0).unwrap();
        for engine in [EngineKind::Gillespie, EngineKind::Harris] {
            let codes = final_configuration_codes(engine, &eta0, &p, 0.0, 10, 1).unwrap();
            assert!(codes.iter().all(|&c| c == encode(&eta0)));
        }
    }

    #[test]
    fn small_ring_agrees_with_oracle() {
        let l = Lattice::ring(3).unwrap();
        let p = Params::new(1.5, 0.7).unwrap();
        let gen = GeneratorMatrix::build(l, p).unwrap();
        let eta0 = Configuration::with_spreaders(l, &[0]).unwrap();
        let exact = gen.transient_distribution(&eta0, 0.7).unwrap();
        for engine in [EngineKind::Gillespie, EngineKind::Harris] {
            let c = compare_with_oracle(&gen, &exact, engine, &eta0, 0.7, 20_000, 3, 0.03).unwrap();
            assert!(c.pass, "{engine:?}: tv {}", c.tv);
        }
    }
}
