//! Lattice geometry, site states, model parameters and per-site transition
//! rates.
//!
//! Sites of a `side^d` box are indexed row-major with axis 0 fastest:
//! `index = x_0 + side * x_1 + side^2 * x_2 + ...`. Every output that lists
//! sites uses this order, so a seed fully determines the bytes written.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of a single agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SiteState {
    Ignorant = 0,
    Spreader = 1,
    Stifler = 2,
}

impl SiteState {
    pub const ALL: [SiteState; 3] = [SiteState::Ignorant, SiteState::Spreader, SiteState::Stifler];

    /// Numeric label used in every file format (0, 1 or 2).
    pub fn digit(self) -> u8 {
        self as u8
    }

    pub fn from_digit(d: u8) -> Option<SiteState> {
        match d {
            0 => Some(SiteState::Ignorant),
            1 => Some(SiteState::Spreader),
            2 => Some(SiteState::Stifler),
            _ => None,
        }
    }

    /// Whether the model allows a direct jump from `self` to `to`.
    pub fn can_jump_to(self, to: SiteState) -> bool {
        use SiteState::*;
        matches!(
            (self, to),
            (Ignorant, Spreader) | (Spreader, Ignorant) | (Spreader, Stifler) | (Stifler, Ignorant)
        )
    }
}

/// Treatment of sites outside the simulated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Coordinates wrap modulo `side`.
    #[default]
    Periodic,
    /// Everything outside the box is permanently Ignorant, so no neighbor
    /// relation crosses the edge.
    FrozenIgnorant,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::FrozenIgnorant => "frozen-ignorant",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "frozen-ignorant" | "frozen" => Ok(Boundary::FrozenIgnorant),
            other => Err(Error::Parse(format!("unknown boundary {other:?}"))),
        }
    }
}

/// A finite box `{0, .., side-1}^d` standing in for `Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    side: usize,
    boundary: Boundary,
    sites: usize,
}

impl Lattice {
    /// Periodic boxes need `side >= 3` so the two neighbors along an axis are
    /// distinct sites.
    pub fn new(dim: usize, side: usize, boundary: Boundary) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if side == 0 {
            return Err(Error::InvalidLattice("side must be positive".into()));
        }
        if boundary == Boundary::Periodic && side < 3 {
            return Err(Error::InvalidLattice(format!(
                "periodic boundary needs side >= 3, got {side}"
            )));
        }
        let sites = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .ok_or_else(|| Error::InvalidLattice(format!("{side}^{dim} sites overflows")))?;
        Ok(Lattice { dim, side, boundary, sites })
    }

    pub fn ring(side: usize) -> Result<Self> {
        Lattice::new(1, side, Boundary::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total number of sites, `side^d`.
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Upper bound on the number of neighbors of any site.
    pub fn degree(&self) -> usize {
        2 * self.dim
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x < self.sites {
            Ok(())
        } else {
            Err(Error::InvalidSite { index: x, sites: self.sites })
        }
    }

    pub fn coords(&self, x: usize) -> Result<Vec<usize>> {
        self.check_site(x)?;
        let mut rest = x;
        Ok((0..self.dim)
            .map(|_| {
                let c = rest % self.side;
                rest /= self.side;
                c
            })
            .collect())
    }

    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::InvalidLattice(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let mut index = 0;
        for &c in coords.iter().rev() {
            if c >= self.side {
                return Err(Error::InvalidLattice(format!(
                    "coordinate {c} outside 0..{}",
                    self.side
                )));
            }
            index = index * self.side + c;
        }
        Ok(index)
    }

    /// The site with every coordinate equal to `side / 2`; used as the origin
    /// of `Z^d` inside the box.
    pub fn center(&self) -> usize {
        let c = self.side / 2;
        (0..self.dim).fold(0, |acc, _| acc * self.side + c)
    }

    /// Nearest neighbors of `x` in axis order, minus direction before plus.
    pub fn neighbors(&self, x: usize) -> Result<Vec<usize>> {
        self.check_site(x)?;
        let mut out = Vec::with_capacity(self.degree());
        self.push_neighbors(x, &mut out);
        Ok(out)
    }

    fn push_neighbors(&self, x: usize, out: &mut Vec<usize>) {
        let mut stride = 1;
        for _ in 0..self.dim {
            let c = (x / stride) % self.side;
            let base = x - c * stride;
            match self.boundary {
                Boundary::Periodic => {
                    out.push(base + ((c + self.side - 1) % self.side) * stride);
                    out.push(base + ((c + 1) % self.side) * stride);
                }
                Boundary::FrozenIgnorant => {
                    if c > 0 {
                        out.push(base + (c - 1) * stride);
                    }
                    if c + 1 < self.side {
                        out.push(base + (c + 1) * stride);
                    }
                }
            }
            stride *= self.side;
        }
    }

    /// Precomputed adjacency for every site.
    pub fn neighbor_table(&self) -> NeighborTable {
        let mut offsets = Vec::with_capacity(self.sites + 1);
        let mut targets = Vec::with_capacity(self.sites * self.degree());
        offsets.push(0);
        for x in 0..self.sites {
            self.push_neighbors(x, &mut targets);
            offsets.push(targets.len());
        }
        NeighborTable { offsets, targets }
    }
}

/// Compressed adjacency lists, indexed by site.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl NeighborTable {
    #[inline]
    pub fn of(&self, x: usize) -> &[usize] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn sites(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Model parameters. The forgetting rate is 1 and defines the time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    lambda: f64,
    alpha: f64,
}

impl Params {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("alpha", alpha)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Params { lambda, alpha })
    }

    /// Contact-process parameters: no stifling.
    pub fn contact(lambda: f64) -> Result<Self> {
        Params::new(lambda, 0.0)
    }

    /// Spreading rate per spreader neighbor.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Stifling rate per spreader neighbor.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Exit rates of one site, listed in the fixed selection order
/// (to Ignorant, to Spreader, to Stifler).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SiteRates {
    pub to_ignorant: f64,
    pub to_spreader: f64,
    pub to_stifler: f64,
}

impl SiteRates {
    /// Rates for a site in `state` with `n1` spreader neighbors.
    #[inline]
    pub fn for_state(state: SiteState, n1: usize, params: &Params) -> SiteRates {
        let n1 = n1 as f64;
        match state {
            SiteState::Ignorant => SiteRates {
                to_spreader: params.lambda * n1,
                ..SiteRates::default()
            },
            SiteState::Spreader => SiteRates {
                to_ignorant: 1.0,
                to_stifler: params.alpha * n1,
                ..SiteRates::default()
            },
            SiteState::Stifler => SiteRates {
                to_ignorant: 1.0,
                ..SiteRates::default()
            },
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.to_ignorant + self.to_spreader + self.to_stifler
    }

    pub fn rate_to(&self, to: SiteState) -> f64 {
        match to {
            SiteState::Ignorant => self.to_ignorant,
            SiteState::Spreader => self.to_spreader,
            SiteState::Stifler => self.to_stifler,
        }
    }

    /// Nonzero moves in selection order.
    pub fn moves(&self) -> impl Iterator<Item = (SiteState, f64)> {
        [
            (SiteState::Ignorant, self.to_ignorant),
            (SiteState::Spreader, self.to_spreader),
            (SiteState::Stifler, self.to_stifler),
        ]
        .into_iter()
        .filter(|&(_, r)| r > 0.0)
    }
}

/// Population counts `(#Ignorant, #Spreader, #Stifler)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Counts {
    pub ignorant: usize,
    pub spreader: usize,
    pub stifler: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.ignorant + self.spreader + self.stifler
    }

    /// No spreaders and no stiflers.
    pub fn is_extinct(&self) -> bool {
        self.spreader == 0 && self.stifler == 0
    }

    pub(crate) fn shift(&mut self, from: SiteState, to: SiteState) {
        *self.slot(from) -= 1;
        *self.slot(to) += 1;
    }

    fn slot(&mut self, s: SiteState) -> &mut usize {
        match s {
            SiteState::Ignorant => &mut self.ignorant,
            SiteState::Spreader => &mut self.spreader,
            SiteState::Stifler => &mut self.stifler,
        }
    }
}

/// A lattice state `η`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    lattice: Lattice,
    states: Vec<SiteState>,
}

impl Configuration {
    pub fn all_ignorant(lattice: Lattice) -> Self {
        Configuration { lattice, states: vec![SiteState::Ignorant; lattice.sites()] }
    }

    /// All-Ignorant except for the listed spreaders.
    pub fn with_spreaders(lattice: Lattice, spreaders: &[usize]) -> Result<Self> {
        let mut cfg = Configuration::all_ignorant(lattice);
        for &x in spreaders {
            cfg.set(x, SiteState::Spreader)?;
        }
        Ok(cfg)
    }

    pub fn from_states(lattice: Lattice, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != lattice.sites() {
            return Err(Error::InvalidLattice(format!(
                "{} states for a lattice of {} sites",
                states.len(),
                lattice.sites()
            )));
        }
        Ok(Configuration { lattice, states })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn state(&self, x: usize) -> Result<SiteState> {
        self.lattice.check_site(x)?;
        Ok(self.states[x])
    }

    /// Unchecked overwrite of a site, for building initial conditions.
    pub fn set(&mut self, x: usize, s: SiteState) -> Result<()> {
        self.lattice.check_site(x)?;
        self.states[x] = s;
        Ok(())
    }

    pub fn counts(&self) -> Counts {
        let mut c = Counts::default();
        for &s in &self.states {
            *c.slot(s) += 1;
        }
        c
    }

    /// `n1(x, η)`: number of neighbors of `x` in state Spreader.
    pub fn count_spreader_neighbors(&self, x: usize) -> Result<usize> {
        Ok(self
            .lattice
            .neighbors(x)?
            .into_iter()
            .filter(|&y| self.states[y] == SiteState::Spreader)
            .count())
    }

    pub fn site_rates(&self, params: &Params, x: usize) -> Result<SiteRates> {
        let n1 = self.count_spreader_neighbors(x)?;
        Ok(SiteRates::for_state(self.states[x], n1, params))
    }

    /// Moves site `x` to `to`, rejecting jumps the model never makes.
    pub fn apply_transition(&mut self, x: usize, to: SiteState) -> Result<SiteState> {
        let from = self.state(x)?;
        if !from.can_jump_to(to) {
            return Err(Error::ImpossibleTransition { from, to });
        }
        self.states[x] = to;
        Ok(from)
    }

    /// Value-returning form of [`Configuration::apply_transition`].
    pub fn transitioned(&self, x: usize, to: SiteState) -> Result<Configuration> {
        let mut next = self.clone();
        next.apply_transition(x, to)?;
        Ok(next)
    }

    /// Contact-process image: Stiflers become 0, Spreaders stay 1.
    pub fn contact_projection(&self) -> Configuration {
        let states = self
            .states
            .iter()
            .map(|&s| if s == SiteState::Spreader { s } else { SiteState::Ignorant })
            .collect();
        Configuration { lattice: self.lattice, states }
    }

    pub(crate) fn states_mut(&mut self) -> &mut [SiteState] {
        &mut self.states
    }

    /// Writes the snapshot format: a `d,side,boundary` line followed by one
    /// `index,state` line per site.
    pub fn write_snapshot<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},{},{}", self.lattice.dim, self.lattice.side, self.lattice.boundary)?;
        for (i, s) in self.states.iter().enumerate() {
            writeln!(w, "{},{}", i, s.digit())?;
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> String {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("snapshot is ASCII")
    }

    pub fn parse_snapshot(text: &str) -> Result<Configuration> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        let [d, side, boundary] = fields[..] else {
            return Err(Error::Parse(format!("bad snapshot header {header:?}")));
        };
        let parse_usize = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        };
        let lattice = Lattice::new(parse_usize(d)?, parse_usize(side)?, boundary.parse()?)?;
        let mut states = vec![None; lattice.sites()];
        for line in lines {
            let (i, s) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad snapshot line {line:?}")))?;
            let i = parse_usize(i)?;
            let s = s
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(SiteState::from_digit)
                .ok_or_else(|| Error::Parse(format!("bad site state in {line:?}")))?;
            lattice.check_site(i)?;
            if states[i].replace(s).is_some() {
                return Err(Error::Parse(format!("site {i} listed twice")));
            }
        }
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Parse(format!("site {i} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Configuration::from_states(lattice, states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(side: usize) -> Lattice {
        Lattice::ring(side).unwrap()
    }

    #[test]
    fn neighbors_wrap_on_ring() {
        assert_eq!(ring(5).neighbors(0).unwrap(), vec![4, 1]);
    }

    #[test]
    fn neighbors_frozen_edge() {
        let l = Lattice::new(1, 5, Boundary::FrozenIgnorant).unwrap();
        assert_eq!(l.neighbors(0).unwrap(), vec![1]);
        let single = Lattice::new(1, 1, Boundary::FrozenIgnorant).unwrap();
        assert!(single.neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn neighbors_torus_2d() {
        let l = Lattice::new(2, 4, Boundary::Periodic).unwrap();
        let x = l.index(&[0, 0]).unwrap();
        let expect: Vec<usize> =
            [[3, 0], [1, 0], [0, 3], [0, 1]].iter().map(|c| l.index(c).unwrap()).collect();
        assert_eq!(l.neighbors(x).unwrap(), expect);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Lattice::new(1, 2, Boundary::Periodic).is_err());
        assert!(Lattice::new(0, 5, Boundary::Periodic).is_err());
        assert!(Lattice::new(1, 2, Boundary::FrozenIgnorant).is_ok());
        assert!(matches!(ring(5).neighbors(5), Err(Error::InvalidSite { index: 5, sites: 5 })));
        assert!(Params::new(-1.0, 0.0).is_err());
        assert!(Params::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn spreader_neighbor_counts() {
        let l = ring(6);
        assert_eq!(Configuration::all_ignorant(l).count_spreader_neighbors(2).unwrap(), 0);
        let cfg = Configuration::with_spreaders(l, &[3]).unwrap();
        assert_eq!(cfg.count_spreader_neighbors(2).unwrap(), 1);
        let cfg = Configuration::with_spreaders(ring(4), &[0, 2]).unwrap();
        assert_eq!(cfg.count_spreader_neighbors(1).unwrap(), 2);
    }

    #[test]
    fn rate_table_examples() {
        let p = Params::new(1.5, 7.0).unwrap();
        let r = SiteRates::for_state(SiteState::Ignorant, 2, &p);
        assert_eq!(r, SiteRates { to_spreader: 3.0, ..Default::default() });
        let r = SiteRates::for_state(SiteState::Spreader, 0, &p);
        assert_eq!((r.to_ignorant, r.to_stifler, r.to_spreader), (1.0, 0.0, 0.0));
        for n1 in 0..=4 {
            let r = SiteRates::for_state(SiteState::Stifler, n1, &p);
            assert_eq!(r, SiteRates { to_ignorant: 1.0, ..Default::default() });
        }
    }

    #[test]
    fn impossible_transitions_rejected() {
        let mut cfg = Configuration::all_ignorant(ring(5));
        assert_eq!(
            cfg.apply_transition(0, SiteState::Stifler),
            Err(Error::ImpossibleTransition { from: SiteState::Ignorant, to: SiteState::Stifler })
        );
        cfg.set(1, SiteState::Stifler).unwrap();
        assert!(cfg.apply_transition(1, SiteState::Spreader).is_err());
        assert!(cfg.apply_transition(1, SiteState::Stifler).is_err());
        assert_eq!(cfg.apply_transition(1, SiteState::Ignorant), Ok(SiteState::Stifler));
    }

    #[test]
    fn snapshot_parses_back() {
        let l = Lattice::new(2, 3, Boundary::FrozenIgnorant).unwrap();
        let mut cfg = Configuration::all_ignorant(l);
        cfg.set(4, SiteState::Spreader).unwrap();
        cfg.set(7, SiteState::Stifler).unwrap();
        let text = cfg.to_snapshot();
        assert!(text.starts_with("2,3,frozen-ignorant\n0,0\n"));
        assert_eq!(Configuration::parse_snapshot(&text).unwrap(), cfg);
        assert!(Configuration::parse_snapshot("1,3,periodic\n0,0\n1,3\n2,0\n").is_err());
        assert!(Configuration::parse_snapshot("1,3,periodic\n0,0\n1,1\n").is_err());
    }

    fn lattice_strategy() -> impl Strategy<Value = Lattice> {
        (1usize..=3, 3usize..=6, prop::bool::ANY).prop_map(|(d, side, periodic)| {
            let b = if periodic { Boundary::Periodic } else { Boundary::FrozenIgnorant };
            Lattice::new(d, side, b).unwrap()
        })
    }

    fn config_strategy() -> impl Strategy<Value = Configuration> {
        lattice_strategy().prop_flat_map(|l| {
            prop::collection::vec(0u8..3, l.sites()).prop_map(move |digits| {
                let states = digits.into_iter().map(|d| SiteState::from_digit(d).unwrap()).collect();
                Configuration::from_states(l, states).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn coords_and_index_are_inverse(l in lattice_strategy(), seed in any::<usize>()) {
            let x = seed % l.sites();
            let c = l.coords(x).unwrap();
            prop_assert_eq!(l.index(&c).unwrap(), x);
            prop_assert_eq!(l.sites(), l.side().pow(l.dim() as u32));
        }

        #[test]
        fn neighbor_relation_is_symmetric(l in lattice_strategy(), seed in any::<usize>()) {
            let x = seed % l.sites();
            let ns = l.neighbors(x).unwrap();
            prop_assert!(ns.len() <= l.degree());
            if l.boundary() == Boundary::Periodic {
                prop_assert_eq!(ns.len(), l.degree());
            }
            for y in ns {
                prop_assert!(l.neighbors(y).unwrap().contains(&x));
            }
        }

        #[test]
        fn rates_respect_model_shape(cfg in config_strategy(), lambda in 0.0..10.0f64, alpha in 0.0..10.0f64) {
            let p = Params::new(lambda, alpha).unwrap();
            for x in 0..cfg.lattice().sites() {
                let n1 = cfg.count_spreader_neighbors(x).unwrap();
                prop_assert!(n1 <= cfg.lattice().degree());
                let r = cfg.site_rates(&p, x).unwrap();
                let from = cfg.states()[x];
                for to in SiteState::ALL {
                    if !from.can_jump_to(to) {
                        prop_assert_eq!(r.rate_to(to), 0.0);
                    }
                }
            }
        }

        #[test]
        fn alpha_zero_matches_contact_rates(cfg in config_strategy(), lambda in 0.0..10.0f64) {
            // contact process: 0 -> 1 at lambda * n1, 1 -> 0 at 1
            let p = Params::contact(lambda).unwrap();
            for x in 0..cfg.lattice().sites() {
                let n1 = cfg.count_spreader_neighbors(x).unwrap() as f64;
                let r = cfg.site_rates(&p, x).unwrap();
                match cfg.states()[x] {
                    SiteState::Ignorant => {
                        prop_assert_eq!(r.to_spreader, lambda * n1);
                        prop_assert_eq!(r.total(), lambda * n1);
                    }
                    SiteState::Spreader => {
                        prop_assert_eq!(r.to_ignorant, 1.0);
                        prop_assert_eq!(r.total(), 1.0);
                    }
                    SiteState::Stifler => {}
                }
            }
        }

        #[test]
        fn transition_changes_one_site(cfg in config_strategy(), seed in any::<usize>(), to in 0u8..3) {
            let x = seed % cfg.lattice().sites();
            let to = SiteState::from_digit(to).unwrap();
            match cfg.transitioned(x, to) {
                Ok(next) => {
                    let diff = cfg.states().iter().zip(next.states()).filter(|(a, b)| a != b).count();
                    prop_assert_eq!(diff, 1);
                    prop_assert_eq!(next.counts().total(), cfg.counts().total());
                }
                Err(_) => prop_assert!(!cfg.states()[x].can_jump_to(to)),
            }
        }
    }
}
