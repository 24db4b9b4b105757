use std::io::{self, Write};

use serde::Serialize;

use crate::lattice::{Counts, SiteState};

/// One applied site flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub site: usize,
    pub from: SiteState,
    pub to: SiteState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub counts: Counts,
}

/// When a run writes a count record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sampling {
    /// After every applied event.
    #[default]
    EveryEvent,
    /// At `t0, t0 + dt, t0 + 2dt, ...` up to the horizon.
    Interval(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Full event log, present when requested.
    pub events: Option<Vec<EventRecord>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn event_count(&self) -> Option<usize> {
        self.events.as_ref().map(Vec::len)
    }

    pub(crate) fn push(&mut self, t: f64, counts: Counts) {
        self.points.push(TrajectoryPoint { t, counts });
    }

    /// CSV with header `t,n_ignorant,n_spreader,n_stifler`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,n_ignorant,n_spreader,n_stifler")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.t, p.counts.ignorant, p.counts.spreader, p.counts.stifler)?;
        }
        Ok(())
    }

    /// CSV with header `t,site,from,to`; writes only the header when no log
    /// was kept.
    pub fn write_event_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,site,from,to")?;
        for e in self.events.iter().flatten() {
            writeln!(w, "{},{},{},{}", e.time, e.site, e.from.digit(), e.to.digit())?;
        }
        Ok(())
    }
}
