use std::io::{Read, Write};
use std::sync::Arc;

use super::process::{Bond, ExclusionModel, ExclusionProcess, Observer, RunSummary};
use super::Configuration;
use crate::{Error, Lattice, Result};

/// Bytes per record in the binary event log: `f64` time, `u64` site, `u8` axis,
/// all little-endian.
pub const EVENT_RECORD_BYTES: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub bond: Bond,
}

/// A recorded run: initial state, ordered events and the final state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    model: Arc<ExclusionModel>,
    initial: Configuration,
    events: Vec<Event>,
    final_time: f64,
    last: Configuration,
}

impl Trajectory {
    pub(crate) fn new(
        model: Arc<ExclusionModel>,
        initial: Configuration,
        events: Vec<Event>,
        final_time: f64,
        last: Configuration,
    ) -> Self {
        Trajectory {
            model,
            initial,
            events,
            final_time,
            last,
        }
    }

    /// Rebuilds a trajectory from a stored event list, replaying it to get
    /// the final state.
    pub fn from_events(
        model: Arc<ExclusionModel>,
        initial: Configuration,
        events: Vec<Event>,
        final_time: f64,
    ) -> Result<Self> {
        let lattice = model.lattice();
        let mut prev = f64::NEG_INFINITY;
        for e in &events {
            if !(e.time > prev && e.time >= 0.0 && e.time <= final_time) {
                return Err(Error::Parse(format!("event time {} out of order", e.time)));
            }
            if e.bond.site >= lattice.num_sites() || e.bond.axis >= lattice.dim() {
                return Err(Error::Parse(format!("event bond {:?} outside the lattice", e.bond)));
            }
            prev = e.time;
        }
        let mut t = Trajectory::new(model, initial.clone(), events, final_time, initial);
        t.last = t.replay(&[], &mut [])?.1;
        Ok(t)
    }

    pub fn model(&self) -> &Arc<ExclusionModel> {
        &self.model
    }

    pub fn lattice(&self) -> Lattice {
        self.model.lattice()
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn final_configuration(&self) -> &Configuration {
        &self.last
    }

    /// Re-runs the recorded events through `observers`.
    pub fn replay(
        &self,
        sample_times: &[f64],
        observers: &mut [&mut dyn Observer],
    ) -> Result<(RunSummary, Configuration)> {
        let mut p = ExclusionProcess::new(self.model.clone(), self.initial.clone(), 0)?;
        let summary = p.replay(&self.events, self.final_time, sample_times, observers);
        Ok((summary, p.configuration().clone()))
    }
}

pub fn write_event_log(events: &[Event], mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(events.len() * EVENT_RECORD_BYTES);
    for e in events {
        buf.extend_from_slice(&e.time.to_le_bytes());
        buf.extend_from_slice(&(e.bond.site as u64).to_le_bytes());
        buf.push(e.bond.axis as u8);
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_event_log(mut input: impl Read) -> Result<Vec<Event>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    if buf.len() % EVENT_RECORD_BYTES != 0 {
        return Err(Error::Parse(format!(
            "event log length {} is not a multiple of {EVENT_RECORD_BYTES}",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(EVENT_RECORD_BYTES)
        .map(|r| Event {
            time: f64::from_le_bytes(r[0..8].try_into().unwrap()),
            bond: Bond {
                site: u64::from_le_bytes(r[8..16].try_into().unwrap()) as usize,
                axis: r[16] as usize,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_bernoulli, simulate, RateFamily};
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::WFunction;

    fn run(seed: u64) -> Trajectory {
        let field = sample_field(&EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.5], 2.0, 7), 2, 8).unwrap();
        let op = assemble(&WFunction::identity(2), &field).unwrap();
        let model = Arc::new(ExclusionModel::new(&op, RateFamily::standard(0.5).unwrap()));
        let cfg = sample_bernoulli(0.5, model.lattice(), seed).unwrap();
        simulate(model, cfg, 0.2, seed, &[], &mut []).unwrap()
    }

    #[test]
    fn replay_is_bit_exact() {
        let t = run(11);
        assert!(!t.events().is_empty());
        let (_, last) = t.replay(&[], &mut []).unwrap();
        assert_eq!(&last, t.final_configuration());
        assert!(t.events().windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn same_seed_same_events() {
        assert_eq!(run(3).events(), run(3).events());
        assert_ne!(run(3).events(), run(4).events());
    }

    #[test]
    fn event_log_round_trip() {
        let t = run(5);
        let mut bytes = Vec::new();
        write_event_log(t.events(), &mut bytes).unwrap();
        assert_eq!(bytes.len(), t.events().len() * EVENT_RECORD_BYTES);
        let back = read_event_log(bytes.as_slice()).unwrap();
        assert_eq!(back, t.events());
        let rebuilt = Trajectory::from_events(t.model().clone(), t.initial().clone(), back, t.final_time()).unwrap();
        assert_eq!(rebuilt.final_configuration(), t.final_configuration());
        assert!(read_event_log(&bytes[..bytes.len() - 1]).is_err());
    }
}
