//! Piecewise-constant sample paths.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Configuration, State};
use crate::error::{Error, Result};
use crate::lattice::Site;

/// One effective state change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub time: f64,
    pub site: Site,
    pub from: State,
    pub to: State,
}

/// Initial configuration plus the time-ordered list of effective changes on
/// `[0, horizon]`. Paths are right-continuous: the state at a change time is
/// the post-change state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    initial: Configuration,
    changes: Vec<Change>,
    horizon: f64,
}

impl Trajectory {
    /// Validates ordering, consistency of `from` states and the horizon.
    pub fn new(initial: Configuration, changes: Vec<Change>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidTime(format!("horizon must be >= 0, got {horizon}")));
        }
        let mut current = initial.clone();
        let mut last = 0.0;
        for (i, c) in changes.iter().enumerate() {
            if c.site.0 >= current.len() {
                return Err(Error::InvalidSite {
                    index: c.site.0,
                    site_count: current.len(),
                });
            }
            if !(c.time > 0.0 && c.time >= last && c.time <= horizon) {
                return Err(Error::Invalid(format!("change {i} at time {} is out of order", c.time)));
            }
            if c.from == c.to || current.get(c.site) != c.from {
                return Err(Error::Invalid(format!("change {i} is inconsistent with the path")));
            }
            current.set(c.site, c.to);
            last = c.time;
        }
        Ok(Self {
            initial,
            changes,
            horizon,
        })
    }

    pub(crate) fn from_parts(initial: Configuration, changes: Vec<Change>, horizon: f64) -> Self {
        debug_assert!(Self::new(initial.clone(), changes.clone(), horizon).is_ok());
        Self {
            initial,
            changes,
            horizon,
        }
    }

    /// A path with no changes.
    pub fn constant(initial: Configuration, horizon: f64) -> Self {
        Self {
            initial,
            changes: Vec::new(),
            horizon,
        }
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn changes(&self) -> &[Change] {
        &self.changes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn site_count(&self) -> usize {
        self.initial.len()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::InvalidTime(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )))
        }
    }

    /// Configuration at time `t` (right-continuous).
    pub fn config_at(&self, t: f64) -> Result<Configuration> {
        self.check_time(t)?;
        let mut c = self.initial.clone();
        for ch in self.changes.iter().take_while(|ch| ch.time <= t) {
            c.set(ch.site, ch.to);
        }
        Ok(c)
    }

    pub fn final_config(&self) -> Configuration {
        let mut c = self.initial.clone();
        for ch in &self.changes {
            c.set(ch.site, ch.to);
        }
        c
    }

    /// Calls `visit(time, configuration)` at time 0 and after every change.
    pub fn replay(&self, mut visit: impl FnMut(f64, &Configuration)) {
        let mut c = self.initial.clone();
        visit(0.0, &c);
        for ch in &self.changes {
            c.set(ch.site, ch.to);
            visit(ch.time, &c);
        }
    }

    /// Distinct times at which the path changes, including 0.
    pub fn change_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = std::iter::once(0.0)
            .chain(self.changes.iter().map(|c| c.time))
            .collect();
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_changes() {
        let init = Configuration::from_digits(&[0, 2]).unwrap();
        let bad_from = Change {
            time: 0.5,
            site: Site(0),
            from: State::Aware,
            to: State::Ignorant,
        };
        assert!(Trajectory::new(init.clone(), vec![bad_from], 1.0).is_err());
        let late = Change {
            time: 2.0,
            site: Site(1),
            from: State::Adopter,
            to: State::Ignorant,
        };
        assert!(Trajectory::new(init.clone(), vec![late], 1.0).is_err());
        let ok = Change { time: 0.5, ..late };
        let t = Trajectory::new(init, vec![ok], 1.0).unwrap();
        assert_eq!(t.config_at(0.5).unwrap().digits(), vec![0, 0]);
        assert_eq!(t.config_at(0.49).unwrap().digits(), vec![0, 2]);
        assert!(t.config_at(1.5).is_err());
    }
}
