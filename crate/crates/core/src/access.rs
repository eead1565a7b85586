//! Door lock state machine.
//!
//! The solenoid is wired fail-secure: without power it holds the door shut,
//! so losing power always locks and nothing but an explicit `Open` unlocks.
//! All times are milliseconds on the caller's clock.

use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RELOCK_INTERVAL_MS: u64 = 30_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LockState {
    Locked,
    Unlocked,
}

impl fmt::Display for LockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LockState::Locked => "locked",
            LockState::Unlocked => "unlocked",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorCommand {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoorState {
    pub state: LockState,
    pub relock_deadline: Option<u64>,
    pub powered: bool,
}

impl Default for DoorState {
    fn default() -> Self {
        Self::LOCKED
    }
}

impl DoorState {
    pub const LOCKED: DoorState = DoorState {
        state: LockState::Locked,
        relock_deadline: None,
        powered: true,
    };

    pub fn is_locked(&self) -> bool {
        self.state == LockState::Locked
    }

    fn locked(powered: bool) -> Self {
        Self { powered, ..Self::LOCKED }
    }

    /// Apply a remote command. `Open` (re)starts the relock timer, so opening
    /// an already open door extends it.
    pub fn command(self, cmd: DoorCommand, now: u64, relock_interval: u64) -> Result<Self> {
        match cmd {
            DoorCommand::Open if !self.powered => Err(Error::Unpowered),
            DoorCommand::Open if relock_interval == 0 => {
                Err(Error::InvalidParameter("relock interval must be positive".into()))
            }
            DoorCommand::Open => Ok(Self {
                state: LockState::Unlocked,
                relock_deadline: Some(now.saturating_add(relock_interval)),
                powered: true,
            }),
            DoorCommand::Close => Ok(Self::locked(self.powered)),
        }
    }

    /// Relock once the deadline has been reached.
    pub fn tick(self, now: u64) -> Self {
        match (self.state, self.relock_deadline) {
            (LockState::Unlocked, Some(deadline)) if now >= deadline => Self::locked(self.powered),
            _ => self,
        }
    }

    /// Power loss locks immediately; power returning never unlocks.
    pub fn power_event(self, powered: bool) -> Self {
        if powered {
            Self { powered: true, ..self }
        } else {
            Self::locked(false)
        }
    }
}

/// Receives lock/unlock actuations.
pub trait Actuator: Send + Sync {
    fn actuate(&self, state: LockState);
}

impl<T: Actuator + ?Sized> Actuator for std::sync::Arc<T> {
    fn actuate(&self, state: LockState) {
        (**self).actuate(state)
    }
}

/// Remembers actuations instead of driving a relay.
#[derive(Debug, Default)]
pub struct SimulatedActuator {
    log: Mutex<Vec<LockState>>,
}

impl SimulatedActuator {
    pub fn log(&self) -> Vec<LockState> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Actuator for SimulatedActuator {
    fn actuate(&self, state: LockState) {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(state);
    }
}

/// A door plus its actuator; every state change is forwarded.
pub struct Door<A: Actuator> {
    state: DoorState,
    relock_interval: u64,
    actuator: A,
}

impl<A: Actuator> fmt::Debug for Door<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Door")
            .field("state", &self.state)
            .field("relock_interval", &self.relock_interval)
            .finish_non_exhaustive()
    }
}

impl<A: Actuator> Door<A> {
    pub fn new(relock_interval: u64, actuator: A) -> Self {
        Self {
            state: DoorState::default(),
            relock_interval,
            actuator,
        }
    }

    pub fn state(&self) -> DoorState {
        self.state
    }

    pub fn relock_interval(&self) -> u64 {
        self.relock_interval
    }

    pub fn actuator(&self) -> &A {
        &self.actuator
    }

    fn set(&mut self, next: DoorState) -> DoorState {
        if next.state != self.state.state {
            self.actuator.actuate(next.state);
        }
        self.state = next;
        next
    }

    pub fn command(&mut self, cmd: DoorCommand, now: u64) -> Result<DoorState> {
        let next = self.state.command(cmd, now, self.relock_interval)?;
        Ok(self.set(next))
    }

    pub fn tick(&mut self, now: u64) -> DoorState {
        let next = self.state.tick(now);
        self.set(next)
    }

    pub fn power_event(&mut self, powered: bool) -> DoorState {
        let next = self.state.power_event(powered);
        self.set(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const I: u64 = 30_000;

    #[test]
    fn open_then_relock() {
        let d = DoorState::default().command(DoorCommand::Open, 0, I).unwrap();
        assert_eq!(d.state, LockState::Unlocked);
        assert_eq!(d.relock_deadline, Some(30_000));
        assert_eq!(d.tick(29_999).state, LockState::Unlocked);
        let locked = d.tick(30_000);
        assert_eq!(locked, DoorState::LOCKED);
        assert_eq!(locked.tick(40_000), locked);
    }

    #[test]
    fn close_clears_deadline() {
        let d = DoorState::default().command(DoorCommand::Open, 0, I).unwrap();
        let c = d.command(DoorCommand::Close, 5, I).unwrap();
        assert_eq!(c, DoorState::LOCKED);
    }

    #[test]
    fn reopening_extends() {
        let d = DoorState::default().command(DoorCommand::Open, 0, I).unwrap();
        let d = d.command(DoorCommand::Open, 20_000, I).unwrap();
        assert_eq!(d.relock_deadline, Some(50_000));
    }

    #[test]
    fn fail_secure() {
        let open = DoorState::default().command(DoorCommand::Open, 0, I).unwrap();
        let dark = open.power_event(false);
        assert!(dark.is_locked() && !dark.powered && dark.relock_deadline.is_none());
        assert!(matches!(dark.command(DoorCommand::Open, 1, I), Err(Error::Unpowered)));
        let back = dark.power_event(true);
        assert!(back.is_locked() && back.powered);
        assert!(back.command(DoorCommand::Open, 2, I).is_ok());
    }

    #[test]
    fn actuator_sees_transitions_only() {
        let mut door = Door::new(I, SimulatedActuator::default());
        door.command(DoorCommand::Open, 0).unwrap();
        door.command(DoorCommand::Open, 10).unwrap();
        door.tick(5_000);
        door.tick(40_000);
        door.power_event(false);
        assert!(door.command(DoorCommand::Open, 41_000).is_err());
        assert_eq!(door.actuator().log(), [LockState::Unlocked, LockState::Locked]);
    }

    #[derive(Debug, Clone, Copy)]
    enum Step {
        Cmd(DoorCommand),
        Tick(u64),
        Power(bool),
    }

    fn step() -> impl Strategy<Value = Step> {
        prop_oneof![
            Just(Step::Cmd(DoorCommand::Open)),
            Just(Step::Cmd(DoorCommand::Close)),
            (0u64..60_000).prop_map(Step::Tick),
            any::<bool>().prop_map(Step::Power),
        ]
    }

    proptest! {
        #[test]
        fn invariants_hold(steps in prop::collection::vec(step(), 0..40)) {
            let mut d = DoorState::default();
            let mut now = 0;
            for s in steps {
                let before = d;
                d = match s {
                    Step::Cmd(c) => d.command(c, now, I).unwrap_or(d),
                    Step::Tick(dt) => { now += dt; d.tick(now) }
                    Step::Power(p) => d.power_event(p),
                };
                prop_assert!(d.powered || d.is_locked());
                if d.state == LockState::Unlocked {
                    let deadline = d.relock_deadline.unwrap();
                    prop_assert!(deadline > now && deadline <= now + I);
                    if before.is_locked() {
                        prop_assert!(matches!(s, Step::Cmd(DoorCommand::Open)));
                    }
                }
            }
        }
    }
}
