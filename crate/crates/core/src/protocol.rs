//! Centralized discovery signaling and per-slot channel access.
//!
//! A discovery session walks the five signaling steps:
//!
//! 1. the D2D transmitter sends a request to its BS (uplink),
//! 2. the BS schedules the receiver and acknowledges (downlink),
//! 3. the transmitter sends the discovery message to the receiver (D2D),
//! 4. the receiver reports the measured SIR to the BS (uplink),
//! 5. the BS admits the pair if the SIR clears the threshold (downlink).
//!
//! Steps 1, 3 and 4 need a collision-free slot. Downlink steps never fail.
//! In [`SignalingMode::SingleMessage`] one clean slot carries the whole
//! exchange; in [`SignalingMode::FullSignaling`] each of steps 1, 3 and 4
//! consumes its own slot.
//!
//! Channel access: every contending pair rolls a die over `1..=N` each slot
//! and transmits when the die shows its own contention number. Two or more
//! transmitters in a slot collide.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{compute_sir, ChannelParams, SirSample};
use crate::error::Result;
use crate::geometry::{representative_cell, sample_interferers, D2DPair, NetworkRealization, Point, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    RequestSent,
    Scheduled,
    DiscoverySent,
    SirReported,
    Established,
    FailedRetry,
}

impl SessionState {
    /// Edges of the signaling state machine.
    pub fn can_transition_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Idle, RequestSent)
                | (FailedRetry, RequestSent)
                | (RequestSent, Scheduled)
                | (Scheduled, DiscoverySent)
                | (DiscoverySent, SirReported)
                | (SirReported, Established)
                | (SirReported, FailedRetry)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Idle => "idle",
            SessionState::RequestSent => "request_sent",
            SessionState::Scheduled => "scheduled",
            SessionState::DiscoverySent => "discovery_sent",
            SessionState::SirReported => "sir_reported",
            SessionState::Established => "established",
            SessionState::FailedRetry => "failed_retry",
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalingMode {
    #[default]
    SingleMessage,
    FullSignaling,
}

/// Which transmitters interfere with a D2D receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfererModel {
    /// A fresh PPP of always-on cellular uplink users around the receiver in every slot.
    #[default]
    Saturated,
    /// Only the other D2D transmitters of the same slot.
    ContentionOnly,
}

/// Who rolls the dice once some pairs are established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentionModel {
    /// All N pairs keep contending, so N is constant over a run.
    #[default]
    Persistent,
    /// Established pairs leave; N is the number of pending sessions.
    Shrinking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Did not transmit.
    Wait,
    /// Transmitted into a collision.
    Collide,
    Request,
    Discovery,
    Report,
    /// Only downlink progress this slot.
    Downlink,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Wait => "wait",
            Action::Collide => "collide",
            Action::Request => "request",
            Action::Discovery => "discovery",
            Action::Report => "report",
            Action::Downlink => "downlink",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoverySession {
    pub pair: D2DPair,
    pub state: SessionState,
    pub slots_elapsed: u64,
    pub slots_to_success: Option<u64>,
    pub last_sir: Option<SirSample>,
    /// Every state entered, starting with `Idle`.
    pub path: Vec<SessionState>,
}

impl DiscoverySession {
    pub fn new(pair: D2DPair) -> Self {
        DiscoverySession {
            pair,
            state: SessionState::Idle,
            slots_elapsed: 0,
            slots_to_success: None,
            last_sir: None,
            path: vec![SessionState::Idle],
        }
    }

    pub fn is_established(&self) -> bool {
        self.state == SessionState::Established
    }

    fn enter(&mut self, next: SessionState) {
        debug_assert!(self.state.can_transition_to(next), "{} -> {}", self.state, next);
        self.state = next;
        self.path.push(next);
    }
}

/// What happened to one pending pair in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSlotResult {
    pub pair_id: usize,
    pub transmitted: bool,
    /// SIR at the pair's receiver, present only for a sole transmitter.
    pub sir: Option<SirSample>,
    /// Transmitted alone and cleared the SIR threshold.
    pub success: bool,
    pub action: Action,
    pub state_after: SessionState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot_index: u64,
    pub transmitting_pair_ids: Vec<usize>,
    pub collision: bool,
    /// One entry per session that was pending when the slot started.
    pub pairs: Vec<PairSlotResult>,
}

impl SlotOutcome {
    pub fn result_for(&self, pair_id: usize) -> Option<&PairSlotResult> {
        self.pairs.iter().find(|r| r.pair_id == pair_id)
    }

    fn solo_transmitter(&self, pair_id: usize) -> bool {
        !self.collision && self.transmitting_pair_ids == [pair_id]
    }
}

/// Roll a die over `1..=n`; transmit when it shows `contention_id`.
pub fn transmit_decision<R: Rng + ?Sized>(contention_id: usize, n: usize, rng: &mut R) -> bool {
    debug_assert!((1..=n).contains(&contention_id));
    rng.random_range(1..=n) == contention_id
}

pub fn detect_collision(transmitting_pair_ids: &[usize]) -> bool {
    transmitting_pair_ids.len() >= 2
}

/// Apply one slot to a session.
///
/// Downlink steps (2 and 5) complete as soon as they are reached. Uplink and
/// D2D steps need this pair to be the only transmitter of the slot.
/// `control_ok` is the outcome of the uplink control check for this slot and
/// gates steps 1 and 4 and the admission decision.
pub fn advance_session(
    session: &DiscoverySession,
    slot: &SlotOutcome,
    tau_db: f64,
    control_ok: bool,
    mode: SignalingMode,
) -> DiscoverySession {
    advance_session_with_action(session, slot, tau_db, control_ok, mode).0
}

fn advance_session_with_action(
    session: &DiscoverySession,
    slot: &SlotOutcome,
    tau_db: f64,
    control_ok: bool,
    mode: SignalingMode,
) -> (DiscoverySession, Action) {
    use SessionState::*;

    let mut s = session.clone();
    if s.is_established() {
        return (s, Action::Wait);
    }
    s.slots_elapsed += 1;

    let id = s.pair.id;
    let transmitted = slot.transmitting_pair_ids.contains(&id);
    let mut uplink_available = slot.solo_transmitter(id);
    let slot_sir = slot.result_for(id).and_then(|r| r.sir);
    let mut action = match (transmitted, uplink_available) {
        (false, _) => Action::Wait,
        (true, false) => Action::Collide,
        (true, true) => Action::Downlink,
    };
    // in single-message mode a clean slot carries every uplink step
    let mut budget = match mode {
        SignalingMode::SingleMessage => usize::MAX,
        SignalingMode::FullSignaling => 1,
    };
    let mut take_uplink = |action: &mut Action, kind: Action| -> bool {
        if uplink_available && budget > 0 {
            budget -= 1;
            if budget == 0 {
                uplink_available = false;
            }
            *action = kind;
            true
        } else {
            false
        }
    };

    loop {
        match s.state {
            Established => break,
            Idle | FailedRetry => {
                if !take_uplink(&mut action, Action::Request) || !control_ok {
                    break;
                }
                s.enter(RequestSent);
            }
            RequestSent => s.enter(Scheduled),
            Scheduled => {
                if !take_uplink(&mut action, Action::Discovery) {
                    break;
                }
                s.last_sir = slot_sir;
                s.enter(DiscoverySent);
            }
            DiscoverySent => {
                if !take_uplink(&mut action, Action::Report) || !control_ok {
                    break;
                }
                s.enter(SirReported);
            }
            SirReported => {
                let passed = s.last_sir.is_some_and(|sir| sir.meets(tau_db));
                if passed && control_ok {
                    s.enter(Established);
                    s.slots_to_success = Some(s.slots_elapsed);
                } else {
                    s.enter(FailedRetry);
                }
                break;
            }
        }
    }
    (s, action)
}

/// Uplink SIR check from `ue` to its serving BS.
pub fn control_link_ok<R: Rng + ?Sized>(
    ue: &Point,
    serving_bs: &Point,
    interferer_txs: &[Point],
    tau_db: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<bool> {
    Ok(compute_sir(ue, serving_bs, interferer_txs, params, rng)?.meets(tau_db))
}

/// Per-slot parameters shared by every slot of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotContext {
    pub channel: ChannelParams,
    pub tau_db: f64,
    pub signaling: SignalingMode,
    pub interferers: InterfererModel,
    pub contention: ContentionModel,
    /// Density of saturated uplink interferers.
    pub interferer_density: f64,
    /// Radius of the interferer window drawn around a receiver.
    pub window_radius: f64,
}

/// Contention numbers for this slot: `(session index, die face)`.
fn contenders(sessions: &[DiscoverySession], contention: ContentionModel) -> Vec<usize> {
    match contention {
        ContentionModel::Persistent => (0..sessions.len()).collect(),
        ContentionModel::Shrinking => (0..sessions.len()).filter(|&i| !sessions[i].is_established()).collect(),
    }
}

/// One slot: every contender rolls its die, then the slot is resolved.
pub fn run_slot<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    sessions: &mut [DiscoverySession],
    slot_index: u64,
    ctx: &SlotContext,
    rng: &mut R,
) -> Result<SlotOutcome> {
    let contending = contenders(sessions, ctx.contention);
    let n = contending.len();
    let mut transmits = vec![false; sessions.len()];
    for (k, &i) in contending.iter().enumerate() {
        transmits[i] = transmit_decision(k + 1, n, rng);
    }
    resolve_slot(realization, sessions, &transmits, slot_index, ctx, rng)
}

/// Resolve a slot given each session's transmit decision.
pub fn resolve_slot<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    sessions: &mut [DiscoverySession],
    transmits: &[bool],
    slot_index: u64,
    ctx: &SlotContext,
    rng: &mut R,
) -> Result<SlotOutcome> {
    assert_eq!(transmits.len(), sessions.len());
    let transmitting_pair_ids: Vec<usize> = sessions
        .iter()
        .zip(transmits)
        .filter(|(_, &t)| t)
        .map(|(s, _)| s.pair.id)
        .collect();
    let collision = detect_collision(&transmitting_pair_ids);

    // SIR and control check only matter for a lone pending transmitter
    let mut solo_sir = None;
    let mut control_ok = true;
    if !collision {
        if let Some(idx) = transmits.iter().position(|&t| t) {
            let session = &sessions[idx];
            if !session.is_established() {
                let pair = session.pair;
                let field = match ctx.interferers {
                    InterfererModel::Saturated => sample_interferers(
                        ctx.interferer_density,
                        &Window::new(pair.rx, ctx.window_radius)?,
                        ctx.channel.interferer_region,
                        pair.separation,
                        rng,
                    )?,
                    InterfererModel::ContentionOnly => Vec::new(),
                };
                solo_sir = Some(compute_sir(&pair.tx, &pair.rx, &field, &ctx.channel, rng)?);
                if ctx.signaling == SignalingMode::FullSignaling && !realization.bs_points.is_empty() {
                    let bs = representative_cell(&realization.bs_points, pair.tx)?;
                    control_ok = control_link_ok(&pair.tx, &bs, &field, ctx.tau_db, &ctx.channel, rng)?;
                }
            }
        }
    }

    let mut outcome = SlotOutcome {
        slot_index,
        transmitting_pair_ids,
        collision,
        pairs: Vec::new(),
    };
    outcome.pairs = sessions
        .iter()
        .zip(transmits)
        .filter(|(s, _)| !s.is_established())
        .map(|(s, &t)| {
            let sir = if t && !collision { solo_sir } else { None };
            PairSlotResult {
                pair_id: s.pair.id,
                transmitted: t,
                sir,
                success: sir.is_some_and(|v| v.meets(ctx.tau_db)),
                action: Action::Wait,
                state_after: s.state,
            }
        })
        .collect();

    let mut k = 0;
    for session in sessions.iter_mut() {
        if session.is_established() {
            continue;
        }
        let (next, action) = advance_session_with_action(session, &outcome, ctx.tau_db, control_ok, ctx.signaling);
        *session = next;
        outcome.pairs[k].action = action;
        outcome.pairs[k].state_after = session.state;
        k += 1;
    }
    Ok(outcome)
}

pub const TRACE_HEADER: [&str; 6] = ["slot_index", "pair_id", "action", "collision", "sir_db", "state_after"];

/// Comma-separated slot trace, one row per pending pair per slot. `sir_db`
/// is empty when no SIR was measured and `inf` for an interference-free link.
pub fn write_trace<W: Write>(outcomes: &[SlotOutcome], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for slot in outcomes {
        for r in &slot.pairs {
            let sir_db = match r.sir {
                None => String::new(),
                Some(s) if s.is_infinite() => "inf".to_string(),
                Some(s) => s.db().to_string(),
            };
            w.write_record([
                slot.slot_index.to_string(),
                r.pair_id.to_string(),
                r.action.as_str().to_string(),
                (r.transmitted && slot.collision).to_string(),
                sir_db,
                r.state_after.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
