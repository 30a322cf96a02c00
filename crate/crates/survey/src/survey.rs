//! Survey state: sessions, outstanding tickets and the online raters, all
//! rebuilt from the log on start.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use pairrank_core::online::{EloParams, EloRater, TrueSkillParams, TrueSkillRater, TsScore};
use pairrank_core::{ComparisonRecord, ItemCatalog, ItemId, Method, Outcome, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{LogEntry, SessionEntry, Store};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Uniform,
    Uncertainty,
}

impl FromStr for Strategy {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "uncertainty" => Ok(Strategy::Uncertainty),
            _ => Err(ServiceError::BadRequest(format!("unknown strategy {s:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Uniform => "uniform",
            Strategy::Uncertainty => "uncertainty",
        })
    }
}

/// A respondent's answer, relative to the presented sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Left,
    Right,
    Tie,
    Skip,
}

impl Choice {
    /// Outcome with `a` the left item, or `None` for a skip.
    pub fn outcome(self) -> Option<Outcome> {
        match self {
            Choice::Left => Some(Outcome::WinA),
            Choice::Right => Some(Outcome::WinB),
            Choice::Tie => Some(Outcome::Tie),
            Choice::Skip => None,
        }
    }
}

impl FromStr for Choice {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Choice::Left),
            "right" => Ok(Choice::Right),
            "tie" => Ok(Choice::Tie),
            "skip" => Ok(Choice::Skip),
            _ => Err(ServiceError::BadRequest(format!("unknown outcome {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ticket {
    pub token: String,
    pub session: String,
    pub left: usize,
    pub right: usize,
    pub issued_at: DateTime<Utc>,
    issued: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ItemState {
    pub score: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteReceipt {
    pub recorded: bool,
    pub left: (ItemId, ItemState),
    pub right: (ItemId, ItemState),
}

#[derive(Debug, Clone)]
struct Session {
    served: HashSet<(usize, usize)>,
    pending: Option<String>,
}

impl Session {
    fn new() -> Self {
        Session { served: HashSet::new(), pending: None }
    }
}

#[derive(Debug, Clone)]
pub struct SurveyOptions {
    pub idle_timeout: Duration,
    pub seed: Option<u64>,
    pub elo: EloParams,
    pub trueskill: TrueSkillParams,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        SurveyOptions {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            seed: None,
            elo: EloParams::default(),
            trueskill: TrueSkillParams::default(),
        }
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[derive(Debug)]
pub struct Survey {
    catalog: Arc<ItemCatalog>,
    elo: EloRater,
    ts: TrueSkillRater,
    sessions: HashMap<String, Session>,
    tickets: HashMap<String, Ticket>,
    records: Arc<Vec<ComparisonRecord>>,
    store: Store,
    rng: ChaCha8Rng,
    idle_timeout: Duration,
}

impl Survey {
    /// Replays the log in `store` order to rebuild raters and sessions.
    pub fn open(
        catalog: ItemCatalog,
        store: Store,
        entries: Vec<LogEntry>,
        session_entries: Vec<SessionEntry>,
        options: SurveyOptions,
    ) -> Result<Survey> {
        if catalog.len() < 2 {
            return Err(ServiceError::CatalogTooSmall);
        }
        let mut elo = EloRater::new(catalog.len(), options.elo)?;
        let mut ts = TrueSkillRater::new(catalog.len(), options.trueskill)?;
        let mut sessions: HashMap<String, Session> =
            session_entries.into_iter().map(|s| (s.id, Session::new())).collect();
        let mut records = Vec::with_capacity(entries.len());
        for (i, entry) in entries.into_iter().enumerate() {
            let r = entry.record;
            let index = |id: &ItemId| {
                catalog.index_of(id).ok_or_else(|| ServiceError::CorruptLog {
                    path: store.dir().join(crate::store::COMPARISONS_FILE),
                    line: i + 1,
                    message: format!("item `{id}` is not in the catalog"),
                })
            };
            let (a, b) = (index(&r.a)?, index(&r.b)?);
            elo.apply(a, b, r.outcome);
            ts.apply(a, b, r.outcome);
            if let Some(s) = &r.session {
                sessions.entry(s.clone()).or_insert_with(Session::new).served.insert(pair_key(a, b));
            }
            records.push(r);
        }
        let rng = match options.seed {
            Some(seed) => ChaCha8Rng::seed_from_u64(seed),
            None => ChaCha8Rng::from_os_rng(),
        };
        Ok(Survey {
            catalog: Arc::new(catalog),
            elo,
            ts,
            sessions,
            tickets: HashMap::new(),
            records: Arc::new(records),
            store,
            rng,
            idle_timeout: options.idle_timeout,
        })
    }

    pub fn catalog(&self) -> &Arc<ItemCatalog> {
        &self.catalog
    }

    /// The durable log as of now; cheap to take.
    pub fn records(&self) -> Arc<Vec<ComparisonRecord>> {
        Arc::clone(&self.records)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn served_count(&self, session: &str) -> Option<usize> {
        self.sessions.get(session).map(|s| s.served.len())
    }

    pub fn create_session(&mut self) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.store.append_session(&SessionEntry { id: id.clone(), created_at: Utc::now() })?;
        self.sessions.insert(id.clone(), Session::new());
        Ok(id)
    }

    fn expired(&self, ticket: &Ticket) -> bool {
        ticket.issued.elapsed() >= self.idle_timeout
    }

    /// Drops the session's outstanding ticket if it has gone idle.
    fn release_if_expired(&mut self, session: &str) {
        let Some(token) = self.sessions.get(session).and_then(|s| s.pending.clone()) else { return };
        if self.tickets.get(&token).is_none_or(|t| self.expired(t)) {
            self.tickets.remove(&token);
            if let Some(s) = self.sessions.get_mut(session) {
                s.pending = None;
            }
        }
    }

    pub fn next_pair(&mut self, session: &str, strategy: Strategy) -> Result<Ticket> {
        if !self.sessions.contains_key(session) {
            return Err(ServiceError::UnknownSession(session.to_string()));
        }
        self.release_if_expired(session);
        if let Some(token) = &self.sessions[session].pending {
            return Err(ServiceError::Outstanding(token.clone()));
        }
        let m = self.catalog.len();
        let total = m * (m - 1) / 2;
        if self.sessions[session].served.len() >= total {
            self.sessions.get_mut(session).expect("checked").served.clear();
        }
        let served = &self.sessions[session].served;
        let (a, b) = match strategy {
            Strategy::Uniform => uniform_pair(m, served, &mut self.rng),
            Strategy::Uncertainty => uncertainty_pair(&self.catalog, self.ts.ratings(), served),
        };
        let (left, right) = if self.rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let ticket = Ticket {
            token: uuid::Uuid::new_v4().simple().to_string(),
            session: session.to_string(),
            left,
            right,
            issued_at: Utc::now(),
            issued: Instant::now(),
        };
        self.tickets.insert(ticket.token.clone(), ticket.clone());
        self.sessions.get_mut(session).expect("checked").pending = Some(ticket.token.clone());
        Ok(ticket)
    }

    /// Consumes the ticket. A decisive or tie answer is appended to the log
    /// and synced before the raters change.
    pub fn vote(&mut self, session: &str, token: &str, choice: Choice) -> Result<VoteReceipt> {
        if !self.sessions.contains_key(session) {
            return Err(ServiceError::UnknownSession(session.to_string()));
        }
        let ticket = self.tickets.get(token).ok_or(ServiceError::UnknownToken)?;
        if ticket.session != session {
            return Err(ServiceError::WrongSession);
        }
        let expired = self.expired(ticket);
        let ticket = self.tickets.remove(token).expect("present");
        self.sessions.get_mut(session).expect("checked").pending = None;
        if expired {
            return Err(ServiceError::Expired);
        }
        let (l, r) = (ticket.left, ticket.right);
        let Some(outcome) = choice.outcome() else {
            return Ok(self.receipt(false, l, r));
        };
        let mut record = ComparisonRecord::new(self.catalog.id(l).as_str(), self.catalog.id(r).as_str(), outcome)?;
        record.timestamp = Some(Utc::now());
        record.session = Some(session.to_string());
        let entry = LogEntry { record, ticket: ticket.token };
        self.store.append_vote(&entry)?;

        self.elo.apply(l, r, outcome);
        self.ts.apply(l, r, outcome);
        Arc::make_mut(&mut self.records).push(entry.record);
        self.sessions.get_mut(session).expect("checked").served.insert(pair_key(l, r));
        Ok(self.receipt(true, l, r))
    }

    fn item_state(&self, idx: usize) -> (ItemId, ItemState) {
        let r = self.ts.rating(idx);
        (self.catalog.id(idx).clone(), ItemState { score: self.elo.score(idx), mu: r.mu, sigma: r.sigma() })
    }

    fn receipt(&self, recorded: bool, left: usize, right: usize) -> VoteReceipt {
        VoteReceipt { recorded, left: self.item_state(left), right: self.item_state(right) }
    }

    /// Current table of an online method.
    pub fn online_table(&self, method: Method) -> Result<ScoreTable> {
        match method {
            Method::Elo => Ok(self.elo.table(&self.catalog)?),
            Method::TrueSkill => Ok(self.ts.table(&self.catalog, TsScore::Mean)?),
            other => Err(ServiceError::BadRequest(format!("{other} is not an online method"))),
        }
    }
}

/// Uniform draw among the unordered pairs not in `served`, which must not
/// hold every pair.
fn uniform_pair(m: usize, served: &HashSet<(usize, usize)>, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let total = m * (m - 1) / 2;
    if served.len() * 2 <= total {
        loop {
            let a = rng.random_range(0..m);
            let b = rng.random_range(0..m - 1);
            let b = if b >= a { b + 1 } else { b };
            let key = pair_key(a, b);
            if !served.contains(&key) {
                return key;
            }
        }
    }
    let open: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|k| !served.contains(k))
        .collect();
    open[rng.random_range(0..open.len())]
}

/// Unserved pair with the largest summed variance; ties go to the closest
/// means, then to the lexically smallest ids.
fn uncertainty_pair(
    catalog: &ItemCatalog,
    ratings: &[pairrank_core::GaussianRating],
    served: &HashSet<(usize, usize)>,
) -> (usize, usize) {
    let m = catalog.len();
    let ids = |a: usize, b: usize| {
        let (x, y) = (catalog.id(a).as_str(), catalog.id(b).as_str());
        if x <= y { (x, y) } else { (y, x) }
    };
    let mut best: Option<(usize, usize)> = None;
    for a in 0..m {
        for b in a + 1..m {
            if served.contains(&(a, b)) {
                continue;
            }
            let Some((ba, bb)) = best else {
                best = Some((a, b));
                continue;
            };
            let var = ratings[a].sigma2 + ratings[b].sigma2;
            let best_var = ratings[ba].sigma2 + ratings[bb].sigma2;
            let gap = (ratings[a].mu - ratings[b].mu).abs();
            let best_gap = (ratings[ba].mu - ratings[bb].mu).abs();
            let better = var > best_var
                || (var == best_var && (gap < best_gap || (gap == best_gap && ids(a, b) < ids(ba, bb))));
            if better {
                best = Some((a, b));
            }
        }
    }
    best.expect("at least one unserved pair")
}
