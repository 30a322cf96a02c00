//! Common rater outputs: score tables, Gaussian beliefs and predicted
//! outcome distributions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Elo,
    TrueSkill,
    Co,
    Lsr,
    Gp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Elo, Method::TrueSkill, Method::Co, Method::Lsr, Method::Gp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Elo => "elo",
            Method::TrueSkill => "trueskill",
            Method::Co => "co",
            Method::Lsr => "lsr",
            Method::Gp => "gp",
        }
    }

    /// Online raters consume records in order; batch raters see the whole set.
    pub fn is_online(self) -> bool {
        matches!(self, Method::Elo | Method::TrueSkill)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elo" => Ok(Method::Elo),
            "trueskill" | "ts" => Ok(Method::TrueSkill),
            "co" | "convex" => Ok(Method::Co),
            "lsr" => Ok(Method::Lsr),
            "gp" => Ok(Method::Gp),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Gaussian belief `N(mu, sigma2)` about one item's score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRating {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianRating {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid gaussian rating mu={mu} sigma2={sigma2}"
            )));
        }
        Ok(GaussianRating { mu, sigma2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `mu - 3 sigma`.
    pub fn conservative(&self) -> f64 {
        self.mu - 3.0 * self.sigma()
    }
}

/// Probabilities over the three outcomes of one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_win_a: f64,
    pub p_win_b: f64,
    pub p_tie: f64,
}

impl OutcomeDistribution {
    pub fn new(p_win_a: f64, p_win_b: f64, p_tie: f64) -> Result<Self> {
        let ok = [p_win_a, p_win_b, p_tie].iter().all(|p| (0.0..=1.0).contains(p))
            && (p_win_a + p_win_b + p_tie - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "not a probability vector: ({p_win_a}, {p_win_b}, {p_tie})"
            )));
        }
        Ok(OutcomeDistribution { p_win_a, p_win_b, p_tie })
    }

    /// Assigns `tie_share` to a tie and splits the rest in proportion
    /// `p_a : 1 - p_a`.
    pub fn from_decisive(p_a: f64, tie_share: f64) -> Result<Self> {
        check_tie_share(tie_share)?;
        let p_a = p_a.clamp(0.0, 1.0);
        let decisive = 1.0 - tie_share;
        Ok(OutcomeDistribution {
            p_win_a: decisive * p_a,
            p_win_b: decisive * (1.0 - p_a),
            p_tie: tie_share,
        })
    }

    pub fn prob(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::WinA => self.p_win_a,
            Outcome::WinB => self.p_win_b,
            Outcome::Tie => self.p_tie,
        }
    }

    /// Most likely outcome; equal probabilities resolve WinA, then WinB,
    /// then Tie.
    pub fn argmax(&self) -> Outcome {
        let mut best = (Outcome::WinA, self.p_win_a);
        for (o, p) in [(Outcome::WinB, self.p_win_b), (Outcome::Tie, self.p_tie)] {
            if p > best.1 {
                best = (o, p);
            }
        }
        best.0
    }

    /// Conditioned on a decisive result. Falls back to an even split when
    /// the distribution puts all mass on a tie.
    pub fn decisive(&self) -> Self {
        let total = self.p_win_a + self.p_win_b;
        if total <= 0.0 {
            return OutcomeDistribution { p_win_a: 0.5, p_win_b: 0.5, p_tie: 0.0 };
        }
        let p_win_a = self.p_win_a / total;
        OutcomeDistribution { p_win_a, p_win_b: 1.0 - p_win_a, p_tie: 0.0 }
    }

    /// The same prediction with the pair presented the other way round.
    pub fn swapped(&self) -> Self {
        OutcomeDistribution { p_win_a: self.p_win_b, p_win_b: self.p_win_a, p_tie: self.p_tie }
    }
}

pub(crate) fn check_tie_share(tie_share: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tie_share) {
        return Err(Error::InvalidInput(format!("tie share {tie_share} outside [0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub item: ItemId,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<GaussianRating>,
}

/// Latent score per item, in a deterministic item order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    entries: Vec<ScoreEntry>,
    index: HashMap<ItemId, usize>,
}

impl ScoreTable {
    pub fn new(method: Method) -> Self {
        ScoreTable { method, params: BTreeMap::new(), entries: Vec::new(), index: HashMap::new() }
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn insert(&mut self, item: ItemId, score: f64, rating: Option<GaussianRating>) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score for `{item}`")));
        }
        match self.index.get(&item) {
            Some(&i) => self.entries[i] = ScoreEntry { item, score, rating },
            None => {
                self.index.insert(item.clone(), self.entries.len());
                self.entries.push(ScoreEntry { item, score, rating });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn score(&self, item: &ItemId) -> Option<f64> {
        self.index.get(item).map(|&i| self.entries[i].score)
    }

    pub fn rating(&self, item: &ItemId) -> Option<GaussianRating> {
        self.index.get(item).and_then(|&i| self.entries[i].rating)
    }

    pub fn entry(&self, item: &ItemId) -> Option<&ScoreEntry> {
        self.index.get(item).map(|&i| &self.entries[i])
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn has_ratings(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.rating.is_some())
    }

    /// Replaces every score, keeping items, order and ratings.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<ScoreTable> {
        let mut out = ScoreTable::new(self.method).with_params(self.params.clone());
        for e in &self.entries {
            out.insert(e.item.clone(), f(e.score), e.rating)?;
        }
        Ok(out)
    }

    /// CSV `item,score[,mu,sigma]`; the belief columns appear when every
    /// entry carries a rating.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_rating = self.has_ratings();
        let mut w = csv::Writer::from_writer(out);
        if with_rating {
            w.write_record(["item", "score", "mu", "sigma"])?;
        } else {
            w.write_record(["item", "score"])?;
        }
        for e in &self.entries {
            let mut row = vec![e.item.to_string(), fmt_f64(e.score)];
            if let Some(r) = e.rating.filter(|_| with_rating) {
                row.push(fmt_f64(r.mu));
                row.push(fmt_f64(r.sigma()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the CSV written by [`ScoreTable::write_csv`]. The method tag is
    /// not stored in the file and must be supplied.
    pub fn read_csv<R: Read>(input: R, method: Method) -> Result<ScoreTable> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(ci), Some(cs)) = (col("item"), col("score")) else {
            return Err(Error::Parse { line: 1, message: "header must contain item, score".into() });
        };
        let (cm, csig) = (col("mu"), col("sigma"));
        let mut table = ScoreTable::new(method);
        for row in reader.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let err = |m: String| Error::Parse { line, message: m };
            let num = |i: usize| -> Result<f64> {
                let s = row.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")))
            };
            let item = ItemId::new(row.get(ci).unwrap_or("")).map_err(|e| err(e.to_string()))?;
            let score = num(cs)?;
            let rating = match (cm, csig) {
                (Some(m), Some(s)) => {
                    let sigma = num(s)?;
                    Some(GaussianRating::new(num(m)?, sigma * sigma).map_err(|e| err(e.to_string()))?)
                }
                _ => None,
            };
            table.insert(item, score, rating).map_err(|e| err(e.to_string()))?;
        }
        Ok(table)
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_decisive_splits_proportionally() {
        let d = OutcomeDistribution::from_decisive(0.5, 0.2).unwrap();
        assert!((d.p_win_a - 0.4).abs() < 1e-15 && (d.p_win_b - 0.4).abs() < 1e-15);
        assert_eq!(d.p_tie, 0.2);
        let d = OutcomeDistribution::from_decisive(0.5, 0.25).unwrap();
        assert_eq!((d.p_win_a, d.p_win_b, d.p_tie), (0.375, 0.375, 0.25));
        assert!(OutcomeDistribution::from_decisive(0.5, 1.0).is_err());
        assert!(OutcomeDistribution::from_decisive(0.5, -0.1).is_err());
    }

    #[test]
    fn argmax_tie_break_order() {
        let u = OutcomeDistribution::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(u.argmax(), Outcome::WinA);
        let d = OutcomeDistribution::new(0.25, 0.375, 0.375).unwrap();
        assert_eq!(d.argmax(), Outcome::WinB);
        let t = OutcomeDistribution::new(0.2, 0.2, 0.6).unwrap();
        assert_eq!(t.argmax(), Outcome::Tie);
    }

    #[test]
    fn invalid_vectors_rejected() {
        assert!(OutcomeDistribution::new(0.5, 0.6, 0.0).is_err());
        assert!(OutcomeDistribution::new(-0.1, 1.1, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = ScoreTable::new(Method::TrueSkill);
        t.insert("x".into(), 1.0 / 3.0, Some(GaussianRating::new(1.0 / 3.0, 2.0).unwrap())).unwrap();
        t.insert("y".into(), -7.25, Some(GaussianRating::new(-7.25, 0.5).unwrap())).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("item,score,mu,sigma\n"));
        let back = ScoreTable::read_csv(&buf[..], Method::TrueSkill).unwrap();
        assert_eq!(back.scores(), t.scores());
        let s_back = back.rating(&"x".into()).unwrap().sigma();
        assert_eq!(s_back, 2.0f64.sqrt());
    }

    #[test]
    fn non_finite_rejected() {
        let mut t = ScoreTable::new(Method::Elo);
        assert!(t.insert("x".into(), f64::NAN, None).is_err());
        assert!(t.insert("x".into(), f64::NEG_INFINITY, None).is_err());
    }
}
