//! Safe/unsafe labels from scores: a band of `alpha` standard deviations
//! around the mean is neutral, and items whose belief is still too wide can
//! be filtered out first.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::scores::{fmt_f64, ScoreTable};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    #[default]
    Population,
    Sample,
}

impl FromStr for StdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population" => Ok(StdMode::Population),
            "sample" => Ok(StdMode::Sample),
            _ => Err(Error::InvalidInput(format!("unknown std mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelParams {
    pub alpha: f64,
    /// Items are kept when `sigma <= sigma_filter_ratio * sigma0`.
    pub sigma_filter_ratio: f64,
    pub std_mode: StdMode,
}

impl Default for LabelParams {
    fn default() -> Self {
        LabelParams { alpha: 0.0, sigma_filter_ratio: 5.0 / 6.0, std_mode: StdMode::Population }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Safe,
    Unsafe,
    Neutral,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Safe => "safe",
            Label::Unsafe => "unsafe",
            Label::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "safe" => Ok(Label::Safe),
            "unsafe" => Ok(Label::Unsafe),
            "neutral" => Ok(Label::Neutral),
            _ => Err(Error::InvalidInput(format!("unknown label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub item: ItemId,
    pub score: f64,
    pub label: Label,
}

/// `(s_L, s_H) = mean ∓ alpha * std`.
pub fn thresholds(scores: &[f64], alpha: f64, std_mode: StdMode) -> Result<(f64, f64)> {
    if scores.len() < 2 {
        return Err(Error::InvalidInput("thresholds need at least 2 scores".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha {alpha} must be non-negative")));
    }
    let m = mean(scores);
    let sd = std_dev(scores, std_mode == StdMode::Sample);
    Ok((m - alpha * sd, m + alpha * sd))
}

/// Labels every item of `scores` that passes the uncertainty filter.
/// The filter applies only when `ratings` is given; it must then hold a
/// belief for every scored item. Thresholds are computed over the items
/// that pass.
pub fn label_items(
    scores: &ScoreTable,
    ratings: Option<&ScoreTable>,
    params: &LabelParams,
    sigma0: f64,
) -> Result<Vec<LabeledItem>> {
    let mut kept = Vec::with_capacity(scores.len());
    for e in scores.entries() {
        if let Some(r) = ratings {
            if !(sigma0 > 0.0) {
                return Err(Error::InvalidInput(format!("sigma0 {sigma0} must be positive")));
            }
            if !(params.sigma_filter_ratio > 0.0 && params.sigma_filter_ratio <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "sigma filter ratio {} outside (0, 1]",
                    params.sigma_filter_ratio
                )));
            }
            let belief = r
                .rating(&e.item)
                .ok_or_else(|| Error::InvalidInput(format!("no rating for item {}", e.item)))?;
            if belief.sigma() > params.sigma_filter_ratio * sigma0 {
                continue;
            }
        }
        kept.push(e);
    }
    if kept.is_empty() {
        return Ok(Vec::new());
    }
    if kept.len() == 1 {
        return Err(Error::InvalidInput("only one item passed the filter; thresholds need 2".into()));
    }
    let values: Vec<f64> = kept.iter().map(|e| e.score).collect();
    let (lo, hi) = thresholds(&values, params.alpha, params.std_mode)?;
    Ok(kept
        .into_iter()
        .map(|e| {
            let label = if e.score > hi {
                Label::Safe
            } else if e.score < lo {
                Label::Unsafe
            } else {
                Label::Neutral
            };
            LabeledItem { item: e.item.clone(), score: e.score, label }
        })
        .collect())
}

/// CSV `item,score,label` in input order.
pub fn write_labels<W: Write>(labels: &[LabeledItem], out: W, drop_neutral: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item", "score", "label"])?;
    for l in labels {
        if drop_neutral && l.label == Label::Neutral {
            continue;
        }
        w.write_record([l.item.as_str(), &fmt_f64(l.score), l.label.as_str()])?;
    }
    w.flush().map_err(Error::Stream)?;
    Ok(())
}

pub fn export_labels(labels: &[LabeledItem], path: impl AsRef<Path>, drop_neutral: bool) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_labels(labels, std::io::BufWriter::new(file), drop_neutral)
}

pub fn read_labels<R: Read>(input: R) -> Result<Vec<LabeledItem>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["item", "score", "label"] {
        return Err(Error::Parse { line: 1, message: "expected header item,score,label".into() });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |message: String| Error::Parse { line, message };
        let item = ItemId::new(&row[0]).map_err(|e| bad(e.to_string()))?;
        let score = row[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let label = row[2].parse::<Label>().map_err(|e| bad(e.to_string()))?;
        out.push(LabeledItem { item, score, label });
    }
    Ok(out)
}

pub fn read_labels_file(path: impl AsRef<Path>) -> Result<Vec<LabeledItem>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{GaussianRating, Method};

    fn table(scores: &[(&str, f64)]) -> ScoreTable {
        let mut t = ScoreTable::new(Method::TrueSkill);
        for &(id, s) in scores {
            t.insert(id.into(), s, None).unwrap();
        }
        t
    }

    #[test]
    fn threshold_examples() {
        let (lo, hi) = thresholds(&[3.0, 1.0, 2.0, 7.0], 0.0, StdMode::Population).unwrap();
        assert_eq!((lo, hi), (3.25, 3.25));
        let (lo, hi) = thresholds(&[0.0, 1.0, 2.0], 1.0, StdMode::Population).unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((lo - (1.0 - sd)).abs() < 1e-15 && (hi - (1.0 + sd)).abs() < 1e-15);
        assert!((sd - 0.816_496_580_927_726).abs() < 1e-15);
        let (lo, hi) = thresholds(&[0.0, 1.0, 2.0], 1.0, StdMode::Sample).unwrap();
        assert_eq!((lo, hi), (0.0, 2.0));
        assert!(thresholds(&[1.0], 0.0, StdMode::Population).is_err());
        assert!(thresholds(&[1.0, 2.0], -1.0, StdMode::Population).is_err());
    }

    #[test]
    fn alpha_zero_labels_by_side_of_mean() {
        let t = table(&[("a", -1.0), ("b", 3.0), ("c", 0.0), ("d", 1.0), ("e", 2.0)]);
        let labels = label_items(&t, None, &LabelParams::default(), 25.0 / 3.0).unwrap();
        let got: Vec<Label> = labels.iter().map(|l| l.label).collect();
        assert_eq!(got, vec![Label::Unsafe, Label::Safe, Label::Unsafe, Label::Neutral, Label::Safe]);
    }

    #[test]
    fn sigma_filter() {
        let s0 = 25.0 / 3.0;
        let mut ratings = ScoreTable::new(Method::TrueSkill);
        for (id, sigma) in [("a", s0), ("b", s0), ("c", s0)] {
            ratings.insert(id.into(), 25.0, Some(GaussianRating::new(25.0, sigma * sigma).unwrap())).unwrap();
        }
        let t = table(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        assert!(label_items(&t, Some(&ratings), &LabelParams::default(), s0).unwrap().is_empty());

        let mut narrow = ScoreTable::new(Method::TrueSkill);
        for (id, sigma) in [("a", 1.0), ("b", 6.0), ("c", s0)] {
            narrow.insert(id.into(), 25.0, Some(GaussianRating::new(25.0, sigma * sigma).unwrap())).unwrap();
        }
        let labels = label_items(&t, Some(&narrow), &LabelParams::default(), s0).unwrap();
        assert_eq!(labels.iter().map(|l| l.item.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let strict = LabelParams { sigma_filter_ratio: 1.0 / 6.0, ..Default::default() };
        assert!(label_items(&t, Some(&narrow), &strict, s0).is_err());
        assert!(label_items(&t, Some(&narrow), &LabelParams::default(), 0.0).is_err());
        let partial = table(&[("a", 1.0)]);
        assert!(label_items(&t, Some(&partial), &LabelParams::default(), s0).is_err());
    }

    #[test]
    fn export_round_trip() {
        let t = table(&[("a", -1.0), ("b", 0.0), ("c", 1.0)]);
        let labels = label_items(&t, None, &LabelParams { alpha: 0.5, ..Default::default() }, 1.0).unwrap();
        assert_eq!(labels[1].label, Label::Neutral);

        let mut buf = Vec::new();
        write_labels(&labels, &mut buf, false).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);

        let mut buf = Vec::new();
        write_labels(&labels, &mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);

        let mut buf = Vec::new();
        write_labels(&[], &mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "item,score,label\n");
    }
}
