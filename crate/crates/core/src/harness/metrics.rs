use std::path::Path;

use crate::error::{Error, Result};

pub const TRAINING_COLUMNS: [&str; 8] = [
    "episode",
    "train_reward",
    "test_reward",
    "mean_peace",
    "sum_peace",
    "mean_loss",
    "mean_penalty",
    "epsilon",
];

pub const DUEL_COLUMNS: [&str; 3] = ["round", "score_a", "score_b"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub train_reward: f64,
    pub test_reward: f64,
    /// Mean effect estimate over the episode's minibatches.
    pub mean_peace: f64,
    pub sum_peace: f64,
    pub mean_loss: f64,
    pub mean_penalty: f64,
    /// Exploration rate in effect during the episode.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<EpisodeRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuelRow {
    pub round: usize,
    pub score_a: f64,
    pub score_b: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DuelResult {
    pub rows: Vec<DuelRow>,
}

impl DuelResult {
    pub fn mean_a(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.score_a))
    }

    pub fn mean_b(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.score_b))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Types that serialize as one CSV table with a fixed header.
pub trait CsvTable: Sized {
    const HEADER: &'static [&'static str];
    fn records(&self) -> Vec<Vec<f64>>;
    fn from_records(records: Vec<Vec<f64>>) -> Result<Self>;
}

impl CsvTable for MetricsLog {
    const HEADER: &'static [&'static str] = &TRAINING_COLUMNS;

    fn records(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.episode as f64,
                    r.train_reward,
                    r.test_reward,
                    r.mean_peace,
                    r.sum_peace,
                    r.mean_loss,
                    r.mean_penalty,
                    r.epsilon,
                ]
            })
            .collect()
    }

    fn from_records(records: Vec<Vec<f64>>) -> Result<Self> {
        let rows = records
            .into_iter()
            .map(|r| EpisodeRow {
                episode: r[0] as usize,
                train_reward: r[1],
                test_reward: r[2],
                mean_peace: r[3],
                sum_peace: r[4],
                mean_loss: r[5],
                mean_penalty: r[6],
                epsilon: r[7],
            })
            .collect();
        Ok(Self { rows })
    }
}

impl CsvTable for DuelResult {
    const HEADER: &'static [&'static str] = &DUEL_COLUMNS;

    fn records(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.round as f64, r.score_a, r.score_b])
            .collect()
    }

    fn from_records(records: Vec<Vec<f64>>) -> Result<Self> {
        let rows = records
            .into_iter()
            .map(|r| DuelRow {
                round: r[0] as usize,
                score_a: r[1],
                score_b: r[2],
            })
            .collect();
        Ok(Self { rows })
    }
}

/// Writes the header and every row. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_metrics<T: CsvTable>(table: &T, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(T::HEADER).map_err(|e| Error::csv(path, e))?;
    for rec in table.records() {
        w.write_record(rec.iter().map(|v| v.to_string()))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics<T: CsvTable>(path: &Path) -> Result<T> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    for col in T::HEADER {
        if !header.iter().any(|h| h == *col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header {}", T::HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let values = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("not a number: `{f}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(values);
    }
    T::from_records(records)
}
