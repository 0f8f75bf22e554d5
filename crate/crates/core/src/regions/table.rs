use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::RegionError;
use crate::metric::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Healthy,
    Patient,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Healthy => "healthy",
            Group::Patient => "patient",
        })
    }
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" | "control" | "hc" => Ok(Group::Healthy),
            "patient" | "ms" => Ok(Group::Patient),
            other => Err(format!("unknown group `{other}`")),
        }
    }
}

/// Row class used by the group comparisons and the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowClass {
    /// Healthy volunteer.
    V,
    /// Patient level without lesion.
    Nawm,
    /// Patient level carrying lesion.
    Ms,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortRow {
    pub subject: String,
    pub group: Group,
    pub level: u8,
    /// Indexed by [`Metric::index`].
    pub metrics: [f64; 6],
    pub lesion_fraction: f64,
}

impl CohortRow {
    pub fn class(&self) -> RowClass {
        match self.group {
            Group::Healthy => RowClass::V,
            Group::Patient if self.lesion_fraction == 0.0 => RowClass::Nawm,
            Group::Patient => RowClass::Ms,
        }
    }

    pub fn metric(&self, m: Metric) -> f64 {
        self.metrics[m.index()]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CohortTable {
    rows: Vec<CohortRow>,
}

const HEADER: [&str; 10] = [
    "subject",
    "group",
    "level",
    "fww",
    "stick_ad",
    "ad",
    "fa",
    "md",
    "rd",
    "lesion_fraction",
];

impl CohortTable {
    pub fn rows(&self) -> &[CohortRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: CohortRow) -> Result<(), RegionError> {
        if !(1..=7).contains(&row.level) {
            return Err(RegionError::InvalidLevel(row.level));
        }
        if let Some(m) = Metric::ALL.into_iter().find(|m| !row.metric(*m).is_finite()) {
            return Err(RegionError::NonFinite {
                subject: row.subject,
                level: row.level,
                metric: m,
            });
        }
        if !(0.0..=1.0).contains(&row.lesion_fraction) {
            return Err(RegionError::InvalidThreshold(row.lesion_fraction));
        }
        if self.rows.iter().any(|r| r.subject == row.subject && r.level == row.level) {
            return Err(RegionError::DuplicateRow {
                subject: row.subject,
                level: row.level,
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: CohortTable) -> Result<(), RegionError> {
        other.rows.into_iter().try_for_each(|r| self.push(r))
    }

    /// Rows of class `class`.
    pub fn of_class(&self, class: RowClass) -> impl Iterator<Item = &CohortRow> {
        self.rows.iter().filter(move |r| r.class() == class)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(HEADER)?;
        for r in &self.rows {
            let mut rec = vec![r.subject.clone(), r.group.to_string(), r.level.to_string()];
            rec.extend(Metric::ALL.iter().map(|&m| format!("{:e}", r.metric(m))));
            rec.push(format!("{}", r.lesion_fraction));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), RegionError> {
        let err = |reason: String| RegionError::Table {
            path: path.to_path_buf(),
            reason,
        };
        let file = std::fs::File::create(path).map_err(|e| err(e.to_string()))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| err(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(r: R, path: &Path) -> Result<Self, RegionError> {
        let err = |reason: String| RegionError::Table {
            path: path.to_path_buf(),
            reason,
        };
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers().map_err(|e| err(e.to_string()))?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| err(format!("missing column `{name}`")))
        };
        let idx: Vec<usize> = HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
        let mut table = CohortTable::default();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let field = |i: usize| rec.get(idx[i]).unwrap_or("");
            let num = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .map_err(|_| err(format!("row {}: non-numeric {} `{}`", line + 2, HEADER[i], field(i))))
            };
            let group = field(1)
                .parse::<Group>()
                .map_err(|e| err(format!("row {}: {e}", line + 2)))?;
            let level = field(2)
                .trim_start_matches(['C', 'c'])
                .parse::<u8>()
                .map_err(|_| err(format!("row {}: bad level `{}`", line + 2, field(2))))?;
            let mut metrics = [0.0; 6];
            for (k, m) in metrics.iter_mut().enumerate() {
                *m = num(3 + k)?;
            }
            table.push(CohortRow {
                subject: field(0).to_string(),
                group,
                level,
                metrics,
                lesion_fraction: num(9)?,
            })?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RegionError> {
        let file = std::fs::File::open(path).map_err(|e| RegionError::Table {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}
