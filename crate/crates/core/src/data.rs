//! Aggregate-data records, CSV ingestion and two-arm expansion.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec};

/// How many units a study's mean is averaged over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Size {
    Subjects(u64),
    PersonTime(f64),
}

impl Size {
    pub fn value(&self) -> f64 {
        match *self {
            Size::Subjects(n) => n as f64,
            Size::PersonTime(t) => t,
        }
    }
}

/// One aggregate observation: a study, or one arm of a two-arm study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub study_id: String,
    pub record_id: String,
    /// Treatment indicator for two-arm data.
    pub arm: Option<u8>,
    /// Covariates, intercept first.
    pub x: Vec<f64>,
    pub size: Size,
    /// Sample mean; events per unit person-time for Poisson rate records.
    pub ybar: f64,
    pub s2: Option<f64>,
    pub phi_hat: Option<f64>,
}

impl StudyRecord {
    pub fn weight(&self) -> f64 {
        self.size.value()
    }

    /// Event total for count families.
    pub fn events(&self) -> f64 {
        self.ybar * self.weight()
    }

    pub fn validate(&self, family: FamilyKind) -> Result<()> {
        let fail = |message: String| {
            Err(Error::InvalidRecord {
                record: self.record_id.clone(),
                message,
            })
        };
        if self.x.iter().any(|v| !v.is_finite()) {
            return fail("non-finite covariate".into());
        }
        if !self.ybar.is_finite() {
            return fail("non-finite mean".into());
        }
        let w = self.weight();
        if !(w > 0.0) || !w.is_finite() {
            return fail(format!("size must be positive, got {w}"));
        }
        match family {
            FamilyKind::Binomial => {
                if !(0.0..=1.0).contains(&self.ybar) {
                    return fail(format!("binomial mean {} outside [0, 1]", self.ybar));
                }
                let events = self.events();
                if (events - events.round()).abs() > 1e-9 {
                    return fail(format!("n * ybar = {events} is not an integer"));
                }
            }
            FamilyKind::Poisson => {
                if self.ybar < 0.0 {
                    return fail(format!("negative rate {}", self.ybar));
                }
            }
            FamilyKind::Gamma => {
                if !(self.ybar > 0.0) {
                    return fail(format!("gamma mean must be positive, got {}", self.ybar));
                }
                let Some(s2) = self.s2 else {
                    return fail("gamma records need a sample variance".into());
                };
                if !(s2 > 0.0) {
                    return fail(format!("gamma variance must be positive, got {s2}"));
                }
                if let Some(phi) = self.phi_hat {
                    let expected = s2 / (self.ybar * self.ybar);
                    if (phi - expected).abs() > 1e-12 * expected.max(1.0) {
                        return fail(format!("phi_hat {phi} differs from s2/ybar^2 = {expected}"));
                    }
                }
            }
            FamilyKind::Normal => match self.s2 {
                Some(v) if v > 0.0 => {}
                _ => return fail("normal records need a positive variance".into()),
            },
        }
        Ok(())
    }
}

/// An ordered collection of records sharing one outcome family.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: FamilySpec,
    pub records: Vec<StudyRecord>,
    /// Column names for `x`, intercept first.
    pub covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        family: FamilySpec,
        records: Vec<StudyRecord>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        if records.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "at least 2 records are required, got {}",
                records.len()
            )));
        }
        let p = covariate_names.len();
        for r in &records {
            if r.x.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "record `{}` has {} covariates, expected {p}",
                    r.record_id,
                    r.x.len()
                )));
            }
            r.validate(family.kind())?;
        }
        Ok(Self {
            family,
            records,
            covariate_names,
        })
    }

    /// Number of records (arms count separately).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Covariate dimension `p`.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// Number of distinct studies.
    pub fn study_count(&self) -> usize {
        let mut seen: Vec<&str> = self.records.iter().map(|r| r.study_id.as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Index of the arm indicator in `x`, when the data are two-arm.
    pub fn arm_column(&self) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == ARM_COLUMN)
    }

    /// Treatment/control record pairs in study order, when every study
    /// supplies exactly one record per arm.
    pub fn arm_pairs(&self) -> Option<Vec<(usize, usize)>> {
        self.arm_column()?;
        let mut order: Vec<&str> = Vec::new();
        let mut arms: HashMap<&str, (Option<usize>, Option<usize>)> = HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            let entry = arms.entry(r.study_id.as_str()).or_insert_with(|| {
                order.push(r.study_id.as_str());
                (None, None)
            });
            let slot = match r.arm? {
                1 => &mut entry.0,
                _ => &mut entry.1,
            };
            if slot.is_some() {
                return None;
            }
            *slot = Some(i);
        }
        order
            .iter()
            .map(|s| match arms[s] {
                (Some(t), Some(c)) => Some((t, c)),
                _ => None,
            })
            .collect()
    }
}

pub const INTERCEPT: &str = "(Intercept)";
pub const ARM_COLUMN: &str = "arm";

/// Column names used by [`load_csv`]. Defaults follow the documented schemas.
#[derive(Debug, Clone)]
pub struct Schema {
    pub study: String,
    pub arm: String,
    pub n: String,
    pub events: String,
    pub person_time: String,
    pub mean: String,
    pub sd: String,
    pub estimate: String,
    pub variance: String,
    /// Covariate columns; `None` takes every column not claimed above.
    pub covariates: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            study: "study".into(),
            arm: "arm".into(),
            n: "n".into(),
            events: "events".into(),
            person_time: "person_time".into(),
            mean: "mean".into(),
            sd: "sd".into(),
            estimate: "estimate".into(),
            variance: "variance".into(),
            covariates: None,
        }
    }
}

impl Schema {
    fn required(&self, family: FamilyKind) -> Vec<&str> {
        match family {
            FamilyKind::Binomial => vec![&self.study, &self.n, &self.events],
            FamilyKind::Poisson => vec![&self.study, &self.person_time, &self.events],
            FamilyKind::Gamma => vec![&self.study, &self.n, &self.mean, &self.sd],
            FamilyKind::Normal => vec![&self.study, &self.estimate, &self.variance],
        }
    }

    fn claimed(&self) -> [&str; 9] {
        [
            &self.study,
            &self.arm,
            &self.n,
            &self.events,
            &self.person_time,
            &self.mean,
            &self.sd,
            &self.estimate,
            &self.variance,
        ]
    }
}

pub fn load_csv(path: impl AsRef<Path>, family: FamilySpec, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, family, schema)
}

/// Parses a dataset from CSV text. A header row is required.
pub fn read_csv<R: Read>(reader: R, family: FamilySpec, schema: &Schema) -> Result<Dataset> {
    let kind = family.kind();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);

    for name in schema.required(kind) {
        if col(name).is_none() {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let arm_idx = match kind {
        FamilyKind::Binomial | FamilyKind::Gamma => col(&schema.arm),
        _ => None,
    };
    let covariate_cols: Vec<(String, usize)> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|n| col(n).map(|i| (n.clone(), i)).ok_or_else(|| Error::MissingColumn(n.clone())))
            .collect::<Result<_>>()?,
        None => {
            let claimed = schema.claimed();
            headers
                .iter()
                .enumerate()
                .filter(|(_, h)| !claimed.contains(h))
                .map(|(i, h)| (h.to_string(), i))
                .collect()
        }
    };

    let mut covariate_names = vec![INTERCEPT.to_string()];
    if arm_idx.is_some() {
        covariate_names.push(ARM_COLUMN.to_string());
    }
    covariate_names.extend(covariate_cols.iter().map(|(n, _)| n.clone()));

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |message: String| Error::Parse { row: line, message };
        let field = |name: &str| -> Result<&str> {
            let i = col(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            row.get(i).ok_or_else(|| perr(format!("missing value for `{name}`")))
        };
        let num = |name: &str| -> Result<f64> {
            let s = field(name)?;
            let v: f64 = s
                .parse()
                .map_err(|_| perr(format!("`{name}` is not numeric: `{s}`")))?;
            if !v.is_finite() {
                return Err(perr(format!("`{name}` is not finite: `{s}`")));
            }
            Ok(v)
        };
        let count = |name: &str| -> Result<u64> {
            let v = num(name)?;
            if v < 0.0 || (v - v.round()).abs() > 1e-9 {
                return Err(perr(format!("`{name}` must be a non-negative integer, got {v}")));
            }
            Ok(v.round() as u64)
        };

        let study = field(&schema.study)?.to_string();
        let arm = match arm_idx {
            Some(i) => Some(parse_arm(row.get(i).unwrap_or("")).ok_or_else(|| {
                perr(format!("`{}` must be 0/1 or control/treatment", schema.arm))
            })?),
            None => None,
        };
        let mut x = vec![1.0];
        if let Some(a) = arm {
            x.push(a as f64);
        }
        for (name, _) in &covariate_cols {
            x.push(num(name)?);
        }
        let record_id = match arm {
            Some(a) => format!("{study}:{a}"),
            None => study.clone(),
        };

        let record = match kind {
            FamilyKind::Binomial => {
                let n = count(&schema.n)?;
                let events = count(&schema.events)?;
                if n == 0 || events > n {
                    return Err(perr(format!("need 0 <= events <= n and n > 0, got {events}/{n}")));
                }
                StudyRecord {
                    study_id: study,
                    record_id,
                    arm,
                    x,
                    size: Size::Subjects(n),
                    ybar: events as f64 / n as f64,
                    s2: None,
                    phi_hat: Some(1.0),
                }
            }
            FamilyKind::Poisson => {
                let t = num(&schema.person_time)?;
                let events = num(&schema.events)?;
                if !(t > 0.0) || events < 0.0 {
                    return Err(perr(format!("need person_time > 0 and events >= 0, got {t}, {events}")));
                }
                StudyRecord {
                    study_id: study,
                    record_id,
                    arm,
                    x,
                    size: Size::PersonTime(t),
                    ybar: events / t,
                    s2: None,
                    phi_hat: Some(1.0),
                }
            }
            FamilyKind::Gamma => {
                let n = count(&schema.n)?;
                let mean = num(&schema.mean)?;
                let sd = num(&schema.sd)?;
                if n == 0 || !(mean > 0.0) || !(sd > 0.0) {
                    return Err(perr(format!("need n > 0, mean > 0, sd > 0, got {n}, {mean}, {sd}")));
                }
                let s2 = sd * sd;
                StudyRecord {
                    study_id: study,
                    record_id,
                    arm,
                    x,
                    size: Size::Subjects(n),
                    ybar: mean,
                    s2: Some(s2),
                    phi_hat: Some(s2 / (mean * mean)),
                }
            }
            FamilyKind::Normal => {
                let est = num(&schema.estimate)?;
                let var = num(&schema.variance)?;
                if !(var > 0.0) {
                    return Err(perr(format!("variance must be positive, got {var}")));
                }
                StudyRecord {
                    study_id: study,
                    record_id,
                    arm,
                    x,
                    size: Size::Subjects(1),
                    ybar: est,
                    s2: Some(var),
                    phi_hat: Some(var),
                }
            }
        };
        record.validate(kind).map_err(|e| perr(e.to_string()))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Dataset::new(family, records, covariate_names)
}

fn parse_arm(s: &str) -> Option<u8> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "t" | "treatment" | "treated" => Some(1),
        "0" | "c" | "control" => Some(0),
        _ => None,
    }
}

/// Formats with 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", v);
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, v);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes a dataset in the schema [`load_csv`] reads for its family.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let kind = dataset.family.kind();
    let mut w = csv::Writer::from_writer(writer);
    let arm_col = dataset.arm_column();
    let extra: Vec<usize> = (1..dataset.p()).filter(|&i| Some(i) != arm_col).collect();

    let mut header: Vec<String> = vec!["study".into()];
    if arm_col.is_some() {
        header.push("arm".into());
    }
    header.extend(
        match kind {
            FamilyKind::Binomial => ["n", "events"].as_slice(),
            FamilyKind::Poisson => &["person_time", "events"],
            FamilyKind::Gamma => &["n", "mean", "sd"],
            FamilyKind::Normal => &["estimate", "variance"],
        }
        .iter()
        .map(|s| s.to_string()),
    );
    header.extend(extra.iter().map(|&i| dataset.covariate_names[i].clone()));
    w.write_record(&header)?;

    for r in &dataset.records {
        let mut row = vec![r.study_id.clone()];
        if arm_col.is_some() {
            row.push(r.arm.unwrap_or(0).to_string());
        }
        match kind {
            FamilyKind::Binomial => {
                row.push(format_sig12(r.weight()));
                row.push(format_sig12(r.events().round()));
            }
            FamilyKind::Poisson => {
                row.push(format_sig12(r.weight()));
                row.push(format_sig12(r.events()));
            }
            FamilyKind::Gamma => {
                row.push(format_sig12(r.weight()));
                row.push(format_sig12(r.ybar));
                row.push(format_sig12(r.s2.unwrap_or(f64::NAN).sqrt()));
            }
            FamilyKind::Normal => {
                row.push(format_sig12(r.ybar));
                row.push(format_sig12(r.s2.unwrap_or(f64::NAN)));
            }
        }
        row.extend(extra.iter().map(|&i| format_sig12(r.x[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One arm of a two-arm study summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSummary {
    /// Subjects (or person-time for Poisson).
    pub size: f64,
    /// Event count for binomial/Poisson, sample mean for gamma/normal.
    pub outcome: f64,
    /// Sample SD for gamma; within-arm variance of the estimate for normal.
    pub spread: Option<f64>,
}

/// A study reported as treatment and control summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoArmRow {
    pub study: String,
    pub treatment: Option<ArmSummary>,
    pub control: Option<ArmSummary>,
    /// Study-level covariates shared by both arms.
    pub covariates: Vec<f64>,
}

/// Expands two-arm summaries into one record per arm with covariates
/// `(1, z, study covariates...)`. Each arm carries its own random effect.
pub fn expand_two_arm(
    family: FamilySpec,
    rows: &[TwoArmRow],
    covariate_names: &[String],
) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut records = Vec::with_capacity(2 * rows.len());
    for row in rows {
        let (Some(t), Some(c)) = (row.treatment, row.control) else {
            return Err(Error::MissingArm(row.study.clone()));
        };
        for (z, arm) in [(1u8, t), (0u8, c)] {
            let mut x = vec![1.0, z as f64];
            x.extend_from_slice(&row.covariates);
            records.push(arm_record(family.kind(), &row.study, z, x, arm)?);
        }
    }
    let mut names = vec![INTERCEPT.to_string(), ARM_COLUMN.to_string()];
    names.extend(covariate_names.iter().cloned());
    Dataset::new(family, records, names)
}

fn arm_record(kind: FamilyKind, study: &str, z: u8, x: Vec<f64>, arm: ArmSummary) -> Result<StudyRecord> {
    let record_id = format!("{study}:{z}");
    let bad = |message: &str| Error::InvalidRecord {
        record: record_id.clone(),
        message: message.to_string(),
    };
    let n = || -> Result<u64> {
        if arm.size >= 1.0 && (arm.size - arm.size.round()).abs() < 1e-9 {
            Ok(arm.size.round() as u64)
        } else {
            Err(bad("arm size must be a positive integer"))
        }
    };
    let (size, ybar, s2, phi_hat) = match kind {
        FamilyKind::Binomial => {
            let n = n()?;
            (Size::Subjects(n), arm.outcome / n as f64, None, Some(1.0))
        }
        FamilyKind::Poisson => (
            Size::PersonTime(arm.size),
            arm.outcome / arm.size,
            None,
            Some(1.0),
        ),
        FamilyKind::Gamma => {
            let sd = arm.spread.ok_or_else(|| bad("gamma arms need an SD"))?;
            let s2 = sd * sd;
            (
                Size::Subjects(n()?),
                arm.outcome,
                Some(s2),
                Some(s2 / (arm.outcome * arm.outcome)),
            )
        }
        FamilyKind::Normal => {
            let v = arm.spread.ok_or_else(|| bad("normal arms need a variance"))?;
            (Size::Subjects(1), arm.outcome, Some(v), Some(v))
        }
    };
    let record = StudyRecord {
        study_id: study.to_string(),
        record_id,
        arm: Some(z),
        x,
        size,
        ybar,
        s2,
        phi_hat,
    };
    record.validate(kind)?;
    Ok(record)
}

/// Sets the plug-in dispersion: `s^2 / ybar^2` for gamma, 1 for binomial and
/// Poisson, the reported variance for normal.
pub fn plugin_dispersion(record: &StudyRecord, family: FamilySpec) -> Result<StudyRecord> {
    let mut out = record.clone();
    out.phi_hat = Some(match family.kind() {
        FamilyKind::Binomial | FamilyKind::Poisson => 1.0,
        FamilyKind::Gamma => {
            let s2 = record.s2.ok_or_else(|| Error::InvalidRecord {
                record: record.record_id.clone(),
                message: "gamma plug-in dispersion needs a sample variance".into(),
            })?;
            if !(record.ybar > 0.0) || !(s2 > 0.0) {
                return Err(Error::InvalidRecord {
                    record: record.record_id.clone(),
                    message: "gamma plug-in dispersion needs ybar > 0 and s2 > 0".into(),
                });
            }
            s2 / (record.ybar * record.ybar)
        }
        FamilyKind::Normal => record.s2.ok_or_else(|| Error::InvalidRecord {
            record: record.record_id.clone(),
            message: "normal records need a variance".into(),
        })?,
    });
    Ok(out)
}

/// Bundled datasets, keyed by id.
pub mod bundled {
    use super::*;

    pub const IDS: &[&str] = &["long2020"];

    const LONG2020: &str = include_str!("../data/long2020.csv");

    /// ICU length of stay, surgical vs conservative management: five
    /// two-arm studies, gamma outcome.
    pub fn long2020() -> Dataset {
        read_csv(LONG2020.as_bytes(), FamilySpec::gamma(), &Schema::default())
            .expect("bundled dataset parses")
    }

    pub fn by_id(id: &str) -> Option<Dataset> {
        match id {
            "long2020" => Some(long2020()),
            _ => None,
        }
    }
}
