//! Output records with stable formatting for JSON and CSV emission.

use std::fs;
use std::path::Path;

use serde::Serialize;

use padic_hardy_core::hardy::{CharConstant, ConstantKind, McEstimate, OperatorKind, OperatorResult};
use padic_hardy_core::herz::MhNorm;
use padic_hardy_core::sharpness::{MhRatioReport, SweepReport};

use crate::config::Failure;

/// Round to nine significant digits so reruns with the same inputs emit
/// byte-identical reports.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Serialize)]
pub struct ConstantRecord {
    pub kind: ConstantKind,
    pub p: u64,
    pub n: u32,
    pub constant: f64,
    pub per_slot: Vec<f64>,
    pub table_part: f64,
}

impl ConstantRecord {
    pub fn new(kind: ConstantKind, p: u64, n: u32, c: &CharConstant) -> Self {
        Self {
            kind,
            p,
            n,
            constant: sig9(c.value),
            per_slot: c.per_slot.iter().copied().map(sig9).collect(),
            table_part: sig9(c.table_part),
        }
    }

    fn csv(&self) -> String {
        let kind = serde_plain_kind(self.kind);
        let mut out = String::from("kind,p,n,constant,table_part\n");
        out.push_str(&format!(
            "{},{},{},{:.8e},{:.8e}\n",
            kind, self.p, self.n, self.constant, self.table_part
        ));
        out
    }
}

fn serde_plain_kind(kind: ConstantKind) -> &'static str {
    match kind {
        ConstantKind::Herz => "herz",
        ConstantKind::HerzDual => "herz-dual",
        ConstantKind::MorreyHerz => "morrey-herz",
        ConstantKind::MorreyHerzDual => "morrey-herz-dual",
    }
}

#[derive(Debug, Serialize)]
pub struct ApplyRecord {
    pub direction: OperatorKind,
    pub values: Vec<ShellValueRecord>,
    pub divergent_shells: Vec<i64>,
}

#[derive(Debug, Serialize)]
pub struct ShellValueRecord {
    pub shell: i64,
    pub value: f64,
}

impl ApplyRecord {
    pub fn new(result: &OperatorResult) -> Self {
        Self {
            direction: result.kind,
            values: result
                .values
                .iter()
                .map(|sv| ShellValueRecord {
                    shell: sv.shell,
                    value: sig9(sv.value),
                })
                .collect(),
            divergent_shells: result.divergent_shells.clone(),
        }
    }

    fn csv(&self) -> String {
        let mut out = String::from("shell,value\n");
        for sv in &self.values {
            out.push_str(&format!("{},{:.8e}\n", sv.shell, sv.value));
        }
        for k in &self.divergent_shells {
            out.push_str(&format!("{k},divergent\n"));
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct NormRecord {
    pub space: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attainment: Option<serde_json::Value>,
}

impl NormRecord {
    pub fn plain(space: &str, value: f64) -> Self {
        Self {
            space: space.to_string(),
            value: sig9(value),
            attainment: None,
        }
    }

    pub fn windowed(space: &str, norm: &MhNorm) -> Result<Self, Failure> {
        let attainment = serde_json::to_value(&norm.attainment)
            .map_err(|e| Failure::config(format!("serializing attainment: {e}")))?;
        Ok(Self {
            space: space.to_string(),
            value: sig9(norm.value),
            attainment: Some(attainment),
        })
    }

    fn csv(&self) -> String {
        format!("space,value\n{},{:.8e}\n", self.space, self.value)
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRecord {
    pub kind: ConstantKind,
    pub constant: f64,
    pub rows: Vec<SweepRowRecord>,
    pub all_bounded: bool,
    pub final_gap: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepRowRecord {
    pub level: u32,
    pub epsilon: f64,
    pub ratio: f64,
    pub relative_gap: f64,
    pub bound_satisfied: bool,
}

impl SweepRecord {
    pub fn new(kind: ConstantKind, report: &SweepReport) -> Self {
        Self {
            kind,
            constant: sig9(report.constant),
            rows: report
                .rows
                .iter()
                .map(|row| SweepRowRecord {
                    level: row.level,
                    epsilon: sig9(row.epsilon),
                    ratio: sig9(row.ratio),
                    relative_gap: sig9(row.relative_gap),
                    bound_satisfied: row.bound_satisfied,
                })
                .collect(),
            all_bounded: report.all_bounded(),
            final_gap: sig9(report.final_gap()),
        }
    }

    fn csv(&self, report: &SweepReport) -> String {
        report.csv()
    }
}

#[derive(Debug, Serialize)]
pub struct MorreyRecord {
    pub case: String,
    pub ratio: f64,
    pub constant: f64,
    pub relative_gap: f64,
    pub extracted_exponent: f64,
    pub warnings: Vec<String>,
}

impl MorreyRecord {
    pub fn new(report: &MhRatioReport) -> Result<Self, Failure> {
        let case = serde_json::to_value(report.case)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .ok_or_else(|| Failure::config("serializing case label"))?;
        Ok(Self {
            case,
            ratio: sig9(report.ratio),
            constant: sig9(report.constant),
            relative_gap: sig9(report.relative_gap),
            extracted_exponent: sig9(report.extracted_exponent),
            warnings: report.warnings.clone(),
        })
    }

    fn csv(&self) -> String {
        let status = if self.relative_gap.abs() <= 1e-9 {
            "ok"
        } else {
            "violated"
        };
        let mut out = String::from("case,ratio,constant,relative_gap,status\n");
        out.push_str(&format!(
            "{},{:.8e},{:.8e},{:.8e},{}\n",
            self.case, self.ratio, self.constant, self.relative_gap, status
        ));
        out
    }
}

#[derive(Debug, Serialize)]
pub struct McRecord {
    pub estimate: f64,
    pub stat_stderr: f64,
    pub tail_bound: f64,
    pub total_stderr: f64,
    pub constant: f64,
    pub sigma: f64,
    pub strata: usize,
    pub samples: usize,
}

impl McRecord {
    pub fn new(est: &McEstimate, constant: f64) -> Self {
        let sigma = if est.total_stderr > 0.0 {
            (est.estimate - constant).abs() / est.total_stderr
        } else if est.estimate == constant {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            estimate: sig9(est.estimate),
            stat_stderr: sig9(est.stat_stderr),
            tail_bound: sig9(est.tail_bound),
            total_stderr: sig9(est.total_stderr),
            constant: sig9(constant),
            sigma: sig9(sigma),
            strata: est.strata,
            samples: est.samples,
        }
    }

    fn csv(&self) -> String {
        let mut out =
            String::from("estimate,stat_stderr,tail_bound,total_stderr,constant,sigma\n");
        out.push_str(&format!(
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
            self.estimate,
            self.stat_stderr,
            self.tail_bound,
            self.total_stderr,
            self.constant,
            self.sigma
        ));
        out
    }
}

pub enum Report<'a> {
    Constant(ConstantRecord),
    Apply(ApplyRecord),
    Norm(NormRecord),
    Sweep(SweepRecord, &'a SweepReport),
    Morrey(MorreyRecord),
    Mc(McRecord),
}

impl Report<'_> {
    fn render(&self, format: Format) -> Result<String, Failure> {
        match format {
            Format::Json => {
                let value = match self {
                    Report::Constant(r) => serde_json::to_string_pretty(r),
                    Report::Apply(r) => serde_json::to_string_pretty(r),
                    Report::Norm(r) => serde_json::to_string_pretty(r),
                    Report::Sweep(r, _) => serde_json::to_string_pretty(r),
                    Report::Morrey(r) => serde_json::to_string_pretty(r),
                    Report::Mc(r) => serde_json::to_string_pretty(r),
                };
                value
                    .map(|mut s| {
                        s.push('\n');
                        s
                    })
                    .map_err(|e| Failure::config(format!("serializing report: {e}")))
            }
            Format::Csv => Ok(match self {
                Report::Constant(r) => r.csv(),
                Report::Apply(r) => r.csv(),
                Report::Norm(r) => r.csv(),
                Report::Sweep(r, report) => r.csv(report),
                Report::Morrey(r) => r.csv(),
                Report::Mc(r) => r.csv(),
            }),
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), Failure> {
        let rendered = self.render(format)?;
        match out {
            Some(path) => fs::write(path, rendered)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display()))),
            None => {
                print!("{rendered}");
                Ok(())
            }
        }
    }
}
