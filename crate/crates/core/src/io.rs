//! JSON instance files.
//!
//! Keys: `n`, `r`, `a`, `b`, exactly one of `M` (row-major covariance) or
//! `M_factor` (lower-triangular `F` with `M = F F'`), `integer_indices`
//! (1-based), and optional `name`, `seed` and `generator`. Numbers are
//! written in shortest round-trip form, so parsing an emitted file
//! reproduces every value bit for bit.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_instance, GENERATOR_RNG};
use crate::model::MeanRiskInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub rng: String,
    pub integer_fraction: f64,
    pub budget_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M_factor", default, skip_serializing_if = "Option::is_none")]
    pub m_factor: Option<Vec<Vec<f64>>>,
    pub integer_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl InstanceFile {
    pub fn from_instance(inst: &MeanRiskInstance) -> Self {
        let m = inst.m();
        InstanceFile {
            n: inst.n(),
            r: inst.r().iter().copied().collect(),
            a: inst.a().iter().copied().collect(),
            b: inst.b(),
            m: Some((0..inst.n()).map(|i| m.row(i).iter().copied().collect()).collect()),
            m_factor: None,
            integer_indices: inst.integer_set().iter().map(|&i| i + 1).collect(),
            name: None,
            seed: None,
            generator: None,
        }
    }

    pub fn to_instance(&self) -> Result<MeanRiskInstance> {
        let n = self.n;
        if self.r.len() != n || self.a.len() != n {
            return Err(bad(format!(
                "r has {} and a has {} entries, expected n = {n}",
                self.r.len(),
                self.a.len()
            )));
        }
        let m = match (&self.m, &self.m_factor) {
            (Some(rows), None) => {
                if rows.len() != n || rows.iter().any(|row| row.len() != n) {
                    return Err(bad(format!("M must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            (None, Some(rows)) => {
                if rows.len() != n {
                    return Err(bad(format!("M_factor must have {n} rows")));
                }
                // rows may be ragged (length i + 1) or full with zeros above the diagonal
                let mut f = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    if row.len() < i + 1 || row.len() > n {
                        return Err(bad(format!("M_factor row {} has {} entries", i + 1, row.len())));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if j > i && v != 0.0 {
                            return Err(bad("M_factor must be lower-triangular"));
                        }
                        f[(i, j)] = v;
                    }
                }
                &f * f.transpose()
            }
            _ => return Err(bad("exactly one of M and M_factor must be given")),
        };
        let mut ints = Vec::with_capacity(self.integer_indices.len());
        for &k in &self.integer_indices {
            if k == 0 || k > n {
                return Err(bad(format!("integer index {k} outside 1..={n}")));
            }
            ints.push(k - 1);
        }
        MeanRiskInstance::new(self.r.clone(), self.a.clone(), self.b, m, ints)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance files contain only finite numbers")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| bad(e.to_string()))
    }
}

pub fn read_instance<R: Read>(reader: R) -> Result<(InstanceFile, MeanRiskInstance)> {
    let file: InstanceFile = serde_json::from_reader(reader).map_err(|e| bad(e.to_string()))?;
    let inst = file.to_instance()?;
    Ok((file, inst))
}

pub fn write_instance<W: Write>(mut writer: W, file: &InstanceFile) -> Result<()> {
    writeln!(writer, "{}", file.to_json()).map_err(|e| bad(e.to_string()))
}

/// Generated instance with its seed and generator settings recorded.
pub fn generated_file(
    n: usize,
    integer_fraction: f64,
    budget_multiplier: f64,
    seed: u64,
) -> Result<InstanceFile> {
    let inst = generate_instance(n, integer_fraction, budget_multiplier, seed)?;
    let mut file = InstanceFile::from_instance(&inst);
    file.name = Some(format!("gen-n{n}-s{seed}"));
    file.seed = Some(seed);
    file.generator = Some(GeneratorInfo {
        rng: GENERATOR_RNG.to_string(),
        integer_fraction,
        budget_multiplier,
    });
    Ok(file)
}
