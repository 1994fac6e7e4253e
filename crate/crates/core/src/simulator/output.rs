use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{csv_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    TrotterNoiseless,
    TrotterNoisy,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::TrotterNoiseless => "trotter_noiseless",
            Backend::TrotterNoisy => "trotter_noisy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidRow {
    pub time_s: f64,
    pub fid_value: f64,
    pub n_shots: u64,
    pub backend: Backend,
}

pub fn write_fid_csv<W: Write>(rows: &[FidRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fid_csv<R: Read>(input: R) -> Result<Vec<FidRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}
