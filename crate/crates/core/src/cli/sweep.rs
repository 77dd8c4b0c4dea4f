use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{classify_walker_kv, variable_kv_check, LevelStatus, Region, VariableMode};
use crate::error::Error;
use crate::expr::Params;
use crate::families::Family;
use crate::models::EquivalenceConfig;

/// `name=v1,v2,...` or `name=lo:hi:count` (endpoints included).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRange {
    pub name: String,
    pub values: Vec<f64>,
}

impl FromStr for ParamRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, spec) = s.split_once('=').ok_or_else(|| format!("expected name=values, got `{s}`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(format!("missing parameter name in `{s}`"));
        }
        let num = |t: &str| -> std::result::Result<f64, String> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let values = if let [lo, hi, count] = spec.split(':').collect::<Vec<_>>()[..] {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let count: usize = count.trim().parse().map_err(|_| format!("`{count}` is not a point count"))?;
            match count {
                0 => return Err("a range needs at least one point".into()),
                1 => vec![lo],
                n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            spec.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }
}

/// Cartesian product of the ranges, first range varying slowest.
pub fn parameter_grid(ranges: &[ParamRange]) -> Vec<Params> {
    ranges.iter().fold(vec![Params::new()], |acc, r| {
        acc.iter()
            .flat_map(|p| {
                r.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(r.name.clone(), *v);
                    q
                })
            })
            .collect()
    })
}

pub const TAIL_COLUMNS: [&str; 5] = ["label", "c11", "spread_c11", "varch_max_ell", "notes"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: Params,
    pub label: String,
    pub c11: Option<f64>,
    pub spread_c11: Option<f64>,
    pub varch_max_ell: Option<usize>,
    pub notes: String,
    #[serde(skip)]
    pub error: Option<Error>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        self.params
            .values()
            .map(|v| v.to_string())
            .chain([
                self.label.clone(),
                opt(self.c11),
                opt(self.spread_c11),
                self.varch_max_ell.map_or_else(String::new, |v| v.to_string()),
                self.notes.clone(),
            ])
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RowSettings {
    pub tol: f64,
    pub varch_k: usize,
    pub varch_mode: VariableMode,
    pub equivalence: EquivalenceConfig,
}

/// Classification and variable check of one family; numeric failures become notes.
pub fn classify_row(fam: &Family, region: &Region, settings: &RowSettings) -> SweepRow {
    let mut row = SweepRow {
        params: fam.params.clone(),
        label: String::new(),
        c11: None,
        spread_c11: None,
        varch_max_ell: None,
        notes: String::new(),
        error: None,
    };
    let Some(f) = fam.walker_f() else {
        row.label = "error".into();
        row.notes = format!("family `{}` is not a Walker family", fam.name);
        row.error = Some(Error::InvalidArgument(row.notes.clone()));
        return row;
    };
    let result = classify_walker_kv(f, &Params::new(), region, settings.tol).and_then(|c| {
        let varch_region = region.with_grid(8, 4);
        let v = variable_kv_check(
            &fam.metric,
            Some(f),
            &Params::new(),
            settings.varch_k,
            &varch_region,
            settings.varch_mode,
            &settings.equivalence,
        )?;
        Ok((c, v))
    });
    match result {
        Ok((c, v)) => {
            row.label = c.label().into();
            row.c11 = c.constants.c11;
            row.spread_c11 = c.evidence("c11").map(|e| e.spread());
            row.varch_max_ell = v.max_ell;
            let mut notes = c.notes.clone();
            if let Some(u) = v.levels.iter().find(|l| l.status == LevelStatus::Undetermined) {
                notes.push(format!("varch undetermined at ell={}", u.ell));
            }
            row.notes = notes.join("; ");
        }
        Err(e) => {
            row.label = "error".into();
            row.notes = e.to_string();
            row.error = Some(e);
        }
    }
    row
}

/// Compute rows in parallel batches and write each batch in order, flushing
/// after every batch. Returns the rows.
pub fn write_rows<W: Write>(
    families: &[(Family, Region)],
    settings: &RowSettings,
    out: W,
    csv_output: bool,
) -> std::io::Result<Vec<SweepRow>> {
    let mut writer = csv_output.then(|| csv::Writer::from_writer(out));
    if let (Some(w), Some((first, _))) = (writer.as_mut(), families.first()) {
        let header: Vec<String> = first
            .params
            .keys()
            .cloned()
            .chain(TAIL_COLUMNS.iter().map(|s| s.to_string()))
            .collect();
        w.write_record(&header)?;
        w.flush()?;
    }
    let batch = rayon::current_num_threads().max(1);
    let mut rows = Vec::with_capacity(families.len());
    for chunk in families.chunks(batch) {
        let done: Vec<SweepRow> = chunk.par_iter().map(|(f, r)| classify_row(f, r, settings)).collect();
        if let Some(w) = writer.as_mut() {
            for row in &done {
                w.write_record(row.record())?;
            }
            w.flush()?;
        }
        rows.extend(done);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        let r: ParamRange = "eps=3,4,5".parse().unwrap();
        assert_eq!(r.values, vec![3.0, 4.0, 5.0]);
        let r: ParamRange = "a=0:1:5".parse().unwrap();
        assert_eq!(r.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("a=1,x".parse::<ParamRange>().is_err());
        assert!("=1".parse::<ParamRange>().is_err());
        assert!("a=0:1:0".parse::<ParamRange>().is_err());
    }

    #[test]
    fn grid_cardinality_and_order() {
        let g = parameter_grid(&["a=1,2".parse().unwrap(), "b=0:1:3".parse().unwrap()]);
        assert_eq!(g.len(), 6);
        assert_eq!((g[0]["a"], g[0]["b"]), (1.0, 0.0));
        assert_eq!((g[1]["a"], g[1]["b"]), (1.0, 0.5));
        assert_eq!((g[5]["a"], g[5]["b"]), (2.0, 1.0));
        assert_eq!(parameter_grid(&[]).len(), 1);
    }
}
