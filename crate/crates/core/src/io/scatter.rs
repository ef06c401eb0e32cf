use std::path::Path;

use super::{check_csv_version, fmt_f64, meta_value, parse_f64, FormatError, FormatResult, CSV_SCHEMA_VERSION};
use crate::estimators::SubsetSelection;
use crate::simulator::{EntropyStudy, StudyAggregate};
use crate::vsh::RmseDb;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub seed: u64,
    /// Sensor labels, in index order.
    pub subset: Vec<String>,
    pub h1_bits: f64,
    pub condition: f64,
    pub rmse_db: Vec<Option<RmseDb>>,
    pub mean_rmse_db: Option<RmseDb>,
}

/// Flat view of one or more entropy studies, as written to the scatter CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterTable {
    pub aut_labels: Vec<String>,
    pub rows: Vec<ScatterRow>,
    /// `(seed, Spearman(H₁, RMSE), Spearman(log₁₀ cond, H₁))` per seed.
    pub per_seed: Vec<(u64, Option<f64>, Option<f64>)>,
    pub mean_spearman_h1_rmse: Option<f64>,
    pub mean_spearman_cond_h1: Option<f64>,
}

fn sensor_label(i: usize) -> String {
    format!("s{}", i + 1)
}

impl ScatterTable {
    pub fn from_study(study: &EntropyStudy) -> Self {
        Self::from_aggregate(&StudyAggregate {
            studies: vec![study.clone()],
            mean_spearman_h1_rmse: study.spearman_h1_rmse,
            mean_spearman_cond_h1: study.spearman_cond_h1,
        })
    }

    pub fn from_aggregate(agg: &StudyAggregate) -> Self {
        let rows = agg
            .studies
            .iter()
            .flat_map(|s| {
                s.rows.iter().map(move |r| ScatterRow {
                    seed: s.seed,
                    subset: r.indices.iter().map(|&i| sensor_label(i)).collect(),
                    h1_bits: r.h1_bits,
                    condition: r.condition,
                    rmse_db: r.rmse_db.clone(),
                    mean_rmse_db: r.mean_rmse_db,
                })
            })
            .collect();
        Self {
            aut_labels: agg.studies.first().map(|s| s.aut_labels.clone()).unwrap_or_default(),
            rows,
            per_seed: agg.studies.iter().map(|s| (s.seed, s.spearman_h1_rmse, s.spearman_cond_h1)).collect(),
            mean_spearman_h1_rmse: agg.mean_spearman_h1_rmse,
            mean_spearman_cond_h1: agg.mean_spearman_cond_h1,
        }
    }
}

fn fmt_corr(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| x.to_string())
}

fn fmt_rmse(v: Option<RmseDb>) -> String {
    v.map(|r| r.to_string()).unwrap_or_default()
}

/// Rows are subsets ranked by H₁ within each seed; correlations follow as
/// footer lines, `null` where undefined.
pub fn scatter_to_csv(table: &ScatterTable) -> String {
    let mut out = format!(
        "# schema_version={CSV_SCHEMA_VERSION}\n# aut_labels={}\n",
        serde_json::to_string(&table.aut_labels).unwrap()
    );
    let mut header = vec!["seed".to_string(), "subset".into(), "h1_bits".into(), "condition".into()];
    header.extend((1..=table.aut_labels.len()).map(|j| format!("rmse_db_{j}")));
    header.push("mean_rmse_db".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for r in &table.rows {
        let mut f = vec![r.seed.to_string(), r.subset.join(";"), fmt_f64(r.h1_bits), fmt_f64(r.condition)];
        f.extend(r.rmse_db.iter().map(|v| fmt_rmse(*v)));
        f.push(fmt_rmse(r.mean_rmse_db));
        out.push_str(&f.join(","));
        out.push('\n');
    }
    for (seed, h1, cond) in &table.per_seed {
        out.push_str(&format!("# spearman_h1_rmse[{seed}]={}\n", fmt_corr(*h1)));
        out.push_str(&format!("# spearman_cond_h1[{seed}]={}\n", fmt_corr(*cond)));
    }
    out.push_str(&format!("# mean_spearman_h1_rmse={}\n", fmt_corr(table.mean_spearman_h1_rmse)));
    out.push_str(&format!("# mean_spearman_cond_h1={}\n", fmt_corr(table.mean_spearman_cond_h1)));
    out
}

pub fn scatter_from_csv(text: &str, path: &Path) -> FormatResult<ScatterTable> {
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut body: Vec<(usize, &str)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim_start().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if line.trim().is_empty() {
            continue;
        } else if header.is_none() {
            header = Some((n, line.split(',').map(str::to_string).collect()));
        } else {
            body.push((n, line));
        }
    }
    check_csv_version(&meta, path)?;
    let aut_labels: Vec<String> = serde_json::from_str(
        meta_value(&meta, "aut_labels").ok_or_else(|| FormatError::schema(path, "aut_labels: missing"))?,
    )
    .map_err(|e| FormatError::schema(path, format!("aut_labels: {e}")))?;
    let n_aut = aut_labels.len();
    let (hl, header) = header.ok_or_else(|| FormatError::schema(path, "missing header"))?;
    if header.len() != n_aut + 5 {
        return Err(FormatError::csv_at(path, hl as u64, format!("expected {} columns", n_aut + 5)));
    }

    let mut rows = Vec::new();
    for (line, text) in body {
        let f: Vec<&str> = text.split(',').collect();
        let err = |col: usize, msg: &str| {
            FormatError::csv_at(path, line as u64, format!("{}: {msg}", header.get(col).map_or("?", |s| s)))
        };
        if f.len() != header.len() {
            return Err(err(0, &format!("expected {} fields, found {}", header.len(), f.len())));
        }
        let rmse = |col: usize| -> FormatResult<Option<RmseDb>> {
            match f[col].trim() {
                "" => Ok(None),
                "-inf" => Ok(Some(RmseDb::NegInfinity)),
                s => s.parse().map(|v| Some(RmseDb::Db(v))).map_err(|_| err(col, "not a number")),
            }
        };
        rows.push(ScatterRow {
            seed: f[0].trim().parse().map_err(|_| err(0, "not an integer"))?,
            subset: f[1].split(';').map(str::to_string).collect(),
            h1_bits: parse_f64(f[2]).ok_or_else(|| err(2, "not a number"))?,
            condition: parse_f64(f[3]).ok_or_else(|| err(3, "not a number"))?,
            rmse_db: (4..4 + n_aut).map(rmse).collect::<FormatResult<_>>()?,
            mean_rmse_db: rmse(4 + n_aut)?,
        });
    }

    let corr = |key: &str| -> FormatResult<Option<f64>> {
        match meta_value(&meta, key) {
            None => Err(FormatError::schema(path, format!("{key}: missing footer"))),
            Some("null") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| FormatError::schema(path, format!("{key}: not a number"))),
        }
    };
    let mut seeds: Vec<u64> = Vec::new();
    for (k, _) in &meta {
        if let Some(s) = k.strip_prefix("spearman_h1_rmse[").and_then(|s| s.strip_suffix(']')) {
            seeds.push(s.parse().map_err(|_| FormatError::schema(path, format!("{k}: bad seed")))?);
        }
    }
    let per_seed = seeds
        .into_iter()
        .map(|s| {
            Ok((s, corr(&format!("spearman_h1_rmse[{s}]"))?, corr(&format!("spearman_cond_h1[{s}]"))?))
        })
        .collect::<FormatResult<_>>()?;
    Ok(ScatterTable {
        aut_labels,
        rows,
        per_seed,
        mean_spearman_h1_rmse: corr("mean_spearman_h1_rmse")?,
        mean_spearman_cond_h1: corr("mean_spearman_cond_h1")?,
    })
}

/// `rank,subset,h1_bits,condition`, best first.
pub fn ranked_subsets_to_csv(ranked: &[SubsetSelection], sense_ids: &[String]) -> String {
    let mut out = format!("# schema_version={CSV_SCHEMA_VERSION}\nrank,subset,h1_bits,condition\n");
    for (r, sel) in ranked.iter().enumerate() {
        let ids: Vec<&str> = sel.indices.iter().map(|&i| sense_ids[i].as_str()).collect();
        out.push_str(&format!("{},{},{},{}\n", r + 1, ids.join(";"), fmt_f64(sel.h1_bits), fmt_f64(sel.condition)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CampaignConfig;
    use crate::exec::Execution;
    use crate::simulator::{aggregate_study, entropy_study};

    #[test]
    fn single_seed_round_trip() {
        let study = entropy_study(&CampaignConfig::default(), Execution::default()).unwrap();
        let table = ScatterTable::from_study(&study);
        assert_eq!(table.rows.len(), 120);
        let back = scatter_from_csv(&scatter_to_csv(&table), Path::new("s.csv")).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn undefined_correlation_is_null() {
        let mut cfg = CampaignConfig::default();
        cfg.environment.noise_sigma = 0.0;
        let agg = aggregate_study(&cfg, 2, Execution::default()).unwrap();
        let table = ScatterTable::from_aggregate(&agg);
        let text = scatter_to_csv(&table);
        assert!(text.contains("# mean_spearman_h1_rmse=null"));
        assert_eq!(scatter_from_csv(&text, Path::new("s.csv")).unwrap(), table);
    }
}
