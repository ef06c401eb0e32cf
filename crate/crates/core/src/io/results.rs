use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    check_csv_version, is_csv, meta_value, parse_f64, read_text, split_metadata, write_atomic, FormatError,
    FormatResult, CSV_SCHEMA_VERSION,
};
use crate::config::{ConfigDocument, Method};
use crate::estimators::{SubsetStrategy, DEFAULT_CONDITION_CEILING};
use crate::exec::Execution;
use crate::simulator::{analyze, run_campaign, AnalysisOptions, CampaignResult, MethodEstimate, OrientationResult};
use crate::vsh::{OrientationWeights, RmseDb};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Where a results file came from; enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Simulated campaign; the full configuration is echoed.
    Campaign { config: ConfigDocument },
    /// Analysis of an existing measurement file.
    Measurements {
        path: String,
        methods: Vec<Method>,
        subset_k: usize,
        greedy: bool,
        subset_budget: u64,
        terminal_current_a: f64,
        /// Configuration recorded in the measurement file, if any.
        source_config: Option<ConfigDocument>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub tool_version: String,
    /// Ignored when comparing runs.
    pub generated_at_unix_s: Option<u64>,
    pub provenance: Provenance,
    pub result: CampaignResult,
}

impl ResultsFile {
    pub fn new(provenance: Provenance, result: CampaignResult) -> Self {
        Self {
            schema_version: RESULTS_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix_s: Some(super::unix_now()),
            provenance,
            result,
        }
    }

    /// Canonical JSON with the timestamp removed, for run-to-run comparison.
    pub fn comparable_json(&self) -> String {
        let mut copy = self.clone();
        copy.generated_at_unix_s = None;
        serde_json::to_string_pretty(&copy).expect("results serialize")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }
}

pub fn read_results(path: &Path) -> FormatResult<ResultsFile> {
    let text = read_text(path)?;
    let file = if is_csv(path) {
        results_from_csv(&text, path)?
    } else {
        serde_json::from_str::<ResultsFile>(&text).map_err(|e| FormatError::json(path, e))?
    };
    if file.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(FormatError::schema(
            path,
            format!("schema_version: unsupported version {}", file.schema_version),
        ));
    }
    Ok(file)
}

pub fn write_results(path: &Path, file: &ResultsFile) -> FormatResult<()> {
    let text = if is_csv(path) { results_to_csv(file) } else { file.to_json() };
    write_atomic(path, text.as_bytes())
}

/// Regenerates a results file from its provenance.
pub fn reproduce(file: &ResultsFile, exec: Execution) -> FormatResult<ResultsFile> {
    let result = match &file.provenance {
        Provenance::Campaign { config } => {
            let mut cfg = config.campaign_config();
            if let Some(seed) = file.result.seed {
                cfg = cfg.with_seed(seed);
            }
            run_campaign(&cfg, exec)?
        }
        Provenance::Measurements { path, methods, subset_k, greedy, subset_budget, terminal_current_a, .. } => {
            let set = super::read_measurements(Path::new(path))?;
            let options = AnalysisOptions {
                methods: methods.clone(),
                subset_k: *subset_k,
                strategy: if *greedy {
                    SubsetStrategy::Greedy
                } else {
                    SubsetStrategy::Exhaustive { budget: *subset_budget }
                },
                terminal_current_a: *terminal_current_a,
                condition_ceiling: DEFAULT_CONDITION_CEILING,
                strict: false,
            };
            analyze(&set, &options, file.result.seed, exec)?
        }
    };
    Ok(ResultsFile { result, ..file.clone() })
}

const HEADER: [&str; 19] = [
    "label", "theta_deg", "phi_deg", "method", "w_z", "w_x", "w_y", "a_m1_re", "a_m1_im", "a_0_re", "a_0_im",
    "a_p1_re", "a_p1_im", "rmse_db", "r_r_ohms", "imag_norm", "multiplier", "ambiguous", "error",
];

/// One row per (AUT, method), laid out like the printed results table,
/// with everything else carried as a JSON `# meta=` line.
pub fn results_to_csv(file: &ResultsFile) -> String {
    let mut meta = file.clone();
    meta.result.rows.clear();
    let mut out = format!(
        "# schema_version={CSV_SCHEMA_VERSION}\n# meta={}\n",
        serde_json::to_string(&meta).expect("results serialize")
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).unwrap();
    let f = super::fmt_opt;
    for row in &file.result.rows {
        for e in &row.estimates {
            let wts = e.weights.map(|w| w.as_array().map(Some)).unwrap_or([None; 3]);
            let mut a = [None; 6];
            if let Some(c) = &e.coefficients {
                for (i, z) in c.iter().take(3).enumerate() {
                    a[2 * i] = Some(z.re);
                    a[2 * i + 1] = Some(z.im);
                }
            }
            let mut rec = vec![row.label.clone(), f(row.theta_deg), f(row.phi_deg), e.method.name().to_string()];
            rec.extend(wts.iter().map(|v| f(*v)));
            rec.extend(a.iter().map(|v| f(*v)));
            rec.push(e.rmse_db.map(|r| r.to_string()).unwrap_or_default());
            rec.push(f(e.r_r_ohms));
            rec.push(f(e.imag_norm));
            rec.push(f(e.multiplier));
            rec.push(e.ambiguous.to_string());
            rec.push(e.error.clone().unwrap_or_default());
            w.write_record(&rec).unwrap();
        }
    }
    out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    out
}

pub fn results_from_csv(text: &str, path: &Path) -> FormatResult<ResultsFile> {
    let (meta, body, skipped) = split_metadata(text);
    check_csv_version(&meta, path)?;
    let meta_json = meta_value(&meta, "meta").ok_or_else(|| FormatError::schema(path, "meta: missing `# meta=` line"))?;
    let mut file: ResultsFile =
        serde_json::from_str(meta_json).map_err(|e| FormatError::schema(path, format!("meta: {e}")))?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header_line = skipped as u64 + 1;
    let headers = rdr.headers().map_err(|e| FormatError::csv_at(path, header_line, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(FormatError::csv_at(path, header_line, format!("header must be `{}`", HEADER.join(","))));
    }

    let mut rows: Vec<OrientationResult> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            FormatError::csv_at(path, e.position().map_or(0, |p| p.line()) + skipped as u64, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped as u64;
        let err = |field: &str, msg: String| FormatError::csv_at(path, line, format!("{field}: {msg}"));
        let col = |i: usize| -> FormatResult<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            parse_f64(s).map(Some).ok_or_else(|| err(HEADER[i], format!("not a number: {s:?}")))
        };
        let label = rec[0].to_string();
        let theta_deg = col(1)?;
        let phi_deg = col(2)?;
        let method = Method::parse(rec[3].trim()).ok_or_else(|| err("method", format!("unknown {:?}", &rec[3])))?;
        let w: Vec<Option<f64>> = (4..7).map(col).collect::<FormatResult<_>>()?;
        let weights = match (w[0], w[1], w[2]) {
            (Some(a), Some(b), Some(c)) => Some(OrientationWeights::new(a, b, c)),
            _ => None,
        };
        let a: Vec<Option<f64>> = (7..13).map(col).collect::<FormatResult<_>>()?;
        let coefficients = a
            .chunks(2)
            .map(|p| Some(Complex64::new(p[0]?, p[1]?)))
            .collect::<Option<Vec<_>>>();
        let rmse_db = match rec[13].trim() {
            "" => None,
            "-inf" => Some(RmseDb::NegInfinity),
            s => Some(RmseDb::Db(s.parse().map_err(|_| err("rmse_db", format!("not a number: {s:?}")))?)),
        };
        let ambiguous = match rec[17].trim() {
            "true" => true,
            "false" | "" => false,
            s => return Err(err("ambiguous", format!("expected true or false, got {s:?}"))),
        };
        let estimate = MethodEstimate {
            method,
            weights,
            coefficients,
            rmse_db,
            r_r_ohms: col(14)?,
            imag_norm: col(15)?,
            multiplier: col(16)?,
            ambiguous,
            error: Some(rec[18].to_string()).filter(|s| !s.is_empty()),
        };
        match rows.last_mut() {
            Some(r) if r.label == label => r.estimates.push(estimate),
            _ => rows.push(OrientationResult { label, theta_deg, phi_deg, estimates: vec![estimate] }),
        }
    }
    file.result.rows = rows;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CampaignConfig;

    fn sample() -> ResultsFile {
        let doc = ConfigDocument::default();
        let res = run_campaign(&doc.campaign_config(), Execution::Serial).unwrap();
        ResultsFile::new(Provenance::Campaign { config: doc }, res)
    }

    #[test]
    fn json_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = sample();
        for name in ["r.json", "r.csv"] {
            let p = dir.path().join(name);
            write_results(&p, &file).unwrap();
            assert_eq!(read_results(&p).unwrap(), file, "{name}");
        }
    }

    #[test]
    fn exact_rows_round_trip_through_csv() {
        let mut cfg = CampaignConfig::default();
        cfg.environment.noise_sigma = 0.0;
        let res = run_campaign(&cfg, Execution::Serial).unwrap();
        let file = ResultsFile::new(
            Provenance::Campaign { config: ConfigDocument { environment: cfg.environment, ..Default::default() } },
            res,
        );
        let text = results_to_csv(&file);
        assert!(text.contains(",-inf,"));
        assert_eq!(results_from_csv(&text, Path::new("r.csv")).unwrap(), file);
    }

    #[test]
    fn reproduce_matches_except_timestamp() {
        let file = sample();
        let again = reproduce(&file, Execution::Parallel).unwrap();
        assert_eq!(again.comparable_json(), file.comparable_json());
    }
}
