use std::path::Path;

use num_complex::Complex64;

use super::{
    check_csv_version, is_csv, meta_value, read_text, split_metadata, write_atomic, FormatError, FormatResult,
    CSV_SCHEMA_VERSION,
};
use crate::dataset::{AutBlock, MeasurementSet, ReferenceBlock};

const HEADER: [&str; 7] = ["kind", "label", "theta_deg", "phi_deg", "sense_id", "re", "im"];

/// Reads a measurement file, JSON or CSV by extension, and validates it.
pub fn read_measurements(path: &Path) -> FormatResult<MeasurementSet> {
    let text = read_text(path)?;
    let set = if is_csv(path) {
        measurement_from_csv(&text, path)?
    } else {
        serde_json::from_str::<MeasurementSet>(&text).map_err(|e| FormatError::json(path, e))?
    };
    set.validate().map_err(|e| FormatError::schema(path, e.to_string()))?;
    Ok(set)
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> FormatResult<()> {
    let bytes = if is_csv(path) {
        measurement_to_csv(set).into_bytes()
    } else {
        let mut s = serde_json::to_string_pretty(set).expect("measurement sets serialize");
        s.push('\n');
        s.into_bytes()
    };
    write_atomic(path, &bytes)
}

/// Long format: one row per complex voltage. Crosstalk rows use `label` for
/// the row sensor and `sense_id` for the column sensor.
pub fn measurement_to_csv(set: &MeasurementSet) -> String {
    let mut out = format!("# schema_version={CSV_SCHEMA_VERSION}\n# frequency_hz={}\n", set.frequency_hz);
    if let Some(t) = set.generated_at_unix_s {
        out.push_str(&format!("# generated_at_unix_s={t}\n"));
    }
    if let Some(cfg) = &set.source_config {
        out.push_str(&format!("# source_config={}\n", serde_json::to_string(cfg).expect("config serializes")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).unwrap();
    let num = |z: Complex64| [z.re.to_string(), z.im.to_string()];
    for r in &set.references {
        for (id, z) in set.sense_ids.iter().zip(&r.voltages) {
            let [re, im] = num(*z);
            w.write_record(["reference", &r.label, "", "", id, &re, &im]).unwrap();
        }
    }
    for a in &set.auts {
        let th = super::fmt_opt(a.theta_deg);
        let ph = super::fmt_opt(a.phi_deg);
        for (id, z) in set.sense_ids.iter().zip(&a.voltages) {
            let [re, im] = num(*z);
            w.write_record(["aut", &a.label, &th, &ph, id, &re, &im]).unwrap();
        }
    }
    if let Some(rows) = &set.crosstalk {
        for (row_id, row) in set.sense_ids.iter().zip(rows) {
            for (col_id, z) in set.sense_ids.iter().zip(row) {
                let [re, im] = num(*z);
                w.write_record(["crosstalk", row_id, "", "", col_id, &re, &im]).unwrap();
            }
        }
    }
    out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    out
}

/// Parses the long CSV format. The sensor order is the order in which sensors
/// first appear; every block must list them in that order.
pub fn measurement_from_csv(text: &str, path: &Path) -> FormatResult<MeasurementSet> {
    let (meta, body, skipped) = split_metadata(text);
    check_csv_version(&meta, path)?;
    let frequency_hz = meta_value(&meta, "frequency_hz")
        .ok_or_else(|| FormatError::schema(path, "frequency_hz: missing `# frequency_hz=` line"))?
        .trim()
        .parse::<f64>()
        .map_err(|e| FormatError::schema(path, format!("frequency_hz: {e}")))?;
    let generated_at_unix_s = meta_value(&meta, "generated_at_unix_s")
        .map(|v| v.trim().parse::<u64>())
        .transpose()
        .map_err(|e| FormatError::schema(path, format!("generated_at_unix_s: {e}")))?;
    let source_config = meta_value(&meta, "source_config")
        .map(serde_json::from_str)
        .transpose()
        .map_err(|e| FormatError::schema(path, format!("source_config: {e}")))?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header_line = skipped as u64 + 1;
    let headers = rdr
        .headers()
        .map_err(|e| FormatError::csv_at(path, header_line, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(FormatError::csv_at(
            path,
            header_line,
            format!("header must be `{}`", HEADER.join(",")),
        ));
    }

    let mut sense_ids: Vec<String> = Vec::new();
    let mut references: Vec<ReferenceBlock> = Vec::new();
    let mut auts: Vec<AutBlock> = Vec::new();
    let mut crosstalk: Vec<(String, Vec<Complex64>)> = Vec::new();
    // (kind, label) of the block being filled and its sensor cursor.
    let mut current: Option<(String, String)> = None;
    let mut cursor = 0usize;
    let mut first_block_done = false;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line()) + skipped as u64;
            FormatError::csv_at(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped as u64;
        let err = |field: &str, msg: String| FormatError::csv_at(path, line, format!("{field}: {msg}"));
        let kind = rec[0].trim();
        let label = rec[1].trim().to_string();
        let sense = rec[4].trim().to_string();
        let parse = |field: &str, s: &str| s.trim().parse::<f64>().map_err(|e| err(field, format!("{e} ({s:?})")));
        let z = Complex64::new(parse("re", &rec[5])?, parse("im", &rec[6])?);
        let opt = |field: &str, s: &str| -> FormatResult<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                parse(field, s).map(Some)
            }
        };

        let key = (kind.to_string(), label.clone());
        if current.as_ref() != Some(&key) {
            if current.is_some() {
                if cursor != sense_ids.len() {
                    return Err(err("sense_id", format!("previous block ended after {cursor} of {} sensors", sense_ids.len())));
                }
                first_block_done = true;
            }
            current = Some(key);
            cursor = 0;
            match kind {
                "reference" => references.push(ReferenceBlock { label: label.clone(), voltages: Vec::new() }),
                "aut" => auts.push(AutBlock {
                    label: label.clone(),
                    theta_deg: opt("theta_deg", &rec[2])?,
                    phi_deg: opt("phi_deg", &rec[3])?,
                    voltages: Vec::new(),
                }),
                "crosstalk" => crosstalk.push((label.clone(), Vec::new())),
                other => return Err(err("kind", format!("{other:?} is not reference, aut or crosstalk"))),
            }
        }

        if !first_block_done {
            if sense_ids.contains(&sense) {
                return Err(err("sense_id", format!("{sense:?} repeated within a block")));
            }
            sense_ids.push(sense.clone());
        } else if sense_ids.get(cursor) != Some(&sense) {
            return Err(err(
                "sense_id",
                format!("expected {:?}, found {sense:?}", sense_ids.get(cursor).map_or("<end of block>", |s| s)),
            ));
        }
        cursor += 1;
        match kind {
            "reference" => references.last_mut().unwrap().voltages.push(z),
            "aut" => auts.last_mut().unwrap().voltages.push(z),
            _ => crosstalk.last_mut().unwrap().1.push(z),
        }
    }
    if current.is_some() && cursor != sense_ids.len() {
        return Err(FormatError::schema(path, format!("last block ended after {cursor} of {} sensors", sense_ids.len())));
    }

    let crosstalk = if crosstalk.is_empty() {
        None
    } else {
        let row_ids: Vec<&String> = crosstalk.iter().map(|(l, _)| l).collect();
        if row_ids != sense_ids.iter().collect::<Vec<_>>() {
            return Err(FormatError::schema(path, "crosstalk: rows must follow the sensor order"));
        }
        Some(crosstalk.into_iter().map(|(_, r)| r).collect())
    };

    Ok(MeasurementSet {
        schema_version: crate::dataset::MEASUREMENT_SCHEMA_VERSION,
        frequency_hz,
        sense_ids,
        references,
        auts,
        crosstalk,
        source_config,
        generated_at_unix_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CampaignConfig, ConfigDocument};
    use crate::simulator::simulate_dataset;

    fn sample() -> MeasurementSet {
        let mut cfg = CampaignConfig::default();
        cfg.environment.crosstalk_level = 0.1;
        let mut set = simulate_dataset(&cfg).unwrap();
        set.source_config = Some(ConfigDocument::default());
        set.generated_at_unix_s = Some(1_700_000_000);
        set
    }

    #[test]
    fn csv_round_trip() {
        let set = sample();
        let back = measurement_from_csv(&measurement_to_csv(&set), Path::new("m.csv")).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn file_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let set = sample();
        for name in ["m.json", "m.csv"] {
            let p = dir.path().join(name);
            write_measurements(&p, &set).unwrap();
            assert_eq!(read_measurements(&p).unwrap(), set);
        }
    }

    #[test]
    fn csv_errors_name_line_and_field() {
        let text = "# schema_version=1\n# frequency_hz=3e9\nkind,label,theta_deg,phi_deg,sense_id,re,im\n\
                    reference,z,,,s1,1,0\nreference,z,,,s2,abc,0\n";
        match measurement_from_csv(text, Path::new("m.csv")) {
            Err(FormatError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.starts_with("re:"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing_version = "# frequency_hz=3e9\nkind,label,theta_deg,phi_deg,sense_id,re,im\n";
        assert!(matches!(
            measurement_from_csv(missing_version, Path::new("m.csv")),
            Err(FormatError::Schema { .. })
        ));
    }

    #[test]
    fn json_schema_errors_name_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = sample();
        set.auts[2].voltages.pop();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, serde_json::to_string(&set).unwrap()).unwrap();
        let msg = read_measurements(&p).unwrap_err().to_string();
        assert!(msg.contains("auts[2].voltages"), "{msg}");

        std::fs::write(&p, "{\"schema_version\": 1, \"bogus\": 2}").unwrap();
        assert!(matches!(read_measurements(&p), Err(FormatError::Parse { .. })));
    }
}
