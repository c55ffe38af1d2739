//! CSV output of sweep rows and the matching reader.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::sweep::{McEstimate, ModelCell, RatesRow, SweepRow};
use crate::rates::RateModel;

const FIXED: [&str; 6] = ["h_m", "h_over_rho", "N", "tau_D_exact_s", "tau_D_asym_s", "tau_micro_s"];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Header for the given rows: fixed columns, three (five with MC) per
/// model, then flags.
pub fn header(rows: &[SweepRow]) -> Vec<String> {
    let mut cols: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    let with_mc = rows.iter().any(|r| r.models.iter().any(|c| c.mc.is_some()));
    if let Some(first) = rows.first() {
        for c in &first.models {
            let name = c.model.name();
            cols.push(format!("model_{name}_rate"));
            cols.push(format!("model_{name}_tau_meso_s"));
            cols.push(format!("model_{name}_relerr"));
            if with_mc {
                cols.push(format!("model_{name}_mc_mean_s"));
                cols.push(format!("model_{name}_mc_stderr_s"));
            }
        }
    }
    cols.push("flags".into());
    cols
}

/// Writes rows sorted by descending h. `path` only labels errors.
pub fn write_rows<W: Write>(rows: &[SweepRow], out: W, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to write".into()));
    }
    let models: Vec<RateModel> = rows[0].models.iter().map(|c| c.model).collect();
    if rows.iter().any(|r| !r.models.iter().map(|c| c.model).eq(models.iter().copied())) {
        return Err(Error::InvalidParameter("rows carry different model lists".into()));
    }
    let with_mc = rows.iter().any(|r| r.models.iter().any(|c| c.mc.is_some()));
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.h.total_cmp(&a.h));

    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(rows)).map_err(csv_err(path))?;
    for r in sorted {
        let mut rec = vec![
            num(r.h),
            num(r.h_over_rho),
            r.n_voxels.to_string(),
            num(r.tau_d_exact),
            num(r.tau_d_asym),
            num(r.tau_micro),
        ];
        for c in &r.models {
            rec.push(opt(c.propensity));
            rec.push(opt(c.tau_meso));
            rec.push(opt(c.relerr));
            if with_mc {
                rec.push(opt(c.mc.map(|m| m.mean)));
                rec.push(opt(c.mc.map(|m| m.stderr)));
            }
        }
        rec.push(r.flags.to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_rows(rows, std::io::BufWriter::new(file), path)
}

fn parse_cell(s: &str, col: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Config(format!("column {col}: cannot parse '{s}'")))
}

fn required(s: &str, col: &str) -> Result<f64> {
    parse_cell(s, col)?.ok_or_else(|| Error::Config(format!("column {col} is empty")))
}

/// Reads a file written by [`write_rows`].
pub fn read_rows<R: Read>(input: R, path: &Path) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let head: Vec<String> = rd.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    if head.len() < FIXED.len() + 1 || head[..FIXED.len()] != FIXED || head.last().unwrap() != "flags" {
        return Err(bad("unexpected header".into()));
    }
    let middle = &head[FIXED.len()..head.len() - 1];
    let models: Vec<RateModel> = middle
        .iter()
        .filter_map(|c| c.strip_prefix("model_").and_then(|c| c.strip_suffix("_rate")))
        .map(str::parse)
        .collect::<Result<_>>()?;
    let per_model = if models.is_empty() { 3 } else { middle.len() / models.len() };
    if middle.len() != models.len() * per_model || !(per_model == 3 || per_model == 5) {
        return Err(bad("model columns do not line up".into()));
    }

    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err(path))?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let mut cells = Vec::with_capacity(models.len());
        for (m, &model) in models.iter().enumerate() {
            let base = FIXED.len() + m * per_model;
            let get = |k: usize| parse_cell(cell(base + k), &head[base + k]);
            let mc = if per_model == 5 {
                match (get(3)?, get(4)?) {
                    (Some(mean), Some(stderr)) => Some(McEstimate { mean, stderr }),
                    _ => None,
                }
            } else {
                None
            };
            cells.push(ModelCell { model, propensity: get(0)?, tau_meso: get(1)?, relerr: get(2)?, mc });
        }
        rows.push(SweepRow {
            h: required(cell(0), "h_m")?,
            h_over_rho: required(cell(1), "h_over_rho")?,
            n_voxels: cell(2).parse().map_err(|_| bad(format!("bad N '{}'", cell(2))))?,
            tau_d_exact: required(cell(3), "tau_D_exact_s")?,
            tau_d_asym: required(cell(4), "tau_D_asym_s")?,
            tau_micro: required(cell(5), "tau_micro_s")?,
            models: cells,
            flags: cell(head.len() - 1).parse()?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_rows(file, path)
}

/// Propensity table: h_m, h_over_rho, then one model_<name>_rate column per model.
pub fn write_rates<W: Write>(rows: &[RatesRow], out: W, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["h_m".to_string(), "h_over_rho".to_string()];
    if let Some(first) = rows.first() {
        head.extend(first.rates.iter().map(|(m, _)| format!("model_{}_rate", m.name())));
    }
    w.write_record(&head).map_err(csv_err(path))?;
    for r in rows {
        let mut rec = vec![num(r.h), num(r.h_over_rho)];
        rec.extend(r.rates.iter().map(|(_, k)| opt(*k)));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::Flags;

    fn row(h: f64, models: &[RateModel]) -> SweepRow {
        SweepRow {
            h,
            h_over_rho: h / 2e-9,
            n_voxels: 1000,
            tau_d_exact: 0.1 + h,
            tau_d_asym: 0.11,
            tau_micro: 1.0 / 3.0,
            models: models
                .iter()
                .map(|&model| ModelCell {
                    model,
                    propensity: Some(6.89e4),
                    tau_meso: None,
                    relerr: Some(-1.0 / 7.0),
                    mc: None,
                })
                .collect(),
            flags: Flags { below_h_crit: true, ..Flags::default() },
        }
    }

    fn write_string(rows: &[SweepRow]) -> String {
        let mut buf = Vec::new();
        write_rows(rows, &mut buf, Path::new("mem")).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_model_list_header() {
        let text = write_string(&[row(1e-8, &[])]);
        assert_eq!(
            text.lines().next().unwrap(),
            "h_m,h_over_rho,N,tau_D_exact_s,tau_D_asym_s,tau_micro_s,flags"
        );
    }

    #[test]
    fn model_columns_and_formatting() {
        let text = write_string(&[row(1e-8, &[RateModel::Fange])]);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "h_m,h_over_rho,N,tau_D_exact_s,tau_D_asym_s,tau_micro_s,\
             model_fange_rate,model_fange_tau_meso_s,model_fange_relerr,flags"
        );
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells[0], "1.0000000000000000e-8");
        assert_eq!(cells[2], "1000");
        assert_eq!(cells[7], "");
        assert_eq!(cells[9], "below_h_crit");
    }

    #[test]
    fn rows_sorted_by_descending_h() {
        let rows = [row(1e-9, &[]), row(3e-9, &[]), row(2e-9, &[])];
        let back = read_rows(write_string(&rows).as_bytes(), Path::new("mem")).unwrap();
        let hs: Vec<f64> = back.iter().map(|r| r.h).collect();
        assert_eq!(hs, vec![3e-9, 2e-9, 1e-9]);
    }

    #[test]
    fn round_trip_with_mc() {
        let models = [RateModel::Conventional, RateModel::RenewalExact];
        let mut rows = vec![row(4e-9, &models), row(2e-9, &models)];
        rows[0].models[1].mc = Some(McEstimate { mean: 0.3, stderr: 1e-3 });
        rows[1].flags = Flags::default();
        let back = read_rows(write_string(&rows).as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn rejects_empty_and_mixed() {
        let mut buf = Vec::new();
        assert!(write_rows(&[], &mut buf, Path::new("mem")).is_err());
        let rows = [row(1e-8, &[RateModel::Fange]), row(2e-8, &[])];
        assert!(write_rows(&rows, &mut buf, Path::new("mem")).is_err());
    }

    #[test]
    fn rejects_foreign_header() {
        let text = "a,b,c\n1,2,3\n";
        assert!(read_rows(text.as_bytes(), Path::new("mem")).is_err());
    }
}
