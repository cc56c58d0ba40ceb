//! Samples CSV (`x1,…,xd,energy[,cluster]`) and the weight/trace writers.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use modeweight::bench::fmt_f64;
use modeweight::{DescentTrace, SampleSet};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplesFile {
    pub samples: SampleSet,
    pub labels: Option<Vec<u64>>,
}

pub fn read_samples(path: &Path) -> CliResult<SamplesFile> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_samples(file).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_samples<R: Read>(input: R) -> CliResult<SamplesFile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let energy_col = header
        .iter()
        .position(|h| h == "energy")
        .ok_or_else(|| CliError::input("line 1: missing column `energy`"))?;
    if energy_col == 0 {
        return Err(CliError::input("line 1: expected coordinate columns x1,… before `energy`"));
    }
    for (j, h) in header[..energy_col].iter().enumerate() {
        if *h != format!("x{}", j + 1) {
            return Err(CliError::input(format!("line 1: column {} is `{h}`, expected `x{}`", j + 1, j + 1)));
        }
    }
    let has_cluster = match &header[energy_col + 1..] {
        [] => false,
        [c] if c == "cluster" => true,
        rest => return Err(CliError::input(format!("line 1: unexpected columns after `energy`: {}", rest.join(",")))),
    };
    let d = energy_col;
    let mut rows = Vec::new();
    let mut energies = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let float = |j: usize| -> CliResult<f64> {
            let s = &record[j];
            s.parse::<f64>()
                .map_err(|_| CliError::input(format!("line {line}: column `{}`: cannot parse `{s}` as a number", header[j])))
        };
        let x = (0..d).map(float).collect::<CliResult<Vec<f64>>>()?;
        let e = float(d)?;
        if !e.is_finite() {
            return Err(CliError::input(format!("line {line}: energy must be finite")));
        }
        if has_cluster {
            let s = &record[d + 1];
            labels.push(
                s.parse::<u64>()
                    .map_err(|_| CliError::input(format!("line {line}: cluster `{s}` is not a nonnegative integer")))?,
            );
        }
        rows.push(x);
        energies.push(e);
    }
    if rows.is_empty() {
        return Err(CliError::input("no sample rows"));
    }
    let samples = SampleSet::from_rows(&rows, energies)?;
    Ok(SamplesFile {
        samples,
        labels: has_cluster.then_some(labels),
    })
}

pub fn write_samples(path: &Path, samples: &SampleSet, labels: Option<&[u64]>) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header: Vec<String> = (1..=samples.dim()).map(|j| format!("x{j}")).collect();
    header.push("energy".into());
    if labels.is_some() {
        header.push("cluster".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..samples.count() {
        let mut row: Vec<String> = samples.point(i).iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(samples.energies()[i]));
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// `cluster,weight,W_k,V_k`, one row per cluster.
pub fn write_weights(path: &Path, names: &[u64], trace: &DescentTrace, energy_means: &[f64]) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "cluster,weight,W_k,V_k")?;
    let p = trace.final_weights();
    for (k, name) in names.iter().enumerate() {
        writeln!(
            out,
            "{name},{},{},{}",
            fmt_f64(p[k]),
            fmt_f64(trace.w_values[k]),
            fmt_f64(energy_means[k])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `iter,p_1,…,p_K`, one row per iterate.
pub fn write_trace(path: &Path, trace: &DescentTrace) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let k = trace.final_weights().len();
    let header: Vec<String> = (1..=k).map(|c| format!("p_{c}")).collect();
    writeln!(out, "iter,{}", header.join(","))?;
    for (m, p) in trace.iterates.iter().enumerate() {
        let row: Vec<String> = p.as_slice().iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{m},{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_cluster_column() {
        let f = parse_samples("x1,x2,energy,cluster\n0.5,1,2.0,1\n-1e-3,2,3,0\n".as_bytes()).unwrap();
        assert_eq!(f.samples.count(), 2);
        assert_eq!(f.samples.dim(), 2);
        assert_eq!(f.samples.point(1), &[-1e-3, 2.0]);
        assert_eq!(f.labels, Some(vec![1, 0]));
    }

    #[test]
    fn bad_number_reports_line() {
        let err = parse_samples("x1,energy\n0.5,1\nabc,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_samples("x1,energy\n0.5,1\n0.2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn missing_energy_column() {
        let err = parse_samples("x1,x2\n0,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("energy"));
    }

    #[test]
    fn non_finite_energy_rejected() {
        assert!(parse_samples("x1,energy\n0,inf\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 123456.789012345678]];
        let s = SampleSet::from_rows(&rows, vec![std::f64::consts::PI, -1e10 / 7.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples(&path, &s, Some(&[3, 0])).unwrap();
        let back = read_samples(&path).unwrap();
        assert_eq!(back.samples, s);
        assert_eq!(back.labels, Some(vec![3, 0]));
    }
}
