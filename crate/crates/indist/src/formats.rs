//! Text file formats. Matrices are JSON objects `{dim, re, im}`; everything
//! else is tab-separated with a header row. Summary records follow the table
//! as `key<TAB>value` lines. Floats carry 17 significant digits so files
//! round-trip bit for bit. Mode indices in files are one-based.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indist_core::bayes::{EventRecord, Posterior};
use indist_core::distance::TvdReport;
use indist_core::scattershot::BandPoint;
use indist_core::search::EnsembleHistogram;
use indist_core::tomography::VisibilityRecord;
use indist_core::{Complex64, ComplexMatrix, Distribution, ModeConfig, OutcomeLabel, RealMatrix, UnitaryMatrix};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}{}: {message}", .path.display(), line_suffix(*.line))]
    Parse { path: PathBuf, line: usize, message: String },
}

fn line_suffix(line: usize) -> String {
    if line == 0 { String::new() } else { format!(":{line}") }
}

/// Parse failure inside a text; `line` is one-based, 0 for the whole text.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }

    pub fn at(self, path: &Path) -> FormatError {
        FormatError::Parse { path: path.to_path_buf(), line: self.line, message: self.message }
    }
}

type ParseResult<T> = Result<T, ParseError>;

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Reads and parses a file, attaching the path to parse errors.
pub fn read_with<T>(path: &Path, parse: impl FnOnce(&str) -> ParseResult<T>) -> Result<T, FormatError> {
    parse(&read_text(path)?).map_err(|e| e.at(path))
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(line: usize, field: &str, what: &str) -> ParseResult<f64> {
    field.trim().parse::<f64>().map_err(|_| ParseError::new(line, format!("bad {what} `{field}`")))
}

fn parse_int<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> ParseResult<T> {
    field.trim().parse::<T>().map_err(|_| ParseError::new(line, format!("bad {what} `{field}`")))
}

/// Non-blank lines with one-based numbers, the header checked and skipped.
fn table_rows<'a>(text: &'a str, header: &[&str]) -> ParseResult<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let Some((n, head)) = lines.next() else {
        return Err(ParseError::new(0, "empty file"));
    };
    let got: Vec<&str> = head.split('\t').map(str::trim).collect();
    if got != header {
        return Err(ParseError::new(n, format!("expected header `{}`", header.join("\\t"))));
    }
    Ok(lines.map(|(n, l)| (n, l.split('\t').collect())).collect())
}

fn expect_fields(line: usize, fields: &[&str], count: usize) -> ParseResult<()> {
    if fields.len() != count {
        return Err(ParseError::new(line, format!("expected {count} fields, found {}", fields.len())));
    }
    Ok(())
}

// Matrices.

fn write_rows(out: &mut String, rows: impl Iterator<Item = Vec<f64>>) {
    out.push_str("[\n");
    let rows: Vec<String> = rows.map(|r| format!("    [{}]", r.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", "))).collect();
    out.push_str(&rows.join(",\n"));
    out.push_str("\n  ]");
}

pub fn format_complex_matrix(m: &ComplexMatrix) -> String {
    let d = m.dim();
    let mut s = format!("{{\n  \"dim\": {d},\n  \"re\": ");
    write_rows(&mut s, (0..d).map(|r| (0..d).map(|c| m[(r, c)].re).collect()));
    s.push_str(",\n  \"im\": ");
    write_rows(&mut s, (0..d).map(|r| (0..d).map(|c| m[(r, c)].im).collect()));
    s.push_str("\n}\n");
    s
}

pub fn format_real_matrix(m: &RealMatrix) -> String {
    format_complex_matrix(&ComplexMatrix::from_fn(m.rows(), |r, c| Complex64::new(m[(r, c)], 0.0)))
}

#[derive(Deserialize)]
struct MatrixFile {
    dim: usize,
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn check_rows(rows: &[Vec<f64>], dim: usize, name: &str) -> ParseResult<()> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(ParseError::new(0, format!("`{name}` must be {dim}x{dim}")));
    }
    Ok(())
}

pub fn parse_complex_matrix(text: &str) -> ParseResult<ComplexMatrix> {
    let f: MatrixFile = serde_json::from_str(text).map_err(|e| ParseError::new(e.line(), e.to_string()))?;
    if f.dim == 0 {
        return Err(ParseError::new(0, "dim must be positive"));
    }
    check_rows(&f.re, f.dim, "re")?;
    let im = f.im.unwrap_or_else(|| vec![vec![0.0; f.dim]; f.dim]);
    check_rows(&im, f.dim, "im")?;
    Ok(ComplexMatrix::from_fn(f.dim, |r, c| Complex64::new(f.re[r][c], im[r][c])))
}

pub fn parse_unitary(text: &str) -> ParseResult<UnitaryMatrix> {
    UnitaryMatrix::new(parse_complex_matrix(text)?).map_err(|e| ParseError::new(0, e.to_string()))
}

/// Real matrix stored in the complex matrix format; `im` must be absent or zero.
pub fn parse_real_matrix(text: &str) -> ParseResult<RealMatrix> {
    let m = parse_complex_matrix(text)?;
    if m.as_slice().iter().any(|z| z.im != 0.0) {
        return Err(ParseError::new(0, "expected a real matrix (non-zero `im`)"));
    }
    let d = m.dim();
    Ok(RealMatrix::from_fn(d, d, |r, c| m[(r, c)].re))
}

// Distributions.

pub fn format_distribution(d: &Distribution) -> String {
    let mut s = String::from("label\tp\n");
    for (l, p) in d.iter() {
        let _ = writeln!(s, "{l}\t{}", num(p));
    }
    s
}

pub fn parse_distribution(text: &str) -> ParseResult<Distribution> {
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (n, f) in table_rows(text, &["label", "p"])? {
        expect_fields(n, &f, 2)?;
        labels.push(f[0].trim().parse::<OutcomeLabel>().map_err(|e| ParseError::new(n, e.to_string()))?);
        probs.push(parse_f64(n, f[1], "probability")?);
    }
    Distribution::new(labels, probs).map_err(|e| ParseError::new(0, e.to_string()))
}

// Events.

pub fn format_events(events: &[EventRecord]) -> String {
    let mut s = String::from("input\toutput\n");
    for e in events {
        let _ = writeln!(s, "{}\t{}", e.input, e.output);
    }
    s
}

/// Event stream. An empty text is an empty stream. Every record must have
/// the photon number `photons` (or that of the first record) and a
/// consistent mode count.
pub fn parse_events(text: &str, photons: Option<usize>) -> ParseResult<Vec<EventRecord>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut expect = photons;
    let mut modes = None;
    let mut out = Vec::new();
    for (n, f) in table_rows(text, &["input", "output"])? {
        expect_fields(n, &f, 2)?;
        let input: ModeConfig = f[0].parse().map_err(|e: indist_core::Error| ParseError::new(n, e.to_string()))?;
        let output: OutcomeLabel = f[1].parse().map_err(|e: indist_core::Error| ParseError::new(n, e.to_string()))?;
        let want = *expect.get_or_insert(input.photons());
        let m = *modes.get_or_insert(input.modes_count());
        if input.photons() != want {
            return Err(ParseError::new(n, format!("input has {} photons, expected {want}", input.photons())));
        }
        if input.modes_count() != m {
            return Err(ParseError::new(n, format!("input has {} modes, expected {m}", input.modes_count())));
        }
        if let OutcomeLabel::Config(c) = &output {
            if c.photons() != want {
                return Err(ParseError::new(n, format!("output has {} photons, expected {want}", c.photons())));
            }
            if c.modes_count() != m {
                return Err(ParseError::new(n, format!("output has {} modes, expected {m}", c.modes_count())));
            }
        }
        out.push(EventRecord { input, output });
    }
    Ok(out)
}

// TVD reports.

pub fn format_tvd_report(r: &TvdReport) -> String {
    let mut s = String::from("input\ttvd\n");
    for (i, t) in &r.per_input {
        let _ = writeln!(s, "{i}\t{}", num(*t));
    }
    let _ = writeln!(s, "max_tvd\t{}", num(r.max_tvd));
    let _ = writeln!(s, "avg_tvd\t{}", num(r.avg_tvd));
    let _ = writeln!(s, "best_input\t{}", r.best_input);
    s
}

pub fn parse_tvd_report(text: &str) -> ParseResult<TvdReport> {
    let mut per_input = Vec::new();
    let (mut max_tvd, mut avg_tvd, mut best) = (None, None, None);
    for (n, f) in table_rows(text, &["input", "tvd"])? {
        expect_fields(n, &f, 2)?;
        match f[0].trim() {
            "max_tvd" => max_tvd = Some(parse_f64(n, f[1], "max_tvd")?),
            "avg_tvd" => avg_tvd = Some(parse_f64(n, f[1], "avg_tvd")?),
            "best_input" => best = Some(f[1].parse::<ModeConfig>().map_err(|e| ParseError::new(n, e.to_string()))?),
            label => {
                let c = label.parse::<ModeConfig>().map_err(|e| ParseError::new(n, e.to_string()))?;
                per_input.push((c, parse_f64(n, f[1], "tvd")?));
            }
        }
    }
    match (max_tvd, avg_tvd, best) {
        (Some(max_tvd), Some(avg_tvd), Some(best_input)) => Ok(TvdReport { per_input, best_input, max_tvd, avg_tvd }),
        _ => Err(ParseError::new(0, "missing summary records (max_tvd, avg_tvd, best_input)")),
    }
}

// Histograms and ensemble values.

pub fn format_histogram(h: &EnsembleHistogram) -> String {
    let mut s = String::from("bin_lo\tbin_hi\tcount\n");
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(s, "{}\t{}\t{c}", num(h.bin_edges[k]), num(h.bin_edges[k + 1]));
    }
    let _ = writeln!(s, "samples\t{}", h.sample_count);
    let _ = writeln!(s, "min\t{}", num(h.min));
    let _ = writeln!(s, "max\t{}", num(h.max));
    let _ = writeln!(s, "mean\t{}", num(h.mean));
    for (name, v) in &h.markers {
        let _ = writeln!(s, "marker\t{name}\t{}", num(*v));
    }
    s
}

pub fn parse_histogram(text: &str) -> ParseResult<EnsembleHistogram> {
    let mut edges: Vec<f64> = Vec::new();
    let mut counts = Vec::new();
    let mut markers = Vec::new();
    let (mut samples, mut min, mut max, mut mean) = (None, None, None, None);
    for (n, f) in table_rows(text, &["bin_lo", "bin_hi", "count"])? {
        match f[0].trim() {
            "samples" => {
                expect_fields(n, &f, 2)?;
                samples = Some(parse_int::<u64>(n, f[1], "sample count")?);
            }
            "min" | "max" | "mean" => {
                expect_fields(n, &f, 2)?;
                let v = parse_f64(n, f[1], f[0])?;
                match f[0].trim() {
                    "min" => min = Some(v),
                    "max" => max = Some(v),
                    _ => mean = Some(v),
                }
            }
            "marker" => {
                expect_fields(n, &f, 3)?;
                markers.push((f[1].to_string(), parse_f64(n, f[2], "marker value")?));
            }
            _ => {
                expect_fields(n, &f, 3)?;
                let lo = parse_f64(n, f[0], "bin_lo")?;
                let hi = parse_f64(n, f[1], "bin_hi")?;
                match edges.last() {
                    None => edges.push(lo),
                    Some(&last) if last != lo => return Err(ParseError::new(n, "bins are not contiguous")),
                    _ => {}
                }
                edges.push(hi);
                counts.push(parse_int::<u64>(n, f[2], "count")?);
            }
        }
    }
    let (Some(sample_count), Some(min), Some(max), Some(mean)) = (samples, min, max, mean) else {
        return Err(ParseError::new(0, "missing summary records (samples, min, max, mean)"));
    };
    if counts.iter().sum::<u64>() != sample_count {
        return Err(ParseError::new(0, "bin counts do not add up to `samples`"));
    }
    Ok(EnsembleHistogram { bin_edges: edges, counts, sample_count, markers, min, max, mean })
}

pub fn format_values(values: &[f64]) -> String {
    let mut s = String::from("index\tvalue\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{}", num(*v));
    }
    s
}

pub fn parse_values(text: &str) -> ParseResult<Vec<f64>> {
    table_rows(text, &["index", "value"])?
        .into_iter()
        .enumerate()
        .map(|(k, (n, f))| {
            expect_fields(n, &f, 2)?;
            if parse_int::<usize>(n, f[0], "index")? != k {
                return Err(ParseError::new(n, "indices must count up from 0"));
            }
            parse_f64(n, f[1], "value")
        })
        .collect()
}

// Bayesian outputs.

pub fn format_confidence(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("events\tp_conf\n");
    for (n, p) in curve {
        let _ = writeln!(s, "{n}\t{}", num(*p));
    }
    s
}

pub fn parse_confidence(text: &str) -> ParseResult<Vec<(usize, f64)>> {
    table_rows(text, &["events", "p_conf"])?
        .into_iter()
        .map(|(n, f)| {
            expect_fields(n, &f, 2)?;
            Ok((parse_int(n, f[0], "event count")?, parse_f64(n, f[1], "p_conf")?))
        })
        .collect()
}

pub fn format_posterior(p: &Posterior) -> String {
    let mut s = String::from("x\tdensity\n");
    for (x, w) in p.grid.iter().zip(&p.weights) {
        let _ = writeln!(s, "{}\t{}", num(*x), num(*w));
    }
    let _ = writeln!(s, "x_est\t{}", num(p.x_est));
    let _ = writeln!(s, "sigma_est\t{}", num(p.sigma_est));
    s
}

pub fn parse_posterior(text: &str) -> ParseResult<Posterior> {
    let (mut grid, mut weights) = (Vec::new(), Vec::new());
    let (mut x_est, mut sigma_est) = (None, None);
    for (n, f) in table_rows(text, &["x", "density"])? {
        expect_fields(n, &f, 2)?;
        match f[0].trim() {
            "x_est" => x_est = Some(parse_f64(n, f[1], "x_est")?),
            "sigma_est" => sigma_est = Some(parse_f64(n, f[1], "sigma_est")?),
            _ => {
                grid.push(parse_f64(n, f[0], "x")?);
                weights.push(parse_f64(n, f[1], "density")?);
            }
        }
    }
    match (x_est, sigma_est) {
        (Some(x_est), Some(sigma_est)) => Ok(Posterior { grid, weights, x_est, sigma_est }),
        _ => Err(ParseError::new(0, "missing summary records (x_est, sigma_est)")),
    }
}

pub fn format_band(band: &[BandPoint]) -> String {
    let mut s = String::from("events\tx_est\tsigma_est\tx_min\tx_max\tx_mean\n");
    for b in band {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", b.events, num(b.x_est), num(b.sigma_est), num(b.x_min), num(b.x_max), num(b.x_mean));
    }
    s
}

pub fn parse_band(text: &str) -> ParseResult<Vec<BandPoint>> {
    table_rows(text, &["events", "x_est", "sigma_est", "x_min", "x_max", "x_mean"])?
        .into_iter()
        .map(|(n, f)| {
            expect_fields(n, &f, 6)?;
            Ok(BandPoint {
                events: parse_int(n, f[0], "event count")?,
                x_est: parse_f64(n, f[1], "x_est")?,
                sigma_est: parse_f64(n, f[2], "sigma_est")?,
                x_min: parse_f64(n, f[3], "x_min")?,
                x_max: parse_f64(n, f[4], "x_max")?,
                x_mean: parse_f64(n, f[5], "x_mean")?,
            })
        })
        .collect()
}

/// Ordered `key<TAB>value` records under a `key\tvalue` header.
pub fn format_records(records: &[(String, String)]) -> String {
    let mut s = String::from("key\tvalue\n");
    for (k, v) in records {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s
}

pub fn parse_records(text: &str) -> ParseResult<Vec<(String, String)>> {
    table_rows(text, &["key", "value"])?
        .into_iter()
        .map(|(n, f)| {
            expect_fields(n, &f, 2)?;
            Ok((f[0].trim().to_string(), f[1].trim().to_string()))
        })
        .collect()
}

// Visibilities.

pub fn format_visibilities(records: &[VisibilityRecord]) -> String {
    let mut s = String::from("i\tj\tm\tn\tV\tsigma_V\n");
    for r in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.inputs.0 + 1,
            r.inputs.1 + 1,
            r.outputs.0 + 1,
            r.outputs.1 + 1,
            num(r.visibility),
            num(r.sigma)
        );
    }
    s
}

pub fn parse_visibilities(text: &str) -> ParseResult<Vec<VisibilityRecord>> {
    let mode = |n: usize, f: &str| -> ParseResult<usize> {
        let k: usize = parse_int(n, f, "mode")?;
        k.checked_sub(1).ok_or_else(|| ParseError::new(n, "modes are one-based"))
    };
    table_rows(text, &["i", "j", "m", "n", "V", "sigma_V"])?
        .into_iter()
        .map(|(n, f)| {
            expect_fields(n, &f, 6)?;
            let inputs = (mode(n, f[0])?, mode(n, f[1])?);
            let outputs = (mode(n, f[2])?, mode(n, f[3])?);
            VisibilityRecord::new(inputs, outputs, parse_f64(n, f[4], "V")?, parse_f64(n, f[5], "sigma_V")?)
                .map_err(|e| ParseError::new(n, e.to_string()))
        })
        .collect()
}

/// One-based, comma-separated mode list (`1,3`) as a collision-free input.
pub fn parse_mode_list(s: &str, modes: usize) -> Result<ModeConfig, String> {
    let list = s
        .split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(format!("bad mode `{t}` in `{s}` (modes are one-based)")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    ModeConfig::from_distinct_modes(modes, &list).map_err(|e| format!("input `{s}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use indist_core::interference::{distribution_indistinguishable, CollisionPolicy};
    use indist_core::matrices::{fourier, haar_random};

    #[test]
    fn matrix_round_trip_is_exact() {
        let u = haar_random(5, 3);
        let text = format_complex_matrix(u.matrix());
        let back = parse_unitary(&text).unwrap();
        assert_eq!(back.matrix(), u.matrix());
        assert!(text.contains("\"dim\": 5"));
    }

    #[test]
    fn matrix_errors() {
        assert!(parse_complex_matrix("{\"dim\": 2, \"re\": [[1, 0]]}").is_err());
        let e = parse_unitary("{\"dim\": 2, \"re\": [[1, 1], [0, 1]]}").unwrap_err();
        assert!(e.message.contains("unitar"), "{e}");
        let e = parse_complex_matrix("{\n\"dim\": 2,\n\"re\": [[1, 0], [0, 1]\n").unwrap_err();
        assert!(e.line >= 3, "{e:?}");
        assert!(parse_real_matrix("{\"dim\": 1, \"re\": [[1]], \"im\": [[0.5]]}").is_err());
        assert_eq!(parse_real_matrix("{\"dim\": 1, \"re\": [[0.25]]}").unwrap()[(0, 0)], 0.25);
    }

    #[test]
    fn distribution_round_trip() {
        let input: ModeConfig = "1-1-0".parse().unwrap();
        for policy in [CollisionPolicy::WithCollisions, CollisionPolicy::Binned] {
            let d = distribution_indistinguishable(&fourier(3), &input, policy).unwrap();
            assert_eq!(parse_distribution(&format_distribution(&d)).unwrap(), d);
        }
    }

    #[test]
    fn events_validation() {
        assert!(parse_events("", Some(2)).unwrap().is_empty());
        let text = "input\toutput\n1-1-0-0\t0-1-1-0\n1-1-0-0\tCOLL\n1-0-1-0\t2-0-0-0\n";
        assert_eq!(parse_events(text, None).unwrap().len(), 3);
        let bad = "input\toutput\n1-1-0-0\t0-1-1-0\n1-1-1-0\t1-1-1-0\n";
        let e = parse_events(bad, None).unwrap_err();
        assert_eq!(e.line, 3);
        let bad = "input\toutput\n1-1-0-0\t0-1-0-0\n";
        assert_eq!(parse_events(bad, Some(2)).unwrap_err().line, 2);
        assert_eq!(parse_events("input\toutput\n1-1-0-0\n", None).unwrap_err().line, 2);
        assert_eq!(parse_events("in\tout\n", None).unwrap_err().line, 1);
    }

    #[test]
    fn visibility_round_trip() {
        let v = vec![VisibilityRecord::new((0, 2), (1, 3), 0.123456789012345678, 0.01).unwrap()];
        let text = format_visibilities(&v);
        assert!(text.lines().nth(1).unwrap().starts_with("1\t3\t2\t4\t"));
        assert_eq!(parse_visibilities(&text).unwrap(), v);
        assert_eq!(parse_visibilities("i\tj\tm\tn\tV\tsigma_V\n0\t1\t2\t3\t0.5\t0.1\n").unwrap_err().line, 2);
    }

    #[test]
    fn mode_lists() {
        assert_eq!(parse_mode_list("1,3", 4).unwrap().to_string(), "1-0-1-0");
        assert!(parse_mode_list("0,3", 4).is_err());
        assert!(parse_mode_list("1,1", 4).is_err());
        assert!(parse_mode_list("1,5", 4).is_err());
    }

    #[test]
    fn num_has_17_significant_digits() {
        assert_eq!(num(0.5), "5.0000000000000000e-1");
        let v = 0.1f64 + 0.2;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }
}
