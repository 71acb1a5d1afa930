//! Command-line front end. `run` parses arguments, executes one job and
//! writes the artifact; the return value is the process exit code.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::endoscopy::{
    construct_transfer_data, endoscopic_catalog, validate_transfer_data, EndoscopicDatum, Endoscopy,
    TransferData,
};
use crate::lattice::{IVec, RatVec};
use crate::partition::{l_function, nilradical_determinant, Side};
use crate::root_datum::{build_preset, DatumSpec, RootDatumTheta};
use crate::scalar::CycloLaurent;
use crate::spherical::{CoeffMatrix, Spherical};
use crate::{Error, Result};

pub const CACHE_ENV: &str = "HECKE_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "satake", version, about = "Exact spherical Hecke algebra computations on the dual side")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Twisted character tau_lambda.
    Character(CharacterArgs),
    /// Satake matrix s (f-hat in the orbit-sum basis).
    Satake(MatrixArgs),
    /// Kato-Lusztig inverse Satake matrix t.
    InverseSatake(MatrixArgs),
    /// Weight multiplicity matrix m.
    WeightMult(MatrixArgs),
    /// Inverse n of the weight multiplicity matrix.
    InvertMult(MatrixArgs),
    /// Endoscopic branching coefficients m(lambda, mu).
    Branch(EndoArgs),
    /// Base-change matrix in the f-hat bases.
    BaseChange(EndoArgs),
    /// Construct (or read) transfer data and validate it.
    ValidateData(ValidateArgs),
    /// Numeric Plancherel orthogonality check.
    PlancherelCheck(PlancherelArgs),
    /// Local L-function of the nilradical at a finite-order parameter.
    LFunction(LFunctionArgs),
    /// Endoscopic data of a datum, as JSON inputs for the other commands.
    Catalog(DatumArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct DatumArgs {
    /// Preset name such as A2, A2.ad or A3~2.
    #[arg(long, conflicts_with = "datum")]
    pub preset: Option<String>,
    /// JSON file with name, rank, simple_roots, simple_coroots and theta.
    #[arg(long)]
    pub datum: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CharacterArgs {
    #[command(flatten)]
    pub datum: DatumArgs,
    /// Dominant weight in Y*-coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub lambda: Vec<i64>,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub datum: DatumArgs,
    /// Index set: all dominant weights of at most this height.
    #[arg(long, default_value_t = 4)]
    pub max_height: i64,
}

#[derive(Args, Debug)]
pub struct EndoArgs {
    /// Endoscopic datum JSON.
    #[arg(long)]
    pub endo: PathBuf,
    /// Transfer data JSON; constructed when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_height: i64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub endo: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct PlancherelArgs {
    #[command(flatten)]
    pub datum: DatumArgs,
    /// Residue field size q0 (> 1).
    #[arg(long = "q", default_value_t = 9.0)]
    pub q0: f64,
    /// Largest height of lambda and mu.
    #[arg(long = "max", default_value_t = 2)]
    pub max: i64,
    /// Height bound for the measure series.
    #[arg(long, default_value_t = 40)]
    pub bound: i64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct LFunctionArgs {
    #[command(flatten)]
    pub datum: DatumArgs,
    /// Parameter as rationals mod 1 (ambient coordinates), e.g. 1/4,0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub param: Vec<String>,
    /// Use the negative nilradical.
    #[arg(long)]
    pub negative: bool,
}

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Mismatch(_) => Failure::Validation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parse `args` (including the program name), run the job and write to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Validation(m)) => {
            let _ = writeln!(err, "validation failed: {m}");
            EXIT_VALIDATION
        }
    }
}

fn load_datum(a: &DatumArgs) -> Result<RootDatumTheta> {
    match (&a.preset, &a.datum) {
        (Some(p), _) => build_preset(p),
        (None, Some(path)) => {
            let spec: DatumSpec = serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(e.to_string()))?;
            RootDatumTheta::from_spec(&spec)
        }
        (None, None) => Err(Error::Precondition("pass --preset or --datum".into())),
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn spherical(d: &RootDatumTheta) -> Result<Spherical<'_>> {
    let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    Ok(Spherical::new(d)?.with_cache_dir(dir))
}

fn parse_rational(s: &str) -> Result<Rational64> {
    let bad = || Error::Parse(format!("bad rational: {s}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(a, b))
        }
        None => Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

fn emit_json(out: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Parse(e.to_string()))
}

fn emit_csv(out: &mut dyn Write, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

fn coords_text(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Matrix with rows and columns written in the given coordinates.
fn matrix_value(m: &CoeffMatrix, row_c: impl Fn(&IVec) -> IVec, col_c: impl Fn(&IVec) -> IVec) -> Value {
    let entries: Vec<Value> = m
        .entries()
        .map(|(i, j, c)| json!({"row": row_c(&m.rows[i]), "col": col_c(&m.cols[j]), "value": c.to_string()}))
        .collect();
    json!({
        "rows": m.rows.iter().map(&row_c).collect::<Vec<_>>(),
        "cols": m.cols.iter().map(&col_c).collect::<Vec<_>>(),
        "entries": entries,
    })
}

fn matrix_csv(m: &CoeffMatrix, row_c: impl Fn(&IVec) -> IVec, col_c: impl Fn(&IVec) -> IVec) -> Vec<Vec<String>> {
    m.entries()
        .map(|(i, j, c)| vec![coords_text(&row_c(&m.rows[i])), coords_text(&col_c(&m.cols[j])), c.to_string()])
        .collect()
}

fn write_matrix(
    out: &mut dyn Write,
    format: Format,
    header: Value,
    m: &CoeffMatrix,
    row_c: impl Fn(&IVec) -> IVec,
    col_c: impl Fn(&IVec) -> IVec,
) -> Result<()> {
    match format {
        Format::Json => {
            let mut v = header;
            v["matrix"] = matrix_value(m, row_c, col_c);
            emit_json(out, &v)
        }
        Format::Csv => emit_csv(out, &["row", "col", "value"], matrix_csv(m, row_c, col_c)),
    }
}

fn load_endo(endo: &PathBuf, data: &Option<PathBuf>) -> Result<(EndoscopicDatum, TransferData)> {
    let e = EndoscopicDatum::from_json(&read(endo)?)?;
    let t = match data {
        Some(p) => TransferData::from_json(&e.datum, &read(p)?)?,
        None => construct_transfer_data(&e)?,
    };
    Ok((e, t))
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Character(a) => {
            let d = load_datum(&a.datum)?;
            if a.lambda.len() != d.y.dim() {
                return Err(Failure::Usage(format!("lambda needs {} Y*-coordinates", d.y.dim())));
            }
            let lambda = d.from_y_coords(&a.lambda);
            let tau = spherical(&d)?.tau(&lambda)?;
            let yc = |v: &IVec| d.y_coords(v).expect("characters live on Y*");
            match a.datum.format {
                Format::Json => emit_json(
                    out,
                    &json!({"datum": d.name, "lambda": a.lambda, "terms": tau.to_json(yc)}),
                )?,
                Format::Csv => emit_csv(
                    out,
                    &["weight", "coeff"],
                    tau.terms().map(|(mu, c)| vec![coords_text(&yc(mu)), c.to_string()]).collect(),
                )?,
            }
            Ok(EXIT_OK)
        }
        Command::Satake(a) | Command::InverseSatake(a) | Command::WeightMult(a) | Command::InvertMult(a) => {
            let d = load_datum(&a.datum)?;
            let s = spherical(&d)?;
            let idx = d.dominant_weights(a.max_height)?;
            let (kind, m) = match cmd {
                Command::Satake(_) => ("satake", s.satake_matrix(&idx)?),
                Command::InverseSatake(_) => ("inverse-satake", s.kato_lusztig_matrix(&idx)?),
                Command::WeightMult(_) => ("weight-mult", s.weight_mult_matrix(&idx)?),
                _ => ("invert-mult", s.van_leeuwen_inverse(&idx)?),
            };
            let yc = |v: &IVec| d.y_coords(v).expect("indices lie in Y*");
            write_matrix(
                out,
                a.datum.format,
                json!({"datum": d.name, "kind": kind, "max_height": a.max_height}),
                &m,
                yc,
                yc,
            )?;
            Ok(EXIT_OK)
        }
        Command::Branch(a) | Command::BaseChange(a) => {
            let (e, t) = load_endo(&a.endo, &a.data)?;
            let en = Endoscopy::new(&e, &t)?;
            let d = &e.datum;
            let idx = d.dominant_weights(a.max_height)?;
            let ih = en.h_index_for(&idx)?;
            let (kind, m) = match cmd {
                Command::Branch(_) => ("branch", en.branching_matrix(&idx, &ih)?),
                _ => ("base-change", en.base_change_matrix(&idx, &ih)?),
            };
            let yc = |v: &IVec| d.y_coords(v).expect("indices lie in Y*");
            let tc = |v: &IVec| e.t1.coords(v).expect("H indices lie in X*(T_1)");
            write_matrix(
                out,
                a.format,
                json!({
                    "datum": d.name,
                    "kind": kind,
                    "max_height": a.max_height,
                    "transfer_data": t.to_json_value(d),
                }),
                &m,
                yc,
                tc,
            )?;
            Ok(EXIT_OK)
        }
        Command::ValidateData(a) => {
            let (e, t) = load_endo(&a.endo, &a.data)?;
            let rep = validate_transfer_data(&e, &t);
            match a.format {
                Format::Json => emit_json(
                    out,
                    &json!({
                        "datum": e.datum.name,
                        "transfer_data": t.to_json_value(&e.datum),
                        "report": rep,
                        "passed": rep.all_passed(),
                    }),
                )?,
                Format::Csv => {
                    let checks = [
                        ("shapes", &rep.shapes),
                        ("adapted", &rep.adapted),
                        ("conjugacy_proxy", &rep.conjugacy_proxy),
                        ("regularity", &rep.regularity),
                        ("partition_identity", &rep.partition_identity),
                        ("pinned", &rep.pinned),
                    ];
                    emit_csv(
                        out,
                        &["check", "passed", "detail"],
                        checks
                            .iter()
                            .map(|(n, c)| vec![n.to_string(), c.passed.to_string(), c.detail.clone()])
                            .collect(),
                    )?
                }
            }
            Ok(if rep.all_passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::PlancherelCheck(a) => {
            if a.q0 <= 1.0 {
                return Err(Failure::Usage("--q must exceed 1".into()));
            }
            if a.max < 0 || a.bound <= 0 {
                return Err(Failure::Usage("bounds must be positive".into()));
            }
            let d = load_datum(&a.datum)?;
            let s = spherical(&d)?;
            let idx = d.dominant_weights(a.max)?;
            let fh: Vec<_> = idx.iter().map(|l| s.macdonald_fhat(l)).collect::<Result<_>>()?;
            let yc = |v: &IVec| d.y_coords(v).expect("indices lie in Y*");
            let mut rows = Vec::new();
            let mut ok = true;
            for (i, l) in idx.iter().enumerate() {
                for (j, m) in idx.iter().enumerate() {
                    let v = s.pair(&fh[i], &fh[j], a.q0, a.bound)?;
                    let expected = if i == j {
                        (&s.c_constant(m)? * &CycloLaurent::q_half_pow(d.height(m))).evaluate(a.q0).re
                    } else {
                        0.0
                    };
                    let error = (v - num_complex::Complex64::new(expected, 0.0)).norm();
                    ok &= error < a.tol;
                    rows.push((yc(l), yc(m), v, expected, error));
                }
            }
            match a.datum.format {
                Format::Json => emit_json(
                    out,
                    &json!({
                        "datum": d.name,
                        "q": a.q0,
                        "bound": a.bound,
                        "tolerance": a.tol,
                        "passed": ok,
                        "pairs": rows.iter().map(|(l, m, v, e, err)| json!({
                            "lambda": l, "mu": m,
                            "value": [format!("{:.9}", v.re), format!("{:.9}", v.im)],
                            "expected": format!("{e:.9}"),
                            "error": format!("{err:.3e}"),
                        })).collect::<Vec<_>>(),
                    }),
                )?,
                Format::Csv => emit_csv(
                    out,
                    &["lambda", "mu", "re", "im", "expected", "error"],
                    rows.iter()
                        .map(|(l, m, v, e, err)| {
                            vec![
                                coords_text(l),
                                coords_text(m),
                                format!("{:.9}", v.re),
                                format!("{:.9}", v.im),
                                format!("{e:.9}"),
                                format!("{err:.3e}"),
                            ]
                        })
                        .collect(),
                )?,
            }
            Ok(if ok { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::LFunction(a) => {
            let d = load_datum(&a.datum)?;
            let t: RatVec = a.param.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?;
            if t.len() != d.rank {
                return Err(Failure::Usage(format!("--param needs {} entries", d.rank)));
            }
            let side = if a.negative { Side::Negative } else { Side::Positive };
            let l = l_function(&nilradical_determinant(&d, side).inverse(), &t)?;
            match a.datum.format {
                Format::Json => emit_json(
                    out,
                    &json!({
                        "datum": d.name,
                        "param": a.param,
                        "variable": "x = q^{-s}",
                        "numerator": l.numerator.to_string(),
                        "denominator": l.denominator.to_string(),
                    }),
                )?,
                Format::Csv => emit_csv(
                    out,
                    &["numerator", "denominator"],
                    vec![vec![l.numerator.to_string(), l.denominator.to_string()]],
                )?,
            }
            Ok(EXIT_OK)
        }
        Command::Catalog(a) => {
            let d = load_datum(a)?;
            let cat = endoscopic_catalog(&d)?;
            let items: Vec<Value> = cat
                .iter()
                .map(|(name, e)| {
                    let supported = construct_transfer_data(e).is_ok();
                    json!({"name": name, "endo": e.to_json_value(), "constructible": supported})
                })
                .collect();
            emit_json(out, &json!({"datum": d.name, "data": items}))?;
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["satake"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn satake_a1() {
        let (code, out, _) = run_str(&["satake", "--preset", "A1", "--max-height", "4", "--format", "json"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        let e = v["matrix"]["entries"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["row"] == json!([2]) && e["col"] == json!([2]))
            .unwrap();
        let c: CycloLaurent = e["value"].as_str().unwrap().parse().unwrap();
        assert_eq!(c, "q".parse().unwrap());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&["satake", "--preset", "Q9"]).0, 1);
        assert_eq!(run_str(&["frobnicate"]).0, 1);
        assert_eq!(run_str(&["plancherel-check", "--preset", "A1", "--q", "0.5"]).0, 1);
        assert_eq!(run_str(&["character", "--preset", "A2", "--lambda", "1"]).0, 1);
    }

    #[test]
    fn validate_identity_file() {
        let dir = tempfile::tempdir().unwrap();
        let d = build_preset("A2~2").unwrap();
        let e = EndoscopicDatum::identity(&d).unwrap();
        let path = dir.path().join("identity.json");
        std::fs::write(&path, serde_json::to_string(&e.to_json_value()).unwrap()).unwrap();
        let (code, out, _) = run_str(&["validate-data", "--endo", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["passed"], json!(true));
        let (code, out, _) = run_str(&["branch", "--endo", path.to_str().unwrap(), "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("row,col,value"));
    }

    #[test]
    fn corrupted_data_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let d = build_preset("A2").unwrap();
        let (_, e) = endoscopic_catalog(&d).unwrap().into_iter().find(|(n, _)| n == "coxeter").unwrap();
        let mut t = construct_transfer_data(&e).unwrap();
        t.epsilon = vec![Rational64::from_integer(0); d.rank];
        let ep = dir.path().join("endo.json");
        let tp = dir.path().join("data.json");
        std::fs::write(&ep, serde_json::to_string(&e.to_json_value()).unwrap()).unwrap();
        std::fs::write(&tp, serde_json::to_string(&t.to_json_value(&d)).unwrap()).unwrap();
        let (code, _, _) = run_str(&["validate-data", "--endo", ep.to_str().unwrap(), "--data", tp.to_str().unwrap()]);
        assert_eq!(code, 2);
    }

    #[test]
    fn plancherel_and_l_function() {
        let (code, out, _) = run_str(&["plancherel-check", "--preset", "A1", "--q", "9", "--max", "2"]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        let p = v["pairs"].as_array().unwrap().iter().find(|p| p["lambda"] == json!([2]) && p["mu"] == json!([2])).unwrap();
        assert_eq!(p["expected"], "90.000000000");
        let (code, out, _) = run_str(&["l-function", "--preset", "A1", "--param", "1/4", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.contains("q"), "{out}");
    }
}
