//! Input readers and the artifact writer.

use std::path::{Path, PathBuf};

use multicurve::affine::AffineModelSpec;
use multicurve::calibration::{QuoteConvention, VolQuote, VolQuoteSurface};
use multicurve::hjm::LevyHjmModel;
use multicurve::termstructure::{CurveSet, MarketQuoteSet, OisQuote, SpreadQuote, SpreadQuoteKind, Tenor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::SCHEMA_VERSION;

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path).map_err(|e| input_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| input_error(path, e))
}

/// Years from `2.5`, `0`, `1/4`, `6M` or `10Y`.
fn years(text: &str) -> multicurve::Result<f64> {
    match text.trim().parse::<f64>() {
        Ok(v) if v >= 0.0 => Ok(v),
        _ => Tenor::parse(text).map(Tenor::years),
    }
}

#[derive(Deserialize)]
struct QuoteRow {
    instrument: String,
    tenor: String,
    maturity: String,
    quote: f64,
}

/// Quotes CSV with header `instrument,tenor,maturity,quote`. For OIS the
/// tenor is the payment frequency; for FRA the maturity is the fixing date;
/// BASIS rows name both tenors as `6M:3M` (quoted tenor : reference).
pub fn read_quotes_csv(path: &Path) -> CliResult<MarketQuoteSet> {
    let mut set = MarketQuoteSet::default();
    for (i, row) in csv_reader(path)?.deserialize::<QuoteRow>().enumerate() {
        let row = row.map_err(|e| input_error(path, e))?;
        let at = |e: multicurve::Error| input_error(path, format!("row {}: {e}", i + 1));
        let maturity = years(&row.maturity).map_err(at)?;
        let kind = row.instrument.to_ascii_uppercase();
        if kind == "OIS" {
            set.ois.push(OisQuote { maturity, rate: row.quote, tenor: Tenor::parse(&row.tenor).map_err(at)? });
            continue;
        }
        let (tenor, kind) = match kind.as_str() {
            "FRA" => (Tenor::parse(&row.tenor).map_err(at)?, SpreadQuoteKind::Fra),
            "IRS" => (Tenor::parse(&row.tenor).map_err(at)?, SpreadQuoteKind::Irs),
            "BASIS" => {
                let (own, reference) = row.tenor.split_once(':').ok_or_else(|| {
                    input_error(path, format!("row {}: BASIS tenor must read `<tenor>:<reference>`", i + 1))
                })?;
                (
                    Tenor::parse(own).map_err(at)?,
                    SpreadQuoteKind::Basis { reference: Tenor::parse(reference).map_err(at)? },
                )
            }
            other => return Err(input_error(path, format!("row {}: unknown instrument `{other}`", i + 1))),
        };
        set.spread.push(SpreadQuote { kind, tenor, maturity, quote: row.quote });
    }
    if set.ois.is_empty() {
        return Err(input_error(path, "no OIS quotes"));
    }
    set.validate()?;
    Ok(set)
}

/// `3M`, `1Y`, or the plain year fraction when neither fits.
pub fn tenor_label(years: f64) -> String {
    let months = years * 12.0;
    if (months - months.round()).abs() < 1e-9 && months.round() >= 1.0 {
        let m = months.round() as i64;
        if m % 12 == 0 {
            format!("{}Y", m / 12)
        } else {
            format!("{m}M")
        }
    } else {
        format!("{years}")
    }
}

pub fn write_quotes_csv(path: &Path, set: &MarketQuoteSet) -> CliResult<()> {
    let mut rows = Vec::new();
    for q in &set.ois {
        rows.push(vec!["OIS".into(), tenor_label(q.tenor.years()), q.maturity.to_string(), q.rate.to_string()]);
    }
    for q in &set.spread {
        let (inst, tenor) = match q.kind {
            SpreadQuoteKind::Fra => ("FRA", tenor_label(q.tenor.years())),
            SpreadQuoteKind::Irs => ("IRS", tenor_label(q.tenor.years())),
            SpreadQuoteKind::Basis { reference } => {
                ("BASIS", format!("{}:{}", tenor_label(q.tenor.years()), tenor_label(reference.years())))
            }
        };
        rows.push(vec![inst.into(), tenor, q.maturity.to_string(), q.quote.to_string()]);
    }
    write_csv(path, &["instrument", "tenor", "maturity", "quote"], rows)
}

#[derive(Deserialize)]
struct SurfaceRow {
    expiry: f64,
    tenor: String,
    strike: f64,
    #[serde(alias = "premium")]
    vol: f64,
    #[serde(default)]
    weight: Option<f64>,
}

/// Vol surface CSV `expiry,tenor,strike,vol` with an optional `weight`
/// column; a `premium` column in place of `vol` switches to premium quotes.
pub fn read_surface_csv(path: &Path, displacement: f64) -> CliResult<VolQuoteSurface> {
    let mut rdr = csv_reader(path)?;
    let premium = rdr.headers().map_err(|e| input_error(path, e))?.iter().any(|h| h == "premium");
    let mut entries = Vec::new();
    for (i, row) in rdr.deserialize::<SurfaceRow>().enumerate() {
        let row = row.map_err(|e| input_error(path, e))?;
        let tenor = years(&row.tenor).map_err(|e| input_error(path, format!("row {}: {e}", i + 1)))?;
        entries.push(VolQuote {
            expiry: row.expiry,
            tenor,
            strike: row.strike,
            value: row.vol,
            weight: row.weight.unwrap_or(1.0),
        });
    }
    let convention = if premium { QuoteConvention::Premium } else { QuoteConvention::Vol };
    Ok(VolQuoteSurface { convention, displacement, entries })
}

/// A curve-set JSON, either bare or wrapped as written by `bootstrap`.
pub fn read_curves(path: &Path) -> CliResult<CurveSet> {
    let mut v: Value = read_json(path)?;
    if let Some(inner) = v.get_mut("curves") {
        v = inner.take();
    }
    serde_json::from_value(v).map_err(|e| input_error(path, e))
}

pub enum ModelFile {
    Hjm(Box<LevyHjmModel>),
    Affine(Box<AffineModelSpec>),
}

/// Read a model JSON. HJM models carry `curves` inline, as a path to a curve
/// file, or not at all, in which case `market` is used.
pub fn read_model(path: &Path, market: Option<&CurveSet>) -> CliResult<ModelFile> {
    let mut v: Value = read_json(path)?;
    let Some(obj) = v.as_object_mut() else {
        return Err(input_error(path, "model must be a JSON object"));
    };
    if obj.contains_key("driver") {
        match obj.get("curves") {
            Some(Value::String(rel)) => {
                let file = path.parent().unwrap_or(Path::new(".")).join(rel);
                let curves = read_curves(&file)?;
                obj.insert("curves".into(), serde_json::to_value(curves).expect("curves serialise"));
            }
            Some(_) => {}
            None => {
                let m = market.ok_or_else(|| input_error(path, "HJM model has no curves and none were configured"))?;
                obj.insert("curves".into(), serde_json::to_value(m).expect("curves serialise"));
            }
        }
        let model: LevyHjmModel = serde_json::from_value(v).map_err(|e| input_error(path, e))?;
        Ok(ModelFile::Hjm(Box::new(model)))
    } else {
        let spec: AffineModelSpec = serde_json::from_value(v).map_err(|e| input_error(path, e))?;
        Ok(ModelFile::Affine(Box::new(spec)))
    }
}

/// JSON artifact with its schema version first.
#[derive(Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn to_json<T: Serialize>(body: &T) -> String {
    let mut s =
        serde_json::to_string_pretty(&Versioned { schema_version: SCHEMA_VERSION, body }).expect("artifacts serialise");
    s.push('\n');
    s
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    w.write_record(header).map_err(|e| output_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

/// Output directory plus the list of files written, in order.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, to_json(body)).map_err(|e| output_error(&path, e))?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        write_csv(&self.dir.join(name), header, rows)?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn written(self) -> Vec<String> {
        self.written
    }
}
