//! Column tables read from CSV, and the bundled example data sets.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{BetaLink, BetaRegDesign, BetaRegModel, BinaryLink, BinaryModel};

const ENDOMETRIAL: &str = include_str!("../data/endometrial.csv");
const FOODEXP: &str = include_str!("../data/foodexp.csv");

/// Numeric columns keyed by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(f)
    }

    /// `@endometrial` and `@foodexp` name the bundled tables; anything else is a path.
    pub fn load(source: &str) -> Result<Self> {
        match source {
            "@endometrial" => Ok(endometrial()),
            "@foodexp" => Ok(foodexp()),
            s if s.starts_with('@') => Err(Error::invalid(format!("unknown bundled data set {s}"))),
            s => Self::from_path(Path::new(s)),
        }
    }

    fn from_reader<R: std::io::Read>(rdr: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Data {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Data {
                line,
                message: e.to_string(),
            })?;
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Data {
                    line,
                    message: format!("column {}: `{field}` is not a number", names[c]),
                })?;
                columns[c].push(v);
            }
        }
        if columns.first().map_or(true, Vec::is_empty) {
            return Err(Error::Data {
                line: 1,
                message: "no data rows".into(),
            });
        }
        Ok(Self { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::invalid(format!("no column named `{name}`")))
    }

    /// Design rows for `covariates`, with a leading column of ones when
    /// `intercept` is set, and the matching labels.
    pub fn design(
        &self,
        covariates: &[String],
        intercept: bool,
    ) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
        let cols: Vec<&[f64]> = covariates
            .iter()
            .map(|c| self.column(c))
            .collect::<Result<_>>()?;
        let mut labels = Vec::new();
        if intercept {
            labels.push("(Intercept)".to_string());
        }
        labels.extend(covariates.iter().cloned());
        let x = (0..self.n_rows())
            .map(|i| {
                let mut row = Vec::with_capacity(labels.len());
                if intercept {
                    row.push(1.0);
                }
                row.extend(cols.iter().map(|c| c[i]));
                row
            })
            .collect();
        Ok((x, labels))
    }
}

/// Endometrial cancer grade (HG) with covariates NV, PI and EH, 79 patients.
pub fn endometrial() -> Table {
    Table::from_csv_str(ENDOMETRIAL).expect("bundled endometrial data parse")
}

/// Household food expenditure share with income and household size, 38 households.
pub fn foodexp() -> Table {
    Table::from_csv_str(FOODEXP).expect("bundled food expenditure data parse")
}

/// Binary regression of HG on an intercept, NV, PI and EH.
pub fn endometrial_model(link: BinaryLink) -> Result<BinaryModel> {
    let t = endometrial();
    let covs = ["NV", "PI", "EH"].map(String::from);
    let (x, labels) = t.design(&covs, true)?;
    BinaryModel::from_binary(x, t.column("HG")?.to_vec(), link, labels)
}

/// Beta regression of the food share on an intercept, income and persons.
pub fn foodexp_model(link: BetaLink) -> Result<BetaRegModel> {
    let t = foodexp();
    let covs = ["income", "persons"].map(String::from);
    let (x, labels) = t.design(&covs, true)?;
    BetaRegModel::new(BetaRegDesign {
        y: t.column("share")?.to_vec(),
        x,
        link,
        labels,
    })
}
