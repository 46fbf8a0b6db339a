use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use crate::error::{Error, Result};

/// Central death rates `m(x, t)` on a contiguous age × calendar-year grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    min_age: u32,
    max_age: u32,
    min_year: i32,
    max_year: i32,
    /// Row-major: one row per age.
    m: Vec<f64>,
}

impl MortalityTable {
    /// Build from rows of rates, `rows[i][j] = m(min_age + i, min_year + j)`.
    pub fn new(min_age: u32, min_year: i32, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_ages = rows.len();
        let n_years = rows.first().map_or(0, Vec::len);
        if n_ages == 0 || n_years == 0 {
            return Err(Error::InsufficientData("no records".into()));
        }
        if rows.iter().any(|r| r.len() != n_years) {
            return Err(Error::param(
                "rows",
                "every age row needs the same number of years",
            ));
        }
        let m: Vec<f64> = rows.into_iter().flatten().collect();
        let table = MortalityTable {
            min_age,
            max_age: min_age + n_ages as u32 - 1,
            min_year,
            max_year: min_year + n_years as i32 - 1,
            m,
        };
        table.check_rates()?;
        Ok(table)
    }

    /// Build from `(age, year, m)` triples; the grid spans the observed
    /// ranges and every cell must be present exactly once.
    pub fn from_records<I: IntoIterator<Item = (u32, i32, f64)>>(records: I) -> Result<Self> {
        let records: Vec<_> = records.into_iter().collect();
        if records.is_empty() {
            return Err(Error::InsufficientData("no records".into()));
        }
        let min_age = records.iter().map(|r| r.0).min().unwrap();
        let max_age = records.iter().map(|r| r.0).max().unwrap();
        let min_year = records.iter().map(|r| r.1).min().unwrap();
        let max_year = records.iter().map(|r| r.1).max().unwrap();
        let n_years = (max_year - min_year + 1) as usize;
        let n_ages = (max_age - min_age + 1) as usize;
        let mut cells = vec![None; n_ages * n_years];
        for (age, year, mx) in records {
            let k = (age - min_age) as usize * n_years + (year - min_year) as usize;
            if cells[k].replace(mx).is_some() {
                return Err(Error::param(
                    "records",
                    format!("duplicate cell age={age} year={year}"),
                ));
            }
        }
        let mut m = Vec::with_capacity(cells.len());
        for (k, cell) in cells.into_iter().enumerate() {
            match cell {
                Some(v) => m.push(v),
                None => {
                    return Err(Error::MissingCell {
                        age: min_age + (k / n_years) as u32,
                        year: min_year + (k % n_years) as i32,
                    })
                }
            }
        }
        let table = MortalityTable {
            min_age,
            max_age,
            min_year,
            max_year,
            m,
        };
        table.check_rates()?;
        Ok(table)
    }

    fn check_rates(&self) -> Result<()> {
        for age in self.ages() {
            for year in self.years() {
                let v = self.m[self.offset(age, year)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::param(
                        "mx",
                        format!("age={age} year={year}: rate {v} must be finite and >= 0"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parse the `age,year,mx` CSV layout (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
        if headers.is_empty() {
            return Err(Error::InsufficientData("no records".into()));
        }
        if headers.iter().collect::<Vec<_>>() != ["age", "year", "mx"] {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `age,year,mx`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(&e))?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize, name: &str| -> Result<&str> {
                match row.get(i) {
                    Some(s) if !s.is_empty() => Ok(s),
                    _ => Err(Error::Parse {
                        line,
                        message: format!("missing `{name}` value"),
                    }),
                }
            };
            let bad = |name: &str, s: &str| Error::Parse {
                line,
                message: format!("cannot parse `{name}` from `{s}`"),
            };
            let age_s = field(0, "age")?;
            let year_s = field(1, "year")?;
            let mx_s = field(2, "mx")?;
            let age = age_s.parse::<u32>().map_err(|_| bad("age", age_s))?;
            let year = year_s.parse::<i32>().map_err(|_| bad("year", year_s))?;
            let mx = mx_s.parse::<f64>().map_err(|_| bad("mx", mx_s))?;
            records.push((age, year, mx));
        }
        Self::from_records(records)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "age,year,mx")?;
        for age in self.ages() {
            for year in self.years() {
                writeln!(w, "{age},{year},{:e}", self.m[self.offset(age, year)])?;
            }
        }
        Ok(())
    }

    pub fn ages(&self) -> RangeInclusive<u32> {
        self.min_age..=self.max_age
    }

    pub fn years(&self) -> RangeInclusive<i32> {
        self.min_year..=self.max_year
    }

    pub fn n_years(&self) -> usize {
        (self.max_year - self.min_year + 1) as usize
    }

    fn offset(&self, age: u32, year: i32) -> usize {
        (age - self.min_age) as usize * self.n_years() + (year - self.min_year) as usize
    }

    pub fn get(&self, age: u32, year: i32) -> Result<f64> {
        if !self.ages().contains(&age) || !self.years().contains(&year) {
            return Err(Error::MissingCell { age, year });
        }
        Ok(self.m[self.offset(age, year)])
    }

    pub fn row(&self, age: u32) -> Option<&[f64]> {
        if !self.ages().contains(&age) {
            return None;
        }
        let start = self.offset(age, self.min_year);
        Some(&self.m[start..start + self.n_years()])
    }
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}
