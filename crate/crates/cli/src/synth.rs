use std::path::PathBuf;

use longevity_core::calibrate::synthetic_table;

use crate::failure::{write_output, Failure};
use crate::load_params;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Parameters to simulate from (built-in defaults if omitted).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    min_age: u32,
    #[arg(long, default_value_t = 95)]
    max_age: u32,
    #[arg(long, default_value_t = 1970)]
    first_year: i32,
    #[arg(long, default_value_t = 2008)]
    last_year: i32,
    #[arg(long, default_value_t = 2008)]
    seed: u64,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), Failure> {
    let (params, _) = load_params(args.params.as_ref())?;
    let table = synthetic_table(
        &params,
        args.min_age..=args.max_age,
        args.first_year..=args.last_year,
        args.seed,
    )?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(Failure::runtime)?;
    let text = String::from_utf8(buf).map_err(Failure::runtime)?;
    match args.out {
        Some(p) => write_output(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
