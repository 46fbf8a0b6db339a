use std::fmt::Write as _;
use std::path::PathBuf;

use longevity_core::hedge::{portfolio_premium, run_experiment, Portfolio};
use longevity_core::io::{format_report_csv, HedgeFile, ReportRow};
use longevity_core::Execution;
use serde_json::json;

use crate::failure::{read_input, write_output, Failure};
use crate::load_params;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Experiment file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV report here as well as to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write every simulated per-policy surplus here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), Failure> {
    let text = read_input(&args.config)?;
    let file = HedgeFile::parse(&text)
        .map_err(|e| Failure::from(e).context(format!("in {}", args.config.display())))?;
    let params_path = file.params.as_ref().map(|p| match args.config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.clone(),
    });
    let (params, market) = load_params(params_path.as_ref())?;
    let scenarios = file.scenarios();
    for config in &scenarios {
        config.validate(&market)?;
    }

    let mut rows = Vec::new();
    let mut scenario_json = Vec::new();
    let mut dump = String::from("lambda,T_hat,n,sim,unhedged,swap,cap\n");
    for config in &scenarios {
        log::info!(
            "lambda {} T_hat {} n {}",
            config.lambda,
            config.t_hat,
            config.n
        );
        let result = run_experiment(config, &params, &market, Execution::default())?;
        let mut reports = Vec::new();
        for portfolio in Portfolio::ALL {
            let row = ReportRow {
                portfolio,
                lambda: config.lambda,
                t_hat: config.t_hat,
                n: config.n,
                report: result.report(portfolio)?,
            };
            reports.push(row.clone());
            rows.push(row);
        }
        let reduction = |p| result.risk_reduction(p).ok();
        scenario_json.push(json!({
            "config": config,
            "premium": portfolio_premium(config, &params, &market)?,
            "risk_reduction": {
                "swap": reduction(Portfolio::SwapHedged),
                "cap": reduction(Portfolio::CapHedged),
            },
            "reports": reports,
        }));
        if args.dump.is_some() {
            let [u, s, c] = Portfolio::ALL.map(|p| result.surpluses(p));
            for (i, ((u, s), c)) in u.iter().zip(&s).zip(&c).enumerate() {
                let _ = writeln!(
                    dump,
                    "{},{},{},{i},{u:e},{s:e},{c:e}",
                    config.lambda, config.t_hat, config.n
                );
            }
        }
    }

    let csv = format_report_csv(&rows);
    print!("{csv}");
    if let Some(p) = &args.csv {
        write_output(p, &csv)?;
    }
    if let Some(p) = &args.json {
        let doc = json!({ "market": market, "scenarios": scenario_json });
        let mut text = serde_json::to_string_pretty(&doc).map_err(Failure::runtime)?;
        text.push('\n');
        write_output(p, &text)?;
    }
    if let Some(p) = &args.dump {
        write_output(p, &dump)?;
    }
    Ok(())
}
