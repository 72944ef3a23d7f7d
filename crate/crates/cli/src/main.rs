use std::process::ExitCode;

use clap::Parser;
use guided_mapf_cli::config::worker_budget;
use guided_mapf_cli::report::{self, PLOT_DIR, SUMMARY_CSV};
use guided_mapf_cli::{exit, run_batch, Args};

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match args.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return code(exit::CONFIG_ERROR);
        }
    };
    let workers = match worker_budget() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("config error: {e}");
            return code(exit::CONFIG_ERROR);
        }
    };
    let table = match run_batch(&config, workers) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return code(exit::RUN_ERROR);
        }
    };
    let rows = report::summarize(&table);
    let written = std::fs::write(
        config.out.join(SUMMARY_CSV),
        report::summary_csv(table.mode, &rows),
    )
    .and_then(|()| report::emit_plot_data(&table, &config.out.join(PLOT_DIR)).map(drop));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return code(exit::RUN_ERROR);
    }
    println!("map {}", table.map);
    print!("{}", report::summary_table(table.mode, &rows));
    if table.any_timeout() {
        eprintln!("at least one run timed out");
        return code(exit::TIMEOUT);
    }
    code(exit::OK)
}
