use std::fs::File;
use std::io::{self, BufWriter};
use std::process::ExitCode;

use clap::Parser;

use vonkarman_cli::{gnuplot_script, summary, write_csv, Cli, RunError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.run() {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    let written = match &cli.out {
        Some(path) => File::create(path).and_then(|f| write_csv(BufWriter::new(f), &run.outcome.records)),
        None => write_csv(io::stdout().lock(), &run.outcome.records),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write CSV: {e}");
        return ExitCode::from(2);
    }
    if let (true, Some(path)) = (cli.emit_plot, &cli.out) {
        let title = format!("{:?}", cli.example);
        if let Err(e) = std::fs::write(path.with_extension("gp"), gnuplot_script(path, &run.methods, &title)) {
            eprintln!("error: cannot write plot script: {e}");
            return ExitCode::from(2);
        }
    }

    let text = summary(&run);
    if cli.out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    match run.outcome.error {
        None => ExitCode::SUCCESS,
        Some(e) => {
            let e = RunError::Solver(e);
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
