use clap::Parser;
use ddsim_cli::{dispatch, Cli, CliError};

fn fail(err: CliError) -> ! {
    eprintln!("{}", err.to_json());
    std::process::exit(err.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.exit();
        }
        Err(e) => fail(CliError::Usage(e.to_string())),
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            fail(CliError::Usage(format!("--threads: {e}")));
        }
    }
    match dispatch(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => fail(e),
    }
}
