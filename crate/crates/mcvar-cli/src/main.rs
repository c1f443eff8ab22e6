use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{}", mcvar_cli::config::USAGE);
        return ExitCode::SUCCESS;
    }
    match mcvar_cli::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mcvar: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
