use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match scar::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=invalid-argument msg={first}");
            std::process::exit(2);
        }
    };
    if let Err(e) = scar::cli::run(&cli) {
        eprintln!("error kind={} msg={}", e.kind(), e.to_string().replace('\n', " "));
        std::process::exit(1);
    }
}
