use clap::Parser;

fn main() {
    let cli = match faultcast_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version go to stdout with exit 0; real usage
            // mistakes exit 1 per the documented code contract.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let mut stdout = std::io::stdout().lock();
    if let Err(err) = faultcast_cli::run(&cli, &|key| std::env::var(key).ok(), &mut stdout) {
        drop(stdout);
        eprintln!("faultcast: {err}");
        std::process::exit(err.exit_code());
    }
}
