use clap::Parser;
use rattling::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .ok();
    }
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            let json = serde_json::json!({ "error": err.to_string(), "kind": err.kind() });
            eprintln!("{json}");
            std::process::exit(err.exit_code());
        }
    }
}
