use clap::Parser;

use wigner_push::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            std::process::exit(e.exit_code());
        }
    }
}
