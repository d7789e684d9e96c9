use clap::Parser;
use forest_escape::cli::{self, Cli, THREADS_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli::thread_cap(std::env::var(THREADS_ENV).ok().as_deref()) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                std::process::exit(cli::EXIT_FAILED);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::EXIT_INVALID);
        }
    }
    std::process::exit(cli::run(cli));
}
