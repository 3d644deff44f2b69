use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NORMSEQ_LOG", "warn")).init();
    let stdout = std::io::stdout();
    normseq::cli::run(std::env::args_os(), &mut stdout.lock())
}
