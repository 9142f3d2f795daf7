use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let threads = std::env::var(estimand_lab::THREADS_ENV).ok();
    let out = estimand_lab::run(std::env::args_os(), threads.as_deref());
    // ignore broken pipes
    let _ = std::io::stdout().lock().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().lock().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
