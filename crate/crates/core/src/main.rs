use std::io;

fn main() {
    env_logger::init();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = infcomp::cli::main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
