//! Binary entry point: all logic lives in `asymsurf::cli`.

fn main() {
    std::process::exit(asymsurf::cli::run(std::env::args_os()));
}
