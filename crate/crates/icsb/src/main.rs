use std::io::{stderr, stdout};

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let code = icsb::cli::cli_main(&argv, &mut stdout(), &mut stderr());
    std::process::exit(code);
}
