use std::io;

use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("SELFONN_LOG", "warn")).init();
    let code = selfonn_kit::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code as i32);
}
