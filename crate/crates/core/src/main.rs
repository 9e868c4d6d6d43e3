fn main() {
    std::process::exit(ppwarp::cli::run(std::env::args_os()));
}
