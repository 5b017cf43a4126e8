fn main() { pingpong::cli::main(); }
