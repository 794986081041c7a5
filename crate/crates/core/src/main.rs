fn main() {
    eprintln!("bochner-recover: CLI not wired up yet");
    std::process::exit(2);
}
