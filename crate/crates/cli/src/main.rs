use clap::Parser;

fn main() {
    let cli = qlb_cli::Cli::parse();
    match qlb_cli::execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
