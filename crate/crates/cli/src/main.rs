use clap::Parser;

use netmimo_cli::{parse_config, run, Args};

fn main() {
    let args = Args::parse();
    let result = parse_config(&args).and_then(|cfg| run(&cfg).map(|out| (cfg, out)));
    match result {
        Ok((cfg, out)) => {
            eprintln!("wrote {} records to {}", out.points.len(), cfg.out_path.display());
            if out.diagnostics.is_some() {
                eprintln!("wrote diagnostics to {}", cfg.diagnostics_path().display());
            }
        }
        Err(e) => {
            eprintln!("simulate: {e}");
            std::process::exit(1);
        }
    }
}
