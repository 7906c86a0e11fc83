use std::process::ExitCode;

fn main() -> ExitCode {
    match mfdlab::run_from(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // clap already formats usage errors; everything else gets the
            // structured message naming the offending field
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(2)
        }
    }
}
