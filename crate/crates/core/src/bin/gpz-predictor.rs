//! Reference predictor plugin speaking the `gpz` line protocol on
//! stdin/stdout. Serves the identity ("echo") model used for protocol
//! conformance, or one of the builtin models.

use std::io::{self, BufWriter};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gpz::external::{serve, EchoModel};
use gpz::predictor::{builtin_predictor, Predictor, PredictorConfig, PredictorKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Echo,
    Context,
    ContextMatch,
}

#[derive(Debug, Parser)]
#[command(name = "gpz-predictor", version, about = "Line-protocol predictor plugin")]
struct Args {
    #[arg(long, value_enum, default_value_t = Model::Echo)]
    model: Model,
    #[arg(short = 'k', long = "order", default_value_t = 3)]
    order: u8,
    #[arg(long, default_value_t = 256)]
    vocab: u32,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let fresh = move || -> Box<dyn Predictor> {
        let kind = match args.model {
            Model::Echo => return Box::new(EchoModel::new(args.vocab)),
            Model::Context => PredictorKind::Builtin,
            Model::ContextMatch => PredictorKind::ContextMatch,
        };
        let config = PredictorConfig {
            kind,
            order: args.order,
            vocab_size: args.vocab,
        };
        builtin_predictor(&config).expect("valid predictor arguments")
    };
    if let Model::Context | Model::ContextMatch = args.model {
        let probe = PredictorConfig::builtin(args.order, args.vocab);
        if let Err(e) = probe.validate() {
            eprintln!("gpz-predictor: {e}");
            return ExitCode::from(2);
        }
    }
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    match serve(stdin, stdout, fresh) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpz-predictor: {e}");
            ExitCode::FAILURE
        }
    }
}
