//! `cluster`: hard assignments of a dataset under a fitted model.

use mpsa::metrics::ari;
use mpsa::mixture::{deserialize, predict};

use crate::args::ClusterArgs;
use crate::error::{CliError, CliResult, WithPath};
use crate::files::{read_dataset, read_labels, read_text, write_labels};

pub fn run(args: &ClusterArgs) -> CliResult<()> {
    let model = deserialize(&read_text(&args.model)?).at(&args.model)?;
    let data = read_dataset(&args.data)?;
    if data.x.cols() != model.dim() {
        return Err(CliError::data(format!(
            "{} has {} features, the model expects {}",
            args.data.display(),
            data.x.cols(),
            model.dim()
        )));
    }
    let labels = predict(&data.x, &model)?;
    write_labels(&args.out, &labels)?;
    let truth = match &args.truth {
        Some(path) => Some(read_labels(path)?),
        None => data.labels,
    };
    if let Some(truth) = truth {
        if truth.len() != labels.len() {
            return Err(CliError::data(format!(
                "{} reference labels for {} samples",
                truth.len(),
                labels.len()
            )));
        }
        println!("ARI {}", ari(&truth, &labels)?);
    }
    Ok(())
}
