//! `fit`: estimate a mixture from a CSV dataset.

use mpsa::mixture::serialize;

use crate::args::FitArgs;
use crate::config::FitPlan;
use crate::error::{CliError, CliResult};
use crate::files::{read_dataset, write_atomic, write_trace};

pub fn run(args: &FitArgs) -> CliResult<()> {
    let (mut plan, _) = FitPlan::from_flags(&args.fit)?;
    let data = read_dataset(&args.data)?;
    let components = match (args.components.or(plan.components), args.supervised) {
        (Some(c), _) => c,
        (None, true) => data.n_classes().unwrap_or(0),
        (None, false) => return Err(CliError::usage("the number of components is required (--components)")),
    };
    if args.supervised {
        let labels = data
            .labels
            .clone()
            .ok_or_else(|| CliError::data(format!("{}: --supervised needs a label column", args.data.display())))?;
        if let Some(l) = labels.iter().find(|&&l| l >= components) {
            return Err(CliError::data(format!("label {} exceeds {components} components", l + 1)));
        }
        plan.config.labels = Some(labels);
    }
    let (model, trace) = plan.fit(&data.x, components)?;
    write_atomic(&args.out, serialize(&model).as_bytes())?;
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    let last = trace.last().expect("a fit records at least one iteration");
    let types: Vec<String> = model.compositions().iter().map(|g| g.to_string()).collect();
    println!(
        "iterations {}, {}, penalized log-likelihood {:.6}, kappa {}, types {}",
        last.iteration,
        if trace.converged { "converged" } else { "stopped at the iteration limit" },
        last.penalized_loglik,
        last.kappa,
        types.join(" ")
    );
    Ok(())
}
