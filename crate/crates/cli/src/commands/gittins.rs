use std::path::Path;

use metabayes::bayes_agent::gittins::{bernoulli_table_cached, cache_dir, gaussian_table_cached};
use metabayes::bayes_agent::GittinsConfig;
use metabayes::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Bernoulli,
    Gaussian,
}

/// Builds (or loads from `METABAYES_CACHE`) a Gittins index table and writes it as CSV.
pub fn run(
    family: FamilyArg,
    prior: &[f64],
    max_pulls: usize,
    discount: f64,
    out: &Path,
) -> Result<()> {
    let cfg = GittinsConfig::with_discount(discount);
    cfg.validate()?;
    let cache = cache_dir();
    match family {
        FamilyArg::Bernoulli => {
            let &[a, b] = prior else {
                return Err(Error::config("a Bernoulli table needs --prior ALPHA,BETA"));
            };
            bernoulli_table_cached(cache.as_deref(), (a, b), max_pulls, &cfg)?.write_csv(out)?;
        }
        FamilyArg::Gaussian => gaussian_table_cached(cache.as_deref(), &cfg)?.write_csv(out)?,
    }
    log::info!("wrote {}", out.display());
    Ok(())
}
