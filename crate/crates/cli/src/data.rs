use std::path::Path;

use aimer::evaluation::{log2_shift, orthonormalize_features, transform_response};
use aimer::io::{self, Format, LabeledMatrix};
use aimer::RawDataset;
use anyhow::Result;

use crate::args::{DataArgs, PrepArgs};

fn format_for(prep: &PrepArgs, path: &Path) -> Format {
    prep.format.map_or_else(|| Format::from_path(path), Into::into)
}

/// Loads a design and applies transpose, log2 shift and orthonormalization
/// in that order.
pub fn load_design(path: &Path, prep: &PrepArgs) -> Result<LabeledMatrix> {
    let mut m = io::load_matrix(path, format_for(prep, path))?;
    if prep.transpose {
        m = m.transpose()?;
    }
    if prep.log2_shift {
        m.matrix = log2_shift(&m.matrix);
    }
    if prep.orthonormalize {
        m.matrix = orthonormalize_features(&m.matrix)?;
    }
    Ok(m)
}

pub fn load_dataset(args: &DataArgs) -> Result<RawDataset> {
    let x = load_design(&args.x, &args.prep)?;
    let (mut y, ids) = io::load_response(&args.y, format_for(&args.prep, &args.y))?;
    if args.prep.log_survival {
        y = transform_response(y.as_slice())?;
    }
    Ok(io::join_dataset(x, y, ids)?)
}
