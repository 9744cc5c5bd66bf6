use std::io::Write;
use std::path::Path;

use exitcal_core::dataset::{check_file, DatasetError};

use crate::error::{CliError, Result};
use crate::output::emit;

pub fn run(data: &Path, out: &mut dyn Write) -> Result<()> {
    let (checks, _) = check_file(data)?;
    if checks.is_empty() {
        return Err(DatasetError::EmptyDataset.into());
    }
    let mut bad = 0;
    for c in &checks {
        let line = match &c.result {
            Ok(t) => format!("line {}: {} OK", c.line_no, t.trade_id),
            Err(e) => {
                bad += 1;
                match e {
                    DatasetError::MalformedRecord { message, .. } => {
                        format!("line {}: malformed record: {message}", c.line_no)
                    }
                    other => format!("line {}: {other}", c.line_no),
                }
            }
        };
        emit(out, &line)?;
    }
    if bad > 0 {
        emit(out, &format!("{bad} of {} records invalid", checks.len()))?;
        return Err(CliError::InvalidRecords(bad));
    }
    emit(out, &format!("{} trades OK", checks.len()))
}
