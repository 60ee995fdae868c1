use std::io::Write;
use std::path::Path;

use super::study::RateReport;
use crate::error::Result;

impl RateReport {
    /// Per-level table, one row per series and level.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "series,N,renorm,mean,stderr,tail_mean,tail_stderr")?;
        for s in &self.series {
            for l in &s.levels {
                writeln!(
                    w,
                    "{},{},{:e},{:e},{:e},{:e},{:e}",
                    s.label, l.cutoff, l.renorm, l.mean, l.stderr, l.tail_mean, l.tail_stderr
                )?;
            }
        }
        Ok(())
    }

    /// Fits, aggregates, per-path errors and the configuration echo.
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    /// One `<label>.dat` file per series with columns `N mean_error`.
    pub fn write_plot_data(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for s in &self.series {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}.dat", s.label)))?);
            for l in &s.levels {
                writeln!(f, "{} {:e}", l.cutoff, l.mean)?;
            }
            f.flush()?;
        }
        Ok(())
    }
}
