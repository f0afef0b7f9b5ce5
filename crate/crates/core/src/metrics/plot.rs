//! xgraph-style plot data: an optional `TitleText:` line followed by one
//! `<t> <value>` pair per line, with a blank line between datasets.

use std::io::Write;

use super::series::SeriesPoint;
use super::MetricsError;

pub fn emit_plot(series: &[SeriesPoint], title: Option<&str>, out: &mut dyn Write) -> Result<(), MetricsError> {
    emit_datasets(&[series], title, out)
}

/// Writes several series into one file, in order.
pub fn emit_datasets(
    datasets: &[&[SeriesPoint]],
    title: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), MetricsError> {
    if let Some(title) = title {
        writeln!(out, "TitleText: {title}")?;
    }
    for (i, series) in datasets.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        for p in series.iter() {
            writeln!(out, "{} {}", p.t, p.value)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn pt(t: f64, v: f64) -> SeriesPoint {
        SeriesPoint::new(SimTime::from_secs(t), v)
    }

    fn render(datasets: &[&[SeriesPoint]], title: Option<&str>) -> String {
        let mut buf = Vec::new();
        emit_datasets(datasets, title, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(render(&[&[]], Some("Delay")), "TitleText: Delay\n");
        assert_eq!(render(&[&[]], None), "");
    }

    #[test]
    fn points_in_order() {
        assert_eq!(render(&[&[pt(1.0, 0.8), pt(2.0, 0.6)]], None), "1.000000 0.8\n2.000000 0.6\n");
    }

    #[test]
    fn datasets_are_blank_line_separated() {
        let a = [pt(0.5, 1.0)];
        let b = [pt(0.5, 2.0)];
        assert_eq!(render(&[&a, &b], Some("T")), "TitleText: T\n0.500000 1\n\n0.500000 2\n");
    }

    struct Broken;
    impl Write for Broken {
        fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
            Err(std::io::Error::other("disk full"))
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_surfaces() {
        assert!(matches!(emit_plot(&[pt(1.0, 1.0)], None, &mut Broken), Err(MetricsError::SinkFailure(_))));
    }
}
