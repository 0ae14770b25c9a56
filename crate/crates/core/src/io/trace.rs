use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::adaptation::AdaptationReport;

/// Columns preceding the Steiner coordinates `s0_x, s0_y, ...`.
pub const TRACE_FIXED_COLUMNS: [&str; 6] = [
    "step",
    "cumulative_dt_norm",
    "length",
    "min_edge_length",
    "max_angle_deviation_deg",
    "hessian_condition",
];

/// Writes one CSV row per record: step index, Euclidean norm of the
/// displacement applied so far, tree length, shortest edge, largest Steiner
/// angle deviation in degrees, Hessian condition number and the Steiner
/// coordinates. Reals use the shortest round-trip representation.
pub fn emit_trace<W: Write>(report: &AdaptationReport, out: W, target: &str) -> Result<(), IoError> {
    let file_err = |e: csv::Error| IoError::File {
        target: target.to_string(),
        source: e.into(),
    };
    let k = report.final_tree().k();
    let mut writer = csv::Writer::from_writer(out);
    let header: Vec<String> = TRACE_FIXED_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain((0..k).flat_map(|i| [format!("s{i}_x"), format!("s{i}_y")]))
        .collect();
    writer.write_record(&header).map_err(file_err)?;

    let mut cumulative = vec![0.0; report.records[0].delta_t.len()];
    for record in &report.records {
        for (c, d) in cumulative.iter_mut().zip(&record.delta_t) {
            *c += d;
        }
        let norm = cumulative.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut row = vec![
            record.step.to_string(),
            norm.to_string(),
            record.length.to_string(),
            record.health.min_edge_length.to_string(),
            record.health.max_steiner_angle_deviation.to_degrees().to_string(),
            record.health.hessian_condition.to_string(),
        ];
        row.extend(record.tree.steiner_vector().iter().map(f64::to_string));
        writer.write_record(&row).map_err(file_err)?;
    }
    writer.flush().map_err(|source| IoError::File {
        target: target.to_string(),
        source,
    })
}

pub fn write_trace_file(report: &AdaptationReport, path: &Path) -> Result<(), IoError> {
    let target = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| IoError::File {
        target: target.clone(),
        source,
    })?;
    emit_trace(report, std::io::BufWriter::new(file), &target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{adapt_stepwise, Perturbation, StepPolicy};
    use crate::tree_model::{Point2, SteinerTopology, SteinerTree};

    fn example_one() -> SteinerTree {
        let a = 1.0 / (3.0 + 3f64.sqrt());
        SteinerTree::new(
            SteinerTopology::star(3),
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![Point2::new(a, a)],
        )
        .unwrap()
    }

    fn trace_rows(steps: usize) -> Vec<Vec<String>> {
        let p = Perturbation::new(vec![0.4, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let report = adapt_stepwise(&example_one(), &p, &StepPolicy::steps(steps)).unwrap();
        let mut buf = Vec::new();
        emit_trace(&report, &mut buf, "memory").unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn ten_step_trace() {
        let rows = trace_rows(10);
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0][..6], TRACE_FIXED_COLUMNS);
        assert_eq!(rows[0][6..], ["s0_x", "s0_y"]);
        let last = &rows[11];
        assert_eq!(last[0], "10");
        let x: f64 = last[6].parse().unwrap();
        let y: f64 = last[7].parse().unwrap();
        assert!((x - 0.433).abs() < 2e-3 && (y - 0.050).abs() < 2e-3);
        let applied: f64 = last[1].parse().unwrap();
        assert!((applied - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_step_trace() {
        let rows = trace_rows(1);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1][1], "0");
    }

    #[test]
    fn write_failure_names_target() {
        let p = Perturbation::zeros(3);
        let report = adapt_stepwise(&example_one(), &p, &StepPolicy::steps(1)).unwrap();
        let err = write_trace_file(&report, Path::new("/nonexistent/dir/trace.csv")).unwrap_err();
        assert!(err.to_string().starts_with("/nonexistent/dir/trace.csv"), "{err}");
    }
}
