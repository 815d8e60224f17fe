use std::fmt::Write as _;

use crate::corpus::Prf;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-instance training loss.
    pub loss: f64,
    pub train: Option<Prf>,
    pub dev: Option<Prf>,
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    /// Resolved configuration as `key=value` lines.
    pub config: String,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stop_reason: String,
    /// Not part of [`RunReport::to_text`], which must be reproducible.
    pub wall_clock_secs: f64,
}

fn prf_fields(p: &Option<Prf>) -> String {
    match p {
        Some(p) => format!("{}\t{}\t{}", p.precision, p.recall, p.f1),
        None => "-\t-\t-".to_owned(),
    }
}

impl RunReport {
    pub fn best(&self) -> &EpochStats {
        self.epochs
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .expect("best epoch is recorded")
    }

    pub fn best_dev(&self) -> Option<Prf> {
        self.best().dev
    }

    pub fn last(&self) -> &EpochStats {
        self.epochs.last().expect("at least one epoch")
    }

    /// Byte-stable text: configuration, one row per epoch, and the summary.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# config\n");
        out.push_str(&self.config);
        out.push_str("# epochs\nepoch\tloss\ttrain_p\ttrain_r\ttrain_f1\tdev_p\tdev_r\tdev_f1\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.epoch,
                e.loss,
                prf_fields(&e.train),
                prf_fields(&e.dev)
            );
        }
        let _ = writeln!(out, "# summary\nbest_epoch={}\nstop_reason={}", self.best_epoch, self.stop_reason);
        if let Some(d) = self.best_dev() {
            let _ = writeln!(out, "best_dev={d}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_excludes_wall_clock() {
        let mut r = RunReport {
            config: "seed=1\n".into(),
            epochs: vec![EpochStats {
                epoch: 1,
                loss: 0.5,
                train: None,
                dev: Some(Prf::from_counts(2, 2, 1)),
            }],
            best_epoch: 1,
            stop_reason: "max_epochs".into(),
            wall_clock_secs: 1.0,
        };
        let a = r.to_text();
        r.wall_clock_secs = 2.0;
        assert_eq!(a, r.to_text());
        assert!(a.contains("best_dev=P=50.00"));
    }
}
