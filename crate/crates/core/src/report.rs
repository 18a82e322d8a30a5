//! One-call evaluation of generated graphs and the files it produces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval_ml::{default_node_split, DiscriminatorSpec, LinkProtocol, MlReport, NodeProtocol};
use crate::eval_structural::{
    diversity_report, fit_diversity_classifier, struct_report, DiversityReport, RecoveryReport,
    StructReport,
};
use crate::graphdata::AttributedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Structural,
    Ml,
    Recovery,
    Diversity,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "structural" => Suite::Structural,
            "ml" => Suite::Ml,
            "recovery" => Suite::Recovery,
            "diversity" => Suite::Diversity,
            "all" => Suite::All,
            _ => return None,
        })
    }

    fn runs(self, part: Suite) -> bool {
        self == Suite::All || self == part
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub suite: Suite,
    pub seed: u64,
    pub node_specs: Vec<DiscriminatorSpec>,
    pub link_specs: Vec<DiscriminatorSpec>,
}

impl EvalOptions {
    pub fn new(suite: Suite, seed: u64) -> Self {
        Self {
            suite,
            seed,
            node_specs: DiscriminatorSpec::node_suite(),
            link_specs: DiscriminatorSpec::link_suite(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub structural: Option<StructReport>,
    pub ml: Option<MlReport>,
    pub recovery: Option<Vec<RecoveryReport>>,
    pub diversity: Option<DiversityReport>,
}

/// Runs the selected evaluations of every generated graph against `g`.
///
/// Under [`Suite::All`], parts whose inputs are missing (labels on the
/// original, or a second generated graph for diversity) are skipped; asked
/// for explicitly they are errors.
pub fn evaluate(
    g: &AttributedGraph,
    generated: &[AttributedGraph],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if generated.is_empty() {
        return Err(Error::Argument("no generated graphs to evaluate".into()));
    }
    if let Some(h) = generated
        .iter()
        .find(|h| h.cardinalities() != g.cardinalities())
    {
        return Err(Error::Argument(format!(
            "{} and {} have different attribute schemas",
            g.name(),
            h.name()
        )));
    }
    let all = opts.suite == Suite::All;
    let labeled = g.labels().is_some();
    let mut report = EvalReport::default();
    if opts.suite.runs(Suite::Structural) {
        report.structural = Some(struct_report(g, generated, opts.seed)?);
    }
    if opts.suite.runs(Suite::Ml) {
        let mut ml = MlReport::default();
        if labeled || !all {
            let split = default_node_split(g, opts.seed)?;
            let node = NodeProtocol::new(g, split, opts.node_specs.clone(), opts.seed)?;
            for h in generated {
                ml.results.extend(node.utility(h)?);
            }
            if opts.node_specs.len() >= 3 {
                for h in generated {
                    let c = match node.correlation(h) {
                        Ok(c) => Some(c),
                        Err(Error::Undefined(_)) => None,
                        Err(e) => return Err(e),
                    };
                    ml.correlations.push((h.name().to_string(), c));
                }
            }
        }
        if !opts.link_specs.is_empty() {
            let link = LinkProtocol::new(g, opts.link_specs.clone(), opts.seed)?;
            for h in generated {
                ml.results.extend(link.utility(h)?);
            }
        }
        report.ml = Some(ml);
    }
    if opts.suite.runs(Suite::Recovery) && (labeled || !all) {
        report.recovery = Some(
            generated
                .iter()
                .map(|h| RecoveryReport::new(g, h, opts.seed))
                .collect::<Result<_>>()?,
        );
    }
    if opts.suite.runs(Suite::Diversity) && ((labeled && generated.len() >= 2) || !all) {
        let clf = fit_diversity_classifier(g, opts.seed)?;
        report.diversity = Some(diversity_report(g, generated, &clf)?);
    }
    Ok(report)
}

fn push_stat(out: &mut String, key: &str, stat: Option<(f64, f64)>) {
    match stat {
        Some((m, s)) => {
            let _ = writeln!(out, "{key}.mean={m}\n{key}.std={s}");
        }
        None => {
            let _ = writeln!(out, "{key}.mean=NA\n{key}.std=NA");
        }
    }
}

impl EvalReport {
    /// Flat `key=value` lines with the mean and standard deviation over graphs.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        if let Some(s) = &self.structural {
            let _ = writeln!(out, "structural.graphs={}", s.rows.len());
            let _ = writeln!(
                out,
                "structural.subsampled={}",
                s.rows.iter().any(|r| r.subsampled)
            );
            for (k, stat) in s.summary() {
                push_stat(&mut out, &format!("structural.{k}"), stat);
            }
        }
        if let Some(m) = &self.ml {
            for (k, stat) in m.summary() {
                push_stat(&mut out, &format!("ml.{k}"), stat);
            }
        }
        if let Some(r) = &self.recovery {
            let col = |f: &dyn Fn(&RecoveryReport) -> Option<f64>| {
                let xs: Vec<f64> = r.iter().filter_map(f).collect();
                crate::eval_structural::mean_std(&xs)
            };
            push_stat(&mut out, "recovery.attr", col(&|x| Some(x.attr)));
            push_stat(&mut out, "recovery.khop1", col(&|x| x.khop[0]));
            push_stat(&mut out, "recovery.khop2", col(&|x| x.khop[1]));
            let fallback: usize = r.iter().map(|x| x.fallback_nodes).sum();
            let _ = writeln!(out, "recovery.fallback_nodes={fallback}");
        }
        if let Some(d) = &self.diversity {
            let deg: Vec<f64> = d.rows.iter().map(|r| r.degree_w1).collect();
            let acc: Vec<f64> = d.rows.iter().filter_map(|r| r.mlp_accuracy).collect();
            push_stat(
                &mut out,
                "diversity.degree_w1",
                crate::eval_structural::mean_std(&deg),
            );
            push_stat(
                &mut out,
                "diversity.mlp_accuracy",
                crate::eval_structural::mean_std(&acc),
            );
        }
        out
    }

    pub fn recovery_csv(&self) -> Option<String> {
        self.recovery.as_ref().map(|rows| {
            let mut s = format!("{}\n", RecoveryReport::CSV_HEADER);
            for r in rows {
                let _ = writeln!(s, "{}", r.csv_row());
            }
            s
        })
    }

    /// Writes every produced report into `dir`; returns the paths written.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            (
                "struct_report.csv",
                self.structural.as_ref().map(StructReport::to_csv),
            ),
            ("ml_report.csv", self.ml.as_ref().map(MlReport::to_csv)),
            ("recovery_report.csv", self.recovery_csv()),
            (
                "diversity.csv",
                self.diversity.as_ref().map(DiversityReport::to_csv),
            ),
            ("summary.txt", Some(self.summary())),
        ];
        let mut written = Vec::new();
        for (name, text) in files {
            if let Some(text) = text {
                let p = dir.join(name);
                fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AttributedGraph {
        let y: Vec<u32> = (0..30).map(|v| (v % 2) as u32).collect();
        let edges: Vec<(usize, usize)> = (0..30)
            .flat_map(|v| [(v, (v + 2) % 30), (v, (v + 4) % 30)])
            .collect();
        let attrs = (0..30).flat_map(|v| [y[v], (v % 3 == 0) as u32]).collect();
        AttributedGraph::new("small", 30, edges, vec![2, 2], attrs, Some((2, y))).unwrap()
    }

    #[test]
    fn structural_suite_writes_only_its_files() {
        let g = small();
        let rep = evaluate(
            &g,
            &[g.clone(), g.clone(), g.clone()],
            &EvalOptions::new(Suite::Structural, 0),
        )
        .unwrap();
        assert!(rep.ml.is_none() && rep.recovery.is_none());
        let dir = tempfile::tempdir().unwrap();
        let files = rep.write_dir(dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("structural.degree_w1.mean=0\nstructural.degree_w1.std=0"));
        assert!(summary.contains("structural.triangle_ratio.mean=1"));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let g = small();
        let other =
            AttributedGraph::new("o", 1, [], vec![3, 2], vec![0, 0], Some((2, vec![0]))).unwrap();
        let err = evaluate(&g, &[other], &EvalOptions::new(Suite::Structural, 0)).unwrap_err();
        assert!(err.is_data_error());
        assert!(Suite::parse("everything").is_none());
    }
}
