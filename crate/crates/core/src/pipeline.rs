//! The staged run: shared ratio, pair classification, partitions, `L0`,
//! net, search, verification and replay, with a plain-text report.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::certificate::{replay, Certificate, ReplayReport};
use crate::configuration::ConfigSpace;
use crate::constants::{default_c0, DerivedConstants};
use crate::density::{
    classify_pairs, l2_estimate, measure_bounds_check, pushforward_histogram, DensityHistogram, L2Verdict, DEFAULT_PAIR_CAP,
};
use crate::ifs::{closeness, HomogeneousIfs};
use crate::rational::{format_rational, int, rat, to_decimal, Rational};
use crate::recurrent::{
    build_e, build_l0, cross_counts, select_partitions, select_partitions_selfsum, self_counts, Mode, RecurrentCandidate,
};
use crate::search::{
    amplitude, claim_slices, delta_net, net_bound, presentation, search_omega, verify_recurrent, Provenance, SearchConfig,
    SearchStats, SliceReport, DEFAULT_RATIO_CAP,
};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub k: HomogeneousIfs,
    /// Ignored in self mode.
    pub kp: HomogeneousIfs,
    pub mode: Mode,
    /// Defaults to `3 + 2 s0`.
    pub c0: Option<Rational>,
    /// Defaults to 1.
    pub c2: Option<Rational>,
    pub refine: usize,
    pub trials: u64,
    pub seed: u64,
    pub ratio_cap: u32,
    pub histogram_depths: Vec<usize>,
    pub pair_cap: u128,
    /// Net points at which the one-coordinate ω-slices are measured.
    pub slices: usize,
}

impl RunConfig {
    pub fn new(k: HomogeneousIfs, kp: HomogeneousIfs, mode: Mode, seed: u64) -> Self {
        RunConfig {
            k,
            kp,
            mode,
            c0: None,
            c2: None,
            refine: 2,
            trials: 200,
            seed,
            ratio_cap: DEFAULT_RATIO_CAP,
            histogram_depths: vec![1, 2, 3],
            pair_cap: DEFAULT_PAIR_CAP,
            slices: 8,
        }
    }

    fn partner(&self) -> &HomogeneousIfs {
        match self.mode {
            Mode::Cross => &self.kp,
            Mode::SelfDifference => &self.k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CommonRatio,
    SelectPartitions,
    BuildL0,
    SearchOmega,
    VerifyRecurrent,
    Replay,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::CommonRatio => "common_ratio",
            Stage::SelectPartitions => "select_partitions",
            Stage::BuildL0 => "build_L0",
            Stage::SearchOmega => "search_omega",
            Stage::VerifyRecurrent => "verify_recurrent",
            Stage::Replay => "replay",
        }
    }

    /// Process exit code for a run that stopped here; 1 and 2 are left for
    /// I/O and input parsing.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::CommonRatio => 3,
            Stage::SelectPartitions => 4,
            Stage::BuildL0 => 5,
            Stage::SearchOmega => 6,
            Stage::VerifyRecurrent => 7,
            Stage::Replay => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

/// Ordered `key: value` lines; exact values carry a decimal rendering.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn text(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn exact(&mut self, key: &str, value: &Rational) {
        self.text(key, format!("{} ({})", format_rational(value), to_decimal(value, 6)));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// `header` is the first line (the only one allowed to vary between runs).
    pub fn render(&self, header: &str) -> String {
        let mut out = format!("{header}\n");
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }
}

pub struct RunOutcome {
    pub report: Report,
    pub space: Option<ConfigSpace>,
    pub candidate: Option<RecurrentCandidate>,
    pub histogram: Option<DensityHistogram>,
    pub stats: Option<SearchStats>,
    pub slices: Vec<SliceReport>,
    pub certificate: Option<Certificate>,
    pub replay: Option<ReplayReport>,
    pub derived: DerivedConstants,
    pub warnings: Vec<String>,
    pub failure: Option<StageFailure>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, |f| f.stage.exit_code())
    }
}

pub fn run_pipeline(cfg: &RunConfig) -> RunOutcome {
    let mut out = RunOutcome {
        report: Report::default(),
        space: None,
        candidate: None,
        histogram: None,
        stats: None,
        slices: Vec::new(),
        certificate: None,
        replay: None,
        derived: DerivedConstants::default(),
        warnings: Vec::new(),
        failure: None,
    };
    let fail = |out: &mut RunOutcome, stage: Stage, message: String| {
        out.report.text("failed_stage", stage.name());
        out.report.text("failure", &message);
        out.failure = Some(StageFailure { stage, message });
    };
    let rep = &mut out.report;
    rep.text("mode", cfg.mode);
    rep.text("refine", cfg.refine);
    rep.text("seed", cfg.seed);

    let base = match presentation(&cfg.k, cfg.partner(), cfg.refine, cfg.ratio_cap) {
        Ok(b) => b,
        Err(e) => {
            fail(&mut out, Stage::CommonRatio, e.to_string());
            return out;
        }
    };
    let r = base.ratio().clone();
    let rho = &r * &r;
    let s0 = base.s0().clone();
    let c0 = cfg.c0.clone().unwrap_or_else(|| default_c0(&s0));
    let c2 = cfg.c2.clone().unwrap_or_else(|| int(1));
    let amp = amplitude(&c0, &r);
    let rep = &mut out.report;
    rep.text("letters", format!("{} x {}", base.k().len(), base.kp().len()));
    rep.exact("r", &r);
    rep.exact("rho", &rho);
    rep.exact("s0", &s0);
    rep.exact("c0", &c0);
    rep.exact("c2", &c2);
    rep.exact("amplitude", &amp);
    if c0 < default_c0(&s0) {
        out.warnings.push(format!("c0 = {} is below 3 + 2 s0 = {}", format_rational(&c0), format_rational(&default_c0(&s0))));
    }
    if rho >= rat(1, 16) {
        out.warnings.push(format!("rho = {} is not below 1/16", format_rational(&rho)));
    }
    if r >= rat(1, 2) {
        out.warnings.push("r >= 1/2: the verification margin rho/2 - r^3 is not positive".into());
    }

    let mass = measure_bounds_check(&base);
    out.derived.c4 = Some(mass.c4.clone());
    let mut hists = Vec::new();
    for &n in &cfg.histogram_depths {
        match pushforward_histogram(&base, n, cfg.pair_cap) {
            Ok(h) => hists.push(h),
            Err(e) => {
                out.warnings.push(format!("histogram depth {n}: {e}"));
                break;
            }
        }
    }
    match l2_estimate(&hists) {
        Ok(l2) => {
            let verdict = match l2.verdict {
                L2Verdict::Bounded => "bounded",
                L2Verdict::Growing => "growing",
            };
            let est: Vec<String> = l2.estimates.iter().map(|e| to_decimal(e, 6)).collect();
            out.report.text("l2_estimates", est.join(" "));
            out.report.text("l2_verdict", verdict);
            out.derived.c5 = l2.estimates.last().cloned();
        }
        Err(e) => out.warnings.push(format!("l2 estimate skipped: {e}")),
    }
    out.histogram = hists.pop();

    let table = classify_pairs(&base, &c2);
    let rep = &mut out.report;
    rep.text("pairs_good", table.good_count());
    rep.text("pairs_total", table.total());
    rep.text("good_at_least_15_16", 16 * table.good_count() >= 15 * table.total());
    out.space = Some(base.clone());

    let partition = match cfg.mode {
        Mode::Cross => select_partitions(&table, base.k()),
        Mode::SelfDifference => select_partitions_selfsum(&table, base.k()),
    };
    let partition = match partition {
        Ok(p) => p,
        Err(e) => {
            fail(&mut out, Stage::SelectPartitions, e.to_string());
            return out;
        }
    };
    let labels = |v: &[usize]| v.iter().map(|&a| base.k().labels()[a].clone()).collect::<Vec<_>>().join(" ");
    let counts = match cfg.mode {
        Mode::Cross => cross_counts(&table, &partition),
        Mode::SelfDifference => self_counts(&table, &partition),
    };
    let rep = &mut out.report;
    rep.text("a1", labels(&partition.a1));
    rep.text("a2", labels(&partition.a2));
    rep.text("partition_classes", counts.classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));

    let cand = match build_l0(&base, &partition, &c2, cfg.mode) {
        Ok(c) => c,
        Err(e) => {
            fail(&mut out, Stage::BuildL0, e.to_string());
            return out;
        }
    };
    let rep = &mut out.report;
    rep.text("n", cand.n);
    rep.exact("n_raw", &cand.raw_n);
    rep.exact("l0_measure", &cand.l0.measure());
    rep.text("l0_components", cand.l0.len());
    rep.exact("l1_measure", &cand.l1.measure());
    rep.exact("l_measure", &cand.l.measure());
    out.derived.c3 = Some(cand.l0.measure());
    if cfg.mode == Mode::Cross {
        let e = build_e(&base, &table, &partition, &c2);
        let rep = &mut out.report;
        rep.exact("e_measure", &e.e.measure());
        rep.exact("e_chain_bound", &e.chain_bound);
        rep.text("e_subset_l0", e.e.is_subset_of(&cand.l0));
        let letters = int((base.k().len() * base.kp().len()) as i64);
        out.derived.c6 = Some(&e.j0_min / (&c2 * &r));
        out.derived.c7 = Some(int(e.g1 as i64) / &letters);
        out.derived.c8 = Some(&e.phi0_integral / (&c2 * &letters * &r));
    }
    if cand.l0.is_empty() {
        out.candidate = Some(cand);
        fail(&mut out, Stage::BuildL0, "L0 is empty: no configuration has N returns with distinct first letters".into());
        return out;
    }

    let net = delta_net(&cand);
    let bound = net_bound(&cand);
    let rep = &mut out.report;
    rep.text("net_size", net.len());
    rep.exact("net_bound", &bound);
    rep.text("net_within_bound", int(net.len() as i64) <= bound);
    drop(net);

    let search = search_omega(&cand, &base, &SearchConfig { trials: cfg.trials, seed: cfg.seed, amplitude: amp.clone() });
    let stats = search.stats;
    let rep = &mut out.report;
    rep.text("draws", stats.draws);
    rep.text("rejected_draws", stats.rejected);
    rep.text("misconfigured", stats.misconfigured);
    let freqs = stats.frequencies();
    if !freqs.is_empty() {
        let mean = freqs.iter().fold(Rational::zero(), |a, f| a + f) / int(freqs.len() as i64);
        rep.exact("mean_failure_frequency", &mean);
    }
    if stats.misconfigured {
        out.warnings.push("more than half of the draws broke cylinder disjointness: c0 is too large for this rho".into());
    }
    match claim_slices(&cand, &base, &c0, &amp, cfg.slices, 64) {
        Ok(slices) => {
            out.derived.c10 = slices.iter().map(|s| s.c10.abs()).max();
            out.report.text("slices", slices.len());
            out.slices = slices;
        }
        Err(e) => out.warnings.push(format!("slices: {e}")),
    }
    out.stats = Some(stats.clone());
    let Some(omega) = search.omega else {
        out.candidate = Some(cand);
        fail(&mut out, Stage::SearchOmega, format!("no ω found in {} trials", cfg.trials));
        return out;
    };
    out.report.text("success_draw", omega.draw.map_or("none (empty net)".to_string(), |d| d.to_string()));

    let provenance = Provenance { refine: cfg.refine, c0: c0.clone(), c2: c2.clone() };
    let cert = match verify_recurrent(&cand, &base, &omega, &amp, &provenance) {
        Ok(c) => c,
        Err(f) => {
            out.candidate = Some(cand);
            fail(&mut out, Stage::VerifyRecurrent, f.to_string());
            return out;
        }
    };
    out.derived.c9 = cert.cover.iter().map(|e| &e.image_hi - &e.image_lo).max();
    let rep = &mut out.report;
    rep.text("cover_intervals", cert.cover.len());
    rep.exact("margin", &cert.margin);
    match closeness(base.k(), &cert.perturbed) {
        Some(d) => {
            rep.exact("closeness", &d);
            // offsets move by at most the amplitude, measured in cylinder lengths
            rep.exact("closeness_bound", &(&amp / base.k().cylinder_len()));
            rep.text("closeness_within_c0", d <= c0);
        }
        None => rep.text("closeness", "undefined"),
    }
    match &cert.j {
        Some((lo, hi)) => {
            rep.text("j", format!("[{}, {}]", format_rational(lo), format_rational(hi)));
            rep.exact("j_length", &(hi - lo));
        }
        None => rep.text("j", "empty"),
    }

    let replayed = replay(&cert, &cfg.k, cfg.partner(), cfg.ratio_cap);
    out.report.text("replay", if replayed.passed() { "pass" } else { "fail" });
    let failed = !replayed.passed();
    let first = replayed.issues.first().map(|i| i.detail.clone());
    out.replay = Some(replayed);
    out.certificate = Some(cert);
    out.candidate = Some(cand);
    if failed {
        fail(&mut out, Stage::Replay, first.unwrap_or_default());
    }
    out
}
