//! CSV and plain-text tables. Every CSV starts with a header row.

use std::fmt::Write;

use intpoints::bounds_lab::VerificationReport;
use intpoints::delpezzo::DPCountReport;
use intpoints::heights::HeightBreakdown;
use intpoints::lattice_modular::TauAssociation;
use intpoints::point_enum::{BranchBound, SieveCertificate};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn points_csv(points: &[(i128, i128)]) -> String {
    let mut s = String::from("x,y\n");
    for (x, y) in points {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

pub fn height_csv(b: &HeightBreakdown) -> String {
    let mut s = String::from("place,value\n");
    let _ = writeln!(s, "inf,{}", b.lambda_inf);
    for l in &b.finite_parts {
        let _ = writeln!(s, "{},{}", l.p, l.lambda_p);
    }
    let _ = writeln!(s, "total,{}", b.total);
    let _ = writeln!(s, "oracle,{}", b.oracle);
    let _ = writeln!(s, "residual,{}", b.residual);
    s
}

pub fn tau_csv(t: &TauAssociation) -> String {
    format!(
        "j,tau_re,tau_im,region,j_found,residual\n{},{},{},{:?},{},{}\n",
        t.j_target, t.tau.value.re, t.tau.value.im, t.tau.region, t.j_found, t.residual
    )
}

pub fn sieve_csv(c: &SieveCertificate) -> String {
    format!(
        "lo,hi,bound,alpha,primes,trivial\n{},{},{},{},{},{}\n",
        c.lo,
        c.hi,
        c.bound,
        c.alpha,
        c.primes.len(),
        c.trivial
    )
}

pub fn branches_csv(branches: &[BranchBound]) -> String {
    let mut s = String::from("branch,bound,exact_count,certified\n");
    for b in branches {
        let exact = b.exact_count.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{:?},{},{},{}", b.branch, b.bound, exact, b.certified);
    }
    s
}

pub fn fibers_csv(r: &DPCountReport) -> String {
    let mut s = String::from("u,v,A,B,count,singular\n");
    let rows = r
        .per_fiber
        .iter()
        .map(|f| (f, false))
        .chain(r.singular_fibers.iter().map(|f| (f, true)));
    for (f, singular) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            f.u, f.v, f.a, f.b, f.count, singular
        );
    }
    s
}

pub fn verify_csv(reports: &[VerificationReport]) -> String {
    let mut s = String::from(
        "check,samples,worst_case,threshold,direction,passed,empirical_constant,stable,subchecks_passed\n",
    );
    for r in reports {
        let subs = r.subchecks.iter().filter(|c| c.passed).count();
        let _ = writeln!(
            s,
            "{},{},{},{},{:?},{},{},{},{}/{}",
            r.check_id,
            r.samples,
            r.worst_case,
            r.threshold,
            r.direction,
            r.ok(),
            opt(r.empirical_constant),
            r.stable.map(|b| b.to_string()).unwrap_or_default(),
            subs,
            r.subchecks.len()
        );
    }
    s
}

pub fn verify_summary(reports: &[VerificationReport]) -> String {
    let mut s = format!(
        "{:<6} {:>8} {:>14} {:>14} {:>9}  {}\n",
        "check", "samples", "worst", "threshold", "time(s)", "result"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<6} {:>8} {:>14.6} {:>14.6} {:>9.2}  {}",
            r.check_id.to_string(),
            r.samples,
            r.worst_case,
            r.threshold,
            r.elapsed_ms / 1e3,
            if r.ok() { "PASS" } else { "FAIL" }
        );
        for c in r.subchecks.iter().filter(|c| !c.passed) {
            let _ = writeln!(
                s,
                "       failed {}: printed {} measured {}",
                c.name, c.printed, c.measured
            );
        }
    }
    s
}
