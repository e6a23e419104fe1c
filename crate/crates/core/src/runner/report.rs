use std::fmt::Write as _;

use super::artifacts::{RunSummary, Status};
use crate::estimates::{GuardVerdict, SplitOutcome};

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// Human-readable one-page summary. The last line is either the certificate
/// or the reason there is none.
pub fn render_report(s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run: {} (status: {:?}, exit code {})", s.command, s.status, s.exit_code);
    if let Some(g) = &s.grid {
        let res: Vec<String> = g.resolution.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "grid: {} n = {}, resolution {}, h = {}", g.manifold, g.dim, res.join("x"), sci(g.h_max));
    }
    if let Some(l) = &s.ledger {
        let _ = writeln!(out, "ledger:");
        let _ = writeln!(
            out,
            "  C̄ = {} (measured {}, {})",
            sci(l.c_bar),
            sci(l.c_bar_measured),
            if l.admissible { "admissible" } else { "NOT admissible" }
        );
        let _ = writeln!(out, "  A = {}, max D²c = {}, C₅ = {}, c₇ = {}", sci(l.semiconvexity), sci(l.max_d2c), sci(l.c5), sci(l.c7));
        let _ = writeln!(out, "  C₃ = {}, C̃₃ = {}, c_n = {}", sci(l.c3), sci(l.c3_tilde), sci(l.exponents.c_n));
        let _ = writeln!(out, "  C₁ = {}, C₂ = {} ({:?})", sci(l.c1), sci(l.c2), l.c12_mode);
        let _ = writeln!(
            out,
            "  δ₀ = {} ({}), largest admissible δ₀ = {}",
            sci(l.delta0),
            if l.delta0_auto { "auto" } else { "given" },
            sci(l.delta0_max)
        );
        match l.split {
            SplitOutcome::Split { a, b } => {
                let _ = writeln!(out, "  split: a = {}, b = {}{}", sci(a), sci(b), if l.split_brackets_c3() { "" } else { " (does not bracket C₃)" });
            }
            SplitOutcome::NoSplit { tangency_delta0 } => {
                let _ = writeln!(out, "  split: none (needs δ₀ < {})", sci(tangency_delta0));
            }
        }
        match l.delta {
            Some(d) => {
                let _ = writeln!(out, "  δ (W₂² budget) = {}", sci(d));
            }
            None => {
                let _ = writeln!(out, "  δ (W₂² budget): needs fitted klm_c and bbbb_c");
            }
        }
    }
    if let Some(t) = &s.trace {
        let _ = writeln!(out, "trace: {} accepted states, {} rejected steps, final t = {}", t.states, t.rejected_steps, t.final_t);
        let _ = writeln!(out, "  Λ_max: largest {} at t = {}, smallest {} at t = {}", sci(t.lambda_max), t.lambda_max_t, sci(t.lambda_min), t.lambda_min_t);
        let _ = writeln!(out, "  max|∇u| = {}, min eig w = {}, final residual = {}", sci(t.grad_max), sci(t.min_eig_w), sci(t.final_residual));
        let _ = writeln!(out, "  Newton iterations {}, Krylov iterations {}", t.newton_iters, t.linear_iters);
    }
    if let Some(g) = &s.guard {
        let counts: Vec<String> = g.counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let _ = writeln!(out, "guard: {}", counts.join(", "));
        if let Some(t) = g.first_warning_t {
            let _ = writeln!(out, "  WARNING: Λ_max entered the band (a, C₃] at t = {t}");
        }
        if let Some(r) = &g.first_failure {
            let _ = writeln!(out, "  {}: Λ_max = {} at t = {}", r.verdict.label().to_uppercase(), sci(r.lambda_max), r.t);
        }
        if let Some(r) = &g.first_unmet {
            if let GuardVerdict::PreconditionUnmet { reason } = &r.verdict {
                let _ = writeln!(out, "  preconditions unmet from t = {}: {reason}", r.t);
            }
        }
    }
    if let Some(w) = &s.wasserstein {
        let f = |v: Option<f64>| v.map_or("n/a".to_string(), sci);
        let _ = writeln!(out, "wasserstein ({}): W₂ = {}, W₁ = {}", w.method, f(w.w2), f(w.w1));
        for (t, v) in &w.path {
            let _ = writeln!(out, "  W₂(μ, ρ({t})) = {}", sci(*v));
        }
        if let Some(n) = &w.note {
            let _ = writeln!(out, "  {n}");
        }
    }
    if let Some(p) = &s.pushforward {
        let _ = writeln!(
            out,
            "pushforward at t = 1: TV = {}, sup|det DT·e^(g(T)-f) - 1| = {}, min det DT = {}, {}",
            sci(p.tv),
            sci(p.jacobian_sup),
            sci(p.min_jacobian),
            if p.injective_on_grid { "injective on the grid" } else { "NOT injective on the grid" }
        );
    }
    if let Some(v) = &s.verify {
        let _ = writeln!(out, "verify: {}", serde_json::to_string(v).unwrap_or_default());
    }
    let last = match (&s.certificate, s.status) {
        (Some(c), _) if c.issued => format!("CERTIFICATE: Λ_max ≤ C₃+1 (Λ_max = {}, C₃+1 = {})", sci(c.lambda_max), sci(c.bound)),
        (_, Status::Completed) if s.certificate.is_none() => match &s.error {
            Some(e) => format!("FAILED: {e}"),
            None => "NO CERTIFICATE: this command does not march the path".to_string(),
        },
        (_, _) if s.error.is_some() => format!("FAILED: {}", s.error.as_deref().unwrap_or_default()),
        (Some(c), _) => format!("NO CERTIFICATE: {}", c.reason),
        (None, _) => "NO CERTIFICATE".to_string(),
    };
    out.push_str(&last);
    out.push('\n');
    out
}
