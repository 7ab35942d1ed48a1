//! Continuous-phase solver: power bisection with embedded stream selection,
//! the outer WMMSE loop, and the exact hybrid factorization of a fully
//! digital precoder.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, hermitian_eigen, thin_qr, CMat};
use crate::metrics::{
    achievable_rate, hardware_power, network_objective, phase_split, transmit_power, HybridBeamformer, StreamSelection,
};
use crate::wmmse::{
    interference_gram_evd, mse_matrices, select_streams, shifted_precoder, stream_contribution, stream_power, targets,
    update_combiner, update_weight, GramEvd, StreamMetrics, WmmseState,
};

/// How the stream flags are chosen inside the power search.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    Adaptive,
    Frozen(StreamSelection),
}

/// One instance of the power-constrained precoder problem.
///
/// Columns are `(offset + xi + A)^{-1} f` where `offset` is zero for the
/// plain problem and positive when a proximal penalty is attached.
#[derive(Debug, Clone, Copy)]
pub struct BisectionProblem<'a> {
    pub metrics: &'a StreamMetrics,
    pub gram: &'a GramEvd,
    pub offset: f64,
    pub beta: f64,
    pub mu: f64,
    pub per_chain_watts: f64,
    pub cap: usize,
    pub budget: f64,
    pub eps1: f64,
    pub xi_max: f64,
}

#[derive(Debug, Clone)]
pub struct BisectionResult {
    pub multiplier: f64,
    pub selection: StreamSelection,
    pub precoders: Vec<CMat>,
    pub power: f64,
}

const MAX_BISECTION_STEPS: usize = 400;

impl BisectionProblem<'_> {
    /// Per-stream contributions; a stream leaning on a zero eigenvalue
    /// contributes without bound.
    pub fn contributions(&self, xi: f64) -> Vec<Vec<f64>> {
        let j = &self.gram.eigenvalues;
        self.metrics
            .projections
            .iter()
            .map(|xk| {
                xk.iter()
                    .map(|x| stream_contribution(x, j, xi + self.offset).unwrap_or(f64::NEG_INFINITY))
                    .collect()
            })
            .collect()
    }

    pub fn selection(&self, xi: f64, policy: &SelectionPolicy) -> StreamSelection {
        match policy {
            SelectionPolicy::Adaptive => select_streams(
                &self.contributions(xi),
                self.beta,
                self.mu,
                self.per_chain_watts,
                self.cap,
            ),
            SelectionPolicy::Frozen(t) => t.clone(),
        }
    }

    pub fn power(&self, xi: f64, selection: &StreamSelection) -> f64 {
        selection
            .active()
            .map(|(k, j)| {
                stream_power(
                    &self.metrics.projections[k][j],
                    &self.gram.eigenvalues,
                    xi + self.offset,
                )
                .unwrap_or(f64::INFINITY)
            })
            .sum()
    }

    fn eval(&self, xi: f64, policy: &SelectionPolicy) -> (StreamSelection, f64) {
        let s = self.selection(xi, policy);
        let p = self.power(xi, &s);
        (s, p)
    }

    /// Smallest multiplier meeting the budget for fixed flags.
    fn frozen_root(&self, selection: &StreamSelection, mut hi: f64) -> f64 {
        if self.power(0.0, selection) <= self.budget {
            return 0.0;
        }
        let mut lo = 0.0;
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let p = self.power(mid, selection);
            if p > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if (p - self.budget).abs() <= 1e-3 * self.eps1 {
                return mid;
            }
        }
        hi
    }

    pub fn solve(&self, policy: &SelectionPolicy) -> Result<BisectionResult> {
        let (sel0, p0) = self.eval(0.0, policy);
        let xi = if p0 <= self.budget {
            0.0
        } else {
            let mut hi = self.xi_max;
            while self.eval(hi, policy).1 >= self.budget {
                hi *= 10.0;
                if !hi.is_finite() {
                    return Err(Error::Singular("power multiplier bracket diverged".into()));
                }
            }
            let mut lo = 0.0;
            let mut found = None;
            for _ in 0..MAX_BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (_, p) = self.eval(mid, policy);
                if (p - self.budget).abs() <= 1e-3 * self.eps1 {
                    found = Some(mid);
                    break;
                }
                if p > self.budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            match found {
                Some(x) => x,
                None => {
                    // The power curve jumps across the budget where a stream
                    // switches off. Keep the feasible side's flags and meet the
                    // budget with those flags held fixed.
                    let (upper, p_hi) = self.eval(hi, policy);
                    if (p_hi - self.budget).abs() <= self.eps1 {
                        hi
                    } else {
                        let xi = self.frozen_root(&upper, hi);
                        return self.assemble(xi, upper);
                    }
                }
            }
        };
        let selection = if xi == 0.0 { sel0 } else { self.selection(xi, policy) };
        self.assemble(xi, selection)
    }

    fn assemble(&self, xi: f64, selection: StreamSelection) -> Result<BisectionResult> {
        let mt = self.gram.basis.nrows();
        let mut precoders = Vec::with_capacity(self.metrics.num_users());
        for (k, ck) in self.metrics.coefficients.iter().enumerate() {
            let mut v = CMat::zeros(mt, ck.len());
            for (j, cj) in ck.iter().enumerate() {
                if selection.is_on(k, j) {
                    v.set_column(j, &shifted_precoder(cj, self.gram, xi + self.offset)?);
                }
            }
            precoders.push(v);
        }
        let power = transmit_power(&precoders, &selection);
        Ok(BisectionResult {
            multiplier: xi,
            selection,
            precoders,
            power,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub hybrid: HybridBeamformer,
    pub residual: f64,
    /// Diagonal of the column scaler, one entry per active chain.
    pub scaler: Vec<f64>,
}

impl FactorizationResult {
    pub fn active_chains(&self) -> usize {
        self.scaler.len()
    }
}

fn idle_split(rows: usize, cols: usize) -> (CMat, CMat) {
    let (a, b) = phase_split(0.0, 0.0).expect("zero amplitude is valid");
    (CMat::from_element(rows, cols, a), CMat::from_element(rows, cols, b))
}

/// Splits every entry of `p` into two unit-modulus shifters.
pub fn split_analog(p: &CMat) -> Result<(CMat, CMat)> {
    let (mut a, mut b) = idle_split(p.nrows(), p.ncols());
    for (i, z) in p.iter().enumerate() {
        // Round-off can push the largest entry a hair past 2.
        let amp = z.norm().min(2.0);
        let (x, y) = phase_split(amp, z.arg())?;
        a[i] = x;
        b[i] = y;
    }
    Ok((a, b))
}

/// Exact factorization of the active columns of a fully digital precoder into
/// an analog network with entries of modulus at most 2 and a baseband stage.
pub fn hybrid_factorize(
    fully_digital: &[CMat],
    selection: &StreamSelection,
    rf_chains: usize,
) -> Result<FactorizationResult> {
    let mt = fully_digital.first().map_or(0, |v| v.nrows());
    let active: Vec<(usize, usize)> = selection.active().collect();
    if active.len() > rf_chains {
        return Err(Error::InvalidArgument(format!(
            "{} active streams exceed {rf_chains} RF chains",
            active.len()
        )));
    }
    let mut analog = CMat::zeros(mt, rf_chains);
    let mut baseband: Vec<CMat> = fully_digital
        .iter()
        .map(|v| CMat::zeros(rf_chains, v.ncols()))
        .collect();
    let mut scaler = Vec::new();

    if !active.is_empty() {
        let mut w = CMat::zeros(mt, active.len());
        for (a, &(k, j)) in active.iter().enumerate() {
            w.set_column(a, &fully_digital[k].column(j));
        }
        let (v1, w1) = thin_qr(&w);
        // LQ of V1^H through the QR of V1: V1^H = R2^H Q2^H.
        let (q2, r2) = thin_qr(&v1);
        let mut chains = Vec::new();
        for i in 0..q2.ncols() {
            let peak = q2.column(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if peak > 0.0 {
                chains.push((i, peak / 2.0));
            }
        }
        let mix = &r2 * &w1;
        for (slot, &(i, xi)) in chains.iter().enumerate() {
            analog.set_column(slot, &q2.column(i).unscale(xi));
            for (a, &(k, j)) in active.iter().enumerate() {
                baseband[k][(slot, j)] = mix[(i, a)] * xi;
            }
            scaler.push(xi);
        }
    }

    let (mut shifter_a, mut shifter_b) = idle_split(mt, rf_chains);
    let (sa, sb) = split_analog(&analog.columns(0, scaler.len()).into_owned())?;
    shifter_a.columns_mut(0, scaler.len()).copy_from(&sa);
    shifter_b.columns_mut(0, scaler.len()).copy_from(&sb);
    let hybrid = HybridBeamformer {
        analog,
        shifter_a,
        shifter_b,
        baseband,
    };
    let mut residual_sq = 0.0;
    for (k, v) in hybrid.effective_precoders().iter().enumerate() {
        for j in 0..v.ncols() {
            let target = if selection.is_on(k, j) {
                fully_digital[k].column(j).into_owned()
            } else {
                v.column(j).scale(0.0)
            };
            residual_sq += (target - v.column(j)).norm_squared();
        }
    }
    Ok(FactorizationResult {
        hybrid,
        residual: residual_sq.sqrt(),
        scaler,
    })
}

/// Objective value and its ingredients for a fully digital iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rates: Vec<f64>,
    pub hpc: f64,
    pub tx_power: f64,
    pub objective: f64,
}

pub fn evaluate(
    channels: &[CMat],
    precoders: &[CMat],
    selection: &StreamSelection,
    config: &SolverConfig,
) -> Result<Evaluation> {
    let mt = channels.first().map_or(0, |h| h.ncols());
    let rates = achievable_rate(channels, precoders, selection, config.noise)?;
    let hpc = hardware_power(selection, &config.power, mt);
    Ok(Evaluation {
        objective: network_objective(&rates, hpc, config.beta),
        tx_power: transmit_power(precoders, selection),
        rates,
        hpc,
    })
}

/// Matched-filter start `H_k^H`, scaled so the selected streams use the
/// whole budget.
pub fn initial_state(channels: &[CMat], selection: StreamSelection, budget: f64) -> WmmseState {
    let mut v: Vec<CMat> = channels.iter().map(|h| h.adjoint()).collect();
    let p = transmit_power(&v, &selection);
    if p > 0.0 {
        let s = (budget / p).sqrt();
        for m in &mut v {
            *m *= c(s, 0.0);
        }
    }
    WmmseState {
        combiners: channels.iter().map(|h| CMat::zeros(h.nrows(), h.nrows())).collect(),
        weights: channels.iter().map(|h| CMat::identity(h.nrows(), h.nrows())).collect(),
        fully_digital: v,
        selection,
        multiplier: 0.0,
    }
}

/// Default starting flags: every stream on, trimmed to the chain budget.
pub fn initial_selection(channels: &[CMat], rf_chains: usize) -> StreamSelection {
    let mut s = StreamSelection::new(channels.iter().map(|h| vec![true; h.nrows()]).collect());
    let active: Vec<_> = s.active().collect();
    for &(k, j) in active.iter().skip(rf_chains) {
        s.set(k, j, false);
    }
    s
}

/// Rotates each user's active precoder columns onto the eigenbasis of
/// `V^H H^H H V`, strongest first. Rates are unchanged; streams that share a
/// direction collapse into one column and the rest go to zero.
pub fn align_streams(channels: &[CMat], precoders: &mut [CMat], sel: &StreamSelection) -> Result<()> {
    for (k, (h, v)) in channels.iter().zip(precoders.iter_mut()).enumerate() {
        let slots: Vec<usize> = (0..v.ncols()).filter(|&j| sel.is_on(k, j)).collect();
        if slots.len() < 2 {
            continue;
        }
        let va = CMat::from_fn(v.nrows(), slots.len(), |i, a| v[(i, slots[a])]);
        let hv = h * &va;
        let eig = hermitian_eigen(&(hv.adjoint() * &hv))?;
        let rotated = &va * &eig.vectors;
        for (a, &j) in slots.iter().enumerate() {
            v.set_column(j, &rotated.column(a));
        }
    }
    Ok(())
}

/// Combiner and weight updates for the current precoders, followed by the
/// gram eigendecomposition and target projections.
pub(crate) fn wmmse_step(
    channels: &[CMat],
    state: &mut WmmseState,
    config: &SolverConfig,
) -> Result<(GramEvd, Vec<CMat>)> {
    for k in 0..channels.len() {
        state.combiners[k] = update_combiner(channels, &state.fully_digital, &state.selection, k, config.noise)?;
    }
    let mses = mse_matrices(channels, state, config.noise)?;
    state.weights = mses
        .iter()
        .map(|f| update_weight(f, config.mu))
        .collect::<Result<_>>()?;
    let gram = interference_gram_evd(channels, &state.combiners, &state.weights)?;
    let f = targets(channels, &state.combiners, &state.weights);
    Ok((gram, f))
}

pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

#[derive(Debug, Clone)]
pub struct WmmseTsSolution {
    pub state: WmmseState,
    pub factorization: FactorizationResult,
    pub evaluation: Evaluation,
    /// Objective after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the WMMSE loop from the matched-filter start and factorizes the
/// result.
pub fn wmmse_ts_solve(channels: &[CMat], config: &SolverConfig, policy: &SelectionPolicy) -> Result<WmmseTsSolution> {
    let start = match policy {
        SelectionPolicy::Adaptive => initial_selection(channels, config.rf_chains),
        SelectionPolicy::Frozen(t) => t.clone(),
    };
    let state = initial_state(channels, start, config.power.budget_watts);
    let out = wmmse_iterate(channels, config, policy, state, config.max_iters)?;
    if !out.converged {
        log::warn!(
            "WMMSE loop stopped after {} iterations without converging",
            out.iterations
        );
    }
    let factorization = hybrid_factorize(&out.state.fully_digital, &out.state.selection, config.rf_chains)?;
    Ok(WmmseTsSolution {
        state: out.state,
        factorization,
        evaluation: out.evaluation,
        trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub state: WmmseState,
    pub evaluation: Evaluation,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// WMMSE iterations from a given state until the objective settles.
pub fn wmmse_iterate(
    channels: &[CMat],
    config: &SolverConfig,
    policy: &SelectionPolicy,
    mut state: WmmseState,
    max_iters: usize,
) -> Result<IterationOutcome> {
    config.validate()?;
    if channels.is_empty() {
        return Err(Error::InvalidArgument("no users".into()));
    }
    let mt = channels[0].ncols();
    let mut current = evaluate(channels, &state.fully_digital, &state.selection, config)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        align_streams(channels, &mut state.fully_digital, &state.selection)?;
        let (gram, f) = wmmse_step(channels, &mut state, config)?;
        let metrics = StreamMetrics::new(&gram, &f);
        let problem = BisectionProblem {
            metrics: &metrics,
            gram: &gram,
            offset: 0.0,
            beta: config.beta,
            mu: config.mu,
            per_chain_watts: config.power.per_chain(mt),
            cap: config.rf_chains,
            budget: config.power.budget_watts,
            eps1: config.eps1,
            xi_max: config.xi_max,
        };
        // The frozen-flag update never lowers the objective; the adaptive one
        // is kept only when it does better.
        let keep = problem.solve(&SelectionPolicy::Frozen(state.selection.clone()))?;
        let mut best = (evaluate(channels, &keep.precoders, &keep.selection, config)?, keep);
        if let SelectionPolicy::Adaptive = policy {
            let cand = problem.solve(policy)?;
            if cand.selection != best.1.selection {
                let e = evaluate(channels, &cand.precoders, &cand.selection, config)?;
                if e.objective > best.0.objective {
                    best = (e, cand);
                }
            }
        }
        let (eval, step) = best;
        state.fully_digital = step.precoders;
        state.selection = step.selection;
        state.multiplier = step.multiplier;
        let change = relative_change(eval.objective, current.objective);
        current = eval;
        trace.push(current.objective);
        if change < config.eps2 {
            converged = true;
            break;
        }
    }
    Ok(IterationOutcome {
        state,
        evaluation: current,
        trace,
        iterations,
        converged,
    })
}

/// Relative factorization residual, for diagnostics.
pub fn relative_residual(result: &FactorizationResult, fully_digital: &[CMat]) -> f64 {
    let norm: f64 = fully_digital.iter().map(frobenius).map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        result.residual
    } else {
        result.residual / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, CVec};
    use crate::metrics::PowerModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn single_term(x: f64, j: f64) -> (StreamMetrics, GramEvd) {
        let gram = GramEvd {
            basis: identity(1),
            eigenvalues: vec![j],
        };
        let f = CMat::from_element(1, 1, c(x.sqrt(), 0.0));
        let m = StreamMetrics::new(&gram, &[f]);
        (m, gram)
    }

    fn problem<'a>(m: &'a StreamMetrics, g: &'a GramEvd, budget: f64) -> BisectionProblem<'a> {
        BisectionProblem {
            metrics: m,
            gram: g,
            offset: 0.0,
            beta: 1.0,
            mu: 1.5,
            per_chain_watts: 1.0,
            cap: 8,
            budget,
            eps1: 1e-6,
            xi_max: 1e8,
        }
    }

    #[test]
    fn single_term_multiplier() {
        let (m, g) = single_term(4.0, 1.0);
        let r = problem(&m, &g, 1.0).solve(&SelectionPolicy::Adaptive).unwrap();
        assert!((r.multiplier - 1.0).abs() <= 1e-6);
        assert!((r.power - 1.0).abs() <= 1e-6);
        assert_eq!(r.selection.active_count(), 1);
    }

    #[test]
    fn slack_budget_keeps_zero_multiplier() {
        let (m, g) = single_term(4.0, 1.0);
        let r = problem(&m, &g, 10.0).solve(&SelectionPolicy::Adaptive).unwrap();
        assert_eq!(r.multiplier, 0.0);
        assert!((r.power - 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_gives_zero_precoders() {
        let (m, g) = single_term(4.0, 1.0);
        let mut p = problem(&m, &g, 1.0);
        p.beta = 0.0;
        let r = p.solve(&SelectionPolicy::Adaptive).unwrap();
        assert_eq!(r.selection.active_count(), 0);
        assert_eq!(r.power, 0.0);
        assert_eq!(r.precoders[0], CMat::zeros(1, 1));
    }

    #[test]
    fn power_curve_is_strictly_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = vec![random(2, 6, &mut rng), random(2, 6, &mut rng)];
        let z = vec![random(2, 2, &mut rng), random(2, 2, &mut rng)];
        let w = vec![identity(2), identity(2)];
        let gram = interference_gram_evd(&h, &z, &w).unwrap();
        let m = StreamMetrics::new(&gram, &targets(&h, &z, &w));
        let p = problem(&m, &gram, 1.0);
        let sel = StreamSelection::all(2, 2, true);
        let mut prev = f64::INFINITY;
        for i in 0..300 {
            let xi = 1e-4 * 1.07f64.powi(i);
            let pw = p.power(xi, &sel);
            assert!(pw < prev);
            prev = pw;
            // Matches the norms of the assembled precoders.
            if i % 50 == 0 {
                let r = p.assemble(xi, sel.clone()).unwrap();
                assert!((r.power - pw).abs() <= 1e-9 * pw);
            }
        }
        assert!(p.power(1e30, &sel) < 1e-40);
        assert_eq!(p.power(1.0, &StreamSelection::all(2, 2, false)), 0.0);
    }

    #[test]
    fn closed_form_objective_matches_contribution() {
        // w^H A w - 2 Re f^H w evaluated at the shifted precoder.
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let h = vec![random(2, 5, &mut rng)];
        let z = vec![random(2, 2, &mut rng)];
        let w = vec![identity(2)];
        let gram = interference_gram_evd(&h, &z, &w).unwrap();
        let f = targets(&h, &z, &w);
        let m = StreamMetrics::new(&gram, &f);
        let a = gram.matrix();
        let xi = 0.8;
        for j in 0..2 {
            let v = shifted_precoder(&m.coefficients[0][j], &gram, xi).unwrap();
            let fj: CVec = f[0].column(j).into_owned();
            let quad = (v.adjoint() * &a * &v)[(0, 0)].re;
            let lin = 2.0 * (fj.adjoint() * &v)[(0, 0)].re;
            let direct = quad - lin;
            let c = stream_contribution(&m.projections[0][j], &gram.eigenvalues, xi).unwrap();
            assert!((direct - c).abs() <= 1e-8 * direct.abs());
        }
    }

    #[test]
    fn factorization_rank_one_and_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut v = CMat::zeros(16, 2);
        v.set_column(1, &random(16, 1, &mut rng).column(0));
        let sel = StreamSelection::new(vec![vec![false, true]]);
        let r = hybrid_factorize(&[v.clone()], &sel, 4).unwrap();
        assert_eq!(r.active_chains(), 1);
        assert!(r.residual <= 1e-12 * v.norm());
        assert!(r.hybrid.analog.iter().all(|z| z.norm() <= 2.0 + 1e-12));

        let users: Vec<CMat> = (0..4).map(|_| random(64, 2, &mut rng)).collect();
        let sel = StreamSelection::all(4, 2, true);
        let r = hybrid_factorize(&users, &sel, 8).unwrap();
        let norm: f64 = users.iter().map(|u| u.norm_squared()).sum::<f64>().sqrt();
        assert!(r.residual <= 1e-9 * norm);
        assert!(r.hybrid.split_error() <= 1e-12);
        let max = r.hybrid.analog.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((max - 2.0).abs() < 1e-12);
        for z in r.hybrid.shifter_a.iter().chain(r.hybrid.shifter_b.iter()) {
            assert!((z.norm() - 1.0).abs() <= 1e-12);
        }
        assert!(r.scaler.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn factorization_rejects_too_many_streams() {
        let v = vec![CMat::zeros(4, 3)];
        assert!(hybrid_factorize(&v, &StreamSelection::all(1, 3, true), 2).is_err());
    }

    #[test]
    fn solver_trace_is_monotone_and_factorization_preserves_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let h: Vec<CMat> = (0..2).map(|_| random(2, 16, &mut rng).scale(1e-4)).collect();
        let cfg = SolverConfig {
            noise: 1e-12,
            power: PowerModel::new(0.2, 0.01, 0.03).unwrap(),
            rf_chains: 4,
            ..Default::default()
        };
        let sol = wmmse_ts_solve(&h, &cfg, &SelectionPolicy::Adaptive).unwrap();
        assert!(sol.converged);
        for w in sol.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6 * w[0].abs().max(1.0));
        }
        assert!(sol.evaluation.tx_power <= cfg.power.budget_watts * (1.0 + 1e-9) + cfg.eps1);
        let eff = sol.factorization.hybrid.effective_precoders();
        let r_h = achievable_rate(&h, &eff, &sol.state.selection, cfg.noise).unwrap();
        for (a, b) in r_h.iter().zip(&sol.evaluation.rates) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-12));
        }
        assert_eq!(sol.factorization.active_chains(), sol.state.selection.active_count());
    }

    #[test]
    fn tiny_budget_switches_everything_off() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let h: Vec<CMat> = (0..2).map(|_| random(2, 16, &mut rng).scale(1e-4)).collect();
        let cfg = SolverConfig {
            noise: 1e-12,
            power: PowerModel::new(0.2, 0.01, 1e-12).unwrap(),
            rf_chains: 4,
            ..Default::default()
        };
        let sol = wmmse_ts_solve(&h, &cfg, &SelectionPolicy::Adaptive).unwrap();
        assert_eq!(sol.state.selection.active_count(), 0);
        assert_eq!(sol.evaluation.objective, 0.0);
    }

    #[test]
    fn aligned_streams_keep_rates_and_expose_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random(3, 1, &mut rng);
        let b = random(1, 6, &mut rng);
        let channels = vec![&a * &b, random(3, 6, &mut rng)];
        let mut v = vec![random(6, 3, &mut rng), random(6, 3, &mut rng)];
        let sel = StreamSelection::all(2, 3, true);
        let before = achievable_rate(&channels, &v, &sel, 0.1).unwrap();
        align_streams(&channels, &mut v, &sel).unwrap();
        let after = achievable_rate(&channels, &v, &sel, 0.1).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
        let hv = &channels[0] * &v[0];
        assert!(hv.column(0).norm() > 1e-3);
        assert!(hv.column(1).norm() < 1e-9 && hv.column(2).norm() < 1e-9);
    }
}
