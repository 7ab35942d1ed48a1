//! Discrete-phase solver: penalty reformulation of the hybrid constraint,
//! block-coordinate ascent over the penalized problem and a shrinking
//! penalty weight.
//!
//! The analog network is built from two `D`-bit phase shifters per entry, so
//! every analog entry is drawn from the pairwise-sum alphabet of the shifter
//! phases.
//!
//! The penalty weight is expressed relative to the largest eigenvalue of the
//! interference gram matrix at the start of the run. The gram spectrum scales
//! with the inverse of the transmit power and with the SNR, so an absolute
//! weight would be either negligible or overwhelming depending on the link
//! budget.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{cis, frobenius_sq, hermitian_solve, ln_det_hpd, pseudo_inverse, trace_re, CMat, CVec};
use crate::metrics::{transmit_power, HybridBeamformer, StreamSelection};
use crate::wmmse::{
    interference_gram_evd, mse_matrices, select_streams, shifted_precoder, stack, stream_contribution, targets,
    GramEvd, StreamMetrics, WmmseState,
};
use crate::wmmse_ts::{
    evaluate, initial_selection, initial_state, relative_change, wmmse_iterate, wmmse_step, BisectionProblem,
    Evaluation, SelectionPolicy,
};

/// A realizable analog value with the two shifter phase indices behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: Complex64,
    pub first: u32,
    pub second: u32,
}

#[derive(Debug, Clone)]
pub struct DiscreteAlphabet {
    bits: u32,
    levels: u32,
    atoms: Vec<Atom>,
}

impl DiscreteAlphabet {
    /// Enumerates unordered phase pairs `first <= second`. Two unit phasors
    /// determine their sum uniquely except for opposed pairs, which all give
    /// zero and are kept once as `(0, N/2)`.
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::InvalidArgument(format!("bit depth {bits} outside 1..=8")));
        }
        let n = 1u32 << bits;
        let half = n / 2;
        let mut atoms = Vec::with_capacity((n * (n + 1) / 2) as usize);
        for a in 0..n {
            for b in a..n {
                if b == a + half && a != 0 {
                    continue;
                }
                let value = if b == a + half {
                    Complex64::new(0.0, 0.0)
                } else {
                    cis(2.0 * PI * a as f64 / n as f64) + cis(2.0 * PI * b as f64 / n as f64)
                };
                atoms.push(Atom {
                    value,
                    first: a,
                    second: b,
                });
            }
        }
        Ok(Self { bits, levels: n, atoms })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn phase(&self, index: u32) -> f64 {
        2.0 * PI * index as f64 / self.levels as f64
    }

    /// Nearest atom; ties go to the lexicographically smallest phase pair.
    pub fn nearest(&self, value: Complex64) -> &Atom {
        let mut best = &self.atoms[0];
        let mut dist = (best.value - value).norm_sqr();
        for a in &self.atoms[1..] {
            let d = (a.value - value).norm_sqr();
            if d < dist {
                dist = d;
                best = a;
            }
        }
        best
    }

    pub fn contains(&self, value: Complex64) -> bool {
        self.atoms.iter().any(|a| a.value == value)
    }
}

/// Returns the nearest atom with its two shifter phases.
pub fn discrete_project(value: Complex64, alphabet: &DiscreteAlphabet) -> (Complex64, f64, f64) {
    let a = alphabet.nearest(value);
    (a.value, alphabet.phase(a.first), alphabet.phase(a.second))
}

/// Entrywise projection of an analog matrix, returning `(P, P1, P2)`.
pub fn project_analog(p: &CMat, alphabet: &DiscreteAlphabet) -> (CMat, CMat, CMat) {
    let mut out = p.clone();
    let mut s1 = p.clone();
    let mut s2 = p.clone();
    for i in 0..p.len() {
        let a = alphabet.nearest(p[i]);
        out[i] = a.value;
        s1[i] = cis(alphabet.phase(a.first));
        s2[i] = cis(alphabet.phase(a.second));
    }
    (out, s1, s2)
}

/// Columns of `H_k^H Z_k G_k + (1 / 2 rho) P W_k`.
pub fn penalized_targets(
    channels: &[CMat],
    combiners: &[CMat],
    weights: &[CMat],
    hybrid: &HybridBeamformer,
    rho: f64,
) -> Vec<CMat> {
    let pull = 1.0 / (2.0 * rho);
    targets(channels, combiners, weights)
        .into_iter()
        .zip(hybrid.effective_precoders())
        .map(|(f, pw)| f + pw.scale(pull))
        .collect()
}

/// `((1 + 2 rho xi) / (2 rho) I + A)^{-1} m`.
pub fn penalized_precoder(m: &CVec, gram: &GramEvd, xi: f64, rho: f64) -> Result<CVec> {
    let coefficients = gram.basis.adjoint() * m;
    shifted_precoder(&coefficients, gram, xi + 1.0 / (2.0 * rho))
}

#[allow(clippy::too_many_arguments)]
pub fn penalized_select(
    projections: &[Vec<Vec<f64>>],
    eigenvalues: &[f64],
    xi: f64,
    rho: f64,
    beta: f64,
    mu: f64,
    per_chain_watts: f64,
    cap: usize,
) -> StreamSelection {
    let shift = xi + 1.0 / (2.0 * rho);
    let e: Vec<Vec<f64>> = projections
        .iter()
        .map(|yk| {
            yk.iter()
                .map(|y| stream_contribution(y, eigenvalues, shift).unwrap_or(f64::NEG_INFINITY))
                .collect()
        })
        .collect();
    select_streams(&e, beta, mu, per_chain_watts, cap)
}

pub fn penalty_schedule(rho: f64, shrink: f64) -> f64 {
    rho * shrink
}

/// `sum over active streams of |w_bar - P w|^2`.
pub fn penalty_value(fully_digital: &[CMat], analog: &CMat, baseband: &[CMat], selection: &StreamSelection) -> f64 {
    selection
        .active()
        .map(|(k, j)| (fully_digital[k].column(j) - analog * baseband[k].column(j)).norm_squared())
        .sum()
}

/// Least-squares baseband on the leading `chains` analog columns; inactive
/// streams get zero columns.
pub fn baseband_update(analog: &CMat, fully_digital: &[CMat], selection: &StreamSelection, chains: usize) -> Vec<CMat> {
    let rf = analog.ncols();
    let pinv = pseudo_inverse(&analog.columns(0, chains).into_owned());
    fully_digital
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut w = CMat::zeros(rf, v.ncols());
            for j in 0..v.ncols() {
                if selection.is_on(k, j) {
                    let col = &pinv * v.column(j);
                    w.view_mut((0, j), (chains, 1)).copy_from(&col);
                }
            }
            w
        })
        .collect()
}

/// Unconstrained least-squares analog network on the leading `chains`
/// columns, projected onto the alphabet. Columns beyond `chains` keep their
/// previous values. `None` when no stream is active.
pub fn analog_update(
    previous: &CMat,
    fully_digital: &[CMat],
    baseband: &[CMat],
    selection: &StreamSelection,
    chains: usize,
    alphabet: &DiscreteAlphabet,
) -> Result<Option<(CMat, CMat, CMat)>> {
    if chains == 0 || selection.active_count() == 0 {
        return Ok(None);
    }
    let mt = previous.nrows();
    let mut a = CMat::zeros(mt, chains);
    let mut b = CMat::zeros(chains, chains);
    for (k, j) in selection.active() {
        let wbar = fully_digital[k].column(j);
        let w = baseband[k].view((0, j), (chains, 1));
        a += wbar * w.adjoint();
        b += w * w.adjoint();
    }
    if frobenius_sq(&b) == 0.0 {
        return Ok(None);
    }
    let pc = hermitian_solve(&b, &a.adjoint())?.adjoint();
    let mut full = previous.clone();
    full.columns_mut(0, chains).copy_from(&pc);
    Ok(Some(project_analog(&full, alphabet)))
}

/// Orthonormal basis of the column space.
fn range_basis(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    let u = svd.u.expect("u requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff && svd.singular_values[i] > 0.0)
        .collect();
    let mut out = CMat::zeros(m.nrows(), keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        out.set_column(dst, &u.column(i));
    }
    out
}

#[derive(Debug, Clone)]
pub struct PliSolution {
    pub hybrid: HybridBeamformer,
    pub selection: StreamSelection,
    pub fully_digital: Vec<CMat>,
    pub evaluation: Evaluation,
    /// Hybrid objective at the end of every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Penalty, relative to the power budget, at the end of every outer
    /// iteration.
    pub penalty_trace: Vec<f64>,
    /// Penalized merit after every inner iteration, one list per outer
    /// iteration.
    pub inner_traces: Vec<Vec<f64>>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Relative penalty when the outer loop stopped.
    pub penalty_final: f64,
    pub converged: bool,
}

struct Penalized<'a> {
    channels: &'a [CMat],
    config: &'a SolverConfig,
    alphabet: DiscreteAlphabet,
    mt: usize,
}

struct Iterate {
    state: WmmseState,
    analog: CMat,
    shifter_a: CMat,
    shifter_b: CMat,
    baseband: Vec<CMat>,
}

impl Iterate {
    fn hybrid(&self) -> HybridBeamformer {
        HybridBeamformer {
            analog: self.analog.clone(),
            shifter_a: self.shifter_a.clone(),
            shifter_b: self.shifter_b.clone(),
            baseband: self.baseband.clone(),
        }
    }

    fn penalty(&self) -> f64 {
        penalty_value(
            &self.state.fully_digital,
            &self.analog,
            &self.baseband,
            &self.state.selection,
        )
    }
}

impl Penalized<'_> {
    /// Penalized surrogate with natural logarithms, so that the weight update
    /// is its exact maximizer.
    fn merit(&self, it: &Iterate, offset: f64) -> Result<f64> {
        let c = self.config;
        let mses = mse_matrices(self.channels, &it.state, c.noise)?;
        let mut sum = 0.0;
        for (g, f) in it.state.weights.iter().zip(&mses) {
            sum += ln_det_hpd(g)? + c.mu * g.nrows() as f64 - c.mu * trace_re(&(g * f));
        }
        let hpc = c.power.per_chain(self.mt) * it.state.selection.active_count() as f64;
        Ok(c.beta * sum - c.beta * c.mu * offset * it.penalty() - (1.0 - c.beta) * hpc)
    }

    /// One pass over combiners, weights, precoders with flags, analog network
    /// and baseband. Returns the merit afterwards.
    fn inner_step(&self, it: &mut Iterate, offset: f64) -> Result<f64> {
        let c = self.config;
        let (gram, f) = wmmse_step(self.channels, &mut it.state, c)?;
        let pulled: Vec<CMat> = f
            .into_iter()
            .zip(it.hybrid().effective_precoders())
            .map(|(f, pw)| f + pw.scale(offset))
            .collect();
        let metrics = StreamMetrics::new(&gram, &pulled);
        let problem = BisectionProblem {
            metrics: &metrics,
            gram: &gram,
            offset,
            beta: c.beta,
            mu: c.mu,
            per_chain_watts: c.power.per_chain(self.mt),
            cap: c.rf_chains,
            budget: c.power.budget_watts,
            eps1: c.eps1,
            xi_max: c.xi_max,
        };
        let chains = it.state.selection.active_count();

        let keep = problem.solve(&SelectionPolicy::Frozen(it.state.selection.clone()))?;
        it.state.fully_digital = keep.precoders;
        it.state.multiplier = keep.multiplier;

        // A new stream pattern changes the chain count, so it is judged
        // together with the baseband that fits it.
        let cand = problem.solve(&SelectionPolicy::Adaptive)?;
        if cand.selection != it.state.selection {
            let ts = cand.selection.active_count();
            let trial = Iterate {
                baseband: baseband_update(&it.analog, &cand.precoders, &cand.selection, ts),
                state: WmmseState {
                    combiners: it.state.combiners.clone(),
                    weights: it.state.weights.clone(),
                    fully_digital: cand.precoders,
                    selection: cand.selection,
                    multiplier: cand.multiplier,
                },
                analog: it.analog.clone(),
                shifter_a: it.shifter_a.clone(),
                shifter_b: it.shifter_b.clone(),
            };
            let m = self.merit(&trial, offset)?;
            if m > self.merit(it, offset)? {
                *it = trial;
                return Ok(m);
            }
        }

        let update = analog_update(
            &it.analog,
            &it.state.fully_digital,
            &it.baseband,
            &it.state.selection,
            chains,
            &self.alphabet,
        )?;
        if let Some((p, s1, s2)) = update {
            let after = penalty_value(&it.state.fully_digital, &p, &it.baseband, &it.state.selection);
            if after <= it.penalty() {
                it.analog = p;
                it.shifter_a = s1;
                it.shifter_b = s2;
            }
        }
        it.baseband = baseband_update(&it.analog, &it.state.fully_digital, &it.state.selection, chains);
        self.merit(it, offset)
    }

    /// Optimizes the baseband with the analog network and stream flags held
    /// fixed, which is the limit of a vanishing penalty weight.
    fn refine(&self, it: &mut Iterate) -> Result<()> {
        let ts = it.state.selection.active_count();
        if ts == 0 {
            return Ok(());
        }
        let p_act = it.analog.columns(0, ts).into_owned();
        let u = range_basis(&p_act);
        let reduced: Vec<CMat> = self.channels.iter().map(|h| h * &u).collect();
        let start: Vec<CMat> = it
            .hybrid()
            .effective_precoders()
            .iter()
            .map(|pw| u.adjoint() * pw)
            .collect();
        let state = WmmseState {
            combiners: reduced.iter().map(|h| CMat::zeros(h.nrows(), h.nrows())).collect(),
            weights: reduced.iter().map(|h| CMat::identity(h.nrows(), h.nrows())).collect(),
            fully_digital: start,
            selection: it.state.selection.clone(),
            multiplier: 0.0,
        };
        let policy = SelectionPolicy::Frozen(it.state.selection.clone());
        let out = wmmse_iterate(&reduced, self.config, &policy, state, self.config.max_iters)?;
        let pinv = pseudo_inverse(&p_act);
        let rf = it.analog.ncols();
        it.state.fully_digital = out.state.fully_digital.iter().map(|x| &u * x).collect();
        it.baseband = it
            .state
            .fully_digital
            .iter()
            .map(|v| {
                let mut w = CMat::zeros(rf, v.ncols());
                w.rows_mut(0, ts).copy_from(&(&pinv * v));
                w
            })
            .collect();
        it.state.combiners = out.state.combiners;
        it.state.weights = out.state.weights;
        it.state.multiplier = out.state.multiplier;
        Ok(())
    }
}

/// Matched-filter directions scaled so the largest entry has modulus 2.
fn matched_columns(channels: &[CMat]) -> Vec<CVec> {
    channels
        .iter()
        .flat_map(|h| (0..h.nrows()).map(move |r| h.row(r).adjoint()))
        .filter_map(|v| {
            let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            (peak > 0.0).then(|| v.scale(2.0 / peak))
        })
        .collect()
}

pub fn pli_solve(channels: &[CMat], config: &SolverConfig) -> Result<PliSolution> {
    config.validate()?;
    if channels.is_empty() {
        return Err(Error::InvalidArgument("no users".into()));
    }
    let alphabet = DiscreteAlphabet::new(config.bits)?;
    let mt = channels[0].ncols();
    let rf = config.rf_chains;
    let budget = config.power.budget_watts;

    let start = initial_state(channels, initial_selection(channels, rf), budget);
    let warm = wmmse_iterate(
        channels,
        config,
        &SelectionPolicy::Adaptive,
        start,
        config.warm_start_iters.max(1),
    )?;
    let state = warm.state;
    let ts = state.selection.active_count();
    let fact = crate::wmmse_ts::hybrid_factorize(&state.fully_digital, &state.selection, rf)?;
    let mut analog = fact.hybrid.analog;
    let seeds = matched_columns(channels);
    if !seeds.is_empty() {
        for col in ts..rf {
            analog.set_column(col, &seeds[(col - ts) % seeds.len()]);
        }
    }
    let (analog, shifter_a, shifter_b) = project_analog(&analog, &alphabet);
    let baseband = baseband_update(&analog, &state.fully_digital, &state.selection, ts);
    let gram = interference_gram_evd(channels, &state.combiners, &state.weights)?;
    let scale = if gram.max_eigenvalue() > 0.0 {
        gram.max_eigenvalue()
    } else {
        1.0
    };
    let mut it = Iterate {
        state,
        analog,
        shifter_a,
        shifter_b,
        baseband,
    };
    let solver = Penalized {
        channels,
        config,
        alphabet,
        mt,
    };

    let mut rho = config.rho0;
    let mut objective_trace = Vec::new();
    let mut penalty_trace = Vec::new();
    let mut inner_traces = Vec::new();
    let mut inner_iterations = 0;
    let mut converged = false;
    let mut penalty_final = it.penalty() / budget;
    for _ in 0..config.max_outer {
        let offset = scale / (2.0 * rho);
        let mut trace = vec![solver.merit(&it, offset)?];
        for _ in 0..config.max_inner {
            inner_iterations += 1;
            let m = solver.inner_step(&mut it, offset)?;
            let prev = *trace.last().expect("trace starts non-empty");
            trace.push(m);
            if relative_change(m, prev) < config.eps3 {
                break;
            }
        }
        inner_traces.push(trace);
        penalty_final = it.penalty() / budget;
        let eff = it.hybrid().effective_precoders();
        objective_trace.push(evaluate(channels, &eff, &it.state.selection, config)?.objective);
        penalty_trace.push(penalty_final);
        if penalty_final <= config.eps4 {
            converged = true;
            break;
        }
        rho = penalty_schedule(rho, config.shrink);
    }
    if !converged {
        log::warn!(
            "penalty loop stopped after {} outer iterations at relative penalty {penalty_final:e}",
            config.max_outer
        );
    }
    solver.refine(&mut it)?;
    let hybrid = it.hybrid();
    let eff = hybrid.effective_precoders();
    let evaluation = evaluate(channels, &eff, &it.state.selection, config)?;
    debug_assert!(transmit_power(&eff, &it.state.selection) <= budget * (1.0 + 1e-9) + config.eps1);
    Ok(PliSolution {
        outer_iterations: objective_trace.len(),
        hybrid,
        selection: it.state.selection,
        fully_digital: it.state.fully_digital,
        evaluation,
        objective_trace,
        penalty_trace,
        inner_traces,
        inner_iterations,
        penalty_final,
        converged,
    })
}

/// Stacked hybrid residual `|W_bar T - P W|_F^2`, for diagnostics.
pub fn stacked_residual(fully_digital: &[CMat], hybrid: &HybridBeamformer, selection: &StreamSelection) -> f64 {
    let masked: Vec<CMat> = fully_digital
        .iter()
        .enumerate()
        .map(|(k, v)| crate::metrics::masked(v, selection.user(k)))
        .collect();
    let eff: Vec<CMat> = hybrid
        .effective_precoders()
        .iter()
        .enumerate()
        .map(|(k, v)| crate::metrics::masked(v, selection.user(k)))
        .collect();
    frobenius_sq(&(stack(&masked) - stack(&eff)))
}
