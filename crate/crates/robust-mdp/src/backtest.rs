//! Policy evaluation on held-out windows and the reported performance
//! metrics.
//!
//! Conventions, since the ratio definitions vary across the literature:
//! Sharpe is per-period mean profit over population standard deviation with
//! zero risk-free rate and no annualization; Sortino replaces the
//! denominator with the downside deviation about zero,
//! `sqrt(mean(min(p, 0)^2))`. Either ratio is reported as 0 when its
//! denominator vanishes, which keeps JSON output free of infinities.
//! Profitability counts strictly positive periods.

use serde::Serialize;
use thiserror::Error;

use crate::core::{reward, ActionVector, CoreError, RewardSpec, StateWindow};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("empty test set")]
    EmptyTestSet,
    #[error("too short: need at least {need} profits, got {got}")]
    TooShort { need: usize, got: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
}

const ZERO_DENOMINATOR: f64 = 1e-15;

/// Metrics of one backtest run over one period.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestResult {
    pub profits: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub overall_profit: f64,
    pub average_profit: f64,
    pub pct_profitable: f64,
    pub sharpe: f64,
    pub sortino: f64,
}

/// Mean over population standard deviation; 0 on zero deviation.
pub fn sharpe(profits: &[f64]) -> Result<f64, BacktestError> {
    if profits.len() < 2 {
        return Err(BacktestError::TooShort { need: 2, got: profits.len() });
    }
    let n = profits.len() as f64;
    let mean = profits.iter().sum::<f64>() / n;
    let var = profits.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < ZERO_DENOMINATOR {
        return Ok(0.0);
    }
    Ok(mean / std)
}

/// Mean over downside deviation about zero; 0 on zero downside.
pub fn sortino(profits: &[f64]) -> Result<f64, BacktestError> {
    if profits.len() < 2 {
        return Err(BacktestError::TooShort { need: 2, got: profits.len() });
    }
    let n = profits.len() as f64;
    let mean = profits.iter().sum::<f64>() / n;
    let downside_sq = profits.iter().map(|p| p.min(0.0).powi(2)).sum::<f64>() / n;
    let downside = downside_sq.sqrt();
    if downside < ZERO_DENOMINATOR {
        return Ok(0.0);
    }
    Ok(mean / downside)
}

fn metrics_from_profits(profits: Vec<f64>) -> BacktestResult {
    let n = profits.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &p in &profits {
        acc += p;
        cumulative.push(acc);
    }
    let overall_profit = acc;
    let average_profit = overall_profit / n as f64;
    let profitable = profits.iter().filter(|&&p| p > 0.0).count();
    let pct_profitable = profitable as f64 / n as f64;
    let sharpe = if n >= 2 { sharpe(&profits).expect("length checked") } else { 0.0 };
    let sortino = if n >= 2 { sortino(&profits).expect("length checked") } else { 0.0 };
    BacktestResult {
        profits,
        cumulative,
        overall_profit,
        average_profit,
        pct_profitable,
        sharpe,
        sortino,
    }
}

/// Rolls a stationary policy through chronologically ordered
/// (window, realized next return) pairs, crediting one reward per period.
/// Evaluation is RNG-free and deterministic.
pub fn run_backtest<P>(
    policy: P,
    pairs: &[(StateWindow, Vec<f64>)],
    spec: &RewardSpec,
) -> Result<BacktestResult, BacktestError>
where
    P: Fn(&StateWindow) -> ActionVector,
{
    if pairs.is_empty() {
        return Err(BacktestError::EmptyTestSet);
    }
    let mut profits = Vec::with_capacity(pairs.len());
    for (window, next_return) in pairs {
        let action = policy(window);
        let x_next = window.advanced(next_return)?;
        profits.push(reward(window, &action, &x_next, spec)?);
    }
    Ok(metrics_from_profits(profits))
}
