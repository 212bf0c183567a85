//! Cramér–Rao bounds from Fisher values and Heisenberg-scaling verdicts.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::families::{ChannelFamily, Differentiable, ParamPoint};
use crate::fisher_channel::{rld_fisher_channel, rld_value_channel, TraceConvention};
use crate::fisher_state::{FisherValue, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    StateSld,
    StateRld,
    CqChannel,
    ChannelSldHeisenberg,
    ChannelRld,
    MultiScalar,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::StateSld,
        BoundKind::StateRld,
        BoundKind::CqChannel,
        BoundKind::ChannelSldHeisenberg,
        BoundKind::ChannelRld,
        BoundKind::MultiScalar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::StateSld => "state_sld",
            BoundKind::StateRld => "state_rld",
            BoundKind::CqChannel => "cq_channel",
            BoundKind::ChannelSldHeisenberg => "channel_sld_heisenberg",
            BoundKind::ChannelRld => "channel_rld",
            BoundKind::MultiScalar => "multi_scalar",
        }
    }

    pub fn scaling(self) -> Scaling {
        match self {
            BoundKind::ChannelSldHeisenberg => Scaling::Quadratic,
            _ => Scaling::Linear,
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound kind '{s}'")))
    }
}

/// How the bound decays with the number of samples or channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scaling {
    /// `1/n`
    Linear,
    /// `1/n²`
    Quadratic,
}

impl Scaling {
    pub fn factor(self, n: u64) -> f64 {
        let n = n as f64;
        match self {
            Scaling::Linear => n,
            Scaling::Quadratic => n * n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundStatus {
    /// `bound · fisher · scaling(n) = 1`.
    Informative,
    /// Infinite Fisher information: the bound is 0 and says nothing.
    Vacuous,
    /// Zero Fisher information: no unbiased estimator exists and the bound is `+∞`.
    NoInformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound: f64,
    pub n: u64,
    pub kind: BoundKind,
    pub fisher_used: FisherValue,
    pub scaling: Scaling,
    pub status: BoundStatus,
    pub convention: Option<TraceConvention>,
}

/// Cramér–Rao bound `1/(n I)` or, for the Heisenberg kind, `1/(n² I)`.
pub fn crb(fisher: FisherValue, n: u64, kind: BoundKind) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let scaling = kind.scaling();
    let (bound, status) = match fisher.get() {
        None => (0.0, BoundStatus::Vacuous),
        Some(v) if v <= 0.0 => (f64::INFINITY, BoundStatus::NoInformation),
        Some(v) => (1.0 / (scaling.factor(n) * v), BoundStatus::Informative),
    };
    Ok(BoundReport { bound, n, kind, fisher_used: fisher, scaling, status, convention: None })
}

impl BoundReport {
    pub fn with_convention(mut self, conv: TraceConvention) -> Self {
        self.convention = Some(conv);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Finite RLD value: error can decay at most as `1/n`.
    NoGo,
    /// The RLD finiteness condition fails.
    HeisenbergPossible,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NoGo => "no-go (shot-noise limited)",
            Verdict::HeisenbergPossible => "Heisenberg possibly attainable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergReport {
    pub verdict: Verdict,
    pub fisher: FisherValue,
    pub convention: TraceConvention,
}

impl HeisenbergReport {
    /// True when the RLD value is exactly zero, so the accompanying bound
    /// carries no information.
    pub fn is_degenerate(&self) -> bool {
        self.fisher.finite && self.fisher.value == 0.0
    }
}

/// Heisenberg no-go verdict from the RLD channel Fisher information (or the
/// RLD value under `w` for multiparameter families; uniform weight if none).
pub fn heisenberg_verdict(
    chan: &ChannelFamily,
    theta: &ParamPoint,
    w: Option<&WeightMatrix>,
    conv: TraceConvention,
) -> Result<HeisenbergReport> {
    let fisher = match (chan.num_params(), w) {
        (1, None) => rld_fisher_channel(chan, theta, conv)?,
        (d, None) => rld_value_channel(chan, theta, &WeightMatrix::uniform(d)?, conv)?,
        (_, Some(w)) => rld_value_channel(chan, theta, w, conv)?,
    };
    let verdict = if fisher.finite { Verdict::NoGo } else { Verdict::HeisenbergPossible };
    Ok(HeisenbergReport { verdict, fisher, convention: conv })
}
