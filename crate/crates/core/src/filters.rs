//! Smoothing of the raw SNR estimate, in linear scale.
//!
//! * none: `γ̄_i = γ̂_i`
//! * first order: `γ̄_i = (1 − α) γ̄_{i−1} + α γ̂_i`
//! * moving average: `γ̄_i = (1/M) Σ_{j=1..M} γ̂_{i−j+1}`

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syncsig::{SnrKind, SnrTrace};
use crate::{Error, Result};

/// Initial state of the first-order recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstOrderInit {
    /// `γ̄_0 = γ̂_0`.
    #[default]
    FirstSample,
    /// `γ̄_{-1} = 0`, which reproduces a start-up transient.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    None,
    FirstOrder {
        alpha: f64,
        #[serde(default)]
        init: FirstOrderInit,
    },
    MovingAverage {
        window: usize,
    },
}

impl FilterSpec {
    pub fn first_order(alpha: f64) -> Self {
        FilterSpec::FirstOrder {
            alpha,
            init: FirstOrderInit::FirstSample,
        }
    }

    pub fn moving_average(window: usize) -> Self {
        FilterSpec::MovingAverage { window }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterSpec::None => Ok(()),
            FilterSpec::FirstOrder { alpha, .. } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("alpha", format!("{alpha} not in (0, 1]")))
                }
            }
            FilterSpec::MovingAverage { window } => {
                if window >= 1 {
                    Ok(())
                } else {
                    Err(Error::invalid("window", "must be at least 1"))
                }
            }
        }
    }

    /// Short identifier used in file names and result tables.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::None => f.write_str("none"),
            FilterSpec::FirstOrder {
                alpha,
                init: FirstOrderInit::FirstSample,
            } => write!(f, "first_order_a{alpha}"),
            FilterSpec::FirstOrder {
                alpha,
                init: FirstOrderInit::Zero,
            } => write!(f, "first_order_a{alpha}_zero"),
            FilterSpec::MovingAverage { window } => write!(f, "moving_average_m{window}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Memory {
    None,
    FirstOrder { prev: Option<f64> },
    MovingAverage { buf: VecDeque<f64> },
}

/// A filter instance: spec plus recursion memory.
#[derive(Debug, Clone)]
pub struct Filter {
    spec: FilterSpec,
    memory: Memory,
    warmup_count: usize,
}

impl Filter {
    pub fn new(spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        let memory = match spec {
            FilterSpec::None => Memory::None,
            FilterSpec::FirstOrder { init, .. } => Memory::FirstOrder {
                prev: match init {
                    FirstOrderInit::FirstSample => None,
                    FirstOrderInit::Zero => Some(0.0),
                },
            },
            FilterSpec::MovingAverage { window } => Memory::MovingAverage {
                buf: VecDeque::with_capacity(window),
            },
        };
        Ok(Filter {
            spec,
            memory,
            warmup_count: 0,
        })
    }

    pub fn spec(&self) -> FilterSpec {
        self.spec
    }

    /// Number of inputs consumed so far.
    pub fn warmup_count(&self) -> usize {
        self.warmup_count
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        self.warmup_count += 1;
        let y = match (&mut self.memory, self.spec) {
            (Memory::None, _) => x,
            (Memory::FirstOrder { prev }, FilterSpec::FirstOrder { alpha, .. }) => {
                let y = match *prev {
                    None => x,
                    Some(p) => (1.0 - alpha) * p + alpha * x,
                };
                *prev = Some(y);
                y
            }
            (Memory::MovingAverage { buf }, FilterSpec::MovingAverage { window }) => {
                if buf.len() == window {
                    buf.pop_front();
                }
                buf.push_back(x);
                buf.iter().sum::<f64>() / buf.len() as f64
            }
            _ => unreachable!("memory always matches spec"),
        };
        Ok(y)
    }
}

/// Runs the filter over a raw trace; the output keeps the time grid.
pub fn filter_trace(raw: &SnrTrace, spec: FilterSpec) -> Result<SnrTrace> {
    if raw.kind() != SnrKind::Raw {
        return Err(Error::invalid(
            "raw",
            format!("expected a raw trace, got {}", raw.kind()),
        ));
    }
    let mut filter = Filter::new(spec)?;
    let values = raw
        .values()
        .iter()
        .map(|&x| filter.step(x))
        .collect::<Result<Vec<_>>>()?;
    raw.with_values(values, SnrKind::Filtered)
}
