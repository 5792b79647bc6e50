//! Parsers for the textual architecture and dropout descriptions used by
//! configuration files and the command line.

use crate::NnError;

/// Parses an architecture string such as `mlp:784,256,128,10` into layer
/// widths (input layer first, output layer last).
pub fn parse_architecture(s: &str) -> Result<Vec<usize>, NnError> {
    let body = s.strip_prefix("mlp:").ok_or_else(|| NnError::Parse {
        what: "architecture",
        detail: format!("expected string starting with 'mlp:', got '{s}'"),
    })?;
    let mut sizes = Vec::new();
    for part in body.split(',') {
        let width: usize = part.trim().parse().map_err(|_| NnError::Parse {
            what: "architecture",
            detail: format!("invalid layer width '{part}'"),
        })?;
        if width == 0 {
            return Err(NnError::Parse {
                what: "architecture",
                detail: "layer width must be positive".to_string(),
            });
        }
        sizes.push(width);
    }
    if sizes.len() < 2 {
        return Err(NnError::TooFewLayers(sizes.len()));
    }
    Ok(sizes)
}

/// Parses a dropout string such as `drop:0.2,0.1` into per-hidden-layer
/// rates. `hidden_layers` is the number of hidden layers in the target
/// architecture; an empty body (`drop:`) means no dropout anywhere.
pub fn parse_dropout(s: &str, hidden_layers: usize) -> Result<Vec<f64>, NnError> {
    let body = s.strip_prefix("drop:").ok_or_else(|| NnError::Parse {
        what: "dropout",
        detail: format!("expected string starting with 'drop:', got '{s}'"),
    })?;
    let rates: Vec<f64> = if body.trim().is_empty() {
        vec![0.0; hidden_layers]
    } else {
        body.split(',')
            .map(|part| {
                part.trim().parse::<f64>().map_err(|_| NnError::Parse {
                    what: "dropout",
                    detail: format!("invalid dropout rate '{part}'"),
                })
            })
            .collect::<Result<_, _>>()?
    };
    if rates.len() != hidden_layers {
        return Err(NnError::DropoutArity {
            expected: hidden_layers,
            got: rates.len(),
        });
    }
    for &r in &rates {
        if !(0.0..1.0).contains(&r) {
            return Err(NnError::Parse {
                what: "dropout",
                detail: format!("dropout rate {r} is outside [0, 1)"),
            });
        }
    }
    Ok(rates)
}
