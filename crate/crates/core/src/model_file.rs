//! Plain-text model format:
//!
//! ```text
//! RLOC-MLP v1
//! 4 16 1
//! #norm <min max pairs for the four features and the target>
//! <one weight per line>
//! ```

use crate::dataset::NormParams;
use crate::nn::{n_params, MlpModel};
use crate::{format_f64, Error, Result};

pub const MAGIC: &str = "RLOC-MLP v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: MlpModel,
    pub norm: NormParams,
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let sizes: Vec<String> = self.model.layer_sizes().iter().map(usize::to_string).collect();
        out.push_str(&sizes.join(" "));
        out.push('\n');
        out.push_str(&self.norm.to_line());
        out.push('\n');
        for w in self.model.weights() {
            out.push_str(&format_f64(*w));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of file, missing {what}") })
        };

        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::Parse { line: n, msg: format!("expected '{MAGIC}'") });
        }
        let (n, sizes_line) = next("layer sizes")?;
        let sizes = sizes_line
            .split(' ')
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse { line: n, msg: format!("bad layer size '{t}': {e}") }))
            .collect::<Result<Vec<_>>>()?;
        // reject layouts MlpModel would refuse before reading weights
        MlpModel::zeros(&sizes).map_err(|e| Error::Parse { line: n, msg: e.to_string() })?;
        let (n, norm_line) = next("normalization line")?;
        let norm = NormParams::parse_line(norm_line, n)?;

        let expected = n_params(&sizes);
        let mut weights = Vec::with_capacity(expected);
        let mut last_line = n;
        for (n, line) in lines {
            last_line = n;
            if weights.len() == expected {
                return Err(Error::Parse { line: n, msg: format!("more than {expected} weights") });
            }
            let w = line
                .parse::<f64>()
                .map_err(|e| Error::Parse { line: n, msg: format!("bad weight '{line}': {e}") })?;
            if !w.is_finite() {
                return Err(Error::Parse { line: n, msg: "non-finite weight".into() });
            }
            weights.push(w);
        }
        if weights.len() != expected {
            return Err(Error::Parse {
                line: last_line,
                msg: format!("found {} weights, layer sizes need {expected}", weights.len()),
            });
        }
        let model = MlpModel::from_weights(&sizes, weights).map_err(|e| Error::Parse { line: 2, msg: e.to_string() })?;
        Ok(Self { model, norm })
    }
}
