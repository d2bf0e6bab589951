use crate::error::Result;

/// Scores how strongly `premise` entails `hypothesis`, in [0, 1].
pub trait EntailmentProvider {
    fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64>;
}

impl<F> EntailmentProvider for F
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64> {
        self(premise, hypothesis)
    }
}

/// 1 when the two sentences are identical, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchEntailment;

impl EntailmentProvider for ExactMatchEntailment {
    fn entail(&mut self, premise: &str, hypothesis: &str) -> Result<f64> {
        Ok(if premise == hypothesis { 1.0 } else { 0.0 })
    }
}
