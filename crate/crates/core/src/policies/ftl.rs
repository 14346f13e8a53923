use crate::error::Result;
use crate::protocol::{ActionDistribution, CumulativeLoss, Policy};

/// Uniform over the leaders of `cum`; uniform over all experts at `t = 1`.
pub fn ftl_action(cum: &CumulativeLoss) -> ActionDistribution {
    let (leaders, _) = cum.hindsight_optimum();
    ActionDistribution::uniform_over(cum.experts(), &leaders)
}

/// Follow the leader with uniform tie-breaking.
#[derive(Debug, Clone)]
pub struct Ftl {
    cum: CumulativeLoss,
}

impl Ftl {
    pub fn new(experts: usize) -> Self {
        Self {
            cum: CumulativeLoss::new(experts),
        }
    }

    pub fn cumulative(&self) -> &CumulativeLoss {
        &self.cum
    }

    pub fn action(&self) -> ActionDistribution {
        ftl_action(&self.cum)
    }
}

impl Policy for Ftl {
    fn experts(&self) -> usize {
        self.cum.experts()
    }

    fn act(&mut self) -> Result<Vec<f64>> {
        Ok(self.action().into_weights())
    }

    fn observe(&mut self, row: &[f64]) -> Result<()> {
        self.cum.observe(row);
        Ok(())
    }
}
