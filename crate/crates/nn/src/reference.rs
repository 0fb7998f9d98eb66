//! A plain single-task stacked hourglass, wired independently of
//! [`MultiTaskModel`](crate::MultiTaskModel) so the two can be compared.

use ndarray::{Array4, ArrayView4};

use crate::config::{HeadPrior, HourglassConfig};
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::layers::{Hourglass, StackTail, Stem};
use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct PlainStackedHourglass<S> {
    config: HourglassConfig,
    params: ParamStore<S>,
    stem: Stem,
    stacks: Vec<(Hourglass, StackTail)>,
}

impl<S: Scalar> PlainStackedHourglass<S> {
    /// Stack `k` parameters are named `<scope>/stack<k>/...`.
    pub fn new(config: HourglassConfig, out_channels: usize, prior: Option<HeadPrior>, seed: u64, scope: &str) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new(seed);
        let stem = Stem::new(&mut params, "stem", config.features)?;
        let stacks = (1..=config.num_stacks)
            .map(|k| {
                let prefix = format!("{scope}/stack{k}");
                Ok((
                    Hourglass::new(&mut params, &format!("{prefix}/hg"), config.depth, config.features)?,
                    StackTail::new(&mut params, &prefix, config.features, out_channels, k == config.num_stacks, prior)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, params, stem, stacks })
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn config(&self) -> &HourglassConfig {
        &self.config
    }

    /// Returns the graph and the prediction node of every stack.
    pub fn forward(&self, images: ArrayView4<S>) -> Result<(Graph<'_, S>, Vec<NodeId>)> {
        let mut g = Graph::new(&self.params);
        let input = g.input(images.to_owned());
        let mut x = self.stem.apply(&mut g, input)?;
        let mut preds = Vec::new();
        for (i, (hg, tail)) in self.stacks.iter().enumerate() {
            let h = hg.apply(&mut g, x)?;
            let (feat, pred) = tail.features_and_prediction(&mut g, h)?;
            preds.push(pred);
            if i + 1 < self.stacks.len() {
                x = tail.next_input(&mut g, x, feat, pred)?;
            }
        }
        Ok((g, preds))
    }

    pub fn predict(&self, images: ArrayView4<S>) -> Result<Vec<Array4<S>>> {
        let (g, preds) = self.forward(images)?;
        Ok(preds.into_iter().map(|p| g.value(p).clone()).collect())
    }
}
