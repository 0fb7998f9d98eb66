use ndarray::{Array4, ArrayView4};

use hgmt_core::{TaskKind, TaskSet};

use crate::config::HourglassConfig;
use crate::error::{Error, Result};
use crate::graph::{Gradients, Graph, NodeId};
use crate::layers::{Hourglass, Residual, StackTail, Stem};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct StackModule {
    hourglass: Hourglass,
    tail: StackTail,
}

#[derive(Debug, Clone)]
struct Stream {
    task: TaskKind,
    stacks: Vec<StackModule>,
}

/// Per-stream fusion: `|T|·F → |T|·F` then `|T|·F → F`.
#[derive(Debug, Clone)]
struct FusionBranch {
    expand: Residual,
    compress: Residual,
}

/// One hourglass stream per task on a shared stem, with cross-stream
/// feature fusion between consecutive stacks.
///
/// Parameters are named `stem/...`, `stream/<task>/stack<k>/...` and
/// `fusion<k>/<task>/...` (`k` is 1-based), so checkpoints of different
/// task sets share names for shared components.
#[derive(Debug, Clone)]
pub struct MultiTaskModel<S> {
    config: HourglassConfig,
    tasks: TaskSet,
    params: ParamStore<S>,
    stem: Stem,
    streams: Vec<Stream>,
    /// `fusion[k][i]`: block after stack `k + 1` for the `i`-th stream.
    fusion: Vec<Vec<FusionBranch>>,
}

/// Name prefix of stack `stack` (1-based) of the `task` stream.
pub fn stack_prefix(task: TaskKind, stack: usize) -> String {
    format!("stream/{}/stack{stack}", task.token())
}

impl<S: Scalar> MultiTaskModel<S> {
    pub fn new(tasks: TaskSet, config: HourglassConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if tasks.is_empty() {
            return Err(Error::Core(hgmt_core::Error::EmptyTaskSet));
        }
        let mut params = ParamStore::new(seed);
        let f = config.features;
        let stem = Stem::new(&mut params, "stem", f)?;
        let mut streams = Vec::new();
        for task in tasks.tasks() {
            let mut stacks = Vec::new();
            for k in 1..=config.num_stacks {
                let prefix = stack_prefix(task, k);
                stacks.push(StackModule {
                    hourglass: Hourglass::new(&mut params, &format!("{prefix}/hg"), config.depth, f)?,
                    tail: StackTail::new(&mut params, &prefix, f, config.output_channels(task), k == config.num_stacks, config.head_prior(task))?,
                });
            }
            streams.push(Stream { task, stacks });
        }
        let mut fusion = Vec::new();
        if tasks.len() >= 2 {
            let wide = tasks.len() * f;
            for k in 1..config.num_stacks {
                let mut block = Vec::new();
                for task in tasks.tasks() {
                    let prefix = format!("fusion{k}/{}", task.token());
                    block.push(FusionBranch {
                        expand: Residual::new(&mut params, &format!("{prefix}/expand"), wide, wide)?,
                        compress: Residual::new(&mut params, &format!("{prefix}/compress"), wide, f)?,
                    });
                }
                fusion.push(block);
            }
        }
        Ok(Self { config, tasks, params, stem, streams, fusion })
    }

    pub fn config(&self) -> &HourglassConfig {
        &self.config
    }

    pub fn tasks(&self) -> TaskSet {
        self.tasks
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    pub fn num_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn num_fusion_blocks(&self) -> usize {
        self.fusion.len()
    }

    /// Exact number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.num_scalars()
    }

    /// Weight and bias of the prediction head of `task` at `stack` (1-based).
    pub fn head(&self, stack: usize, task: TaskKind) -> Option<(ParamId, ParamId)> {
        let stream = self.streams.iter().find(|s| s.task == task)?;
        let head = &stream.stacks.get(stack.checked_sub(1)?)?.tail.head;
        Some((head.weight, head.bias))
    }

    /// Runs the network on a `[N, 3, 4R, 4R]` batch with values in `[0, 1]`.
    pub fn forward(&self, images: ArrayView4<S>) -> Result<ForwardOutput<'_, S>> {
        let (_, c, h, w) = images.dim();
        let side = self.config.input_size;
        if c != 3 || h != side || w != side {
            return Err(Error::Shape {
                op: "forward",
                expected: format!("[N, 3, {side}, {side}]"),
                actual: format!("{:?}", images.dim()),
            });
        }
        if !images.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("input images".into()));
        }
        let mut g = Graph::new(&self.params);
        let x = g.input(images.to_owned());
        let shared = self.stem.apply(&mut g, x)?;
        let mut inputs = vec![shared; self.streams.len()];
        let mut preds = Vec::with_capacity(self.config.num_stacks);
        for k in 0..self.config.num_stacks {
            let mut feats = Vec::with_capacity(self.streams.len());
            let mut stack_preds = Vec::with_capacity(self.streams.len());
            for (stream, input) in self.streams.iter().zip(&inputs) {
                let module = &stream.stacks[k];
                let hg = module.hourglass.apply(&mut g, *input)?;
                let (feat, pred) = module.tail.features_and_prediction(&mut g, hg)?;
                feats.push(feat);
                stack_preds.push(pred);
            }
            if k + 1 < self.config.num_stacks {
                let fused = match self.fusion.get(k) {
                    Some(block) => {
                        let joint = g.concat(&feats)?;
                        block
                            .iter()
                            .map(|branch| {
                                let h = branch.expand.apply(&mut g, joint)?;
                                branch.compress.apply(&mut g, h)
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                    None => feats.clone(),
                };
                for (i, stream) in self.streams.iter().enumerate() {
                    inputs[i] = stream.stacks[k].tail.next_input(&mut g, inputs[i], fused[i], stack_preds[i])?;
                }
            }
            preds.push(stack_preds);
        }
        Ok(ForwardOutput { graph: g, tasks: self.tasks, preds })
    }
}

/// Predictions of every stack and task, plus the recorded graph for backward.
pub struct ForwardOutput<'p, S> {
    graph: Graph<'p, S>,
    tasks: TaskSet,
    /// `preds[k][i]`: stack `k + 1`, `i`-th task in canonical order.
    preds: Vec<Vec<NodeId>>,
}

impl<'p, S: Scalar> ForwardOutput<'p, S> {
    pub fn tasks(&self) -> TaskSet {
        self.tasks
    }

    pub fn num_stacks(&self) -> usize {
        self.preds.len()
    }

    /// Graph node of the prediction of `task` at `stack` (1-based).
    pub fn node(&self, stack: usize, task: TaskKind) -> Option<NodeId> {
        let pos = self.tasks.position(task)?;
        self.preds.get(stack.checked_sub(1)?).map(|p| p[pos])
    }

    /// `[N, C_t, R, R]` prediction of `task` at `stack` (1-based).
    pub fn prediction(&self, stack: usize, task: TaskKind) -> Option<&Array4<S>> {
        self.node(stack, task).map(|n| self.graph.value(n))
    }

    /// Last-stack prediction of `task`.
    pub fn output(&self, task: TaskKind) -> Option<&Array4<S>> {
        self.prediction(self.num_stacks(), task)
    }

    pub fn graph(&self) -> &Graph<'p, S> {
        &self.graph
    }

    pub fn backward(&self, seeds: Vec<(NodeId, Array4<S>)>) -> Result<Gradients<S>> {
        self.graph.backward(seeds)
    }
}
