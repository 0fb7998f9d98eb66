//! Parameterized building blocks. Each block registers its parameters once
//! under a name prefix and can then be applied to any number of graphs.

use crate::config::HeadPrior;
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{Init, ParamId, ParamStore};
use crate::scalar::Scalar;

/// Groups used to normalize `channels` features: the largest divisor of
/// `channels` not above `min(32, channels / 2)`.
pub fn norm_groups(channels: usize) -> usize {
    let cap = (channels / 2).clamp(1, 32);
    (1..=cap).rev().find(|g| channels % g == 0).unwrap_or(1)
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        gain: f64,
    ) -> Result<Self> {
        let fan_in = c_in * k * k;
        let weight = store.add(format!("{name}/weight"), &[c_out, c_in, k, k], Init::FanInUniform { fan_in, gain })?;
        let bias = store.add(format!("{name}/bias"), &[c_out], Init::Zeros)?;
        Ok(Self { weight, bias, stride, pad })
    }

    /// `1 × 1` convolution with unit gain.
    pub fn pointwise<S: Scalar>(store: &mut ParamStore<S>, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(store, name, c_in, c_out, 1, 1, 0, 1.0)
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        g.conv2d(x, self.weight, Some(self.bias), self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
}

impl Norm {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, channels: usize) -> Result<Self> {
        let gamma = store.add(format!("{name}/gamma"), &[channels], Init::Ones)?;
        let beta = store.add(format!("{name}/beta"), &[channels], Init::Zeros)?;
        Ok(Self { gamma, beta, groups: norm_groups(channels) })
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        g.group_norm(x, self.gamma, self.beta, self.groups)
    }

    /// Normalization followed by ReLU.
    pub fn apply_relu<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        let y = self.apply(g, x)?;
        Ok(g.relu(y))
    }
}

/// Pre-activation bottleneck residual module, `c_in → c_out` with a
/// `c_out / 2` bottleneck and a `1 × 1` projection skip when widths differ.
#[derive(Debug, Clone)]
pub struct Residual {
    norm1: Norm,
    conv1: Conv,
    norm2: Norm,
    conv2: Conv,
    norm3: Norm,
    conv3: Conv,
    skip: Option<Conv>,
}

impl Residual {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        let mid = (c_out / 2).max(1);
        Ok(Self {
            norm1: Norm::new(store, &format!("{name}/norm1"), c_in)?,
            conv1: Conv::pointwise(store, &format!("{name}/conv1"), c_in, mid)?,
            norm2: Norm::new(store, &format!("{name}/norm2"), mid)?,
            conv2: Conv::new(store, &format!("{name}/conv2"), mid, mid, 3, 1, 1, 1.0)?,
            norm3: Norm::new(store, &format!("{name}/norm3"), mid)?,
            conv3: Conv::pointwise(store, &format!("{name}/conv3"), mid, c_out)?,
            skip: (c_in != c_out).then(|| Conv::pointwise(store, &format!("{name}/skip"), c_in, c_out)).transpose()?,
        })
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        let h = self.norm1.apply_relu(g, x)?;
        let h = self.conv1.apply(g, h)?;
        let h = self.norm2.apply_relu(g, h)?;
        let h = self.conv2.apply(g, h)?;
        let h = self.norm3.apply_relu(g, h)?;
        let h = self.conv3.apply(g, h)?;
        let skip = match &self.skip {
            Some(conv) => conv.apply(g, x)?,
            None => x,
        };
        g.add(h, skip)
    }
}

#[derive(Debug, Clone)]
struct Level {
    up1: Residual,
    low1: Residual,
    low3: Residual,
}

/// Recursive encoder/decoder over `depth` halvings with skip branches at
/// every resolution.
#[derive(Debug, Clone)]
pub struct Hourglass {
    /// Outermost level first.
    levels: Vec<Level>,
    bottom: Residual,
}

impl Hourglass {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, depth: usize, features: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(depth);
        for level in (1..=depth).rev() {
            levels.push(Level {
                up1: Residual::new(store, &format!("{name}/l{level}/up1"), features, features)?,
                low1: Residual::new(store, &format!("{name}/l{level}/low1"), features, features)?,
                low3: Residual::new(store, &format!("{name}/l{level}/low3"), features, features)?,
            });
        }
        let bottom = Residual::new(store, &format!("{name}/bottom"), features, features)?;
        Ok(Self { levels, bottom })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        self.apply_level(g, x, 0)
    }

    fn apply_level<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId, i: usize) -> Result<NodeId> {
        let Some(level) = self.levels.get(i) else {
            return self.bottom.apply(g, x);
        };
        let up1 = level.up1.apply(g, x)?;
        let pooled = g.max_pool2(x)?;
        let low1 = level.low1.apply(g, pooled)?;
        let low2 = self.apply_level(g, low1, i + 1)?;
        let low3 = level.low3.apply(g, low2)?;
        let up2 = g.upsample2(low3);
        g.add(up1, up2)
    }
}

/// Shared input stage: `7 × 7` stride-2 convolution, a residual module,
/// 2× max pooling and two residual modules, mapping `4R × 4R × 3` images
/// to `R × R × F` features.
#[derive(Debug, Clone)]
pub struct Stem {
    conv: Conv,
    norm: Norm,
    res1: Residual,
    res2: Residual,
    res3: Residual,
}

impl Stem {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, features: usize) -> Result<Self> {
        let (quarter, half) = ((features / 4).max(1), (features / 2).max(1));
        Ok(Self {
            conv: Conv::new(store, &format!("{name}/conv"), 3, quarter, 7, 2, 3, 1.0)?,
            norm: Norm::new(store, &format!("{name}/norm"), quarter)?,
            res1: Residual::new(store, &format!("{name}/res1"), quarter, half)?,
            res2: Residual::new(store, &format!("{name}/res2"), half, half)?,
            res3: Residual::new(store, &format!("{name}/res3"), half, features)?,
        })
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId) -> Result<NodeId> {
        let h = self.conv.apply(g, x)?;
        let h = self.norm.apply_relu(g, h)?;
        let h = self.res1.apply(g, h)?;
        let h = g.max_pool2(h)?;
        let h = self.res2.apply(g, h)?;
        self.res3.apply(g, h)
    }
}

/// Gain of the prediction heads relative to the default initialization.
pub const HEAD_GAIN: f64 = 0.01;

/// Per-stack tail of one stream: residual, `1 × 1` feature layer, head and
/// (except after the last stack) the remaps feeding the next stack.
#[derive(Debug, Clone)]
pub struct StackTail {
    post: Residual,
    lin: Conv,
    lin_norm: Norm,
    pub head: Conv,
    remap_feat: Option<Conv>,
    remap_pred: Option<Conv>,
}

impl StackTail {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        features: usize,
        out_channels: usize,
        last: bool,
        prior: Option<HeadPrior>,
    ) -> Result<Self> {
        let head = Conv::new(store, &format!("{name}/head"), features, out_channels, 1, 1, 0, HEAD_GAIN)?;
        if let Some(p) = prior {
            store.get_mut(head.bias)[[p.channel]] = S::from_f64_lossy(p.logit);
        }
        Ok(Self {
            post: Residual::new(store, &format!("{name}/post"), features, features)?,
            lin: Conv::pointwise(store, &format!("{name}/lin"), features, features)?,
            lin_norm: Norm::new(store, &format!("{name}/lin_norm"), features)?,
            head,
            remap_feat: (!last).then(|| Conv::pointwise(store, &format!("{name}/remap_feat"), features, features)).transpose()?,
            remap_pred: (!last)
                .then(|| Conv::pointwise(store, &format!("{name}/remap_pred"), out_channels, features))
                .transpose()?,
        })
    }

    /// Returns `(features, prediction)`.
    pub fn features_and_prediction<S: Scalar>(&self, g: &mut Graph<'_, S>, hg_out: NodeId) -> Result<(NodeId, NodeId)> {
        let h = self.post.apply(g, hg_out)?;
        let h = self.lin.apply(g, h)?;
        let feat = self.lin_norm.apply_relu(g, h)?;
        let pred = self.head.apply(g, feat)?;
        Ok((feat, pred))
    }

    /// Next-stack input `x + remap(features) + remap(prediction)`.
    pub fn next_input<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId, feat: NodeId, pred: NodeId) -> Result<NodeId> {
        let (Some(rf), Some(rp)) = (&self.remap_feat, &self.remap_pred) else {
            return Err(crate::error::Error::Config("last stack has no remaps".into()));
        };
        let a = rf.apply(g, feat)?;
        let b = rp.apply(g, pred)?;
        let s = g.add(x, a)?;
        g.add(s, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_counts() {
        assert_eq!(norm_groups(256), 32);
        assert_eq!(norm_groups(64), 32);
        assert_eq!(norm_groups(8), 4);
        assert_eq!(norm_groups(6), 3);
        assert_eq!(norm_groups(2), 1);
        assert_eq!(norm_groups(1), 1);
        assert_eq!(norm_groups(48), 24);
    }
}
