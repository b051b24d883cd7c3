"""Discrete graph diffusion backbone.

Every categorical channel (edge indicators, feature codes, group labels) is
corrupted toward a fixed channel marginal: at cumulative retention r the
state survives with probability r and is otherwise resampled from the
marginal.  The reverse sampler predicts the clean state from the current
noisy state and the conditioning group labels, then re-noises the prediction
to the next retention level; at the terminal step the prediction is emitted
as-is.

Two denoisers back the reverse process: an oracle that carries the exact
between-group edge densities (edges depend only on the conditioning labels),
and a learned single-layer logistic/softmax model trained by full-batch
gradient descent with hand-derived gradients.
"""

from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, edge_density_matrix
from .seeds import spawn_seeds


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _sample_rows(rng, prob_rows):
    """One categorical draw per row of a probability matrix (inverse CDF)."""
    cum = np.cumsum(prob_rows, axis=1)
    u = rng.random(prob_rows.shape[0])
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, prob_rows.shape[1] - 1)


@dataclass(frozen=True)
class ChannelMarginals:
    """Target marginal of every channel: edge rate, one categorical
    distribution per feature column, and the group-label distribution."""

    edge: float
    features: tuple
    sensitive: np.ndarray


def channel_marginals(g):
    """Empirical channel marginals of a graph."""
    n = g.n_nodes
    possible = n * (n - 1) / 2.0
    edge = g.n_edges / possible if possible > 0 else 0.0
    feats = []
    for f, arity in enumerate(g.feature_arity()):
        feats.append(np.bincount(g.features[:, f], minlength=int(arity)) / n)
    sens = np.bincount(g.sensitive, minlength=g.n_classes) / n
    return ChannelMarginals(float(edge), tuple(feats), sens)


@dataclass
class NoiseSchedule:
    """Per-step retention coefficients plus the channel marginals.

    retain[t-1] is the survival probability of step t; the cumulative
    products give the total retention after t steps, which must decay below
    0.05 by the final step so the fully noised graph is close to the prior.
    """

    retain: np.ndarray
    marginals: ChannelMarginals

    def __post_init__(self):
        self.retain = np.asarray(self.retain, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.retain.ndim != 1 or len(self.retain) < 1:
            raise ValueError("retain must be a nonempty 1-D sequence")
        if np.any(self.retain <= 0) or np.any(self.retain > 1):
            raise ValueError("retention coefficients must lie in (0, 1]")
        ab = self.alpha_bar
        if np.any(np.diff(ab) > 0):
            raise ValueError("cumulative retention must be nonincreasing")
        if ab[-1] >= 0.05:
            raise ValueError("terminal cumulative retention must be < 0.05")

    @property
    def steps(self):
        return len(self.retain)

    @property
    def alpha_bar(self):
        """Cumulative retention, indexed by step (entry 0 is 1)."""
        return np.concatenate([[1.0], np.cumprod(self.retain)])

    @classmethod
    def from_graph(cls, g, steps=3, terminal_retention=0.02, decay_power=3.5):
        """Power-law cumulative retention 1 - (1 - terminal) * (t/T)^p with
        marginals estimated from the graph.

        Corruption concentrates in the final steps (p > 1), so mid-chain
        states keep enough of the clean signal for mid-chain interventions
        to trade structure against decorrelation; with fast early decay every
        admissible intervention step degenerates to a fully decorrelated
        output.
        """
        t_axis = np.arange(steps + 1) / steps
        ab = 1.0 - (1.0 - terminal_retention) * t_axis**decay_power
        return cls(ab[1:] / ab[:-1], channel_marginals(g))


def _pair_slot(n_classes):
    """Index of each unordered class pair into K*(K+1)/2 slots."""
    k = n_classes
    slot = np.zeros((k, k), dtype=np.int64)
    idx = 0
    for a in range(k):
        for b in range(a, k):
            slot[a, b] = slot[b, a] = idx
            idx += 1
    return slot, idx


@dataclass
class OracleDenoiser:
    """Clean-state predictor that carries the exact group-pair edge densities
    and group marginals; edges depend only on the conditioning labels."""

    density: np.ndarray
    class_marginals: np.ndarray
    kind: str = field(default="oracle", init=False)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=np.float64)
        self.class_marginals = np.asarray(self.class_marginals, dtype=np.float64)
        if np.any(self.density < 0) or np.any(self.density > 1):
            raise ValueError("oracle densities must lie in [0, 1]")

    @property
    def n_classes(self):
        return len(self.class_marginals)

    @classmethod
    def from_graph(cls, g):
        dm = edge_density_matrix(g)
        return cls(dm.density, np.bincount(g.sensitive, minlength=g.n_classes) / g.n_nodes)

    def edge_clean_prob(self, ci, cj, noisy_bits, t):
        return self.density[ci, cj]

    def feature_clean_probs(self, column, cond, noisy_codes, t):
        return None  # no feature model: fall back to the channel marginal


@dataclass
class LearnedDenoiser:
    """Single-layer logistic edge model plus per-column softmax feature heads.

    The edge logit is linear in: the one-hot of the unordered conditioning
    class pair, the current noisy bit, the step one-hot, and a bit-by-step
    interaction (the interaction makes the exact noising posterior
    representable).  Feature heads are linear in the conditioning class, the
    noisy code, and the step.  The group head is a plain softmax over logits,
    i.e. a learned estimate of the group marginals.
    """

    n_classes: int
    steps: int
    feature_arity: tuple
    w_pair: np.ndarray
    w_bit: float
    w_step: np.ndarray
    w_bitstep: np.ndarray
    w_bias: float
    feature_heads: list
    sens_logits: np.ndarray
    kind: str = field(default="learned", init=False)

    def __post_init__(self):
        self._slot, _ = _pair_slot(self.n_classes)

    @property
    def class_marginals(self):
        return _softmax(self.sens_logits)

    def edge_logits(self, ci, cj, noisy_bits, t):
        slot = self._slot[ci, cj]
        b = np.asarray(noisy_bits, dtype=np.float64)
        return (
            self.w_pair[slot]
            + self.w_bit * b
            + self.w_step[t - 1]
            + self.w_bitstep[t - 1] * b
            + self.w_bias
        )

    def edge_clean_prob(self, ci, cj, noisy_bits, t):
        return _sigmoid(self.edge_logits(ci, cj, noisy_bits, t))

    def feature_clean_probs(self, column, cond, noisy_codes, t):
        head = self.feature_heads[column]
        logits = head["by_class"][cond] + head["by_noisy"][noisy_codes] + head["by_step"][t - 1] + head["bias"]
        return _softmax(logits)


def forward_noise(g, t, sched, seed):
    """Noise a graph to step t: every categorical state is kept with the
    cumulative retention and otherwise resampled from its channel marginal
    (one draw per unordered node pair for edges)."""
    if not 0 <= t <= sched.steps:
        raise ValueError(f"step {t} outside [0, {sched.steps}]")
    ab = sched.alpha_bar[t]
    m = sched.marginals
    rng = np.random.default_rng(seed)
    n = g.n_nodes

    iu, ju = np.triu_indices(n, k=1)
    old_bits = g.adjacency[iu, ju]
    keep = rng.random(len(iu)) < ab
    resampled = (rng.random(len(iu)) < m.edge).astype(np.uint8)
    bits = np.where(keep, old_bits, resampled)
    adjacency = np.zeros((n, n), dtype=np.uint8)
    adjacency[iu, ju] = bits
    adjacency |= adjacency.T

    features = np.empty_like(g.features)
    for f in range(g.n_features):
        keep = rng.random(n) < ab
        resampled = _sample_rows(rng, np.tile(m.features[f], (n, 1)))
        features[:, f] = np.where(keep, g.features[:, f], resampled)

    keep = rng.random(n) < ab
    resampled = _sample_rows(rng, np.tile(m.sensitive, (n, 1)))
    sensitive = np.where(keep, g.sensitive, resampled)

    return Graph(adjacency, features, sensitive, n_classes=g.n_classes)


@dataclass
class GenerationState:
    """Reverse-process snapshot: current step, noisy graph, and the group
    labels conditioning the denoiser (switching replaces these labels, never
    the noisy state).

    Feature channels may condition on a separate label sequence: a switch
    redirects the edge channel while features keep denoising toward the
    original groups, mirroring backbones that alternate feature and edge
    steps and apply the switch only to the edge steps.
    """

    step: int
    graph: Graph
    conditioning: np.ndarray
    feature_conditioning: np.ndarray = None

    def __post_init__(self):
        self.conditioning = np.asarray(self.conditioning, dtype=np.int64)
        if self.feature_conditioning is None:
            self.feature_conditioning = self.conditioning
        self.feature_conditioning = np.asarray(self.feature_conditioning, dtype=np.int64)
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        if len(self.conditioning) != self.graph.n_nodes:
            raise ValueError("conditioning length must match the graph")
        if len(self.feature_conditioning) != self.graph.n_nodes:
            raise ValueError("feature conditioning length must match the graph")


def reverse_step(d, state, sched, seed):
    """One reverse transition: sample the clean-state posterior of every
    channel, re-noised to the next retention level.

    The group channel's posterior is degenerate at the conditioning labels,
    so by step 0 the graph carries exactly the conditioning."""
    t = state.step
    if t < 1:
        raise ValueError("reverse step requires step >= 1")
    ab_prev = sched.alpha_bar[t - 1]
    m = sched.marginals
    cond = state.conditioning
    g = state.graph
    n = g.n_nodes
    rng = np.random.default_rng(seed)

    iu, ju = np.triu_indices(n, k=1)
    bits = g.adjacency[iu, ju]
    phat = np.broadcast_to(d.edge_clean_prob(cond[iu], cond[ju], bits, t), len(iu))
    p_edge = ab_prev * phat + (1.0 - ab_prev) * m.edge
    new_bits = (rng.random(len(iu)) < p_edge).astype(np.uint8)
    adjacency = np.zeros((n, n), dtype=np.uint8)
    adjacency[iu, ju] = new_bits
    adjacency |= adjacency.T

    features = np.empty_like(g.features)
    for f in range(g.n_features):
        phat_f = d.feature_clean_probs(f, state.feature_conditioning, g.features[:, f], t)
        if phat_f is None:
            phat_f = np.tile(m.features[f], (n, 1))
        p_next = ab_prev * phat_f + (1.0 - ab_prev) * m.features[f][None, :]
        features[:, f] = _sample_rows(rng, p_next)

    k = len(m.sensitive)
    cond_onehot = np.zeros((n, k))
    cond_onehot[np.arange(n), cond] = 1.0
    p_sens = ab_prev * cond_onehot + (1.0 - ab_prev) * m.sensitive[None, :]
    sensitive = _sample_rows(rng, p_sens)

    graph = Graph(adjacency, features, sensitive, n_classes=g.n_classes)
    return GenerationState(t - 1, graph, cond, state.feature_conditioning)


def _prior_state(sched, n_nodes, rng, attrs, n_classes):
    """Fully noised starting state: every channel drawn from its marginal."""
    m = sched.marginals
    n = n_nodes
    if attrs is None:
        cond = _sample_rows(rng, np.tile(m.sensitive, (n, 1)))
    else:
        cond = np.asarray(attrs, dtype=np.int64)
        if len(cond) != n:
            raise ValueError("conditioning attribute length must equal n_nodes")
        if len(cond) and (cond.min() < 0 or cond.max() >= n_classes):
            raise ValueError("conditioning attributes out of range")

    adjacency = np.zeros((n, n), dtype=np.uint8)
    iu, ju = np.triu_indices(n, k=1)
    bits = (rng.random(len(iu)) < m.edge).astype(np.uint8)
    adjacency[iu, ju] = bits
    adjacency |= adjacency.T

    features = np.empty((n, len(m.features)), dtype=np.int64)
    for f, marg in enumerate(m.features):
        features[:, f] = _sample_rows(rng, np.tile(marg, (n, 1)))
    sensitive = _sample_rows(rng, np.tile(m.sensitive, (n, 1)))

    graph = Graph(adjacency, features, sensitive, n_classes=n_classes)
    return GenerationState(sched.steps, graph, cond)


def generate(d, sched, n_nodes, seed, attrs=None):
    """Sample a graph: draw the fully noised state from the channel
    marginals, then run every reverse step with the conditioning fixed to the
    sampled (or supplied) group labels."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    t_total = sched.steps
    step_seeds = spawn_seeds(seed, t_total + 1)
    rng = np.random.default_rng(step_seeds[0])
    k = len(sched.marginals.sensitive)
    state = _prior_state(sched, n_nodes, rng, attrs, k)
    for t in range(t_total, 0, -1):
        state = reverse_step(d, state, sched, step_seeds[t])
    out = state.graph
    out.sensitive = state.conditioning.copy()
    return out


@dataclass
class TrainConfig:
    epochs: int = 400
    learning_rate: float = 1.0

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def train_denoiser(g, sched, hyper=None, seed=0):
    """Fit the learned denoiser by full-batch gradient descent on the
    per-channel cross-entropy between predicted clean states and the true
    graph, under uniformly sampled noising steps."""
    hyper = hyper or TrainConfig()
    hyper.validate()
    k = g.n_classes
    t_total = sched.steps
    arity = tuple(int(a) for a in g.feature_arity())
    slot, n_slots = _pair_slot(k)
    rng = np.random.default_rng(seed)

    d = LearnedDenoiser(
        n_classes=k,
        steps=t_total,
        feature_arity=arity,
        w_pair=np.zeros(n_slots),
        w_bit=0.0,
        w_step=np.zeros(t_total),
        w_bitstep=np.zeros(t_total),
        w_bias=0.0,
        feature_heads=[
            {
                "by_class": np.zeros((k, c)),
                "by_noisy": np.zeros((c, c)),
                "by_step": np.zeros((t_total, c)),
                "bias": np.zeros(c),
            }
            for c in arity
        ],
        sens_logits=np.zeros(k),
    )

    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    s = g.sensitive
    pidx = slot[s[iu], s[ju]]
    y_edge = g.adjacency[iu, ju].astype(np.float64)
    n_pairs = len(iu)
    sens_freq = np.bincount(s, minlength=k) / n
    lr = hyper.learning_rate

    for _ in range(hyper.epochs):
        t = int(rng.integers(1, t_total + 1))
        noisy = forward_noise(g, t, sched, int(rng.integers(np.iinfo(np.int64).max)))

        b = noisy.adjacency[iu, ju].astype(np.float64)
        logits = d.w_pair[pidx] + d.w_bit * b + d.w_step[t - 1] + d.w_bitstep[t - 1] * b + d.w_bias
        p = _sigmoid(logits)
        loss = -np.mean(y_edge * np.log(p + 1e-12) + (1 - y_edge) * np.log(1 - p + 1e-12))
        if not np.isfinite(loss):
            raise RuntimeError("non-finite edge loss: lower the learning rate")
        err = (p - y_edge) / n_pairs
        d.w_pair -= lr * np.bincount(pidx, weights=err, minlength=n_slots)
        d.w_bit -= lr * float(err @ b)
        d.w_step[t - 1] -= lr * float(err.sum())
        d.w_bitstep[t - 1] -= lr * float(err @ b)
        d.w_bias -= lr * float(err.sum())

        for f, c in enumerate(arity):
            head = d.feature_heads[f]
            codes = noisy.features[:, f]
            logits = head["by_class"][s] + head["by_noisy"][codes] + head["by_step"][t - 1] + head["bias"]
            probs = _softmax(logits)
            clean = g.features[:, f]
            err_f = probs.copy()
            err_f[np.arange(n), clean] -= 1.0
            err_f /= n
            if not np.all(np.isfinite(err_f)):
                raise RuntimeError("non-finite feature loss: lower the learning rate")
            gc = np.zeros((k, c))
            np.add.at(gc, s, err_f)
            gn = np.zeros((c, c))
            np.add.at(gn, codes, err_f)
            head["by_class"] -= lr * gc
            head["by_noisy"] -= lr * gn
            head["by_step"][t - 1] -= lr * err_f.sum(axis=0)
            head["bias"] -= lr * err_f.sum(axis=0)

        d.sens_logits -= lr * (_softmax(d.sens_logits) - sens_freq)

    return d


def denoiser_to_json(d):
    if d.kind == "oracle":
        return {
            "kind": "oracle",
            "density": d.density.tolist(),
            "marginals": d.class_marginals.tolist(),
        }
    return {
        "kind": "learned",
        "n_classes": d.n_classes,
        "steps": d.steps,
        "feature_arity": list(d.feature_arity),
        "weights": {
            "pair": d.w_pair.tolist(),
            "bit": d.w_bit,
            "step": d.w_step.tolist(),
            "bitstep": d.w_bitstep.tolist(),
            "bias": d.w_bias,
            "features": [
                {
                    "by_class": h["by_class"].tolist(),
                    "by_noisy": h["by_noisy"].tolist(),
                    "by_step": h["by_step"].tolist(),
                    "bias": h["bias"].tolist(),
                }
                for h in d.feature_heads
            ],
            "sens_logits": d.sens_logits.tolist(),
        },
    }


def denoiser_from_json(doc):
    if doc["kind"] == "oracle":
        return OracleDenoiser(np.asarray(doc["density"]), np.asarray(doc["marginals"]))
    w = doc["weights"]
    return LearnedDenoiser(
        n_classes=int(doc["n_classes"]),
        steps=int(doc["steps"]),
        feature_arity=tuple(doc["feature_arity"]),
        w_pair=np.asarray(w["pair"]),
        w_bit=float(w["bit"]),
        w_step=np.asarray(w["step"]),
        w_bitstep=np.asarray(w["bitstep"]),
        w_bias=float(w["bias"]),
        feature_heads=[
            {
                "by_class": np.asarray(h["by_class"]),
                "by_noisy": np.asarray(h["by_noisy"]),
                "by_step": np.asarray(h["by_step"]),
                "bias": np.asarray(h["bias"]),
            }
            for h in w["features"]
        ],
        sens_logits=np.asarray(w["sens_logits"]),
    )


def schedule_to_json(sched):
    m = sched.marginals
    return {
        "retain": sched.retain.tolist(),
        "marginals": {
            "edge": m.edge,
            "features": [f.tolist() for f in m.features],
            "sensitive": m.sensitive.tolist(),
        },
    }


def schedule_from_json(doc):
    m = doc["marginals"]
    marg = ChannelMarginals(
        float(m["edge"]),
        tuple(np.asarray(f) for f in m["features"]),
        np.asarray(m["sensitive"]),
    )
    return NoiseSchedule(np.asarray(doc["retain"]), marg)
