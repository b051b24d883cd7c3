"""Attribute-switching intervention.

Switching relabels a random fraction of nodes' conditioning groups partway
through the reverse diffusion, pushing generated edges toward independence
from the real group labels.  The switch fraction is chosen analytically:
under a generator whose edge law depends only on the conditioning labels,
the expected interior (same real group) and exterior (different real group)
edge counts after switching a fraction rho of nodes are exact quadratics in
rho, and the optimum drives their signed imbalance against its original
direction.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffusion import GenerationState, _prior_state, reverse_step
from .graphs import DensityMatrix, Graph
from .seeds import spawn_seeds


@dataclass
class SwitchDistribution:
    """Conditional law of the replacement group: row l gives the probability
    of each new group for a node leaving group l (diagonal is zero)."""

    kind: str
    conditional: np.ndarray

    def __post_init__(self):
        self.conditional = np.asarray(self.conditional, dtype=np.float64)
        k = self.conditional.shape[0]
        if self.conditional.shape != (k, k):
            raise ValueError("conditional must be K x K")
        if np.any(np.abs(np.diag(self.conditional)) > 0):
            raise ValueError("diagonal must be zero: a switch must change the group")
        if np.any(self.conditional < 0):
            raise ValueError("probabilities must be nonnegative")
        if np.any(np.abs(self.conditional.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("rows must sum to 1")

    @property
    def n_classes(self):
        return self.conditional.shape[0]

    @classmethod
    def uniform(cls, n_classes):
        """Equal probability over the other K-1 groups."""
        if n_classes < 2:
            raise ValueError("switching needs at least two groups")
        c = np.full((n_classes, n_classes), 1.0 / (n_classes - 1))
        np.fill_diagonal(c, 0.0)
        return cls("uniform", c)

    @classmethod
    def prior(cls, class_marginals):
        """Rows proportional to the group marginals, excluding the origin."""
        m = np.asarray(class_marginals, dtype=np.float64)
        k = len(m)
        if k < 2:
            raise ValueError("switching needs at least two groups")
        c = np.tile(m, (k, 1))
        np.fill_diagonal(c, 0.0)
        sums = c.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValueError("prior rows need positive mass outside the diagonal")
        return cls("prior", c / sums)


@dataclass
class ImbalanceModel:
    """Expected interior/exterior edge counts after switching, as quadratics
    r2 * rho^2 + r1 * rho + r0 in the switch fraction, plus their grouped
    exterior-minus-interior coefficients."""

    r2: float
    r1: float
    r0: float
    r2_int: float
    r1_int: float
    r2_ext: float
    r1_ext: float
    e_int: float
    e_ext: float
    counts_per_class: np.ndarray
    density: np.ndarray

    def expected_interior(self, rho):
        return self.r2_int * rho**2 + self.r1_int * rho + self.e_int

    def expected_exterior(self, rho):
        return self.r2_ext * rho**2 + self.r1_ext * rho + self.e_ext

    def signed_objective(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        return np.sign(self.r0) * (self.r2 * rho**2 + self.r1 * rho + self.r0)


def switch_coefficients(counts_per_class, density, dist):
    """Exact quadratics for the post-switch interior/exterior expectations.

    Each node switches independently with probability rho, drawing its new
    group from `dist`; edges then regenerate with the group-pair densities
    evaluated on the switched labels.  Conditioning a node pair on how many
    endpoints switched gives, per unordered pair, a (1-rho)^2 / rho(1-rho) /
    rho^2 mixture of densities, which sums to the returned quadratics.
    """
    counts = np.asarray(counts_per_class, dtype=np.float64)
    d = density.density if isinstance(density, DensityMatrix) else np.asarray(density, dtype=np.float64)
    k = len(counts)
    if k < 2:
        raise ValueError("switching needs at least two groups")
    if d.shape != (k, k) or dist.n_classes != k:
        raise ValueError("counts, density, and distribution sizes must agree")
    p = dist.conditional

    pairs_same = counts * (counts - 1) / 2.0
    pd = p @ d  # (P D)[l, m] = sum_k p(k|l) d[k, m]
    pdp = pd @ p.T  # (P D P^T)[l1, l2] = sum_{k1,k2} p(k1|l1) d[k1,k2] p(k2|l2)

    # interior: both endpoints share real group l
    c0_int = float(pairs_same @ np.diag(d))
    c1_int = float(pairs_same @ (2.0 * np.diag(pd)))
    c2_int = float(pairs_same @ np.diag(pdp))

    # exterior: endpoints in distinct real groups l1 != l2 (ordered sum over
    # (l1, l2) covers the two one-endpoint-switched cases; halve the rest)
    w = np.outer(counts, counts)
    np.fill_diagonal(w, 0.0)
    c0_ext = 0.5 * float((w * d).sum())
    c1_ext = float((w * pd).sum())
    c2_ext = 0.5 * float((w * pdp).sum())

    r1_int = c1_int - 2.0 * c0_int
    r2_int = c0_int - c1_int + c2_int
    r1_ext = c1_ext - 2.0 * c0_ext
    r2_ext = c0_ext - c1_ext + c2_ext

    return ImbalanceModel(
        r2=r2_ext - r2_int,
        r1=r1_ext - r1_int,
        r0=c0_ext - c0_int,
        r2_int=r2_int,
        r1_int=r1_int,
        r2_ext=r2_ext,
        r1_ext=r1_ext,
        e_int=c0_int,
        e_ext=c0_ext,
        counts_per_class=np.asarray(counts_per_class, dtype=np.int64),
        density=d,
    )


def optimal_rho(model):
    """Closed-form minimizer of the signed imbalance quadratic on [0, 1].

    Candidates are the endpoints plus the vertex when it is interior; exact
    ties resolve to the smallest fraction (least intervention).
    """
    if model.r2 == 0.0 and model.r1 == 0.0 and model.r0 != 0.0:
        warnings.warn(
            "switching cannot move the imbalance (all rho-coefficients are zero); "
            "returning rho = 0",
            stacklevel=2,
        )
        return 0.0
    candidates = [0.0, 1.0]
    if model.r2 != 0.0:
        vertex = -model.r1 / (2.0 * model.r2)
        if 0.0 < vertex < 1.0:
            candidates.append(vertex)
    candidates.sort()
    best = candidates[0]
    best_val = float(model.signed_objective(best))
    for rho in candidates[1:]:
        val = float(model.signed_objective(rho))
        if val < best_val:
            best, best_val = rho, val
    return float(best)


def sample_switch_set(n_nodes, rho, seed):
    """Independent Bernoulli(rho) membership per node; returns sorted ids."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return np.flatnonzero(rng.random(n_nodes) < rho)


def sample_new_attributes(attrs, switched, dist, seed):
    """Redraw the group of every switched node from its distribution row;
    the new group always differs from the original."""
    attrs = np.asarray(attrs, dtype=np.int64)
    out = attrs.copy()
    switched = np.asarray(switched, dtype=np.int64)
    if len(switched) == 0:
        return out
    if dist.n_classes < 2:
        raise ValueError("switching needs at least two groups")
    rng = np.random.default_rng(seed)
    rows = dist.conditional[attrs[switched]]
    cum = np.cumsum(rows, axis=1)
    u = rng.random(len(switched))
    new = np.minimum((cum <= u[:, None]).sum(axis=1), dist.n_classes - 1)
    out[switched] = new
    if np.any(out[switched] == attrs[switched]):
        raise RuntimeError("sampled a zero-probability self-switch")
    return out


@dataclass
class SwitchPlan:
    """Realized intervention: fraction, switch step, switched node set, the
    post-switch labels (equal to the originals off the switched set), and the
    origin-to-destination switch counts."""

    rho: float
    tau: int
    switched: np.ndarray
    new_attrs: np.ndarray
    n_switched_by_pair: np.ndarray

    def to_json(self):
        return {
            "rho": self.rho,
            "tau": self.tau,
            "switched": self.switched.tolist(),
            "new_attrs": self.new_attrs.tolist(),
            "n_switched_by_pair": self.n_switched_by_pair.tolist(),
        }


def generate_with_switching(d, sched, n_nodes, rho, tau, dist, seed, attrs=None):
    """Run the reverse process with a mid-generation attribute switch.

    Steps T..tau+1 condition on the original labels; at step tau the switch
    set and replacement labels are drawn, and steps tau..1 condition on the
    switched labels.  The returned graph carries the ORIGINAL labels (the
    switch alters only generation conditioning, so downstream fairness is
    measured against real group membership); the realized plan is returned
    alongside.  With rho = 0 the output is identical to plain generation
    under the same seed.
    """
    t_total = sched.steps
    if not 1 <= tau <= t_total - 1:
        raise ValueError(
            f"tau must lie in [1, {t_total - 1}]: switching at the full-noise step "
            "precedes any generation"
        )
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    seeds = spawn_seeds(seed, t_total + 3)
    rng = np.random.default_rng(seeds[0])
    k = len(sched.marginals.sensitive)
    state = _prior_state(sched, n_nodes, rng, attrs, k)
    s_org = state.conditioning.copy()

    for t in range(t_total, tau, -1):
        state = reverse_step(d, state, sched, seeds[t])

    switched = sample_switch_set(n_nodes, rho, seeds[t_total + 1])
    new_attrs = sample_new_attributes(s_org, switched, dist, seeds[t_total + 2])
    # the switch redirects edge generation; features keep denoising toward
    # the original groups
    state = GenerationState(state.step, state.graph, new_attrs, s_org)

    for t in range(tau, 0, -1):
        state = reverse_step(d, state, sched, seeds[t])

    by_pair = np.zeros((k, k), dtype=np.int64)
    np.add.at(by_pair, (s_org[switched], new_attrs[switched]), 1)

    out = state.graph
    out.sensitive = s_org
    plan = SwitchPlan(float(rho), int(tau), switched, new_attrs, by_pair)
    return out, plan
