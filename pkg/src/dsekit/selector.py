"""Learning which explorer to run on an unseen benchmark.

Two stages share one feature view of a benchmark. A supervised head maps the
24 structural features to a distribution over the ten explorers, trained
against observed per-benchmark winners. A PPO agent then refines that prior:
its state is the standardized features concatenated with the supervised
probabilities, its single action picks an explorer, and its reward is the
negative regret of that pick relative to the best explorer on the benchmark.
Episodes are one decision long (a recommendation fully resolves a benchmark,
so there is no state transition), but the advantage estimator is written for
any horizon.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .benchmarks import FEATURE_DIM
from .explorers import ExplorerId
from .hashing import mix64
from .nn import (
    Mlp,
    backward,
    cross_entropy,
    forward,
    log_softmax,
    mean_entropy,
    mean_squared_error,
    sgd_step,
    softmax,
)

N_EXPLORERS = len(ExplorerId)
STATE_DIM = FEATURE_DIM + N_EXPLORERS

SUPERVISED_EPOCHS = 250
SUPERVISED_LR = 3e-4
RL_EPOCHS = 1000
RL_LR = 5e-4
CLIP_RATIO = 0.2
DISCOUNT = 0.99
GAE_LAMBDA = 0.95
VALUE_COEF = 0.5
ENTROPY_COEF = 0.01
UPDATE_PASSES = 4
HIDDEN = 256

_SUPERVISED_TAG = 0x51AD
_RL_TAG = 0x77E0

# Init gains. The head's first layer is widened so pinned-rate gradient
# descent converges within its epoch budget; the actor starts out following
# the supervised prior with this logit gain.
_HEAD_FEATURE_GAIN = 10.0
_PRIOR_GAIN = 3.0
_MIN_BEST_SCORE = 1e-6


# -- feature standardization ----------------------------------------------------


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature affine map fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(features: np.ndarray) -> "FeatureScaler":
        features = np.atleast_2d(features)
        std = features.std(axis=0)
        return FeatureScaler(mean=features.mean(axis=0), std=np.where(std < 1e-9, 1.0, std))

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(features) - self.mean) / self.std


# -- stage one: supervised prior ------------------------------------------------


@dataclass(frozen=True)
class SupervisedHead:
    """Features -> explorer distribution, with its own input scaling."""

    scaler: FeatureScaler
    net: Mlp

    def logits(self, features: np.ndarray) -> np.ndarray:
        return forward(self.net, self.scaler.apply(features))[0]

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(features))

    def recommend(self, features: np.ndarray) -> ExplorerId:
        return ExplorerId(int(np.argmax(self.logits(features)[0])))


def pretrain_supervised(
    features: np.ndarray,
    labels: Sequence[int],
    *,
    epochs: int = SUPERVISED_EPOCHS,
    lr: float = SUPERVISED_LR,
    seed: int = 0,
) -> tuple[SupervisedHead, list[float]]:
    """Full-batch gradient descent on cross-entropy; returns the loss curve.

    The curve holds the loss measured before each update, one entry per epoch.
    A single-class dataset trains a constant predictor and warns rather than
    failing: it is degenerate but well-defined.
    """
    features = np.atleast_2d(features)
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise ValueError("cannot pretrain on an empty dataset")
    if np.unique(labels).size < 2:
        warnings.warn("single-class training set: head degenerates to a constant predictor")
    scaler = FeatureScaler.fit(features)
    x = scaler.apply(features)
    # With the small fixed learning rate and only 250 full-batch steps, a
    # conventional init barely moves. Widening the random hidden features and
    # zeroing the output layer makes this a softmax regression on strong
    # random features: the loss starts at exactly ln(n classes) and descends
    # fast enough to converge within the fixed epoch budget.
    net = Mlp.init(features.shape[1], HIDDEN, N_EXPLORERS, seed=mix64(_SUPERVISED_TAG, seed))
    net = replace(net, w1=net.w1 * _HEAD_FEATURE_GAIN, w2=np.zeros_like(net.w2))
    curve: list[float] = []
    for _ in range(epochs):
        logits, hidden = forward(net, x)
        loss, dlogits = cross_entropy(logits, labels)
        if not np.isfinite(loss):
            raise FloatingPointError("supervised pretraining diverged: non-finite loss")
        curve.append(loss)
        net = sgd_step(net, backward(net, x, hidden, dlogits), lr)
    return SupervisedHead(scaler=scaler, net=net), curve


# -- generalized advantage estimation --------------------------------------------


def gae(
    rewards: Sequence[float],
    values: Sequence[float],
    *,
    gamma: float = DISCOUNT,
    lam: float = GAE_LAMBDA,
    bootstrap: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """(advantages, returns) for one episode, via the backward recursion.

    With lam=0 this reduces to one-step temporal differences; with lam=1 the
    advantage is the discounted return minus the value baseline. Returns are
    advantage plus value, the critic's regression target.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError("rewards and values must be equal-length 1-d sequences")
    horizon = rewards.size
    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values - values
    advantages = np.empty(horizon)
    acc = 0.0
    for t in range(horizon - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values


# -- ppo pieces -------------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    """One stored decision: what was seen, done, and earned."""

    state: np.ndarray
    action: int
    reward: float
    log_prob: float
    value: float
    done: bool


def regret_reward(adrs_chosen: float, adrs_best: float) -> float:
    """Negative relative regret; zero exactly when the pick ties the best."""
    return -abs(adrs_chosen - adrs_best) / max(adrs_best, _MIN_BEST_SCORE)


# Training floor for stored rewards. When the best explorer's score is at or
# near zero, relative regret blows up to -1e5 and beyond, and value targets at
# that scale drive the critic's quadratic loss to overflow under the fixed
# update recipe. Floored rewards keep every target in a range the critic can
# track while preserving the ordering of all ordinarily-scaled picks; zero
# still means an optimal pick.
REWARD_FLOOR = -100.0


def ppo_policy_loss(
    logits: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    advantages: np.ndarray,
    *,
    clip: float = CLIP_RATIO,
) -> tuple[float, np.ndarray]:
    """Clipped-ratio surrogate loss and its exact gradient on the logits."""
    logits = np.atleast_2d(logits)
    n = logits.shape[0]
    rows = np.arange(n)
    logp = log_softmax(logits)
    ratio = np.exp(logp[rows, actions] - old_logp)
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr_plain = ratio * advantages
    surr_clip = clipped * advantages
    loss = -np.minimum(surr_plain, surr_clip).mean()
    # gradient flows through the ratio only where the plain branch is active
    # or the clip is not binding; elsewhere the objective is locally flat
    inside = (ratio >= 1.0 - clip) & (ratio <= 1.0 + clip)
    active = (surr_plain <= surr_clip) | inside
    dratio = np.where(active, advantages, 0.0)
    p = softmax(logits)
    onehot = np.zeros_like(p)
    onehot[rows, actions] = 1.0
    dlogits = -(dratio * ratio)[:, None] * (onehot - p) / n
    return float(loss), dlogits


def normalized(advantages: np.ndarray) -> np.ndarray:
    """Batch-standardized advantages; short or degenerate batches pass through."""
    if advantages.size < 2:
        return advantages
    std = advantages.std()
    if std < 1e-8:
        return advantages
    return (advantages - advantages.mean()) / std


# -- stage two: ppo refinement ----------------------------------------------------


@dataclass(frozen=True)
class PpoAgent:
    """Actor over hybrid states, critic over standardized features, frozen prior."""

    head: SupervisedHead
    actor: Mlp
    critic: Mlp

    @staticmethod
    def init(head: SupervisedHead, seed: int = 0) -> "PpoAgent":
        """Prior-anchored start: actor logits begin at gain * supervised probs.

        The first ten hidden units pass the probability block of the state
        straight through (probabilities are non-negative, so the ReLU is
        transparent), and the output layer reads only those units at first.
        The remaining hidden units see the whole state with a small random
        init, giving the updates room to learn feature-conditioned
        corrections. The critic's output layer starts at zero, so initial
        values are 0 and first-epoch advantages are the raw rewards.
        """
        actor = Mlp.init(STATE_DIM, HIDDEN, N_EXPLORERS, seed=mix64(_RL_TAG, seed, 1))
        w1 = actor.w1.copy()
        w1[:N_EXPLORERS, :] = 0.0
        w1[np.arange(N_EXPLORERS), FEATURE_DIM + np.arange(N_EXPLORERS)] = 1.0
        w2 = np.zeros_like(actor.w2)
        w2[np.arange(N_EXPLORERS), np.arange(N_EXPLORERS)] = _PRIOR_GAIN
        critic = Mlp.init(FEATURE_DIM, HIDDEN, 1, seed=mix64(_RL_TAG, seed, 2))
        return PpoAgent(
            head=head,
            actor=replace(actor, w1=w1, w2=w2),
            critic=replace(critic, w2=np.zeros_like(critic.w2)),
        )

    def states(self, features: np.ndarray) -> np.ndarray:
        z = self.head.scaler.apply(features)
        probs = softmax(forward(self.head.net, z)[0])
        return np.concatenate([z, probs], axis=1)


def ppo_update(
    agent: PpoAgent,
    buffer: Sequence[Transition],
    advantages: np.ndarray,
    returns: np.ndarray,
    *,
    passes: int = UPDATE_PASSES,
    lr: float = RL_LR,
    clip: float = CLIP_RATIO,
    value_coef: float = VALUE_COEF,
    entropy_coef: float = ENTROPY_COEF,
) -> tuple[PpoAgent, list[float]]:
    """Gradient passes over one collected buffer; returns the combined losses.

    Advantages arrive already normalized (the caller owns that policy); the
    returns are the raw critic targets.
    """
    if not buffer:
        raise ValueError("ppo_update needs a non-empty buffer")
    states = np.stack([t.state for t in buffer])
    z = states[:, :FEATURE_DIM]
    actions = np.array([t.action for t in buffer])
    old_logp = np.array([t.log_prob for t in buffer])
    actor, critic = agent.actor, agent.critic
    losses: list[float] = []
    for _ in range(passes):
        logits, hidden = forward(actor, states)
        policy_loss, d_policy = ppo_policy_loss(logits, actions, old_logp, advantages, clip=clip)
        entropy, d_entropy = mean_entropy(logits)
        dlogits = d_policy - entropy_coef * d_entropy
        pred, hidden_c = forward(critic, z)
        value_loss, d_value = mean_squared_error(pred, returns[:, None])
        total = policy_loss + value_coef * value_loss - entropy_coef * entropy
        if not np.isfinite(total):
            raise FloatingPointError("ppo update diverged: non-finite loss")
        losses.append(float(total))
        actor = sgd_step(actor, backward(actor, states, hidden, dlogits), lr)
        critic_grads = backward(critic, z, hidden_c, value_coef * d_value)
        critic = sgd_step(critic, critic_grads, lr)
    return replace(agent, actor=actor, critic=critic), losses


def train_rl(
    agent: PpoAgent,
    features: np.ndarray,
    score_matrix: np.ndarray,
    *,
    epochs: int = RL_EPOCHS,
    seed: int = 0,
    lr: float = RL_LR,
    passes: int = UPDATE_PASSES,
    entropy_coef: float = ENTROPY_COEF,
) -> tuple[PpoAgent, list[float]]:
    """PPO over one-decision episodes; returns the per-epoch mean reward curve.

    Each epoch walks the training benchmarks in a fresh seeded permutation,
    samples one explorer per benchmark from the current policy, scores the
    picks against the benchmark's known per-explorer results, and applies one
    clipped-surrogate update over the collected buffer.
    """
    features = np.atleast_2d(features)
    score_matrix = np.atleast_2d(score_matrix)
    n = features.shape[0]
    if score_matrix.shape != (n, N_EXPLORERS):
        raise ValueError(f"score matrix must be (n, {N_EXPLORERS}), got {score_matrix.shape}")
    rng = np.random.default_rng(np.random.SeedSequence([_RL_TAG, seed & (2**64 - 1)]))
    states = agent.states(features)
    z = states[:, :FEATURE_DIM]
    curve: list[float] = []
    for _ in range(epochs):
        logits, _ = forward(agent.actor, states)
        logp = log_softmax(logits)
        probs = np.exp(logp)
        values = forward(agent.critic, z)[0][:, 0]
        buffer: list[Transition] = []
        advantages = np.empty(n)
        returns = np.empty(n)
        for slot, i in enumerate(rng.permutation(n)):
            action = int(np.searchsorted(np.cumsum(probs[i]), rng.random()))
            action = min(action, N_EXPLORERS - 1)
            row = score_matrix[i]
            reward = max(regret_reward(float(row[action]), float(row.min())), REWARD_FLOOR)
            buffer.append(
                Transition(
                    state=states[i],
                    action=action,
                    reward=reward,
                    log_prob=float(logp[i, action]),
                    value=float(values[i]),
                    done=True,
                )
            )
            adv, ret = gae([reward], [values[i]])
            advantages[slot] = adv[0]
            returns[slot] = ret[0]
        curve.append(float(np.mean([t.reward for t in buffer])))
        agent, _ = ppo_update(
            agent,
            buffer,
            normalized(advantages),
            returns,
            passes=passes,
            lr=lr,
            entropy_coef=entropy_coef,
        )
    return agent, curve


def recommend(
    head: SupervisedHead, agent: PpoAgent, features: np.ndarray
) -> tuple[ExplorerId, np.ndarray]:
    """Greedy hybrid pick and the policy's full distribution for one benchmark."""
    z = head.scaler.apply(features)
    probs = softmax(forward(head.net, z)[0])
    state = np.concatenate([z, probs], axis=1)
    logits, _ = forward(agent.actor, state)
    policy = softmax(logits)[0]
    return ExplorerId(int(np.argmax(logits[0]))), policy


# -- checkpoints --------------------------------------------------------------------


_CHECKPOINT_HEADER = "selector-checkpoint"


def save_selector(out, head: SupervisedHead, agent: PpoAgent, *, fingerprint: str, seed: int) -> None:
    """One text record: header with hyperparameters, scaler, then three nets."""
    from .nn import save_mlp, write_matrix

    settings = (
        f"fingerprint={fingerprint} seed={seed} "
        f"supervised_epochs={SUPERVISED_EPOCHS} supervised_lr={SUPERVISED_LR:.17g} "
        f"rl_epochs={RL_EPOCHS} rl_lr={RL_LR:.17g} clip={CLIP_RATIO:.17g} "
        f"gamma={DISCOUNT:.17g} lam={GAE_LAMBDA:.17g} value_coef={VALUE_COEF:.17g} "
        f"entropy_coef={ENTROPY_COEF:.17g} passes={UPDATE_PASSES} hidden={HIDDEN}"
    )
    out.write(f"{_CHECKPOINT_HEADER} {settings}\n")
    write_matrix(out, "scaler_mean", head.scaler.mean)
    write_matrix(out, "scaler_std", head.scaler.std)
    save_mlp(out, head.net)
    save_mlp(out, agent.actor)
    save_mlp(out, agent.critic)


def load_selector(source) -> tuple[SupervisedHead, PpoAgent, dict[str, str]]:
    """Rebuild (head, agent, header settings) from one checkpoint record.

    Accepts a path, an open text file, or an iterable of lines.
    """
    from .nn import load_mlp, read_matrix

    if isinstance(source, (str, Path)):
        lines = iter(Path(source).read_text().splitlines())
    elif hasattr(source, "read"):
        lines = iter(source.read().splitlines())
    else:
        lines = iter(source)
    header = next(lines, None)
    if header is None or not header.startswith(_CHECKPOINT_HEADER + " "):
        raise ValueError(f"not a selector checkpoint: {header!r}")
    settings = dict(
        token.split("=", 1) for token in header.split()[1:] if "=" in token
    )
    scaler = FeatureScaler(
        mean=read_matrix(lines, "scaler_mean")[0],
        std=read_matrix(lines, "scaler_std")[0],
    )
    head = SupervisedHead(scaler=scaler, net=load_mlp(lines))
    agent = PpoAgent(head=head, actor=load_mlp(lines), critic=load_mlp(lines))
    if agent.actor.dims[0] != STATE_DIM or head.net.dims[0] != FEATURE_DIM:
        raise ValueError("checkpoint network shapes do not match this package's layout")
    return head, agent, settings


__all__ = [
    "CLIP_RATIO",
    "DISCOUNT",
    "ENTROPY_COEF",
    "GAE_LAMBDA",
    "HIDDEN",
    "N_EXPLORERS",
    "REWARD_FLOOR",
    "RL_EPOCHS",
    "RL_LR",
    "SUPERVISED_EPOCHS",
    "SUPERVISED_LR",
    "UPDATE_PASSES",
    "VALUE_COEF",
    "FeatureScaler",
    "PpoAgent",
    "SupervisedHead",
    "Transition",
    "gae",
    "load_selector",
    "normalized",
    "ppo_policy_loss",
    "ppo_update",
    "pretrain_supervised",
    "recommend",
    "regret_reward",
    "save_selector",
    "train_rl",
]
