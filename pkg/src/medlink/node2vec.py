"""Graph-structural concept embeddings: biased walks + skip-gram training.

Walk generation follows the second-order scheme: stepping from v (having
arrived from t), an unnormalized weight of 1/p goes to returning to t,
1 to any neighbor of v adjacent to t, and 1/q to everything else.
Training is skip-gram with negative sampling over the walk corpus.

Each start node gets its own RNG stream derived from (seed, node), so
walks can be generated by parallel workers without changing results.
"""

import logging
from dataclasses import dataclass

import numpy as np

from medlink.errors import ConfigError
from medlink.vectors import WordVectorStore, load_word_vectors, save_word_vectors

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ConfigError(f"p and q must be positive, got p={self.p} q={self.q}")
        if self.walk_length < 2:
            raise ConfigError(f"walk_length must be >= 2, got {self.walk_length}")
        if self.walks_per_node < 1:
            raise ConfigError(f"walks_per_node must be >= 1, got {self.walks_per_node}")


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 300
    window: int = 10
    negatives: int = 5
    epochs: int = 1
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ConfigError("dim, window, and negatives must all be >= 1")
        if self.epochs < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs must be >= 1 and learning_rate positive")


def _alias_setup(probs):
    """Vose alias tables for O(1) discrete sampling."""
    n = len(probs)
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    scaled = [p * n for p in probs]
    small = [i for i, s in enumerate(scaled) if s < 1.0]
    large = [i for i, s in enumerate(scaled) if s >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] - (1.0 - scaled[s])
        (small if scaled[l] < 1.0 else large).append(l)
    for rest in small + large:
        prob[rest] = 1.0
    return prob, alias


def _alias_draw(rng, prob, alias):
    i = int(rng.integers(len(prob)))
    return i if rng.random() < prob[i] else int(alias[i])


def transition_weights(adjacency, prev, cur, p, q):
    """Unnormalized second-order weights over cur's neighbors."""
    prev_neighbors = set(adjacency[prev])
    weights = []
    for x in adjacency[cur]:
        if x == prev:
            weights.append(1.0 / p)
        elif x in prev_neighbors:
            weights.append(1.0)
        else:
            weights.append(1.0 / q)
    return weights


class WalkSampler:
    """Cached alias tables per (prev, cur) context over one graph."""

    def __init__(self, graph, cfg):
        self.cfg = cfg
        self.adjacency = {node: graph.undirected_neighbors(node) for node in graph.sctids()}
        self._cache = {}

    def sample_first(self, rng, start):
        neighbors = self.adjacency[start]
        if not neighbors:
            return None
        return neighbors[int(rng.integers(len(neighbors)))]

    def sample_step(self, rng, prev, cur):
        neighbors = self.adjacency[cur]
        if not neighbors:
            return None
        tables = self._cache.get((prev, cur))
        if tables is None:
            weights = transition_weights(self.adjacency, prev, cur, self.cfg.p, self.cfg.q)
            total = sum(weights)
            tables = _alias_setup([w / total for w in weights])
            self._cache[(prev, cur)] = tables
        return neighbors[_alias_draw(rng, *tables)]


def generate_walks(graph, cfg):
    """walks_per_node biased walks from every node, ascending-node order."""
    sampler = WalkSampler(graph, cfg)
    walks = []
    for node in graph.sctids():
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, int(node))))
        for _ in range(cfg.walks_per_node):
            walk = [node]
            nxt = sampler.sample_first(rng, node)
            if nxt is None:
                walks.append(walk)
                continue
            walk.append(nxt)
            while len(walk) < cfg.walk_length:
                nxt = sampler.sample_step(rng, walk[-2], walk[-1])
                if nxt is None:
                    break
                walk.append(nxt)
            walks.append(walk)
    return walks


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _pair_loss(w_in, w_out, center, context, negatives):
    """Negative-sampling objective for one skip-gram pair."""
    h = w_in[center]
    loss = -np.log(_sigmoid(float(np.dot(h, w_out[context]))))
    for neg in negatives:
        loss += -np.log(_sigmoid(-float(np.dot(h, w_out[neg]))))
    return float(loss)


def _pair_step(w_in, w_out, center, context, negatives, lr):
    """One SGD update; output rows are read before they are written."""
    h = w_in[center].copy()
    grad_h = np.zeros_like(h)
    for target, label in [(context, 1.0)] + [(neg, 0.0) for neg in negatives]:
        g = _sigmoid(float(np.dot(h, w_out[target]))) - label
        grad_h += g * w_out[target]
        w_out[target] -= lr * g * h
    w_in[center] -= lr * grad_h


def train_sgns(walks, cfg):
    """Skip-gram with negative sampling over the walk corpus.

    Negatives are drawn from the walk unigram distribution raised to
    0.75; draws that collide with the positive context are skipped. The
    learning rate decays linearly over all scheduled pairs.
    """
    if not walks:
        raise ConfigError("cannot train on an empty walk corpus")
    counts = {}
    for walk in walks:
        for node in walk:
            counts[node] = counts.get(node, 0) + 1
    vocab = sorted(counts, key=int)
    index = {node: i for i, node in enumerate(vocab)}

    noise = np.array([counts[node] for node in vocab], dtype=np.float64) ** 0.75
    noise_cum = np.cumsum(noise / noise.sum())

    rng = np.random.default_rng(cfg.seed)
    w_in = (rng.random((len(vocab), cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((len(vocab), cfg.dim))

    pairs_per_epoch = 0
    for walk in walks:
        n = len(walk)
        for i in range(n):
            lo, hi = max(0, i - cfg.window), min(n, i + cfg.window + 1)
            pairs_per_epoch += hi - lo - 1
    total_pairs = max(1, pairs_per_epoch * cfg.epochs)
    min_lr = cfg.learning_rate * 1e-4

    done = 0
    for _ in range(cfg.epochs):
        for walk in walks:
            ids = [index[node] for node in walk]
            n = len(ids)
            for i, center in enumerate(ids):
                lo, hi = max(0, i - cfg.window), min(n, i + cfg.window + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = ids[j]
                    lr = max(min_lr, cfg.learning_rate * (1.0 - done / total_pairs))
                    draws = np.searchsorted(noise_cum, rng.random(cfg.negatives))
                    negatives = [int(d) for d in draws if int(d) != context]
                    _pair_step(w_in, w_out, center, context, negatives, lr)
                    done += 1

    vectors = {node: w_in[index[node]].copy() for node in vocab}
    return WordVectorStore(dim=cfg.dim, vectors=vectors)


def save_node_embeddings(embeddings, path):
    save_word_vectors(embeddings, path)


def load_node_embeddings(path):
    return load_word_vectors(path)
