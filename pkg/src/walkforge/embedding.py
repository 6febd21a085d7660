"""Skip-gram node embeddings trained on walk corpora.

Two training objectives over the same (input, output) vector pair per
node: the exact softmax co-occurrence likelihood (only viable at test
scale) and its negative-sampling approximation with the usual 3/4-power
unigram noise distribution. SGD walks the pair stream in corpus order
with a linearly decaying learning rate; the serial path is bit-for-bit
reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError, UnknownNodeError
from .walks import WalkCorpus


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 64
    window: int = 5
    learning_rate: float = 0.05
    epochs: int = 1
    negatives: int = 5        # 0 selects the exact-softmax path
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.negatives < 0:
            raise ConfigError(f"negatives must be >= 0, got {self.negatives}")
        if self.min_count < 1:
            raise ConfigError(f"min_count must be >= 1, got {self.min_count}")


@dataclass
class EmbeddingMatrix:
    """Per-node input vectors (the embeddings) and output-side decoder rows."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray
    names: list | None = None

    @property
    def num_nodes(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def name_of(self, u: int) -> str:
        return self.names[u] if self.names is not None else str(u)

    def _check(self, u: int):
        if not 0 <= u < self.num_nodes:
            raise UnknownNodeError(f"node {u} has no embedding row")


def context_pairs(corpus: WalkCorpus, window: int) -> list:
    """All (center, context) pairs within the window, in corpus order."""
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    pairs = []
    for walk in corpus.walks:
        m = len(walk)
        for i, center in enumerate(walk):
            for j in range(max(0, i - window), min(m, i + window + 1)):
                if j != i:
                    pairs.append((center, walk[j]))
    return pairs


# ---------------------------------------------------------------------------
# Decoder and losses
# ---------------------------------------------------------------------------

def _log_softmax_rows(inp, out, centers):
    scores = inp[centers] @ out.T
    scores -= scores.max(axis=1, keepdims=True)
    return scores - np.log(np.exp(scores).sum(axis=1, keepdims=True))


def decode_prob(emb: EmbeddingMatrix, u: int, v: int) -> float:
    """Softmax co-occurrence probability of v given u (max-shifted)."""
    emb._check(u)
    emb._check(v)
    logp = _log_softmax_rows(emb.input_vectors, emb.output_vectors, np.array([u]))
    return float(np.exp(logp[0, v]))


def nll_loss(emb: EmbeddingMatrix, pairs) -> float:
    """Mean negative log-likelihood of the pairs under the softmax decoder."""
    if not len(pairs):
        raise ValueError("no pairs to score")
    centers = np.fromiter((p[0] for p in pairs), dtype=np.intp, count=len(pairs))
    contexts = np.fromiter((p[1] for p in pairs), dtype=np.intp, count=len(pairs))
    logp = _log_softmax_rows(emb.input_vectors, emb.output_vectors, centers)
    return float(-logp[np.arange(len(pairs)), contexts].mean())


def softmax_loss_grads(inp, out, centers, contexts):
    """Mean softmax NLL and its gradients w.r.t. both matrices."""
    m = len(centers)
    scores = inp[centers] @ out.T
    scores -= scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(scores).sum(axis=1, keepdims=True))
    loss = float((logz[:, 0] - scores[np.arange(m), contexts]).mean())
    grad_scores = np.exp(scores - logz) / m
    grad_scores[np.arange(m), contexts] -= 1.0 / m
    d_inp = np.zeros_like(inp)
    np.add.at(d_inp, centers, grad_scores @ out)
    d_out = grad_scores.T @ inp[centers]
    return loss, d_inp, d_out


def sgns_loss_grads(inp, out, centers, contexts, negatives):
    """Mean negative-sampling loss and gradients, for fixed negative draws.

    negatives has shape (len(centers), k). Loss per pair is
    -log sigmoid(s_pos) - sum_j log sigmoid(-s_neg_j).
    """
    m, k = negatives.shape
    rows = np.concatenate([contexts[:, None], negatives], axis=1)  # (m, k+1)
    sign = np.full(k + 1, -1.0)
    sign[0] = 1.0
    scores = np.einsum("md,mkd->mk", inp[centers], out[rows])
    sig = _sigmoid(sign * scores)
    loss = float(-np.log(np.clip(sig, 1e-300, None)).sum() / m)
    coeff = -sign * (1.0 - sig) / m            # d loss / d score
    d_inp = np.zeros_like(inp)
    np.add.at(d_inp, centers, np.einsum("mk,mkd->md", coeff, out[rows]))
    d_out = np.zeros_like(out)
    np.add.at(d_out, rows, coeff[:, :, None] * inp[centers][:, None, :])
    return loss, d_inp, d_out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _node_frequencies(corpus: WalkCorpus) -> np.ndarray:
    freq = np.zeros(corpus.num_nodes, dtype=np.int64)
    for walk in corpus.walks:
        for u in walk:
            freq[u] += 1
    return freq


def _noise_cdf(freq: np.ndarray) -> np.ndarray:
    weights = freq.astype(np.float64) ** 0.75
    total = weights.sum()
    if total <= 0:
        raise ConfigError("corpus has no usable nodes for negative sampling")
    return np.cumsum(weights / total)


def _init_matrices(num_nodes, dim, rng):
    inp = (rng.random((num_nodes, dim)) - 0.5) / dim
    out = np.zeros((num_nodes, dim))
    return inp, out


def _sgd(inp, out, pairs, cfg: SkipGramConfig, noise_cdf):
    """In-place skip-gram SGD; pair order is the corpus order each epoch."""
    total = cfg.epochs * len(pairs)
    if total == 0:
        return
    lr0 = cfg.learning_rate
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2,)))
    k = cfg.negatives
    t = 0
    for _ in range(cfg.epochs):
        for u, v in pairs:
            lr = lr0 * max(1e-4, 1.0 - t / total)
            t += 1
            l1 = inp[u]
            if k == 0:
                scores = out @ l1
                scores -= scores.max()
                probs = np.exp(scores)
                probs /= probs.sum()
                # d nll / d out = outer(probs - onehot(v), l1)
                gout = probs
                gout[v] -= 1.0
                neu1e = gout @ out
                out -= lr * gout[:, None] * l1
                inp[u] = l1 - lr * neu1e
            else:
                negs = np.searchsorted(noise_cdf, rng.random(k))
                np.clip(negs, None, len(noise_cdf) - 1, out=negs)
                rows = [v] + [x for x in negs if x != v]
                targets = out[rows]
                sign = np.full(len(rows), -1.0)
                sign[0] = 1.0
                sig = _sigmoid(sign * (targets @ l1))
                coeff = -sign * (1.0 - sig)
                neu1e = coeff @ targets
                np.add.at(out, rows, (-lr * coeff)[:, None] * l1)
                inp[u] = l1 - lr * neu1e


def _trainable_pairs(corpus: WalkCorpus, cfg: SkipGramConfig):
    if cfg.min_count > 1:
        freq = _node_frequencies(corpus)
        keep = freq >= cfg.min_count
        walks = [tuple(u for u in w if keep[u]) for w in corpus.walks]
        filtered = WalkCorpus(walks, corpus.graph_version, corpus.n, corpus.l,
                              corpus.mode, corpus.num_nodes)
        return context_pairs(filtered, cfg.window)
    return context_pairs(corpus, cfg.window)


def train(corpus: WalkCorpus, cfg: SkipGramConfig,
          names: list | None = None) -> EmbeddingMatrix:
    """Train embeddings from scratch on the corpus.

    Every graph node gets a row (walk origins cover all nodes); nodes below
    min_count or trapped in length-1 walks simply receive no updates.
    """
    if not corpus.walks:
        raise ValueError("corpus has no walks")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    inp, out = _init_matrices(corpus.num_nodes, cfg.dim, rng)
    _run_training(inp, out, corpus, cfg)
    return EmbeddingMatrix(inp, out, names=names)


def warm_retrain(prev: EmbeddingMatrix, corpus_next: WalkCorpus,
                 cfg: SkipGramConfig, names: list | None = None) -> EmbeddingMatrix:
    """Continue training after a graph update: persisting nodes start from
    their previous vectors, new nodes from fresh initialization."""
    if cfg.dim != prev.dim:
        raise ConfigError(f"dim {cfg.dim} does not match previous model ({prev.dim})")
    if corpus_next.num_nodes < prev.num_nodes:
        raise ConfigError("corpus covers fewer nodes than the previous model")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    inp, out = _init_matrices(corpus_next.num_nodes, cfg.dim, rng)
    inp[:prev.num_nodes] = prev.input_vectors
    out[:prev.num_nodes] = prev.output_vectors
    _run_training(inp, out, corpus_next, cfg)
    return EmbeddingMatrix(inp, out, names=names)


def _run_training(inp, out, corpus, cfg):
    pairs = _trainable_pairs(corpus, cfg)
    if not pairs:
        return
    noise_cdf = _noise_cdf(_node_frequencies(corpus)) if cfg.negatives else None
    _sgd(inp, out, pairs, cfg, noise_cdf)


# ---------------------------------------------------------------------------
# File I/O (word2vec text convention)
# ---------------------------------------------------------------------------

def export_embeddings(emb: EmbeddingMatrix, path):
    """`<count> <dim>` header then one `name f1 .. fd` row per node.

    repr() floats round-trip exactly; only input vectors are exported."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{emb.num_nodes} {emb.dim}\n")
        for u in range(emb.num_nodes):
            vec = " ".join(repr(float(x)) for x in emb.input_vectors[u])
            fh.write(f"{emb.name_of(u)} {vec}\n")


def import_embeddings(path) -> EmbeddingMatrix:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise ParseError(f"{path}:1: expected '<count> <dim>' header")
        try:
            count, dim = int(head[0]), int(head[1])
        except ValueError:
            raise ParseError(f"{path}:1: expected '<count> <dim>' header") from None
        names = []
        vectors = np.empty((count, dim))
        row = 0
        for line_no, line in enumerate(fh, start=2):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise ParseError(f"{path}:{line_no}: expected {dim + 1} fields, "
                                 f"got {len(fields)}")
            if row >= count:
                raise ParseError(f"{path}:{line_no}: more rows than the header declares")
            names.append(fields[0])
            try:
                vectors[row] = [float(x) for x in fields[1:]]
            except ValueError:
                raise ParseError(f"{path}:{line_no}: non-numeric vector entry") from None
            row += 1
    if row != count:
        raise ParseError(f"{path}: header declares {count} rows, found {row}")
    return EmbeddingMatrix(vectors, np.zeros_like(vectors), names=names)
