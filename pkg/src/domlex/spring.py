"""Contrastive spring network pulling mapped static embeddings into place.

The network is a residual two-layer feedforward map u = x + W2 tanh(W1 x
+ b1) + b2 with a zero-initialized output layer, so it starts as the
identity.  Training minimizes

    L = - sum_i [ J * cos(u_x_i, u_y_i) - sum_j cos(u_x_i, w_y_ij) ]

over induced translation pairs with J sampled negatives per pair, by
plain gradient descent with hand-derived backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataFormatError
from .retrieval import InducedDictionary
from .seeding import derived_rng, stable_digest
from .store import EmbeddingSpace, format_float


@dataclass
class FeedforwardParams:
    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (d, h)
    b2: np.ndarray  # (d,)

    def copy(self) -> "FeedforwardParams":
        return FeedforwardParams(
            w1=self.w1.copy(), b1=self.b1.copy(), w2=self.w2.copy(), b2=self.b2.copy()
        )

    def tensors(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class SpringNetwork:
    src: FeedforwardParams
    tgt: FeedforwardParams
    hidden_width: int
    nonlinearity: str = "tanh"
    rng_seed: int = 0
    shared: bool = False

    def __post_init__(self) -> None:
        if self.nonlinearity != "tanh":
            raise ValueError(f"unsupported nonlinearity '{self.nonlinearity}'")
        for params in (self.src, self.tgt):
            for tensor in params.tensors():
                if not np.all(np.isfinite(tensor)):
                    raise ValueError("non-finite network parameter")

    @property
    def dim(self) -> int:
        return self.src.w2.shape[0]

    def params_for(self, side: str) -> FeedforwardParams:
        if side == "src":
            return self.src
        if side == "tgt":
            return self.tgt
        raise ValueError("side must be 'src' or 'tgt'")

    def copy(self) -> "SpringNetwork":
        src = self.src.copy()
        tgt = src if self.shared else self.tgt.copy()
        return SpringNetwork(
            src=src,
            tgt=tgt,
            hidden_width=self.hidden_width,
            nonlinearity=self.nonlinearity,
            rng_seed=self.rng_seed,
            shared=self.shared,
        )


@dataclass
class UnifiedSpace:
    """Static embeddings after the spring network's residual adjustment."""

    space: EmbeddingSpace
    side: str


@dataclass
class SpringTrainConfig:
    negatives_per_pair: int = 10
    pair_count: int | None = None
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 128
    rng_seed: int = 0
    resample_negatives: bool = True
    share_networks: bool = False
    hidden_width: int | None = None

    def __post_init__(self) -> None:
        if self.negatives_per_pair < 1:
            raise ValueError("negatives_per_pair must be positive")
        if self.pair_count is not None and self.pair_count < 1:
            raise ValueError("pair_count must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.hidden_width is not None and self.hidden_width < 1:
            raise ValueError("hidden_width must be positive")


@dataclass
class SpringTraining:
    network: SpringNetwork
    epoch_losses: list[float]
    diverged: bool = False


def new_spring_network(
    dim: int,
    hidden_width: int | None = None,
    rng_seed: int = 0,
    shared: bool = False,
) -> SpringNetwork:
    """Fresh network; the zero output layer makes it the identity map."""
    hidden = hidden_width or 2 * dim

    def init(tag: str) -> FeedforwardParams:
        rng = derived_rng(rng_seed, "spring-init", tag)
        return FeedforwardParams(
            w1=rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden, dim)),
            b1=np.zeros(hidden),
            w2=np.zeros((dim, hidden)),
            b2=np.zeros(dim),
        )

    src = init("src")
    tgt = src if shared else init("tgt")
    return SpringNetwork(
        src=src, tgt=tgt, hidden_width=hidden, rng_seed=rng_seed, shared=shared
    )


def _net_forward(params: FeedforwardParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = np.tanh(x @ params.w1.T + params.b1)
    return hidden @ params.w2.T + params.b2, hidden


def _net_backward(
    params: FeedforwardParams, x: np.ndarray, hidden: np.ndarray, upstream: np.ndarray
) -> FeedforwardParams:
    grad_w2 = upstream.T @ hidden
    grad_b2 = upstream.sum(axis=0)
    d_hidden = upstream @ params.w2
    d_pre = d_hidden * (1.0 - hidden**2)
    grad_w1 = d_pre.T @ x
    grad_b1 = d_pre.sum(axis=0)
    return FeedforwardParams(w1=grad_w1, b1=grad_b1, w2=grad_w2, b2=grad_b2)


def unify(static_mapped: EmbeddingSpace, net: SpringNetwork, side: str) -> UnifiedSpace:
    """u = x + net(x) for every row of the mapped static space."""
    if static_mapped.dim != net.dim:
        raise ValueError("space and network dimensions differ")
    adjustment, _ = _net_forward(net.params_for(side), static_mapped.matrix)
    space = EmbeddingSpace(
        vocab=static_mapped.vocab,
        matrix=static_mapped.matrix + adjustment,
        kind=static_mapped.kind,
        normalization_history=static_mapped.normalization_history + ("spring",),
        duplicates_dropped=static_mapped.duplicates_dropped,
    )
    return UnifiedSpace(space=space, side=side)


def _cosine_terms(u: np.ndarray, v: np.ndarray, negatives: np.ndarray):
    """Norms, dots and cosines for the loss; raises on any zero vector."""
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    nn = np.linalg.norm(negatives, axis=2)
    if np.any(nu == 0.0) or np.any(nv == 0.0) or np.any(nn == 0.0):
        raise ValueError("zero vector in cosine")
    dot_uv = np.einsum("id,id->i", u, v)
    dot_un = np.einsum("id,ijd->ij", u, negatives)
    cos_uv = dot_uv / (nu * nv)
    cos_un = dot_un / (nu[:, None] * nn)
    return nu, nv, nn, cos_uv, cos_un


def _loss_value(cos_uv: np.ndarray, cos_un: np.ndarray) -> float:
    j_count = cos_un.shape[1]
    return float(-np.sum(j_count * cos_uv - cos_un.sum(axis=1)))


def contrastive_loss(
    positives: Sequence[tuple[np.ndarray, np.ndarray]],
    negatives: Sequence[Sequence[np.ndarray]],
    j_count: int | None = None,
) -> float:
    """The training objective on explicit vectors.

    ``positives`` holds (u_x, u_y) pairs; ``negatives`` holds, per pair,
    exactly J unified target vectors that are not the pair's translation.
    """
    if len(positives) == 0:
        raise ValueError("no positive pairs")
    if len(negatives) != len(positives):
        raise ValueError("one negative list required per positive pair")
    if j_count is None:
        j_count = len(negatives[0])
    for group in negatives:
        if len(group) != j_count:
            raise ValueError(f"each pair needs exactly {j_count} negatives")
    u = np.vstack([np.asarray(a, dtype=np.float64) for a, _ in positives])
    v = np.vstack([np.asarray(b, dtype=np.float64) for _, b in positives])
    neg = np.stack([np.vstack([np.asarray(w, dtype=np.float64) for w in group]) for group in negatives])
    if v.shape != u.shape or neg.shape != (u.shape[0], j_count, u.shape[1]):
        raise ValueError("inconsistent vector dimensions")
    _, _, _, cos_uv, cos_un = _cosine_terms(u, v, neg)
    return _loss_value(cos_uv, cos_un)


def sample_negatives(
    pair_index: int,
    induced: InducedDictionary,
    j_count: int,
    rng_seed: int = 0,
) -> np.ndarray:
    """J distinct non-gold target row indices for one induced pair."""
    n_tgt = induced.n_tgt
    assert n_tgt is not None
    if n_tgt <= j_count:
        raise ValueError(f"target vocabulary of {n_tgt} cannot supply {j_count} negatives")
    gold = induced.pairs[pair_index][1]
    rng = derived_rng(rng_seed, "negatives", pair_index)
    draw = rng.choice(n_tgt - 1, size=j_count, replace=False)
    draw[draw >= gold] += 1
    return draw


def training_loss_and_gradients(
    network: SpringNetwork,
    src_rows: np.ndarray,
    tgt_rows: np.ndarray,
    negative_rows: np.ndarray,
) -> tuple[float, FeedforwardParams, FeedforwardParams]:
    """Loss and parameter gradients for one batch.

    ``negative_rows`` has shape (pairs, J, dim) and holds raw mapped target
    vectors; the target-side network is applied to them here, so gradients
    flow through positives and negatives alike.  When the network is
    shared, both returned gradients are the same accumulated object.
    """
    pairs, dim = src_rows.shape
    j_count = negative_rows.shape[1]
    src_params = network.src
    tgt_params = network.tgt

    src_out, src_hidden = _net_forward(src_params, src_rows)
    tgt_out, tgt_hidden = _net_forward(tgt_params, tgt_rows)
    neg_flat = negative_rows.reshape(pairs * j_count, dim)
    neg_out, neg_hidden = _net_forward(tgt_params, neg_flat)

    u = src_rows + src_out
    v = tgt_rows + tgt_out
    n = (neg_flat + neg_out).reshape(pairs, j_count, dim)

    nu, nv, nn, cos_uv, cos_un = _cosine_terms(u, v, n)
    loss = _loss_value(cos_uv, cos_un)

    # d cos(a, b) / d a = b / (|a||b|) - cos * a / |a|^2
    dcos_uv_du = v / (nu * nv)[:, None] - (cos_uv / nu**2)[:, None] * u
    dcos_uv_dv = u / (nu * nv)[:, None] - (cos_uv / nv**2)[:, None] * v
    dcos_un_du = n / (nu[:, None] * nn)[:, :, None] - (cos_un / nu[:, None] ** 2)[:, :, None] * u[:, None, :]
    dcos_un_dn = u[:, None, :] / (nu[:, None] * nn)[:, :, None] - (cos_un / nn**2)[:, :, None] * n

    grad_u = -j_count * dcos_uv_du + dcos_un_du.sum(axis=1)
    grad_v = -j_count * dcos_uv_dv
    grad_n = dcos_un_dn.reshape(pairs * j_count, dim)

    grads_src = _net_backward(src_params, src_rows, src_hidden, grad_u)
    grads_tgt = _net_backward(tgt_params, tgt_rows, tgt_hidden, grad_v)
    grads_neg = _net_backward(tgt_params, neg_flat, neg_hidden, grad_n)
    for tensor, extra in zip(grads_tgt.tensors(), grads_neg.tensors()):
        tensor += extra
    if network.shared:
        for tensor, extra in zip(grads_src.tensors(), grads_tgt.tensors()):
            tensor += extra
        return loss, grads_src, grads_src
    return loss, grads_src, grads_tgt


def _select_pairs(induced: InducedDictionary, limit: int) -> list[int]:
    order = sorted(range(len(induced)), key=lambda i: (-induced.pairs[i][2], induced.pairs[i][0]))
    return order[:limit]


def train_spring(
    src_mapped: EmbeddingSpace,
    tgt_mapped: EmbeddingSpace,
    induced: InducedDictionary,
    config: SpringTrainConfig | None = None,
) -> SpringTraining:
    """Gradient descent on the contrastive objective over induced pairs.

    The per-epoch loss curve is evaluated on a fixed negative sample so
    epochs are comparable; training negatives are resampled every epoch
    unless configured otherwise.  Returns the parameters with the lowest
    recorded epoch loss (the initialization counts as epoch 0).
    """
    config = config or SpringTrainConfig()
    if src_mapped.dim != tgt_mapped.dim:
        raise ValueError("mapped spaces differ in dimension")
    if len(induced) == 0:
        raise ValueError("induced dictionary is empty")
    limit = config.pair_count if config.pair_count is not None else min(4000, len(induced))
    if limit > len(induced):
        raise ValueError("pair_count exceeds the induced dictionary size")
    j_count = config.negatives_per_pair
    assert induced.n_tgt is not None
    if j_count >= induced.n_tgt:
        raise ValueError("negatives_per_pair must be smaller than the target vocabulary")

    selected = _select_pairs(induced, limit)
    src_idx = np.array([induced.pairs[i][0] for i in selected], dtype=np.intp)
    tgt_idx = np.array([induced.pairs[i][1] for i in selected], dtype=np.intp)
    x_rows = src_mapped.matrix[src_idx]
    y_rows = tgt_mapped.matrix[tgt_idx]

    def negatives_for(epoch: int) -> np.ndarray:
        seed = stable_digest(config.rng_seed, "neg-epoch", epoch)
        ids = np.stack([sample_negatives(i, induced, j_count, seed) for i in selected])
        return tgt_mapped.matrix[ids]

    eval_negatives = negatives_for(0)
    network = new_spring_network(
        src_mapped.dim,
        hidden_width=config.hidden_width,
        rng_seed=config.rng_seed,
        shared=config.share_networks,
    )

    def full_loss(net: SpringNetwork) -> float:
        loss, _, _ = training_loss_and_gradients(net, x_rows, y_rows, eval_negatives)
        return loss

    losses = [full_loss(network)]
    best_loss = losses[0]
    best_params = network.copy()
    diverged = False

    count = len(selected)
    for epoch in range(1, config.epochs + 1):
        negatives = negatives_for(epoch) if config.resample_negatives else eval_negatives
        order = derived_rng(config.rng_seed, "shuffle", epoch).permutation(count)
        for start in range(0, count, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads_src, grads_tgt = training_loss_and_gradients(
                network, x_rows[batch], y_rows[batch], negatives[batch]
            )
            if not np.isfinite(loss):
                diverged = True
                break
            scale = config.learning_rate / len(batch)
            for params, grads in ((network.src, grads_src), (network.tgt, grads_tgt)):
                params.w1 -= scale * grads.w1
                params.b1 -= scale * grads.b1
                params.w2 -= scale * grads.w2
                params.b2 -= scale * grads.b2
                if network.shared:
                    break
        if diverged:
            break
        epoch_loss = full_loss(network)
        if not np.isfinite(epoch_loss):
            diverged = True
            break
        losses.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_params = network.copy()
    return SpringTraining(network=best_params, epoch_losses=losses, diverged=diverged)


def save_loss_log(losses: Sequence[float], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("epoch\tloss\n")
        for epoch, loss in enumerate(losses):
            handle.write(f"{epoch}\t{format_float(loss)}\n")


def _write_params(handle, label: str, params: FeedforwardParams) -> None:
    handle.write(f"params {label}\n")
    for name, tensor in (("w1", params.w1), ("b1", params.b1), ("w2", params.w2), ("b2", params.b2)):
        block = np.atleast_2d(tensor)
        handle.write(f"{name} {block.shape[0]} {block.shape[1]}\n")
        for row in block:
            handle.write(" ".join(format_float(v) for v in row) + "\n")


def save_spring_network(network: SpringNetwork, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("domlex-spring 1\n")
        handle.write(f"dim {network.dim}\n")
        handle.write(f"hidden {network.hidden_width}\n")
        handle.write(f"nonlinearity {network.nonlinearity}\n")
        handle.write(f"rng_seed {network.rng_seed}\n")
        handle.write(f"shared {int(network.shared)}\n")
        if network.shared:
            _write_params(handle, "shared", network.src)
        else:
            _write_params(handle, "src", network.src)
            _write_params(handle, "tgt", network.tgt)


def _read_params(lines: list[str], pos: int, label: str) -> tuple[FeedforwardParams, int]:
    if lines[pos] != f"params {label}":
        raise DataFormatError(f"expected 'params {label}', found {lines[pos]!r}")
    pos += 1
    tensors: dict[str, np.ndarray] = {}
    for name in ("w1", "b1", "w2", "b2"):
        fields = lines[pos].split(" ")
        if fields[0] != name:
            raise DataFormatError(f"expected tensor '{name}', found {lines[pos]!r}")
        rows, cols = int(fields[1]), int(fields[2])
        block = np.array([line.split(" ") for line in lines[pos + 1 : pos + 1 + rows]], dtype=np.float64)
        if block.shape != (rows, cols):
            raise DataFormatError(f"tensor '{name}' has wrong shape")
        tensors[name] = block[0] if name in ("b1", "b2") else block
        pos += 1 + rows
    return FeedforwardParams(**tensors), pos


def load_spring_network(path: str) -> SpringNetwork:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != "domlex-spring 1":
        raise DataFormatError(f"{path}: not a spring network file")
    hidden = int(lines[2].removeprefix("hidden "))
    nonlinearity = lines[3].removeprefix("nonlinearity ")
    rng_seed = int(lines[4].removeprefix("rng_seed "))
    shared = bool(int(lines[5].removeprefix("shared ")))
    pos = 6
    if shared:
        src, pos = _read_params(lines, pos, "shared")
        tgt = src
    else:
        src, pos = _read_params(lines, pos, "src")
        tgt, pos = _read_params(lines, pos, "tgt")
    return SpringNetwork(
        src=src,
        tgt=tgt,
        hidden_width=hidden,
        nonlinearity=nonlinearity,
        rng_seed=rng_seed,
        shared=shared,
    )
