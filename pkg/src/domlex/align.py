"""Fully unsupervised alignment of two embedding spaces.

The pipeline: sorted-similarity initialization, then a self-learning loop
alternating an orthogonal Procrustes solve with dictionary re-induction
in the mapped space.  Optional whitening and re-weighting wrap the
orthogonal map; both are off by default, in which case the learned maps
are orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import DataFormatError
from .retrieval import DEFAULT_CSLS_K, METRICS, InducedDictionary, score_rows
from .seeding import derived_rng
from .store import EmbeddingSpace, _apply_step, format_float

EIGENVALUE_FLOOR = 1e-9
DEFAULT_INIT_CUTOFF = 4000


@dataclass
class SelfLearnConfig:
    metric: str = "csls"
    csls_k: int = DEFAULT_CSLS_K
    max_iterations: int = 100
    convergence_tolerance: float = 1e-6
    stochastic_keep_probability: float = 0.9
    rng_seed: int = 0
    init_vocab_cutoff: int = DEFAULT_INIT_CUTOFF
    use_whitening: bool = False
    reweight_exponent: float = 0.0

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric '{self.metric}'")
        if self.csls_k < 1:
            raise ValueError("csls_k must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.convergence_tolerance <= 0.0:
            raise ValueError("convergence_tolerance must be positive")
        if not 0.0 < self.stochastic_keep_probability <= 1.0:
            raise ValueError("stochastic_keep_probability must lie in (0, 1]")
        if self.init_vocab_cutoff < 2:
            raise ValueError("init_vocab_cutoff must be at least 2")
        if self.reweight_exponent < 0.0:
            raise ValueError("reweight_exponent must be non-negative")


@dataclass
class AlignmentModel:
    """The pair of linear maps placing two spaces into one cross-lingual space."""

    w_src: np.ndarray
    w_tgt: np.ndarray
    whitening_src: np.ndarray | None = None
    whitening_tgt: np.ndarray | None = None
    reweight_exponent: float = 0.0
    singular_values: np.ndarray | None = None
    normalization: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.w_src = np.asarray(self.w_src, dtype=np.float64)
        self.w_tgt = np.asarray(self.w_tgt, dtype=np.float64)
        if self.w_src.shape != self.w_tgt.shape or self.w_src.shape[0] != self.w_src.shape[1]:
            raise ValueError("w_src and w_tgt must be square matrices of equal shape")
        if self.singular_values is not None:
            self.singular_values = np.asarray(self.singular_values, dtype=np.float64)
        if self.reweight_exponent < 0.0:
            raise ValueError("reweight_exponent must be non-negative")

    @property
    def dim(self) -> int:
        return self.w_src.shape[0]


def _considered(space: EmbeddingSpace, cutoff: int) -> np.ndarray:
    # Vector files conventionally list words by descending frequency, so a
    # prefix cut keeps the most frequent words.
    return space.matrix[: min(cutoff, len(space))]


def unsupervised_init(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    cutoff: int = DEFAULT_INIT_CUTOFF,
) -> InducedDictionary:
    """Match words across languages by their sorted intra-lingual similarity profiles.

    Computes M = X X^T per language, sorts every row, and pairs each source
    row with the target row whose sorted profile is nearest (cosine over
    sorted profiles, ties to the lowest index).  Both sides are truncated
    to the same length so profiles are comparable.
    """
    if src.dim != tgt.dim:
        raise ValueError("source and target spaces differ in dimension")
    n = min(cutoff, len(src), len(tgt))
    if n < 2:
        if len(src) == 1 and len(tgt) == 1:
            return InducedDictionary(pairs=[(0, 0, 1.0)], n_src=1, n_tgt=1)
        raise ValueError("need at least 2 words per side for initialization")
    x = _considered(src, n)
    z = _considered(tgt, n)
    profile_x = np.sort(x @ x.T, axis=1)
    profile_z = np.sort(z @ z.T, axis=1)
    sims = score_rows(profile_x, profile_z, metric="cosine")
    best = np.argmax(sims, axis=1)
    pairs = [(int(i), int(j), float(sims[i, j])) for i, j in enumerate(best)]
    return InducedDictionary(pairs=pairs, n_src=len(src), n_tgt=len(tgt))


def _orthogonal_maps(
    x_rows: np.ndarray, z_rows: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cross = x_rows.T @ z_rows
    u, s, vt = np.linalg.svd(cross)
    if s[0] <= 0.0:
        raise ValueError("degenerate cross-covariance (rank 0)")
    return u, vt.T, s


def procrustes(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    seed: InducedDictionary,
) -> AlignmentModel:
    """Closed-form orthogonal maps maximizing summed similarity of seed pairs.

    With cross-covariance M = X^T Z = U S V^T over the seed-paired rows,
    w_src = U and w_tgt = V jointly maximize sum_i (x_i w_src) . (z_i w_tgt).
    """
    if len(seed) == 0:
        raise ValueError("seed dictionary is empty")
    if src.dim != tgt.dim:
        raise ValueError("source and target spaces differ in dimension")
    x_rows = src.matrix[seed.src_indices()]
    z_rows = tgt.matrix[seed.tgt_indices()]
    w_src, w_tgt, s = _orthogonal_maps(x_rows, z_rows)
    return AlignmentModel(
        w_src=w_src,
        w_tgt=w_tgt,
        singular_values=s,
        normalization=src.normalization_history,
    )


def _whitening_matrix(matrix: np.ndarray) -> np.ndarray:
    cov = matrix.T @ matrix / max(matrix.shape[0], 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, EIGENVALUE_FLOOR)
    return eigvecs @ np.diag(eigvals**-0.5) @ eigvecs.T


def _drop_pairs(
    dictionary: InducedDictionary, keep_probability: float, rng: np.random.Generator
) -> InducedDictionary:
    if keep_probability >= 1.0:
        return dictionary
    mask = rng.random(len(dictionary)) < keep_probability
    if mask.sum() < 2:
        return dictionary
    kept = [pair for pair, keep in zip(dictionary.pairs, mask) if keep]
    return InducedDictionary(
        pairs=kept,
        direction=dictionary.direction,
        n_src=dictionary.n_src,
        n_tgt=dictionary.n_tgt,
    )


def self_learn(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    config: SelfLearnConfig | None = None,
    objective_trace: list[float] | None = None,
) -> AlignmentModel:
    """Alternate Procrustes and dictionary induction from an unsupervised start.

    Pairs are stochastically dropped (rate 1 - keep_probability) before each
    Procrustes solve to escape local optima.  Stops once the mean retrieval
    score improves by less than the tolerance; returns the best model seen.
    If ``objective_trace`` is given it receives the per-iteration mean
    retrieval scores.
    """
    config = config or SelfLearnConfig()
    if src.dim != tgt.dim:
        raise ValueError("source and target spaces differ in dimension")
    if src.normalization_history != tgt.normalization_history:
        raise ValueError("spaces were not normalized with the same pipeline")

    x = src.matrix
    z = tgt.matrix
    whitening_src = whitening_tgt = None
    if config.use_whitening:
        whitening_src = _whitening_matrix(x)
        whitening_tgt = _whitening_matrix(z)
        x = x @ whitening_src
        z = z @ whitening_tgt

    current = unsupervised_init(src, tgt, cutoff=config.init_vocab_cutoff)
    best_score = -np.inf
    best_model: AlignmentModel | None = None
    previous_score = -np.inf
    for iteration in range(config.max_iterations):
        rng = derived_rng(config.rng_seed, "self-learn-drop", iteration)
        used = _drop_pairs(current, config.stochastic_keep_probability, rng)
        w_src, w_tgt, s = _orthogonal_maps(
            x[used.src_indices()], z[used.tgt_indices()]
        )
        reweight = s**config.reweight_exponent if config.reweight_exponent else None
        x_mapped = x @ w_src
        z_mapped = z @ w_tgt
        if reweight is not None:
            x_mapped = x_mapped * reweight
            z_mapped = z_mapped * reweight
        scores = score_rows(x_mapped, z_mapped, metric=config.metric, k=config.csls_k)
        best_tgt = np.argmax(scores, axis=1)
        chosen = scores[np.arange(scores.shape[0]), best_tgt]
        mean_score = float(chosen.mean())
        if objective_trace is not None:
            objective_trace.append(mean_score)
        if mean_score > best_score:
            best_score = mean_score
            best_model = AlignmentModel(
                w_src=w_src,
                w_tgt=w_tgt,
                whitening_src=whitening_src,
                whitening_tgt=whitening_tgt,
                reweight_exponent=config.reweight_exponent,
                singular_values=s,
                normalization=src.normalization_history,
            )
        current = InducedDictionary(
            pairs=[(int(i), int(j), float(v)) for i, (j, v) in enumerate(zip(best_tgt, chosen))],
            n_src=len(src),
            n_tgt=len(tgt),
        )
        if iteration > 0 and mean_score - previous_score < config.convergence_tolerance:
            break
        previous_score = mean_score
    assert best_model is not None
    return best_model


def map_space(space: EmbeddingSpace, model: AlignmentModel, side: str) -> EmbeddingSpace:
    """Apply normalization, optional whitening, the orthogonal map, and re-weighting.

    The model's normalization pipeline is applied first unless the space's
    history already ends with it (so spaces normalized ahead of alignment
    are not normalized twice).
    """
    if side not in ("src", "tgt"):
        raise ValueError("side must be 'src' or 'tgt'")
    if space.dim != model.dim:
        raise ValueError("space and model dimensions differ")
    w = model.w_src if side == "src" else model.w_tgt
    whitening = model.whitening_src if side == "src" else model.whitening_tgt

    matrix = space.matrix
    history = space.normalization_history
    pipeline = model.normalization
    if pipeline and history[len(history) - len(pipeline):] != pipeline:
        for step in pipeline:
            matrix = _apply_step(matrix, step)
        history = history + pipeline

    if whitening is not None:
        matrix = matrix @ whitening
        history = history + ("whiten",)
    matrix = matrix @ w
    if model.reweight_exponent:
        if model.singular_values is None:
            raise ValueError("re-weighting requires singular values on the model")
        matrix = matrix * model.singular_values**model.reweight_exponent
        history = history + ("reweight",)
    return EmbeddingSpace(
        vocab=space.vocab,
        matrix=matrix,
        kind=space.kind,
        normalization_history=history,
        duplicates_dropped=space.duplicates_dropped,
    )


def _write_matrix(handle: TextIO, name: str, matrix: np.ndarray | None) -> None:
    if matrix is None:
        handle.write(f"{name} none\n")
        return
    handle.write(f"{name} {matrix.shape[0]} {matrix.shape[1]}\n")
    for row in matrix:
        handle.write(" ".join(format_float(v) for v in row) + "\n")


def _read_matrix(lines: list[str], pos: int, name: str) -> tuple[np.ndarray | None, int]:
    fields = lines[pos].split(" ")
    if fields[0] != name:
        raise DataFormatError(f"expected section '{name}', found {lines[pos]!r}")
    if fields[1:] == ["none"]:
        return None, pos + 1
    rows, cols = int(fields[1]), int(fields[2])
    block = lines[pos + 1 : pos + 1 + rows]
    matrix = np.array([row.split(" ") for row in block], dtype=np.float64)
    if matrix.shape != (rows, cols):
        raise DataFormatError(f"section '{name}' has wrong shape")
    return matrix, pos + 1 + rows


def save_alignment_model(model: AlignmentModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("domlex-alignment 1\n")
        handle.write(f"dim {model.dim}\n")
        handle.write("normalization " + (",".join(model.normalization) or "none") + "\n")
        handle.write(f"reweight_exponent {format_float(model.reweight_exponent)}\n")
        if model.singular_values is None:
            handle.write("singular_values none\n")
        else:
            values = " ".join(format_float(v) for v in model.singular_values)
            handle.write(f"singular_values {values}\n")
        _write_matrix(handle, "whitening_src", model.whitening_src)
        _write_matrix(handle, "whitening_tgt", model.whitening_tgt)
        _write_matrix(handle, "w_src", model.w_src)
        _write_matrix(handle, "w_tgt", model.w_tgt)


def load_alignment_model(path: str) -> AlignmentModel:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != "domlex-alignment 1":
        raise DataFormatError(f"{path}: not an alignment model file")
    if not lines[1].startswith("dim "):
        raise DataFormatError(f"{path}: missing dim header")
    norm_field = lines[2].removeprefix("normalization ")
    normalization = () if norm_field == "none" else tuple(norm_field.split(","))
    reweight = float(lines[3].removeprefix("reweight_exponent "))
    sv_field = lines[4].removeprefix("singular_values ")
    singular_values = None if sv_field == "none" else np.array(sv_field.split(" "), dtype=np.float64)
    pos = 5
    whitening_src, pos = _read_matrix(lines, pos, "whitening_src")
    whitening_tgt, pos = _read_matrix(lines, pos, "whitening_tgt")
    w_src, pos = _read_matrix(lines, pos, "w_src")
    w_tgt, pos = _read_matrix(lines, pos, "w_tgt")
    if w_src is None or w_tgt is None:
        raise DataFormatError(f"{path}: missing orthogonal maps")
    return AlignmentModel(
        w_src=w_src,
        w_tgt=w_tgt,
        whitening_src=whitening_src,
        whitening_tgt=whitening_tgt,
        reweight_exponent=reweight,
        singular_values=singular_values,
        normalization=normalization,
    )
