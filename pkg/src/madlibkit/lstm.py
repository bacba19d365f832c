"""An LSTM over the prompt and image feature, trained with a cosine loss.

The image feature is linearly projected and concatenated to the learnable
token embedding at every timestep. The final hidden state is mapped into the
word-vector space, and training maximizes cosine similarity between that
output embedding and the sum of the correct completion's word vectors. At
test time the candidate whose word-vector sum is most similar to the output
embedding wins.

Everything is double precision and explicitly seeded; gradients are exact
backpropagation through time (verified against finite differences in the
test suite).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError, ShapeError, UnencodableAnswerError, ZeroNormError
from .pooling import BLANK_TOKEN, UNK_TOKEN, EmbeddingTable
from .selection import choose_completion

__all__ = [
    "LstmConfig",
    "LstmParams",
    "TokenVocab",
    "AdamState",
    "LstmExample",
    "TrainedLstm",
    "lstm_step",
    "forward",
    "cosine_loss",
    "backward",
    "adam_step",
    "train",
    "predict",
    "sum_word_vectors",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = "ELSTM1"

_GATES = ("i", "f", "o", "g")


@dataclass(frozen=True)
class LstmConfig:
    """Learnable sizes and training knobs; dims the data fixes are not here."""

    hidden_dim: int = 256
    token_dim: int = 128
    image_dim: int = 128
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    alpha: float = 0.001


@dataclass
class LstmParams:
    """All learnable tensors of the network."""

    token_embed: np.ndarray  # (V, dt)
    image_w: np.ndarray  # (dv_in, dv)
    image_b: np.ndarray  # (dv,)
    w_i: np.ndarray  # (dt + dv + dh, dh), likewise w_f, w_o, w_g
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray  # (dh,), likewise b_f, b_o, b_g
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    out_w: np.ndarray  # (dh, out_dim)
    out_b: np.ndarray  # (out_dim,)

    FIELDS = (
        "token_embed",
        "image_w",
        "image_b",
        "w_i",
        "w_f",
        "w_o",
        "w_g",
        "b_i",
        "b_f",
        "b_o",
        "b_g",
        "out_w",
        "out_b",
    )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.FIELDS}

    def copy(self) -> "LstmParams":
        return LstmParams(**{name: getattr(self, name).copy() for name in self.FIELDS})

    @property
    def vocab_size(self) -> int:
        return self.token_embed.shape[0]

    @property
    def token_dim(self) -> int:
        return self.token_embed.shape[1]

    @property
    def image_in_dim(self) -> int:
        return self.image_w.shape[0]

    @property
    def image_dim(self) -> int:
        return self.image_w.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_i.shape[1]

    @property
    def out_dim(self) -> int:
        return self.out_w.shape[1]


@dataclass(frozen=True)
class TokenVocab:
    """Dense token -> index map with reserved ``<BLANK>`` and ``<UNK>`` entries."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[:2] != (BLANK_TOKEN, UNK_TOKEN):
            raise InvalidInputError(f"vocab must start with {BLANK_TOKEN}, {UNK_TOKEN}")
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidInputError("vocab tokens must be unique")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @classmethod
    def from_prompts(cls, prompts: Iterable[Sequence[str]]) -> "TokenVocab":
        seen = {t for prompt in prompts for t in prompt}
        seen.discard(BLANK_TOKEN)
        seen.discard(UNK_TOKEN)
        return cls(tokens=(BLANK_TOKEN, UNK_TOKEN) + tuple(sorted(seen)))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        """Map tokens to indices; unknown tokens map to ``<UNK>``."""
        index = self._index
        unk = index[UNK_TOKEN]
        return [index.get(t, unk) for t in tokens]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def lstm_step(
    params: LstmParams, input_vec: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update; returns the new hidden and cell states."""
    input_vec = np.asarray(input_vec, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    dh = params.hidden_dim
    if h_prev.shape != (dh,) or c_prev.shape != (dh,):
        raise ShapeError(f"state must have shape ({dh},)")
    if input_vec.shape != (params.w_i.shape[0] - dh,):
        raise ShapeError(f"input must have shape ({params.w_i.shape[0] - dh},), got {input_vec.shape}")
    z = np.concatenate([input_vec, h_prev])
    i = _sigmoid(z @ params.w_i + params.b_i)
    f = _sigmoid(z @ params.w_f + params.b_f)
    o = _sigmoid(z @ params.w_o + params.b_o)
    g = np.tanh(z @ params.w_g + params.b_g)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def _forward_steps(params: LstmParams, image_feat: np.ndarray, prompt_idx: Sequence[int]):
    """Run the unrolled network, returning the output embedding and caches."""
    image_feat = np.asarray(image_feat, dtype=np.float64)
    if image_feat.shape != (params.image_in_dim,):
        raise ShapeError(f"image feature must have shape ({params.image_in_dim},), got {image_feat.shape}")
    if len(prompt_idx) == 0:
        raise InvalidInputError("prompt must be nonempty")
    v = image_feat @ params.image_w + params.image_b
    dh = params.hidden_dim
    h = np.zeros(dh)
    c = np.zeros(dh)
    steps = []
    for w in prompt_idx:
        x = np.concatenate([params.token_embed[w], v])
        z = np.concatenate([x, h])
        i = _sigmoid(z @ params.w_i + params.b_i)
        f = _sigmoid(z @ params.w_f + params.b_f)
        o = _sigmoid(z @ params.w_o + params.b_o)
        g = np.tanh(z @ params.w_g + params.b_g)
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        steps.append({"z": z, "i": i, "f": f, "o": o, "g": g, "c_prev": c, "tanh_c": tanh_c})
        h = o * tanh_c
        c = c_new
    e = h @ params.out_w + params.out_b
    return e, h, steps


def forward(params: LstmParams, image_feat: np.ndarray, prompt_idx: Sequence[int]) -> np.ndarray:
    """Output embedding for an image feature and an encoded prompt."""
    e, _, _ = _forward_steps(params, image_feat, prompt_idx)
    return e


def cosine_loss(e: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Negative cosine similarity and its gradient with respect to ``e``."""
    e = np.asarray(e, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if e.shape != target.shape:
        raise ShapeError(f"dims differ: {e.shape} vs {target.shape}")
    ne = np.linalg.norm(e)
    nt = np.linalg.norm(target)
    if ne == 0.0 or nt == 0.0:
        raise ZeroNormError("cosine loss undefined for zero-norm input")
    cos = float(e @ target) / (ne * nt)
    grad_e = -(target / (ne * nt) - cos * e / (ne * ne))
    return -cos, grad_e


def backward(
    params: LstmParams,
    image_feat: np.ndarray,
    prompt_idx: Sequence[int],
    target: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and full backpropagation-through-time gradients for one instance.

    The gradient dict mirrors :attr:`LstmParams.FIELDS`; token-embedding rows
    of tokens absent from the prompt stay exactly zero.
    """
    e, h_final, steps = _forward_steps(params, image_feat, prompt_idx)
    loss, grad_e = cosine_loss(e, target)

    grads = {name: np.zeros_like(getattr(params, name)) for name in LstmParams.FIELDS}
    grads["out_w"] += np.outer(h_final, grad_e)
    grads["out_b"] += grad_e

    split = params.token_dim + params.image_dim
    dh = params.out_w @ grad_e
    dc_next = np.zeros(params.hidden_dim)
    dv_total = np.zeros(params.image_dim)
    for t in range(len(steps) - 1, -1, -1):
        s = steps[t]
        i, f, o, g, tanh_c = s["i"], s["f"], s["o"], s["g"], s["tanh_c"]
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        dg = dc * i
        df = dc * s["c_prev"]
        dc_next = dc * f

        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_g = dg * (1.0 - g * g)

        z = s["z"]
        grads["w_i"] += np.outer(z, da_i)
        grads["w_f"] += np.outer(z, da_f)
        grads["w_o"] += np.outer(z, da_o)
        grads["w_g"] += np.outer(z, da_g)
        grads["b_i"] += da_i
        grads["b_f"] += da_f
        grads["b_o"] += da_o
        grads["b_g"] += da_g

        dz = params.w_i @ da_i + params.w_f @ da_f + params.w_o @ da_o + params.w_g @ da_g
        grads["token_embed"][prompt_idx[t]] += dz[: params.token_dim]
        dv_total += dz[params.token_dim : split]
        dh = dz[split:]

    grads["image_w"] += np.outer(np.asarray(image_feat, dtype=np.float64), dv_total)
    grads["image_b"] += dv_total
    return loss, grads


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for Adam."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: LstmParams, alpha: float = 0.001) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.as_dict().items()},
            v={name: np.zeros_like(arr) for name, arr in params.as_dict().items()},
            alpha=alpha,
        )


def adam_step(
    state: AdamState, params: LstmParams, grads: dict[str, np.ndarray]
) -> tuple[LstmParams, AdamState]:
    """One Adam update; parameter arrays and the state are updated in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, theta in params.as_dict().items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {theta.shape}")
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        theta -= state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def init_params(
    vocab_size: int,
    image_in_dim: int,
    out_dim: int,
    config: LstmConfig,
    rng: np.random.Generator,
) -> LstmParams:
    """Uniform(-s, s) with s = 1/sqrt(fan_in) per matrix; forget bias starts at 1."""
    dt, dv, dh = config.token_dim, config.image_dim, config.hidden_dim

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    zin = dt + dv + dh
    return LstmParams(
        token_embed=uniform((vocab_size, dt), dt),
        image_w=uniform((image_in_dim, dv), image_in_dim),
        image_b=np.zeros(dv),
        w_i=uniform((zin, dh), zin),
        w_f=uniform((zin, dh), zin),
        w_o=uniform((zin, dh), zin),
        w_g=uniform((zin, dh), zin),
        b_i=np.zeros(dh),
        b_f=np.ones(dh),  # open forget gate for stable early training
        b_o=np.zeros(dh),
        b_g=np.zeros(dh),
        out_w=uniform((dh, out_dim), dh),
        out_b=np.zeros(out_dim),
    )


@dataclass(frozen=True)
class LstmExample:
    """One training instance: image feature, prompt tokens, target word-vector sum."""

    image_feat: np.ndarray
    prompt: tuple[str, ...]
    target: np.ndarray


@dataclass
class TrainedLstm:
    """Training output: parameters, the vocabulary, and the config used."""

    params: LstmParams
    vocab: TokenVocab
    config: LstmConfig
    epoch_losses: list[float] = field(default_factory=list)


def train(dataset: Sequence[LstmExample], config: LstmConfig = LstmConfig()) -> TrainedLstm:
    """Train on shuffled minibatches with Adam; fully determined by the seed.

    Gradients are averaged within each batch. The recorded per-epoch loss is
    the mean training loss of the instances as they were visited.
    """
    if len(dataset) == 0:
        raise InvalidInputError("training dataset is empty")
    if config.batch_size < 1 or config.epochs < 0:
        raise InvalidInputError("batch_size must be >= 1 and epochs >= 0")
    out_dim = dataset[0].target.shape[0]
    image_in_dim = dataset[0].image_feat.shape[0]
    for k, ex in enumerate(dataset):
        if ex.image_feat.shape != (image_in_dim,) or ex.target.shape != (out_dim,):
            raise ShapeError(f"example {k} has inconsistent shapes")
        if np.linalg.norm(ex.target) == 0.0:
            raise InvalidInputError(f"example {k} has a zero-norm target")

    vocab = TokenVocab.from_prompts([ex.prompt for ex in dataset])
    encoded = [vocab.encode(ex.prompt) for ex in dataset]

    rng = np.random.default_rng(config.seed)
    params = init_params(len(vocab), image_in_dim, out_dim, config, rng)
    state = AdamState.for_params(params, alpha=config.alpha)

    epoch_losses: list[float] = []
    n = len(dataset)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            batch_grads = {name: np.zeros_like(arr) for name, arr in params.as_dict().items()}
            for idx in batch:
                ex = dataset[idx]
                loss, grads = backward(params, ex.image_feat, encoded[idx], ex.target)
                total_loss += loss
                for name in batch_grads:
                    batch_grads[name] += grads[name]
            for name in batch_grads:
                batch_grads[name] /= len(batch)
            adam_step(state, params, batch_grads)
        epoch_losses.append(total_loss / n)
    return TrainedLstm(params=params, vocab=vocab, config=config, epoch_losses=epoch_losses)


def sum_word_vectors(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Sum of word vectors of the in-vocabulary tokens (the training target)."""
    found = [table[t] for t in tokens if t in table]
    if not found:
        raise UnencodableAnswerError(f"no in-vocabulary token among {list(tokens)!r}")
    return np.sum(found, axis=0)


def predict(
    params: LstmParams,
    vocab: TokenVocab,
    image_feat: np.ndarray,
    prompt: Sequence[str],
    candidates: Sequence[Sequence[str]],
    table: EmbeddingTable,
) -> int:
    """Argmax over candidates of cosine similarity with the output embedding.

    Candidate token sequences are encoded by word-vector sums; unencodable
    and zero-norm candidates rank last, exactly as in the retrieval rule.
    """
    e = forward(params, image_feat, vocab.encode(prompt))
    targets: list[Optional[np.ndarray]] = []
    for cand in candidates:
        try:
            targets.append(sum_word_vectors(cand, table))
        except UnencodableAnswerError:
            targets.append(None)
    return choose_completion(e, targets)


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    fh.write(f"{name} {' '.join(str(d) for d in arr.shape)}\n")
    rows = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
    for row in rows:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def save_checkpoint(trained: TrainedLstm, path: str | Path) -> None:
    """Write a versioned text checkpoint: config, vocabulary, all tensors."""
    cfg = trained.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write(
            f"{cfg.hidden_dim} {cfg.token_dim} {cfg.image_dim} "
            f"{cfg.epochs} {cfg.batch_size} {cfg.seed} {cfg.alpha!r}\n"
        )
        fh.write(f"{len(trained.vocab)}\n")
        for token in trained.vocab.tokens:
            fh.write(token + "\n")
        for name, arr in trained.params.as_dict().items():
            _write_array(fh, name, arr)


def load_checkpoint(path: str | Path) -> TrainedLstm:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ParseError(f"not a {CHECKPOINT_MAGIC} checkpoint: {path}", line=1)
    try:
        cfg_parts = lines[1].split()
        config = LstmConfig(
            hidden_dim=int(cfg_parts[0]),
            token_dim=int(cfg_parts[1]),
            image_dim=int(cfg_parts[2]),
            epochs=int(cfg_parts[3]),
            batch_size=int(cfg_parts[4]),
            seed=int(cfg_parts[5]),
            alpha=float(cfg_parts[6]),
        )
        vocab_size = int(lines[2])
        tokens = tuple(lines[3 : 3 + vocab_size])
        cursor = 3 + vocab_size
        arrays: dict[str, np.ndarray] = {}
        for expected in LstmParams.FIELDS:
            header = lines[cursor].split()
            cursor += 1
            if header[0] != expected:
                raise ParseError(f"expected tensor {expected!r}, found {header[0]!r}", line=cursor)
            shape = tuple(int(d) for d in header[1:])
            n_rows = shape[0] if len(shape) == 2 else 1
            rows = []
            for _ in range(n_rows):
                rows.append([float(p) for p in lines[cursor].split()])
                cursor += 1
            arrays[expected] = np.array(rows, dtype=np.float64).reshape(shape)
    except ParseError:
        raise
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed checkpoint {path}: {exc}") from None
    return TrainedLstm(params=LstmParams(**arrays), vocab=TokenVocab(tokens=tokens), config=config)
