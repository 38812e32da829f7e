"""Dual-branch time/frequency KAN forecaster.

The forward pass maps a window batch [B, N, L] to forecasts [B, N, tau].
Channels share all weights and never mix, so the channel axis is pure
batch.  The frequency branch optionally widens the input with a learnable
embedding vector, transforms along the temporal axis, runs a KAN over the
real and imaginary parts, and transforms back; the time branch runs a KAN
directly over the temporal axis.  Branch outputs plus both branch inputs
(a residual skip) are summed, flattened, and fed to a predictor network.

Every architectural ablation is a construction-time flag: any of the three
networks can be swapped for a two-layer ReLU MLP or (for the branches)
turned off, the embedding can be applied to either, both, or neither
branch, and the frequency network can be shared between the real and
imaginary parts or duplicated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .kan import KanStack, KnotGrid, TwoLayerMlp, param_count
from .spectral import complex_linear_combine, domain_detransform, domain_transform

__all__ = [
    "VariantFlags",
    "ModelConfig",
    "TfkanModel",
    "VARIANTS",
    "variant_flags",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
    "model_from_checkpoint",
    "param_breakdown",
]

_MODULE_KINDS = ("kan", "mlp", "off")
_ADJUST_MODES = ("freq-only", "all", "none", "time-only")
_SHARING_MODES = ("shared", "two")


@dataclass(frozen=True)
class VariantFlags:
    """Which network fills each slot, where the embedding applies, and
    whether the frequency network is shared across real/imaginary parts."""

    freq_module: str = "kan"
    time_module: str = "kan"
    predictor_module: str = "kan"
    adjust: str = "freq-only"
    freq_sharing: str = "shared"

    def __post_init__(self):
        if self.freq_module not in _MODULE_KINDS:
            raise ValueError(f"freq_module must be one of {_MODULE_KINDS}")
        if self.time_module not in _MODULE_KINDS:
            raise ValueError(f"time_module must be one of {_MODULE_KINDS}")
        if self.predictor_module not in ("kan", "mlp"):
            raise ValueError("predictor_module must be 'kan' or 'mlp'")
        if self.adjust not in _ADJUST_MODES:
            raise ValueError(f"adjust must be one of {_ADJUST_MODES}")
        if self.freq_sharing not in _SHARING_MODES:
            raise ValueError(f"freq_sharing must be one of {_SHARING_MODES}")
        if self.freq_module == "off" and self.time_module == "off":
            raise ValueError("frequency and time branches cannot both be off")


# The standard ablation matrix, in reporting order.
VARIANTS: dict[str, VariantFlags] = {
    "full": VariantFlags(),
    "mlp": VariantFlags(freq_module="mlp", time_module="mlp", predictor_module="mlp"),
    "mlp_time": VariantFlags(time_module="mlp"),
    "mlp_freq": VariantFlags(freq_module="mlp"),
    "mlp_pred": VariantFlags(predictor_module="mlp"),
    "mlp_time_freq": VariantFlags(freq_module="mlp", time_module="mlp"),
    "mlp_pred_time": VariantFlags(predictor_module="mlp", time_module="mlp"),
    "mlp_pred_freq": VariantFlags(predictor_module="mlp", freq_module="mlp"),
    "only_time": VariantFlags(freq_module="off"),
    "only_freq": VariantFlags(time_module="off"),
    "all_adjust": VariantFlags(adjust="all"),
    "no_adjust": VariantFlags(adjust="none"),
    "only_time_adjust": VariantFlags(adjust="time-only"),
    "two_freqkan": VariantFlags(freq_sharing="two"),
}


def variant_flags(name: str) -> VariantFlags:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ValueError(
            f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}"
        ) from None


@dataclass(frozen=True)
class ModelConfig:
    n_channels: int
    lookback: int
    horizon: int
    embed_dim: int = 128
    hidden: int = 258
    grid_size: int = 2
    spline_order: int = 1
    time_layers: int = 2
    predictor_layers: int = 2
    flags: VariantFlags = field(default_factory=VariantFlags)

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.lookback < 2:
            raise ValueError(f"lookback must be >= 2, got {self.lookback}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be >= 1, got {self.embed_dim}")
        if self.hidden < 1:
            raise ValueError(f"hidden must be >= 1, got {self.hidden}")
        if self.time_layers not in (1, 2) or self.predictor_layers not in (1, 2):
            raise ValueError("time_layers and predictor_layers must be 1 or 2")

    @property
    def freq_on(self) -> bool:
        return self.flags.freq_module != "off"

    @property
    def time_on(self) -> bool:
        return self.flags.time_module != "off"

    @property
    def freq_embedded(self) -> bool:
        return self.freq_on and self.flags.adjust in ("freq-only", "all")

    @property
    def time_embedded(self) -> bool:
        return self.time_on and self.flags.adjust in ("all", "time-only")

    @property
    def wide(self) -> bool:
        """True when the fused hidden state carries the embedding axis."""
        return self.freq_embedded or self.time_embedded

    @property
    def freq_width(self) -> int:
        """Trailing extent seen by the frequency network."""
        return self.embed_dim if self.freq_embedded else self.lookback // 2 + 1

    @property
    def predictor_in(self) -> int:
        return self.lookback * self.embed_dim if self.wide else self.lookback


def _build_net(kind: str, in_dim: int, out_dim: int, layers: int, config: ModelConfig,
               grid: KnotGrid, rng: np.random.Generator, name: str):
    if kind == "mlp":
        return TwoLayerMlp(in_dim, config.hidden, out_dim, rng, name)
    dims = [in_dim, out_dim] if layers == 1 else [in_dim, config.hidden, out_dim]
    return KanStack(dims, grid, rng, name)


def _clone_net(net, name: str, config: ModelConfig, grid: KnotGrid):
    # Scratch rng: the twin's init is overwritten below, and drawing from the
    # model rng here would shift every later component's init.
    kind = "mlp" if isinstance(net, TwoLayerMlp) else "kan"
    twin = _build_net(kind, net.dims[0], net.dims[-1], len(net.dims) - 1, config,
                      grid, np.random.default_rng(0), name)
    for (_, src), (_, dst) in zip(net.parameters(), twin.parameters()):
        dst.value[...] = src.value
    return twin


class TfkanModel:
    """Assembled forecaster; parameters are enumerable for the optimizer."""

    def __init__(self, config: ModelConfig, seed: int = 42):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        grid = KnotGrid.uniform(config.grid_size, config.spline_order)
        self.grid = grid
        flags = config.flags

        self.embed_w: Node | None = None
        if config.freq_embedded or config.time_embedded:
            self.embed_w = ad.parameter(
                rng.normal(0.0, 1.0 / np.sqrt(config.embed_dim), size=config.embed_dim),
                "embed.w",
            )

        self.freq_net = None
        self.freq_net_im = None
        if config.freq_on:
            w = config.freq_width
            self.freq_net = _build_net(
                flags.freq_module, w, w, 2, config, grid, rng, "freq"
            )
            if flags.freq_sharing == "two":
                # The twin starts from identical weights and diverges in training.
                self.freq_net_im = _clone_net(self.freq_net, "freq_im", config, grid)

        self.time_net = None
        if config.time_on:
            self.time_net = _build_net(
                flags.time_module, config.lookback, config.lookback,
                config.time_layers, config, grid, rng, "time",
            )

        self.predictor = _build_net(
            flags.predictor_module, config.predictor_in, config.horizon,
            config.predictor_layers, config, grid, rng, "pred",
        )

    def parameters(self) -> list[tuple[str, Node]]:
        params: list[tuple[str, Node]] = []
        if self.embed_w is not None:
            params.append((self.embed_w.name, self.embed_w))
        for net in (self.freq_net, self.freq_net_im, self.time_net, self.predictor):
            if net is not None:
                params.extend(net.parameters())
        return params

    def _embed(self, x: Node) -> Node:
        b, n, l = x.value.shape
        d = self.config.embed_dim
        wide_x = ad.broadcast_to(ad.reshape(x, (b, n, l, 1)), (b, n, l, d))
        w = ad.broadcast_to(self.embed_w, (b, n, l, d))
        return ad.mul(wide_x, w)

    def forward(self, x) -> Node:
        cfg = self.config
        xn = x if isinstance(x, Node) else ad.constant(np.asarray(x, dtype=np.float64))
        if xn.value.ndim != 3 or xn.value.shape[1:] != (cfg.n_channels, cfg.lookback):
            raise ad.ShapeError(
                f"expected input [batch, {cfg.n_channels}, {cfg.lookback}], "
                f"got {xn.value.shape}"
            )
        b, n, l = xn.value.shape

        terms: list[Node] = []
        if cfg.freq_on:
            freq_in = self._embed(xn) if cfg.freq_embedded else xn
            spec = domain_transform(freq_in, axis=2)
            z_re = self.freq_net(spec.re)
            im_net = self.freq_net_im if self.freq_net_im is not None else self.freq_net
            z_im = im_net(spec.im)
            z = complex_linear_combine(z_re, z_im, l)
            recon = domain_detransform(z, axis=2)
            terms.extend([recon, freq_in])
        if cfg.time_on:
            time_in = self._embed(xn) if cfg.time_embedded else xn
            if cfg.time_embedded:
                h = ad.transpose(time_in, (0, 1, 3, 2))
                h = self.time_net(h)
                smoothed = ad.transpose(h, (0, 1, 3, 2))
            else:
                smoothed = self.time_net(time_in)
            terms.extend([smoothed, time_in])

        if cfg.wide:
            d = cfg.embed_dim
            terms = [
                t if t.value.ndim == 4
                else ad.broadcast_to(ad.reshape(t, (b, n, l, 1)), (b, n, l, d))
                for t in terms
            ]
        hidden = terms[0]
        for t in terms[1:]:
            hidden = ad.add(hidden, t)

        flat = ad.reshape(hidden, (b, n, cfg.predictor_in))
        return self.predictor(flat)


def param_breakdown(model: TfkanModel) -> dict[str, int]:
    """Learnable-scalar count per component plus the total."""
    counts: dict[str, int] = {}
    for name, p in model.parameters():
        head = name.split(".")[0]
        counts[head] = counts.get(head, 0) + p.value.size
    counts["total"] = param_count(model)
    return counts


# ---------------------------------------------------------------------------
# checkpoint format: manifest.txt (key = value) + params.bin (little-endian f64)

_MANIFEST = "manifest.txt"
_BLOB = "params.bin"
_FORMAT = "tfkan-checkpoint-1"


@dataclass
class Checkpoint:
    config: ModelConfig
    seed: int
    params: dict[str, np.ndarray]
    extras: dict[str, np.ndarray]
    meta: dict[str, str]


def _shape_str(shape: tuple[int, ...]) -> str:
    return "x".join(str(s) for s in shape)


def save_checkpoint(path: str, model: TfkanModel,
                    extras: dict[str, np.ndarray] | None = None,
                    meta: dict[str, str] | None = None) -> None:
    """Write ``manifest.txt`` + ``params.bin`` into directory ``path``.

    The round trip is bit-exact: values are stored as little-endian float64
    in manifest order.  ``extras`` carries non-learnable arrays the serving
    path needs (for example scaler statistics); ``meta`` carries free-form
    string settings such as the split ratios used during training.
    """
    os.makedirs(path, exist_ok=True)
    cfg = model.config
    lines = [
        f"format = {_FORMAT}",
        f"seed = {model.seed}",
        f"n_channels = {cfg.n_channels}",
        f"lookback = {cfg.lookback}",
        f"horizon = {cfg.horizon}",
        f"embed_dim = {cfg.embed_dim}",
        f"hidden = {cfg.hidden}",
        f"grid_size = {cfg.grid_size}",
        f"spline_order = {cfg.spline_order}",
        f"time_layers = {cfg.time_layers}",
        f"predictor_layers = {cfg.predictor_layers}",
        f"freq_module = {cfg.flags.freq_module}",
        f"time_module = {cfg.flags.time_module}",
        f"predictor_module = {cfg.flags.predictor_module}",
        f"adjust = {cfg.flags.adjust}",
        f"freq_sharing = {cfg.flags.freq_sharing}",
    ]
    for key in sorted(meta or {}):
        lines.append(f"meta.{key} = {meta[key]}")
    chunks: list[bytes] = []
    offset = 0
    for kind, items in (
        ("param", [(n, p.value) for n, p in model.parameters()]),
        ("extra", sorted((extras or {}).items())),
    ):
        for name, arr in items:
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            lines.append(f"{kind} = {offset} {_shape_str(arr.shape)} {name}")
            chunks.append(data)
            offset += len(data)
    with open(os.path.join(path, _MANIFEST), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(path, _BLOB), "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path: str) -> Checkpoint:
    manifest_path = os.path.join(path, _MANIFEST)
    if not os.path.isfile(manifest_path):
        raise ValueError(f"no checkpoint manifest at {manifest_path}")
    keys: dict[str, str] = {}
    meta: dict[str, str] = {}
    table: list[tuple[str, int, tuple[int, ...], str]] = []
    with open(manifest_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition(" = ")
            if key in ("param", "extra"):
                off_s, shape_s, name = value.split(" ", 2)
                shape = tuple(int(s) for s in shape_s.split("x"))
                table.append((key, int(off_s), shape, name))
            elif key.startswith("meta."):
                meta[key[len("meta."):]] = value
            else:
                keys[key] = value
    if keys.get("format") != _FORMAT:
        raise ValueError(f"unsupported checkpoint format {keys.get('format')!r}")

    blob = open(os.path.join(path, _BLOB), "rb").read()
    expected = sum(int(np.prod(shape)) * 8 for _, _, shape, _ in table)
    if len(blob) != expected:
        raise ValueError(
            f"checkpoint blob is {len(blob)} bytes but manifest declares {expected}"
        )

    params: dict[str, np.ndarray] = {}
    extras: dict[str, np.ndarray] = {}
    for kind, off, shape, name in table:
        n = int(np.prod(shape)) * 8
        arr = np.frombuffer(blob[off : off + n], dtype="<f8").reshape(shape).copy()
        (params if kind == "param" else extras)[name] = arr

    flags = VariantFlags(
        freq_module=keys["freq_module"],
        time_module=keys["time_module"],
        predictor_module=keys["predictor_module"],
        adjust=keys["adjust"],
        freq_sharing=keys["freq_sharing"],
    )
    config = ModelConfig(
        n_channels=int(keys["n_channels"]),
        lookback=int(keys["lookback"]),
        horizon=int(keys["horizon"]),
        embed_dim=int(keys["embed_dim"]),
        hidden=int(keys["hidden"]),
        grid_size=int(keys["grid_size"]),
        spline_order=int(keys["spline_order"]),
        time_layers=int(keys["time_layers"]),
        predictor_layers=int(keys["predictor_layers"]),
        flags=flags,
    )
    return Checkpoint(config, int(keys["seed"]), params, extras, meta)


def model_from_checkpoint(ckpt: Checkpoint) -> TfkanModel:
    model = TfkanModel(ckpt.config, seed=ckpt.seed)
    expected = {name: p for name, p in model.parameters()}
    if set(expected) != set(ckpt.params):
        missing = sorted(set(expected) ^ set(ckpt.params))
        raise ValueError(f"checkpoint parameter names do not match model: {missing}")
    for name, arr in ckpt.params.items():
        node = expected[name]
        if node.value.shape != arr.shape:
            raise ValueError(
                f"parameter {name}: checkpoint shape {arr.shape} != {node.value.shape}"
            )
        node.value[...] = arr
    return model
