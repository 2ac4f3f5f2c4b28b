"""Dense networks with hand-rolled backprop, batch norm, Adam and flat-parameter views.

Everything runs in float64. Gradients follow the sum-over-batch convention: callers
fold any 1/B factor into the upstream gradient they pass to `backward`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "linear")
BN_EPS = 1e-5
BN_MOMENTUM = 0.99
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Shape and behavior of one dense layer (batch norm sits before the activation)."""

    input_dim: int
    output_dim: int
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


class _Layer:
    __slots__ = ("spec", "w", "b", "gamma", "beta", "run_mean", "run_var")

    def __init__(self, spec: LayerSpec, rng: np.random.Generator):
        self.spec = spec
        fan_in, fan_out = spec.input_dim, spec.output_dim
        if spec.activation == "relu":
            limit = np.sqrt(6.0 / fan_in)  # He-uniform
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))  # Xavier-uniform
        self.w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        self.b = np.zeros(fan_out)
        if spec.batch_norm:
            self.gamma = np.ones(fan_out)
            self.beta = np.zeros(fan_out)
            self.run_mean = np.zeros(fan_out)
            self.run_var = np.ones(fan_out)
        else:
            self.gamma = self.beta = self.run_mean = self.run_var = None

    def param_arrays(self) -> list[np.ndarray]:
        arrs = [self.w, self.b]
        if self.spec.batch_norm:
            arrs += [self.gamma, self.beta]
        return arrs


def _activate(name: str, h: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(h, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-h))
    return h


class MlpNetwork:
    """Feed-forward stack of dense layers, optionally batch-normalized.

    `training` switches batch norm between batch statistics (which also update the
    running estimates) and the stored running statistics. Forward passes made while
    training cache activations so `backward` can run; eval passes do not cache.
    """

    def __init__(self, specs: Sequence[LayerSpec], rng: np.random.Generator):
        specs = list(specs)
        if not specs:
            raise ValueError("need at least one layer")
        for up, down in zip(specs, specs[1:]):
            if up.output_dim != down.input_dim:
                raise ValueError(
                    f"layer chain mismatch: {up.output_dim} feeds {down.input_dim}"
                )
        self.specs = specs
        self.layers = [_Layer(s, rng) for s in specs]
        self.training = False
        self._cache = None

    @property
    def input_dim(self) -> int:
        return self.specs[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].output_dim

    @property
    def num_params(self) -> int:
        return sum(a.size for layer in self.layers for a in layer.param_arrays())

    def forward(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.input_dim:
            raise ValueError(f"expected input width {self.input_dim}, got {arr.shape}")
        cache = [] if self.training else None
        out = arr
        for layer in self.layers:
            out = self._layer_forward(layer, out, cache)
        self._cache = (single, cache) if self.training else None
        return out[0] if single else out

    def _layer_forward(self, layer: _Layer, x: np.ndarray, cache) -> np.ndarray:
        z = x @ layer.w + layer.b
        if layer.spec.batch_norm:
            if self.training:
                if z.shape[0] < 2:
                    raise ValueError("batch norm in training mode needs batch size >= 2")
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                layer.run_mean = BN_MOMENTUM * layer.run_mean + (1.0 - BN_MOMENTUM) * mu
                layer.run_var = BN_MOMENTUM * layer.run_var + (1.0 - BN_MOMENTUM) * var
            else:
                mu, var = layer.run_mean, layer.run_var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            z_hat = (z - mu) * inv_std
            h = layer.gamma * z_hat + layer.beta
        else:
            z_hat = inv_std = None
            h = z
        a = _activate(layer.spec.activation, h)
        if cache is not None:
            cache.append((x, z_hat, inv_std, a))
        return a

    def backward(self, upstream) -> tuple[np.ndarray, np.ndarray]:
        """Chain-rule pass for the most recent training-mode forward.

        upstream is dLoss/dOutput for that batch. Returns (flat parameter gradient
        aligned with get_flat_params, gradient with respect to the input batch).
        Gradients sum over the batch.
        """
        if self._cache is None:
            raise RuntimeError("backward requires a prior forward with training=True")
        single, cache = self._cache
        d = np.asarray(upstream, dtype=float)
        if single and d.ndim == 1:
            d = d[None, :]
        batch = cache[0][0].shape[0]
        if d.shape != (batch, self.output_dim):
            raise ValueError(f"upstream shape {d.shape} does not match ({batch}, {self.output_dim})")
        per_layer: list[tuple] = [()] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            x, z_hat, inv_std, a = cache[i]
            act = layer.spec.activation
            if act == "relu":
                dh = d * (a > 0.0)
            elif act == "sigmoid":
                dh = d * a * (1.0 - a)
            else:
                dh = d
            if layer.spec.batch_norm:
                dgamma = (dh * z_hat).sum(axis=0)
                dbeta = dh.sum(axis=0)
                dz_hat = dh * layer.gamma
                # backprop through the batch mean/variance used for normalization
                dz = inv_std * (
                    dz_hat
                    - dz_hat.mean(axis=0)
                    - z_hat * (dz_hat * z_hat).mean(axis=0)
                )
            else:
                dgamma = dbeta = None
                dz = dh
            dw = x.T @ dz
            db = dz.sum(axis=0)
            d = dz @ layer.w.T
            per_layer[i] = (dw, db, dgamma, dbeta)
        flat = np.concatenate(
            [g.ravel() for grads in per_layer for g in grads if g is not None]
        )
        return flat, (d[0] if single else d)

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for layer in self.layers for a in layer.param_arrays()])

    def set_flat_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {flat.shape}")
        i = 0
        for layer in self.layers:
            layer.w = flat[i : i + layer.w.size].reshape(layer.w.shape).copy()
            i += layer.w.size
            layer.b = flat[i : i + layer.b.size].copy()
            i += layer.b.size
            if layer.spec.batch_norm:
                layer.gamma = flat[i : i + layer.gamma.size].copy()
                i += layer.gamma.size
                layer.beta = flat[i : i + layer.beta.size].copy()
                i += layer.beta.size
        self._cache = None

    def get_bn_stats(self) -> np.ndarray:
        """Running mean/var of every batch-norm layer; excluded from optimization."""
        chunks = []
        for layer in self.layers:
            if layer.spec.batch_norm:
                chunks += [layer.run_mean, layer.run_var]
        if not chunks:
            return np.empty(0)
        return np.concatenate(chunks)

    def set_bn_stats(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        expected = sum(2 * l.spec.output_dim for l in self.layers if l.spec.batch_norm)
        if flat.shape != (expected,):
            raise ValueError(f"expected {expected} stats values, got {flat.shape}")
        i = 0
        for layer in self.layers:
            if layer.spec.batch_norm:
                n = layer.spec.output_dim
                layer.run_mean = flat[i : i + n].copy()
                i += n
                layer.run_var = flat[i : i + n].copy()
                i += n

    def clone(self) -> "MlpNetwork":
        dup = MlpNetwork(self.specs, np.random.default_rng(0))
        dup.set_flat_params(self.get_flat_params())
        stats = self.get_bn_stats()
        if stats.size:
            dup.set_bn_stats(stats)
        dup.training = self.training
        return dup


def soft_update(target: MlpNetwork, online: MlpNetwork, tau: float) -> None:
    """Blend target <- tau * online + (1 - tau) * target; BN running stats are copied."""
    if target.specs != online.specs:
        raise ValueError("soft_update requires identically shaped networks")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    target.set_flat_params(tau * online.get_flat_params() + (1.0 - tau) * target.get_flat_params())
    stats = online.get_bn_stats()
    if stats.size:
        target.set_bn_stats(stats.copy())


class Adam:
    """Adam with bias correction over a flat parameter vector."""

    def __init__(self, num_params: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0.0:
            raise ValueError("lr must be >= 0")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(num_params)
        self.v = np.zeros(num_params)
        self.t = 0

    def step(self, params, grads) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        grads = np.asarray(grads, dtype=float)
        if params.shape != self.m.shape or grads.shape != self.m.shape:
            raise ValueError("parameter/gradient size mismatch with optimizer state")
        if not np.all(np.isfinite(grads)):
            raise ValueError("non-finite gradient")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def build_mlp(input_dim: int, hidden: Iterable[int], output_dim: int,
              output_activation: str, rng: np.random.Generator,
              first_layer_bn: bool = False) -> MlpNetwork:
    """Convenience builder: relu hidden stack, chosen head, optional BN on layer 1."""
    dims = [input_dim, *hidden]
    specs = [
        LayerSpec(dims[i], dims[i + 1], "relu", batch_norm=(i == 0 and first_layer_bn))
        for i in range(len(dims) - 1)
    ]
    specs.append(LayerSpec(dims[-1], output_dim, output_activation))
    return MlpNetwork(specs, rng)


def _network_doc(net: MlpNetwork) -> dict:
    return {
        "layers": [asdict(s) for s in net.specs],
        "params": net.get_flat_params().tolist(),
        "bn_stats": net.get_bn_stats().tolist(),
    }


def _network_from_doc(doc: dict) -> MlpNetwork:
    specs = [LayerSpec(**layer) for layer in doc["layers"]]
    net = MlpNetwork(specs, np.random.default_rng(0))
    net.set_flat_params(np.asarray(doc["params"], dtype=float))
    stats = np.asarray(doc["bn_stats"], dtype=float)
    if stats.size:
        net.set_bn_stats(stats)
    return net


def _adam_doc(opt: Adam) -> dict:
    return {
        "lr": opt.lr,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
        "t": opt.t,
        "m": opt.m.tolist(),
        "v": opt.v.tolist(),
    }


def _adam_from_doc(doc: dict) -> Adam:
    opt = Adam(len(doc["m"]), doc["lr"], doc["beta1"], doc["beta2"], doc["eps"])
    opt.m = np.asarray(doc["m"], dtype=float)
    opt.v = np.asarray(doc["v"], dtype=float)
    opt.t = int(doc["t"])
    return opt


def save_checkpoint(path, networks: dict[str, MlpNetwork],
                    optimizers: dict[str, Adam] | None = None,
                    extra: dict | None = None) -> None:
    """Write a JSON checkpoint: format_version, named networks, optimizer state, extras.

    float64 values survive the JSON round trip exactly (shortest-repr encoding).
    """
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "networks": {name: _network_doc(net) for name, net in networks.items()},
        "optimizers": {name: _adam_doc(opt) for name, opt in (optimizers or {}).items()},
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version: {version!r}")
    return {
        "networks": {name: _network_from_doc(d) for name, d in doc["networks"].items()},
        "optimizers": {name: _adam_from_doc(d) for name, d in doc["optimizers"].items()},
        "extra": doc.get("extra", {}),
    }
