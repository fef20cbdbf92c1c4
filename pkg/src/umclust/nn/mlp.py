"""Per-view MLP autoencoders built on the autodiff tensor.

Encoder and decoder are mirror-image MLPs: every hidden layer is a
linear map followed by (optional) batch normalization and ReLU, the
final layer is purely linear. Weights use He-style uniform fan-in
initialization from a seeded generator, so a bundle is reproducible
from (dims, seed) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ShapeError
from .tensor import Tensor, softmax_rows


@dataclass(frozen=True)
class MlpSpec:
    """Shape of one MLP: input -> hidden... -> output.

    `head` selects the activation after the final linear layer: "linear"
    leaves it untouched; "softmax" maps every row onto the probability
    simplex. Encoders default to a softmax head elsewhere in the
    package, which turns each latent vector into a distribution over
    shared dimensions: a representation views can be aligned in.
    """

    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    batchnorm: bool = True
    head: str = "linear"

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ShapeError(f"all layer dims must be >= 1, got {dims}")
        if self.head not in ("linear", "softmax"):
            raise ShapeError(f"unknown head '{self.head}'")
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))

    def mirrored(self) -> "MlpSpec":
        """Spec of the decoder matching this encoder (linear output head)."""
        return MlpSpec(
            input_dim=self.output_dim,
            hidden_dims=tuple(reversed(self.hidden_dims)),
            output_dim=self.input_dim,
            batchnorm=self.batchnorm,
            head="linear",
        )


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        bound = np.sqrt(6.0 / in_dim)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def params(self):
        yield "weight", self.weight
        yield "bias", self.bias

    def stats(self):
        return ()


class BatchNorm:
    """Feature-wise batch normalization with running statistics.

    Train mode normalizes by the biased batch variance (so a batch of
    one row hits the epsilon floor instead of dividing by zero) and
    updates the running mean/variance with momentum. Eval mode applies
    the frozen running statistics, making the layer an affine map.
    """

    def __init__(self, dim: int, eps: float = 1e-5, momentum: float = 0.9):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def __call__(self, x: Tensor, train: bool, update_stats: bool = True) -> Tensor:
        if train:
            mu = x.mean(axis=0)
            centered = x - mu
            var = centered.square().mean(axis=0)
            if update_stats:
                self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu.data
                self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var.data
            denom = (var + self.eps).sqrt()
            return centered / denom * self.gamma + self.beta
        scale = 1.0 / np.sqrt(self.running_var + self.eps)
        return (x - self.running_mean) * Tensor(scale) * self.gamma + self.beta

    def params(self):
        yield "gamma", self.gamma
        yield "beta", self.beta

    def stats(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def set_stat(self, name: str, value: np.ndarray) -> None:
        setattr(self, name, value.copy())


class Mlp:
    def __init__(self, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.linears: list[Linear] = []
        self.norms: list[BatchNorm | None] = []
        dims = (spec.input_dim, *spec.hidden_dims, spec.output_dim)
        for i in range(len(dims) - 1):
            self.linears.append(Linear(dims[i], dims[i + 1], rng))
            hidden = i < len(dims) - 2
            self.norms.append(BatchNorm(dims[i + 1]) if (hidden and spec.batchnorm) else None)

    def __call__(self, x: Tensor, train: bool, update_stats: bool = True) -> Tensor:
        h = x
        last = len(self.linears) - 1
        for i, (lin, norm) in enumerate(zip(self.linears, self.norms)):
            h = lin(h)
            if i < last:
                if norm is not None:
                    h = norm(h, train, update_stats)
                h = h.relu()
            if not np.isfinite(h.data).all():
                raise NumericalError(f"non-finite activation after layer {i}")
        if self.spec.head == "softmax":
            h = softmax_rows(h)
        return h

    def modules(self):
        for i, lin in enumerate(self.linears):
            yield f"lin{i}", lin
        for i, norm in enumerate(self.norms):
            if norm is not None:
                yield f"bn{i}", norm


class Autoencoder:
    def __init__(self, encoder_spec: MlpSpec, rng: np.random.Generator):
        self.encoder = Mlp(encoder_spec, rng)
        self.decoder = Mlp(encoder_spec.mirrored(), rng)

    def modules(self):
        for name, mod in self.encoder.modules():
            yield f"enc.{name}", mod
        for name, mod in self.decoder.modules():
            yield f"dec.{name}", mod


class AutoencoderBundle:
    """One autoencoder per view plus a shared training-mode flag."""

    def __init__(self, specs: list[MlpSpec], seed: int):
        self.specs = list(specs)
        self.seed = int(seed)
        self.views: list[Autoencoder] = []
        for v, spec in enumerate(self.specs):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), v]))
            self.views.append(Autoencoder(spec, rng))
        self.training = True

    # -- mode -------------------------------------------------------------

    def train(self) -> None:
        self.training = True

    def eval(self) -> None:
        self.training = False

    def _mode(self, train) -> bool:
        return self.training if train is None else bool(train)

    # -- forward ------------------------------------------------------------

    def encode(self, view: int, x, train: bool | None = None, update_stats: bool = True) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        spec = self.specs[view]
        if x.data.ndim != 2 or x.data.shape[1] != spec.input_dim:
            raise ShapeError(
                f"view {view} expects input dim {spec.input_dim}, got shape {x.data.shape}"
            )
        return self.views[view].encoder(x, self._mode(train), update_stats)

    def decode(self, view: int, z, train: bool | None = None) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        spec = self.specs[view]
        if z.data.ndim != 2 or z.data.shape[1] != spec.output_dim:
            raise ShapeError(
                f"view {view} expects latent dim {spec.output_dim}, got shape {z.data.shape}"
            )
        return self.views[view].decoder(z, self._mode(train))

    def encode_all(
        self, mats: list[np.ndarray], train: bool | None = None, update_stats: bool = True
    ) -> list[np.ndarray]:
        """Plain-array latents for every view (used outside loss graphs)."""
        return [self.encode(v, m, train=train, update_stats=update_stats).data for v, m in enumerate(mats)]

    # -- parameter access ------------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for v, ae in enumerate(self.views):
            for mod_name, mod in ae.modules():
                for p_name, p in mod.params():
                    out[f"v{v}.{mod_name}.{p_name}"] = p
        return out

    def named_stats(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for v, ae in enumerate(self.views):
            for mod_name, mod in ae.modules():
                for s_name, s in mod.stats():
                    out[f"v{v}.{mod_name}.{s_name}"] = s
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        """Gradient per parameter; parameters off the loss path get zeros."""
        grads: dict[str, np.ndarray] = {}
        for name, p in self.named_parameters().items():
            grads[name] = np.zeros_like(p.data) if p.grad is None else p.grad
        return grads

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.zero_grad()

    def load_arrays(self, params: dict[str, np.ndarray], stats: dict[str, np.ndarray]) -> None:
        own_params = self.named_parameters()
        if set(params) != set(own_params):
            raise ShapeError("parameter name set mismatch")
        for name, arr in params.items():
            if own_params[name].data.shape != arr.shape:
                raise ShapeError(f"shape mismatch for parameter {name}")
            own_params[name].data = arr.astype(np.float64, copy=True)
        for v, ae in enumerate(self.views):
            for mod_name, mod in ae.modules():
                for s_name, _ in mod.stats():
                    key = f"v{v}.{mod_name}.{s_name}"
                    mod.set_stat(s_name, np.asarray(stats[key], dtype=np.float64))


def build_bundle(
    input_dims: list[int],
    latent_dim: int,
    hidden_dims: tuple[int, ...],
    batchnorm: bool,
    seed: int,
    latent_activation: str = "softmax",
) -> AutoencoderBundle:
    specs = [
        MlpSpec(
            input_dim=int(d),
            hidden_dims=tuple(hidden_dims),
            output_dim=int(latent_dim),
            batchnorm=batchnorm,
            head=latent_activation,
        )
        for d in input_dims
    ]
    return AutoencoderBundle(specs, seed)
