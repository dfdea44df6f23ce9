"""A small variational autoencoder written directly in numpy.

Encoder: x -> ELU(4) -> (mu, logvar) in R^z.
Decoder: z -> ELU(4) -> x_hat in R^w (Gaussian mean, unit variance).

Loss per batch (averaged over samples):
    0.5 * ||x - x_hat||^2  -  0.5 * sum(1 + logvar - mu^2 - exp(logvar))

Inputs are standardised by the scalar mean/std of the training windows;
the statistics are stored on the model and reused at scoring time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HIDDEN = 4
PARAM_NAMES = (
    "enc_w1",
    "enc_b1",
    "enc_mu_w",
    "enc_mu_b",
    "enc_logvar_w",
    "enc_logvar_b",
    "dec_w1",
    "dec_b1",
    "dec_out_w",
    "dec_out_b",
)


class UntrainedModelError(RuntimeError):
    pass


class VaeDivergenceError(FloatingPointError):
    pass


@dataclass
class VaeModel:
    params: dict[str, np.ndarray]
    width: int
    latent_dim: int
    offset: float = 0.0
    scale: float = 1.0
    trained: bool = False
    loss_history: list[float] = field(default_factory=list)

    def copy(self) -> VaeModel:
        return VaeModel(
            params={k: v.copy() for k, v in self.params.items()},
            width=self.width,
            latent_dim=self.latent_dim,
            offset=self.offset,
            scale=self.scale,
            trained=self.trained,
            loss_history=list(self.loss_history),
        )


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_model(width: int, latent_dim: int = 2, seed: int = 0) -> VaeModel:
    rng = np.random.default_rng(seed)
    params = {
        "enc_w1": _glorot(rng, HIDDEN, width),
        "enc_b1": np.zeros(HIDDEN),
        "enc_mu_w": _glorot(rng, latent_dim, HIDDEN),
        "enc_mu_b": np.zeros(latent_dim),
        "enc_logvar_w": _glorot(rng, latent_dim, HIDDEN),
        "enc_logvar_b": np.zeros(latent_dim),
        "dec_w1": _glorot(rng, HIDDEN, latent_dim),
        "dec_b1": np.zeros(HIDDEN),
        "dec_out_w": _glorot(rng, width, HIDDEN),
        "dec_out_b": np.zeros(width),
    }
    return VaeModel(params=params, width=width, latent_dim=latent_dim)


def elu(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, a, np.expm1(np.minimum(a, 0.0)))


def elu_grad(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, 1.0, np.exp(np.minimum(a, 0.0)))


def _encode(params, x):
    a1 = x @ params["enc_w1"].T + params["enc_b1"]
    h1 = elu(a1)
    mu = h1 @ params["enc_mu_w"].T + params["enc_mu_b"]
    logvar = h1 @ params["enc_logvar_w"].T + params["enc_logvar_b"]
    return a1, h1, mu, logvar


def _decode(params, z):
    a2 = z @ params["dec_w1"].T + params["dec_b1"]
    h2 = elu(a2)
    return a2, h2, h2 @ params["dec_out_w"].T + params["dec_out_b"]


def vae_loss(params: dict[str, np.ndarray], x: np.ndarray, noise: np.ndarray) -> float:
    """Loss for standardised batch ``x`` with fixed reparameterisation noise."""
    _, _, mu, logvar = _encode(params, x)
    z = mu + np.exp(0.5 * logvar) * noise
    _, _, x_hat = _decode(params, z)
    batch = x.shape[0]
    recon = 0.5 * np.sum((x - x_hat) ** 2) / batch
    kl = -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar)) / batch
    return float(recon + kl)


def vae_loss_and_grads(
    params: dict[str, np.ndarray], x: np.ndarray, noise: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    batch = x.shape[0]
    a1, h1, mu, logvar = _encode(params, x)
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    a2, h2, x_hat = _decode(params, z)

    resid = x_hat - x
    recon = 0.5 * np.sum(resid**2) / batch
    kl = -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar)) / batch

    g = {}
    d_xhat = resid / batch
    g["dec_out_w"] = d_xhat.T @ h2
    g["dec_out_b"] = d_xhat.sum(axis=0)
    d_a2 = (d_xhat @ params["dec_out_w"]) * elu_grad(a2)
    g["dec_w1"] = d_a2.T @ z
    g["dec_b1"] = d_a2.sum(axis=0)
    d_z = d_a2 @ params["dec_w1"]

    d_mu = d_z + mu / batch
    d_logvar = d_z * noise * 0.5 * std + 0.5 * (np.exp(logvar) - 1.0) / batch
    g["enc_mu_w"] = d_mu.T @ h1
    g["enc_mu_b"] = d_mu.sum(axis=0)
    g["enc_logvar_w"] = d_logvar.T @ h1
    g["enc_logvar_b"] = d_logvar.sum(axis=0)
    d_a1 = (d_mu @ params["enc_mu_w"] + d_logvar @ params["enc_logvar_w"]) * elu_grad(a1)
    g["enc_w1"] = d_a1.T @ x
    g["enc_b1"] = d_a1.sum(axis=0)
    return float(recon + kl), g


def _standardise(model: VaeModel, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - model.offset) / model.scale


def vae_train(
    model: VaeModel,
    samples,
    epochs: int = 100,
    lr: float = 0.01,
    seed: int = 0,
    rho: float = 0.9,
    eps: float = 1e-7,
) -> VaeModel:
    """Full-batch RMSprop training; returns a trained copy of ``model``.

    One gradient step per epoch. Raises VaeDivergenceError if the loss or
    any parameter becomes non-finite.
    """
    samples = np.asarray([getattr(s, "values", s) for s in samples], dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("need at least 2 training windows")
    if samples.shape[1] != model.width:
        raise ValueError(f"windows of length {samples.shape[1]}, model expects {model.width}")

    out = model.copy()
    out.offset = float(samples.mean())
    spread = float(samples.std())
    out.scale = spread if spread > 1e-12 else 1.0
    x = _standardise(out, samples)

    rng = np.random.default_rng(seed)
    avg_sq = {k: np.zeros_like(v) for k, v in out.params.items()}
    out.loss_history = []
    for _ in range(epochs):
        noise = rng.standard_normal((x.shape[0], out.latent_dim))
        # overflow is caught by the finiteness checks below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = vae_loss_and_grads(out.params, x, noise)
        if not np.isfinite(loss):
            raise VaeDivergenceError("VAE loss became non-finite")
        for name in PARAM_NAMES:
            avg_sq[name] = rho * avg_sq[name] + (1.0 - rho) * grads[name] ** 2
            with np.errstate(over="ignore", invalid="ignore"):
                out.params[name] -= lr * grads[name] / (np.sqrt(avg_sq[name]) + eps)
            if not np.all(np.isfinite(out.params[name])):
                raise VaeDivergenceError(f"parameter {name} became non-finite")
        out.loss_history.append(loss)
    out.trained = True
    return out


def encode_mean(model: VaeModel, x) -> np.ndarray:
    """Deterministic encoder mean for one window (or a batch of windows)."""
    if not model.trained:
        raise UntrainedModelError("model has not been trained")
    _, _, mu, _ = _encode(model.params, _standardise(model, x))
    return mu


def reconstruct(model: VaeModel, x) -> np.ndarray:
    """Decode the encoder mean; output in the original units."""
    _, _, mu, _ = _encode(model.params, _standardise(model, x))
    _, _, x_hat = _decode(model.params, mu)
    return x_hat * model.scale + model.offset


def vae_score(window, centroid, model: VaeModel) -> float:
    a = np.asarray(getattr(window, "values", window), dtype=float)
    b = np.asarray(centroid, dtype=float)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    diff = encode_mean(model, a) - encode_mean(model, b)
    return float(diff @ diff)
