"""Alternating min-max training, optimizer, checkpoints, and the metrics log.

Every source of randomness in an epoch is derived from (seed, epoch), so a
run resumed from a checkpoint continues on exactly the trajectory of an
uninterrupted run.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .data import DOMAINS
from .losses import (LOG_EPS, LossBreakdown, brenier_loss,
                     convexity_penalty_empirical, gan_loss_empirical)
from .networks import (DiscriminatorNet, MlpSpec, PotentialNet,
                       forward_discriminator, init_params)
from .transport import GeneratorHandle, generator_apply, hessians_batched

CHECKPOINT_VERSION = 1
METRICS_HEADER = "epoch,gan_loss,penalty,disc_loss,disc_mean_on_fake,min_eig_probe,wallclock_s"

_CONFIG_FIELDS = {
    "kappa": float, "gamma": float, "lr_gen": float, "lr_disc": float,
    "batch_size": int, "epochs": int, "penalty_samples": int,
    "disc_steps_per_gen_step": int, "reinit_policy": dict,
    "lr_schedule": str, "seed": int, "source_domain": str,
    "activation": str, "gen_hidden": list, "disc_hidden": list,
    "dataset": dict,
}
_OPTIONAL_FIELDS = {
    "disc_steps_per_gen_step": 1,
    "lr_schedule": "constant",
    "lr_decay_start": 0,
    "monitor_points": 1000,
    "monitor_eig_points": 1000,
    "checkpoint_every": 100,
    "abort_on_failed_certificate": False,
    "dataset": None,
}


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    kappa: float
    gamma: float
    lr_gen: float
    lr_disc: float
    batch_size: int
    epochs: int
    penalty_samples: int
    reinit_policy: dict
    seed: int
    source_domain: str
    activation: str
    gen_hidden: list
    disc_hidden: list
    disc_steps_per_gen_step: int = 1
    lr_schedule: str = "constant"
    lr_decay_start: int = 0
    monitor_points: int = 1000
    monitor_eig_points: int = 1000
    checkpoint_every: int = 100
    abort_on_failed_certificate: bool = False
    dataset: dict | None = None

    def __post_init__(self):
        if self.lr_gen <= 0 or self.lr_disc <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not (np.isfinite(self.kappa) and np.isfinite(self.gamma)):
            raise ConfigError("kappa and gamma must be finite")
        if self.kappa < 0 or self.gamma < 0:
            raise ConfigError("kappa and gamma must be >= 0")
        if self.source_domain not in DOMAINS:
            raise ConfigError(f"unknown source_domain {self.source_domain!r}")
        if self.activation not in ("recu", "requ"):
            raise ConfigError(f"potential activation must be recu or requ, "
                              f"got {self.activation!r}")
        if self.lr_schedule not in ("constant", "linear_decay"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        kind = self.reinit_policy.get("type")
        if kind not in ("every_k_until", "loss_band", "none"):
            raise ConfigError(f"unknown reinit policy {kind!r}")

    @classmethod
    def from_dict(cls, raw):
        known = set(_CONFIG_FIELDS) | set(_OPTIONAL_FIELDS)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in _CONFIG_FIELDS
                   if k not in raw and k not in _OPTIONAL_FIELDS]
        if missing:
            raise ConfigError(f"missing config fields: {missing}")
        return cls(**raw)

    def to_dict(self):
        return asdict(self)

    @property
    def domain(self):
        return DOMAINS[self.source_domain]

    def lr_at(self, lr0, epoch):
        if self.lr_schedule == "linear_decay":
            span = max(self.epochs - self.lr_decay_start, 1)
            frac = 1.0 - max(epoch - self.lr_decay_start, 0) / span
            return lr0 * max(frac, 1.0 / span)
        return lr0


@dataclass
class MetricsRecord:
    epoch: int
    gan_loss: float
    penalty: float
    disc_loss: float
    disc_mean_on_fake: float
    min_eig_probe: float
    wallclock_s: float

    def csv_row(self):
        return (f"{self.epoch},{self.gan_loss!r},{self.penalty!r},"
                f"{self.disc_loss!r},{self.disc_mean_on_fake!r},"
                f"{self.min_eig_probe!r},{self.wallclock_s!r}")


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Standard Adam with bias correction, one slot pair per parameter."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        for p in self.params:
            g = grads[p.name]
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for {p.name}")
            m = self.m[p.name] = self.beta1 * self.m[p.name] + (1 - self.beta1) * g
            v = self.v[p.name] = self.beta2 * self.v[p.name] + (1 - self.beta2) * g ** 2
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params, grads, state, lr):
    """Functional single step; state is an Adam instance bound to params."""
    state.step(grads, lr=lr)
    return params, state


# ---------------------------------------------------------------------------
# training steps


def _epoch_rng(seed, epoch, tag):
    return np.random.default_rng(np.random.SeedSequence((seed, epoch, tag)))


def discriminator_step(phi, disc, real_batch, source_batch, opt, lr):
    """One ascent step of the discriminator on the empirical GAN loss."""
    fake = generator_apply(phi, source_batch).data  # frozen generator
    d_real = forward_discriminator(disc, real_batch)
    d_fake = forward_discriminator(disc, fake)
    loss = gan_loss_empirical(d_real, d_fake)
    neg = ad.smul(loss, -1.0)  # ascend by descending the negation
    grads = ad.gradients(neg, disc.params)
    opt.step(grads, lr=lr)
    return float(loss.data), float(np.mean(d_fake.data))


def generator_step(phi, disc, real_batch, source_batch, cfg, opt, lr, seed):
    """One descent step of the potential on the combined loss.

    The descent direction replaces the minimax fake term log(1 - D(G(z)))
    with the non-saturating surrogate -log D(G(z)): the minimax term has a
    gradient proportional to D(G(z)), which vanishes exactly while the
    discriminator rejects the fakes, so a generator that starts collapsed
    (zero-bias initialization puts the gradient map at the origin) never
    escapes, and the only surviving gradient (the penalty) inflates the
    potential until it overflows.  The reported LossBreakdown still carries
    the minimax loss values.
    """
    source = np.asarray(source_batch, dtype=np.float64)
    fake = generator_apply(phi, source)
    d_fake = forward_discriminator(disc, fake)
    surrogate = ad.smul(ad.tmean(ad.tlog(
        ad.clamp(d_fake, LOG_EPS, 1.0 - LOG_EPS))), -0.5)
    pen = convexity_penalty_empirical(phi, cfg.kappa, cfg.penalty_samples,
                                      seed, cfg.domain)
    total = ad.add(surrogate, ad.smul(pen, cfg.gamma)) if cfg.gamma != 0.0 else surrogate
    grads = ad.gradients(total, phi.params)
    opt.step(grads, lr=lr)
    d_real = forward_discriminator(disc, np.asarray(real_batch, dtype=np.float64))
    gan = gan_loss_empirical(ad.Tensor(d_real.data), ad.Tensor(d_fake.data))
    gan_val = float(gan.data)
    pen_val = float(pen.data)
    return LossBreakdown(gan_term=gan_val, penalty_term=pen_val,
                         total=gan_val + cfg.gamma * pen_val,
                         gamma=cfg.gamma, kappa=cfg.kappa, node=None)


def train_step(phi, disc, real_batch, source_rng, cfg, gen_opt, disc_opt,
               lr_gen, lr_disc, penalty_seed):
    """Discriminator steps with fresh fake samples, then one generator step."""
    lo, hi = cfg.domain
    n = real_batch.shape[0]
    d = real_batch.shape[1]
    disc_loss = 0.0
    mean_fake = 0.5
    for _ in range(cfg.disc_steps_per_gen_step):
        src = source_rng.uniform(lo, hi, size=(n, d))
        disc_loss, mean_fake = discriminator_step(
            phi, disc, real_batch, src, disc_opt, lr_disc)
    src = source_rng.uniform(lo, hi, size=(n, d))
    breakdown = generator_step(phi, disc, real_batch, src, cfg, gen_opt,
                               lr_gen, penalty_seed)
    return breakdown, disc_loss, mean_fake


def maybe_reinit_discriminator(disc, policy, epoch, last_disc_loss, seed):
    """Apply the configured reinitialization trigger; returns True if fired."""
    kind = policy.get("type", "none")
    fire = False
    if kind == "every_k_until":
        k, until = int(policy["k"]), int(policy["until_epoch"])
        fire = epoch > 0 and epoch % k == 0 and epoch <= until
    elif kind == "loss_band":
        lo, hi = float(policy["lo"]), float(policy["hi"])
        # the band trigger watches |loss|: the disc loss is nonpositive
        fire = last_disc_loss is not None and not (lo <= abs(last_disc_loss) <= hi)
    elif kind != "none":
        raise ConfigError(f"unknown reinit policy {kind!r}")
    if fire:
        derived = int(np.random.SeedSequence((seed, epoch, 999)).generate_state(1)[0])
        fresh = init_params(disc.spec, derived)
        for p, q in zip(disc.params, fresh):
            p.data[...] = q.data
    return fire


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, phi, disc, config, epoch, gen_opt=None, disc_opt=None):
    """Manifest JSON line followed by concatenated little-endian f64 blobs.

    Optimizer moments are stored as extra per-parameter blobs so a resumed
    run continues on the exact trajectory of an uninterrupted one.
    """
    arrays = []
    for prefix, net in (("phi", phi), ("disc", disc)):
        for p in net.params:
            arrays.append((f"{prefix}.{p.name}", p.data))
    for prefix, opt in (("adam_gen", gen_opt), ("adam_disc", disc_opt)):
        if opt is None:
            continue
        arrays.append((f"{prefix}.t", np.array([float(opt.t)])))
        for name in sorted(opt.m):
            arrays.append((f"{prefix}.m.{name}", opt.m[name]))
            arrays.append((f"{prefix}.v.{name}", opt.v[name]))
    blobs, index, offset = [], [], 0
    for name, arr in arrays:
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "offset": offset, "length": len(raw),
                      "shape": list(arr.shape)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "epoch": epoch,
        "rng_state": {"seed": config.seed, "next_epoch": epoch},
        "blob_index": index,
    }
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(json.dumps(manifest).encode("utf-8") + b"\n")
        for raw in blobs:
            f.write(raw)
    os.replace(tmp, path)


class CheckpointError(ValueError):
    pass


def load_checkpoint(path):
    """Returns (manifest, state) with state mapping blob names to arrays."""
    with open(path, "rb") as f:
        header = f.readline()
        payload = f.read()
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt manifest: {e}") from e
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {manifest.get('version')} "
            f"not supported (expected {CHECKPOINT_VERSION})")
    state = {}
    for entry in manifest["blob_index"]:
        start, length = entry["offset"], entry["length"]
        raw = payload[start:start + length]
        if len(raw) != length:
            raise CheckpointError(
                f"{path}: corrupt blob {entry['name']} "
                f"(expected {length} bytes, got {len(raw)})")
        state[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(
            entry["shape"]).astype(np.float64)
    return manifest, state


def build_networks(config, d):
    gen_spec = MlpSpec((d, *config.gen_hidden, 1), activation=config.activation)
    disc_spec = MlpSpec((d, *config.disc_hidden, 1), activation="leaky_relu",
                        output_transform="sigmoid")
    phi = PotentialNet(gen_spec, seed=config.seed)
    disc = DiscriminatorNet(disc_spec, seed=config.seed + 1)
    return phi, disc


def restore_networks(manifest, state):
    config = TrainConfig.from_dict(manifest["config"])
    d = state["phi.layer1.weight"].shape[1]
    phi, disc = build_networks(config, d)
    phi.load_state_dict({k[4:]: v for k, v in state.items() if k.startswith("phi.")})
    disc.load_state_dict({k[5:]: v for k, v in state.items() if k.startswith("disc.")})
    return config, phi, disc


def _restore_adam(opt, state, prefix):
    key = f"{prefix}.t"
    if key not in state:
        return
    opt.t = int(state[key][0])
    for name in opt.m:
        opt.m[name] = state[f"{prefix}.m.{name}"].copy()
        opt.v[name] = state[f"{prefix}.v.{name}"].copy()


# ---------------------------------------------------------------------------
# orchestration


def _epoch_monitor(phi, cfg, epoch):
    """Penalty on fresh pairs plus a min-eigenvalue probe of the Hessian."""
    pen = convexity_penalty_empirical(
        phi, cfg.kappa, cfg.monitor_points,
        seed=int(np.random.SeedSequence((cfg.seed, epoch, 7)).generate_state(1)[0]),
        domain=cfg.domain)
    min_eig = float("nan")
    if cfg.monitor_eig_points > 0:
        rng = _epoch_rng(cfg.seed, epoch, 8)
        lo, hi = cfg.domain
        d = phi.spec.layer_widths[0]
        Z = rng.uniform(lo, hi, size=(cfg.monitor_eig_points, d))
        H = hessians_batched(GeneratorHandle.from_net(phi), Z)
        min_eig = float(np.linalg.eigvalsh(H)[:, 0].min())
    return float(pen.data), min_eig


def run_training(config, dataset, out_dir, resume_from=None, log_fn=None):
    """Full training loop; writes metrics.csv and periodic checkpoints.

    dataset: (n, d) array of real samples.  resume_from: path to a
    checkpoint to continue from.  Returns (phi, disc, records).
    """
    os.makedirs(out_dir, exist_ok=True)
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("dataset must be a nonempty (n, d) array")
    n, d = data.shape
    start_epoch = 0
    if resume_from is not None:
        manifest, state = load_checkpoint(resume_from)
        _, phi, disc = restore_networks(manifest, state)
        start_epoch = manifest["rng_state"]["next_epoch"]
        gen_opt = Adam(phi.params, config.lr_gen)
        disc_opt = Adam(disc.params, config.lr_disc)
        _restore_adam(gen_opt, state, "adam_gen")
        _restore_adam(disc_opt, state, "adam_disc")
    else:
        phi, disc = build_networks(config, d)
        gen_opt = Adam(phi.params, config.lr_gen)
        disc_opt = Adam(disc.params, config.lr_disc)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    mode = "a" if start_epoch > 0 and os.path.exists(metrics_path) else "w"
    records = []
    last_disc_loss = None
    t0 = time.monotonic()

    with open(metrics_path, mode, newline="\n") as log:
        if mode == "w":
            log.write(METRICS_HEADER + "\n")
            log.flush()
        if config.epochs == 0:
            save_checkpoint(os.path.join(out_dir, "checkpoint_final.bin"),
                            phi, disc, config, 0)
            return phi, disc, records

        for epoch in range(start_epoch, config.epochs):
            maybe_reinit_discriminator(disc, config.reinit_policy, epoch,
                                       last_disc_loss, config.seed)
            shuffle_rng = _epoch_rng(config.seed, epoch, 1)
            source_rng = _epoch_rng(config.seed, epoch, 2)
            order = shuffle_rng.permutation(n)
            lr_g = config.lr_at(config.lr_gen, epoch)
            lr_d = config.lr_at(config.lr_disc, epoch)
            gan_vals, pen_vals, disc_vals, fake_means = [], [], [], []
            n_batches = max(n // config.batch_size, 1)
            for b in range(n_batches):
                batch = data[order[b * config.batch_size:(b + 1) * config.batch_size]]
                if batch.shape[0] == 0:
                    continue
                pseed = int(np.random.SeedSequence(
                    (config.seed, epoch, 3, b)).generate_state(1)[0])
                breakdown, disc_loss, mean_fake = train_step(
                    phi, disc, batch, source_rng, config, gen_opt, disc_opt,
                    lr_g, lr_d, pseed)
                gan_vals.append(breakdown.gan_term)
                pen_vals.append(breakdown.penalty_term)
                disc_vals.append(disc_loss)
                fake_means.append(mean_fake)
            last_disc_loss = disc_vals[-1]
            pen_mon, min_eig = _epoch_monitor(phi, config, epoch)
            rec = MetricsRecord(
                epoch=epoch,
                gan_loss=float(np.mean(gan_vals)),
                penalty=pen_mon,
                disc_loss=float(np.mean(disc_vals)),
                disc_mean_on_fake=float(np.mean(fake_means)),
                min_eig_probe=min_eig,
                wallclock_s=time.monotonic() - t0,
            )
            records.append(rec)
            log.write(rec.csv_row() + "\n")
            log.flush()
            if log_fn is not None:
                log_fn(rec)
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(
                    os.path.join(out_dir, f"checkpoint_{epoch + 1:06d}.bin"),
                    phi, disc, config, epoch + 1, gen_opt, disc_opt)

    save_checkpoint(os.path.join(out_dir, "checkpoint_final.bin"),
                    phi, disc, config, config.epochs, gen_opt, disc_opt)
    return phi, disc, records
