"""Experiment orchestration: config ingestion, seeded Monte Carlo campaigns,
CSV emission.

Stream discipline: the truth/observation data of run r comes from the stream
(master_seed, r, "data"); filter f of run r uses (master_seed, r, f); replicate
m of a bias/variance campaign uses (master_seed, r, f, m).  Changing the filter
list therefore never changes the generated data, and outputs are byte-identical
for a given (config, seed) regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlockPFError, InvalidK, ParseError, ValidationError
from .filters import AdaptiveBlockPF, BlockPF, BootstrapPF, make_partition, run_kalman
from .metrics import ari, bias_variance, mse_arrays
from .models import LinearGaussianModel, Lorenz96Model, NoiseCovSpec
from .partitioning import Partition
from .rng import derive_stream

__all__ = ["ModelConfig", "FilterConfig", "ExperimentConfig", "load_config",
           "run_experiment", "build_model", "known_partition"]

SCHEMES = ("kf", "bootstrap", "bpf_known", "bpf_random", "bpf_bad", "bpf_adaptive")

SUMMARY_COLUMNS = ["filter_name", "K", "zeta", "Np", "n_runs", "horizon",
                   "mse_mean", "mse_stderr", "ari_mean", "ari_stderr",
                   "degenerate_block_rate", "mean_wall_ms"]

STEP_COLUMNS = ["run_id", "t", "filter_name", "K", "zeta", "sq_err", "ari",
                "degenerate_blocks"]

RUN_COLUMNS = ["run_id", "filter_name", "status", "mse", "ari_mean", "ari_final",
               "degenerate_block_rate", "wall_ms", "error"]

BV_RUN_COLUMNS = ["run_id", "filter_name", "K", "zeta", "bias_sq", "bias_sq_adj",
                  "variance"]

BV_SUMMARY_COLUMNS = ["filter_name", "K", "zeta", "n_runs", "replicates",
                      "bias_sq_mean", "bias_sq_stderr",
                      "bias_sq_adj_mean", "bias_sq_adj_stderr",
                      "variance_mean", "variance_stderr"]


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    d_x: int
    noise: NoiseCovSpec
    obs_noise_var: float = 1.0
    forcing: float = 8.0
    dt: float = 0.05
    init_var: float = 0.01


@dataclass(frozen=True)
class FilterConfig:
    name: str
    scheme: str
    k: int | None = None
    zeta: int | None = None
    repartition: bool = True
    restarts: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    filters: tuple[FilterConfig, ...]
    n_particles: int
    n_runs: int
    horizon: int
    master_seed: int
    replicates: int = 1
    record_timing: bool = True


def build_model(mc: ModelConfig):
    if mc.kind == "linear_gaussian":
        return LinearGaussianModel(mc.d_x, noise_spec=mc.noise)
    if mc.kind == "lorenz96":
        return Lorenz96Model(mc.d_x, mc.noise, forcing=mc.forcing,
                             obs_noise_var=mc.obs_noise_var, dt=mc.dt,
                             init_var=mc.init_var)
    raise ValidationError(f"model.kind: unknown model kind {mc.kind!r}")


def known_partition(model, t: int, k: int) -> Partition:
    """Reference partition: the Q block structure when it matches K, else
    contiguous equal-size blocks."""
    qp = model.q_partition(t)
    if qp is not None and len(qp) == k:
        return Partition(qp)
    return make_partition("contiguous_known", model.d_x, k)


def _field(raw: dict, key: str, kind, default=..., ctx: str = ""):
    where = f"{ctx}.{key}" if ctx else key
    if key not in raw or raw[key] is None:  # explicit null means "use the default"
        if default is ...:
            raise ValidationError(f"missing required field {where!r}")
        return default
    val = raw[key]
    try:
        return kind(val)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field {where!r}: {exc}") from exc


def _parse_noise(raw: dict) -> NoiseCovSpec:
    kind = _field(raw, "kind", str, ctx="model.noise")
    sizes = raw.get("block_sizes", ())
    if sizes and not isinstance(sizes[0], (list, tuple)):
        sizes = [sizes]
    return NoiseCovSpec(kind=kind,
                        l=_field(raw, "l", float, None, ctx="model.noise"),
                        scale=_field(raw, "scale", float, 1.0, ctx="model.noise"),
                        block_sizes=tuple(tuple(s) for s in sizes),
                        switch_time=_field(raw, "switch_time", int, 26, ctx="model.noise"))


def _parse_filter(raw: dict, model: ModelConfig) -> FilterConfig:
    name = _field(raw, "name", str)
    scheme = _field(raw, "scheme", str)
    ctx = f"filters[{name}]"
    if scheme not in SCHEMES:
        raise ValidationError(f"{ctx}.scheme: unknown scheme {scheme!r}")
    if scheme == "kf" and model.kind != "linear_gaussian":
        raise ValidationError(f"{ctx}: the Kalman filter needs a linear Gaussian model")
    k = _field(raw, "K", int, None, ctx=ctx)
    if scheme in ("bpf_known", "bpf_random", "bpf_bad", "bpf_adaptive"):
        if k is None:
            raise ValidationError(f"{ctx}: scheme {scheme!r} requires K")
        if not 1 <= k <= model.d_x:
            raise ValidationError(f"{ctx}.K: need 1 <= K <= d_x")
    zeta = _field(raw, "zeta", int, None, ctx=ctx)
    gamma = _field(raw, "gamma", float, None, ctx=ctx)
    if scheme == "bpf_adaptive":
        if gamma is not None:
            if not 1.0 <= gamma <= 2.0:
                raise ValidationError(f"{ctx}.gamma: must lie in [1, 2]")
            zeta = math.ceil(gamma * model.d_x / k)
        elif zeta is None:
            zeta = model.d_x
        if zeta * k < model.d_x:
            raise ValidationError(f"{ctx}: zeta*K = {zeta * k} cannot cover d_x")
    return FilterConfig(name=name, scheme=scheme, k=k, zeta=zeta,
                        repartition=_field(raw, "repartition", bool, True, ctx=ctx),
                        restarts=_field(raw, "restarts", int, 3, ctx=ctx))


def parse_config(raw: dict) -> ExperimentConfig:
    if "model" not in raw:
        raise ValidationError("missing required field 'model'")
    m = raw["model"]
    model = ModelConfig(kind=_field(m, "kind", str, ctx="model"),
                        d_x=_field(m, "d_x", int, ctx="model"),
                        noise=_parse_noise(_field(m, "noise", dict, ctx="model")),
                        obs_noise_var=_field(m, "obs_noise_var", float, 1.0, "model"),
                        forcing=_field(m, "forcing", float, 8.0, "model"),
                        dt=_field(m, "dt", float, 0.05, "model"),
                        init_var=_field(m, "init_var", float, 0.01, "model"))
    build_model(model)  # fail early on inconsistent model parameters
    raw_filters = _field(raw, "filters", list)
    if not raw_filters:
        raise ValidationError("field 'filters': must list at least one filter")
    filters = tuple(_parse_filter(f, model) for f in raw_filters)
    names = [f.name for f in filters]
    if len(set(names)) != len(names):
        raise ValidationError("field 'filters': filter names must be unique")
    cfg = ExperimentConfig(model=model, filters=filters,
                           n_particles=_field(raw, "n_particles", int),
                           n_runs=_field(raw, "n_runs", int),
                           horizon=_field(raw, "horizon", int),
                           master_seed=_field(raw, "master_seed", int),
                           replicates=_field(raw, "replicates", int, 1),
                           record_timing=_field(raw, "record_timing", bool, True))
    for key, low in (("n_particles", 1), ("n_runs", 1), ("horizon", 1),
                     ("replicates", 1)):
        if getattr(cfg, key) < low:
            raise ValidationError(f"field {key!r}: must be >= {low}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return parse_config(raw)


def resolved_config_dict(cfg: ExperimentConfig, master_seed: int | None = None) -> dict:
    seed = cfg.master_seed if master_seed is None else master_seed
    noise = cfg.model.noise
    return {
        "model": {
            "kind": cfg.model.kind, "d_x": cfg.model.d_x,
            "noise": {"kind": noise.kind, "l": noise.l, "scale": noise.scale,
                      "block_sizes": [list(s) for s in noise.block_sizes],
                      "switch_time": noise.switch_time},
            "obs_noise_var": cfg.model.obs_noise_var, "forcing": cfg.model.forcing,
            "dt": cfg.model.dt, "init_var": cfg.model.init_var,
        },
        "filters": [{"name": f.name, "scheme": f.scheme, "K": f.k, "zeta": f.zeta,
                     "repartition": f.repartition, "restarts": f.restarts}
                    for f in cfg.filters],
        "n_particles": cfg.n_particles, "n_runs": cfg.n_runs,
        "horizon": cfg.horizon, "master_seed": seed,
        "replicates": cfg.replicates, "record_timing": cfg.record_timing,
    }


def generate_data(model, horizon: int, rng):
    """Twin-experiment truth trajectory and observations."""
    truth = np.empty((horizon, model.d_x))
    ys = np.empty((horizon, model.d_y))
    x = model.sample_initial(rng, 1)[:, 0]
    for t in range(1, horizon + 1):
        x = model.sample_transition(x, rng, t)
        truth[t - 1] = x
        ys[t - 1] = model.sample_observation(x, rng)
    return truth, ys


def _build_filter(fc: FilterConfig, model, n_particles: int):
    if fc.scheme == "bootstrap":
        return BootstrapPF(model, n_particles)
    if fc.scheme == "bpf_known":
        return BlockPF(model, n_particles, lambda t, rng: known_partition(model, t, fc.k))
    if fc.scheme == "bpf_random":
        return BlockPF(model, n_particles,
                       lambda t, rng: make_partition("random", model.d_x, fc.k, rng))
    if fc.scheme == "bpf_bad":
        return BlockPF(model, n_particles,
                       lambda t, rng: make_partition("strided_bad", model.d_x, fc.k))
    if fc.scheme == "bpf_adaptive":
        return AdaptiveBlockPF(model, n_particles, fc.k, fc.zeta,
                               repartition=fc.repartition, restarts=fc.restarts)
    raise ValidationError(f"unknown scheme {fc.scheme!r}")


def _run_one(cfg: ExperimentConfig, run_id: int) -> dict:
    """All filters of one Monte Carlo run. Returns per-filter step records."""
    model = build_model(cfg.model)
    truth, ys = generate_data(model, cfg.horizon,
                              derive_stream(cfg.master_seed, run_id, "data"))
    out = {}
    for fc in cfg.filters:
        rng = derive_stream(cfg.master_seed, run_id, fc.name)
        t0 = time.perf_counter()
        try:
            if fc.scheme == "kf":
                estimates = run_kalman(model, ys)
                partitions, deg, block_steps = [], 0, 0
                deg_per_step = [0] * cfg.horizon
            else:
                res = _build_filter(fc, model, cfg.n_particles).run(ys, rng)
                estimates = res.estimates
                partitions = res.partitions
                deg, block_steps = res.degenerate_blocks, res.block_steps
                deg_per_step = res.deg_per_step
        except BlockPFError as exc:
            out[fc.name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                            "wall_ms": (time.perf_counter() - t0) * 1e3}
            continue
        wall_ms = (time.perf_counter() - t0) * 1e3
        sq_err = np.mean((estimates - truth) ** 2, axis=1)
        aris = None
        if fc.scheme == "bpf_adaptive":
            try:
                aris = np.array([ari(partitions[t - 1], known_partition(model, t, fc.k))
                                 for t in range(1, cfg.horizon + 1)])
            except InvalidK:
                # no reference partition with K blocks exists for this model,
                # so the ARI columns stay empty
                aris = None
        out[fc.name] = {
            "status": "ok", "sq_err": sq_err, "aris": aris,
            "mse": float(sq_err.mean()),
            "degenerate_blocks": deg, "block_steps": block_steps,
            "deg_per_step": deg_per_step, "wall_ms": wall_ms,
        }
    return out


def _run_one_bv(cfg: ExperimentConfig, run_id: int) -> dict:
    """Bias/variance protocol: M filter replicates against the KF reference."""
    model = build_model(cfg.model)
    truth, ys = generate_data(model, cfg.horizon,
                              derive_stream(cfg.master_seed, run_id, "data"))
    reference = run_kalman(model, ys)
    out = {}
    for fc in cfg.filters:
        if fc.scheme == "kf":
            continue
        try:
            reps = np.empty((cfg.replicates, cfg.horizon, model.d_x))
            for m in range(cfg.replicates):
                rng = derive_stream(cfg.master_seed, run_id, fc.name, m)
                reps[m] = _build_filter(fc, model, cfg.n_particles).run(ys, rng).estimates
            bias_sq, variance = bias_variance(reps, reference)
            # the raw squared bias of an M-replicate mean is inflated by
            # variance / M; subtracting it gives an unbiased estimate of
            # the squared bias itself
            out[fc.name] = {"status": "ok", "bias_sq": bias_sq,
                            "bias_sq_adj": bias_sq - variance / cfg.replicates,
                            "variance": variance}
        except BlockPFError as exc:
            out[fc.name] = {"status": "failed",
                            "error": f"{type(exc).__name__}: {exc}"}
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.6g}"


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    m = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return m, se


def _collect_runs(cfg: ExperimentConfig, worker, threads: int):
    run_ids = list(range(cfg.n_runs))
    if threads <= 1:
        return [worker(cfg, r) for r in run_ids]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, cfg, r) for r in run_ids]
        return [f.result() for f in futures]


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Run the campaign and write resolved_config.json plus CSV results.

    Returns the per-filter aggregate dictionary that summary.csv is written
    from (plus raw per-run values, for programmatic use).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(resolved_config_dict(cfg), indent=2) + "\n")
    if cfg.replicates > 1:
        return _run_bias_variance(cfg, out_dir, threads)

    results = _collect_runs(cfg, _run_one, threads)

    with (out_dir / "steps.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(STEP_COLUMNS)
        for run_id, res in enumerate(results):
            for fc in cfg.filters:
                r = res[fc.name]
                if r["status"] != "ok":
                    continue
                for t in range(1, cfg.horizon + 1):
                    a = r["aris"][t - 1] if r["aris"] is not None else None
                    wr.writerow([run_id, t, fc.name, fc.k if fc.k else "",
                                 fc.zeta if fc.zeta else "",
                                 _fmt(r["sq_err"][t - 1]), _fmt(a),
                                 r["deg_per_step"][t - 1]])

    with (out_dir / "runs.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(RUN_COLUMNS)
        for run_id, res in enumerate(results):
            for fc in cfg.filters:
                r = res[fc.name]
                wall = r["wall_ms"] if cfg.record_timing else 0.0
                if r["status"] != "ok":
                    wr.writerow([run_id, fc.name, "failed", "", "", "", "",
                                 _fmt(wall), r["error"]])
                    continue
                a = r["aris"]
                rate = (r["degenerate_blocks"] / r["block_steps"]
                        if r["block_steps"] else 0.0)
                wr.writerow([run_id, fc.name, "ok", _fmt(r["mse"]),
                             _fmt(float(a.mean()) if a is not None else None),
                             _fmt(float(a[-1]) if a is not None else None),
                             _fmt(rate), _fmt(wall), ""])

    summary = {}
    for fc in cfg.filters:
        oks = [res[fc.name] for res in results if res[fc.name]["status"] == "ok"]
        n_ok = len(oks)
        entry = {"filter_name": fc.name, "K": fc.k, "zeta": fc.zeta,
                 "Np": cfg.n_particles, "n_runs": n_ok, "horizon": cfg.horizon,
                 "n_failed": cfg.n_runs - n_ok}
        if n_ok:
            mses = np.array([r["mse"] for r in oks])
            entry["mse_mean"], entry["mse_stderr"] = _mean_stderr(mses)
            entry["mse_per_run"] = mses
            if oks[0]["aris"] is not None:
                run_aris = np.array([float(r["aris"].mean()) for r in oks])
                entry["ari_mean"], entry["ari_stderr"] = _mean_stderr(run_aris)
                entry["ari_per_run"] = run_aris
            else:
                entry["ari_mean"] = entry["ari_stderr"] = None
            tot_deg = sum(r["degenerate_blocks"] for r in oks)
            tot_blocks = sum(r["block_steps"] for r in oks)
            entry["degenerate_block_rate"] = tot_deg / tot_blocks if tot_blocks else 0.0
            walls = [r["wall_ms"] if cfg.record_timing else 0.0 for r in oks]
            entry["mean_wall_ms"] = float(np.mean(walls))
        summary[fc.name] = entry

    with (out_dir / "summary.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SUMMARY_COLUMNS)
        for fc in cfg.filters:
            e = summary[fc.name]
            if "mse_mean" not in e:
                continue
            wr.writerow([e["filter_name"], e["K"] if e["K"] else "",
                         e["zeta"] if e["zeta"] else "", e["Np"], e["n_runs"],
                         e["horizon"], _fmt(e["mse_mean"]), _fmt(e["mse_stderr"]),
                         _fmt(e["ari_mean"]), _fmt(e["ari_stderr"]),
                         _fmt(e["degenerate_block_rate"]), _fmt(e["mean_wall_ms"])])
    return summary


def _run_bias_variance(cfg: ExperimentConfig, out_dir: Path, threads: int) -> dict:
    if cfg.model.kind != "linear_gaussian":
        raise ValidationError("bias/variance mode needs the Kalman reference, "
                              "hence a linear Gaussian model")
    results = _collect_runs(cfg, _run_one_bv, threads)
    pf_filters = [fc for fc in cfg.filters if fc.scheme != "kf"]

    with (out_dir / "bias_variance_runs.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(BV_RUN_COLUMNS)
        for run_id, res in enumerate(results):
            for fc in pf_filters:
                r = res[fc.name]
                if r["status"] != "ok":
                    continue
                wr.writerow([run_id, fc.name, fc.k if fc.k else "",
                             fc.zeta if fc.zeta else "",
                             _fmt(r["bias_sq"]), _fmt(r["bias_sq_adj"]),
                             _fmt(r["variance"])])

    summary = {}
    for fc in pf_filters:
        oks = [res[fc.name] for res in results if res[fc.name]["status"] == "ok"]
        entry = {"filter_name": fc.name, "K": fc.k, "zeta": fc.zeta,
                 "n_runs": len(oks), "replicates": cfg.replicates}
        if oks:
            b = np.array([r["bias_sq"] for r in oks])
            ba = np.array([r["bias_sq_adj"] for r in oks])
            v = np.array([r["variance"] for r in oks])
            entry["bias_sq_mean"], entry["bias_sq_stderr"] = _mean_stderr(b)
            entry["bias_sq_adj_mean"], entry["bias_sq_adj_stderr"] = _mean_stderr(ba)
            entry["variance_mean"], entry["variance_stderr"] = _mean_stderr(v)
        summary[fc.name] = entry

    with (out_dir / "bias_variance_summary.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(BV_SUMMARY_COLUMNS)
        for fc in pf_filters:
            e = summary[fc.name]
            if "bias_sq_mean" not in e:
                continue
            wr.writerow([e["filter_name"], e["K"] if e["K"] else "",
                         e["zeta"] if e["zeta"] else "", e["n_runs"],
                         e["replicates"], _fmt(e["bias_sq_mean"]),
                         _fmt(e["bias_sq_stderr"]), _fmt(e["bias_sq_adj_mean"]),
                         _fmt(e["bias_sq_adj_stderr"]), _fmt(e["variance_mean"]),
                         _fmt(e["variance_stderr"])])
    return summary
