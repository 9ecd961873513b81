"""Experiment runner: train, evaluate, sweep, gradcheck, approx, rademacher.

Configuration comes from the command line, optionally seeded by a flat
``key=value`` file (``--config``); explicit flags override file entries.
Every emitted CSV has a fixed, documented header and is byte-deterministic
for a fixed configuration and seed.  The ``time_s`` and ``wall_ms`` columns
are schema placeholders pinned to ``0.0``: wall-clock measurements are
deliberately kept out of all artifacts so repeated runs produce identical
bytes.

Emitted files per subcommand (inside ``--out``):

* ``train``     -> ``checkpoint.json``, ``history.csv``; prints one row
                   ``method,act,dim,e0,e1,e2,time_s,nop``.
* ``evaluate``  -> prints the same row for a stored checkpoint.
* ``sweep``     -> ``sweep_table.csv`` (one row per run, with a status
                   column), ``sweep_figure.csv`` (log10 errors vs width for
                   the mix and drm runs), ``sweep_manifest.json`` (plan echo
                   with parameter counts and derived seeds), plus per-run
                   ``run###_checkpoint.json`` / ``run###_history.csv``.
* ``approx``    -> ``certificates.csv`` (squared-hinge rewrite bounds),
                   ``assembly.csv`` (sampled-network H1 errors vs width).
* ``rademacher``-> ``linear.csv`` (``n,estimate,std_err,upper_bound``),
                   ``gaps.csv`` (``n,gap_mean,gap_stderr``).

Exit codes: 0 on success, 1 when a requested check fails (gradient-check
violation, certificate or complexity-bound violation, training failure),
2 on usage errors (unknown keys, malformed config or checkpoint files).

``MIXRES_THREADS`` caps the sweep worker pool.  Per-run seeds are derived
from the sweep seed and the run index, so results do not depend on worker
scheduling, and a single collector writes all rows in plan order.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .activations import get_activation
from .autodiff import Network, kernels_np, loss_gradient
from .autodiff.engine import nmean, nsum, square
from .barron import (
    assemble_requ_network,
    cosine_ridge,
    product_sine_fourier,
    relu_interpolant,
    relu_to_requ,
    w1inf_gap,
)
from .domain import make_problem
from .exceptions import DimensionError, NonFiniteError
from .losses import default_weights
from .networks import (
    ResNetSpec,
    TwoLayerSpec,
    init_resnet,
    init_two_layer,
    unpack_resnet,
    unpack_two_layer,
)
from .rademacher import linear_class_bound, quadrature_gap, rc_linear_exact
from .training import (
    TrainConfig,
    derive_seed,
    evaluate_checkpoint,
    parameter_count,
    train,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

EVAL_HEADER = "method,act,dim,e0,e1,e2,time_s,nop"
TABLE_HEADER = "method,problem,act,dim,width,e0,e1,e2,time_s,nop,status"
FIGURE_HEADER = "method,problem,act,dim,width,log10_e0,log10_e1,log10_e2"
CERT_HEADER = (
    "m,val_gap,deriv_gap,w1inf_bound,relu_coeff_sum,relu_coeff_bound,"
    "requ_coeff_sum,requ_coeff_bound,offset_abs,offset_bound"
)
ASSEMBLY_HEADER = "m_atoms,h1_error,h1_bound"
LINEAR_HEADER = "n,estimate,std_err,upper_bound"
GAP_HEADER = "n,gap_mean,gap_stderr"

_METHODS = ("mix", "drm", "dgm")
_PROBLEMS = ("dirichlet", "neumann")
_ACTIVATIONS = ("requ", "recu")


class UsageError(Exception):
    """Bad flags, keys, or file contents; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Option plumbing
# ---------------------------------------------------------------------------


def read_kv_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` file: one pair per line, ``#`` lines are comments."""
    try:
        with open(path) as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise UsageError(f"{path}:{lineno}: empty key")
        if key in out:
            raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _gather(ns: argparse.Namespace, allowed: tuple[str, ...]) -> dict:
    """File options overridden by any flag the user actually passed."""
    opts: dict = {}
    config_path = getattr(ns, "config", None)
    if config_path:
        file_opts = read_kv_config(config_path)
        unknown = sorted(set(file_opts) - set(allowed))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        opts.update(file_opts)
    for key in allowed:
        value = getattr(ns, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _to_int(opts: dict, key: str, default: int | None = None) -> int | None:
    if key not in opts:
        return default
    try:
        return int(str(opts[key]))
    except ValueError as exc:
        raise UsageError(f"{key} must be an integer, got {opts[key]!r}") from exc


def _to_float(opts: dict, key: str, default: float | None = None) -> float | None:
    if key not in opts:
        return default
    try:
        return float(str(opts[key]))
    except ValueError as exc:
        raise UsageError(f"{key} must be a number, got {opts[key]!r}") from exc


def _to_bool(opts: dict, key: str, default: bool = False) -> bool:
    if key not in opts:
        return default
    value = str(opts[key]).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{key} must be a boolean, got {opts[key]!r}")


def _to_choice(opts: dict, key: str, choices: tuple[str, ...], default: str) -> str:
    value = str(opts.get(key, default)).strip().lower()
    if value not in choices:
        raise UsageError(f"{key} must be one of {', '.join(choices)}; got {value!r}")
    return value


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in str(value).split(",") if item.strip()]


def _boundary_weight(opts: dict) -> float | None:
    """Boundary weight from --lambda2 (mix) or --lambda-b (drm/dgm alias)."""
    lam2 = _to_float(opts, "lambda2")
    lam_b = _to_float(opts, "lambda_b")
    if lam2 is not None and lam_b is not None and lam2 != lam_b:
        raise UsageError("lambda2 and lambda_b disagree; set only one")
    return lam2 if lam2 is not None else lam_b


_TRAIN_KEYS = (
    "method", "problem", "dim", "width", "blocks", "activation", "iters",
    "lr", "lambda1", "lambda2", "lambda_b", "n", "nbar", "seed", "out",
    "eval_every", "fixed_dataset",
)


def build_train_config(opts: dict, default_blocks: int = 10) -> TrainConfig:
    """TrainConfig from merged options; anything inconsistent is a usage error."""
    try:
        config = TrainConfig(
            method=_to_choice(opts, "method", _METHODS, "mix"),
            problem=_to_choice(opts, "problem", _PROBLEMS, "dirichlet"),
            dim=_to_int(opts, "dim", 2),
            width=_to_int(opts, "width", 10),
            blocks=_to_int(opts, "blocks", default_blocks),
            activation=_to_choice(opts, "activation", _ACTIVATIONS, "requ"),
            iterations=_to_int(opts, "iters", 20_000),
            n_interior=_to_int(opts, "n", 1000),
            n_boundary=_to_int(opts, "nbar"),
            lr=_to_float(opts, "lr", 1e-4),
            lambda1=_to_float(opts, "lambda1", 1.0),
            lambda2=_boundary_weight(opts),
            seed=_to_int(opts, "seed", 0),
            eval_every=_to_int(opts, "eval_every", 1000),
            fixed_dataset=_to_bool(opts, "fixed_dataset"),
        )
        parameter_count(config)  # validates the network shapes
    except (ValueError, DimensionError) as exc:
        raise UsageError(str(exc)) from exc
    return config


def _pool_size(n_tasks: int) -> int:
    cap = os.environ.get("MIXRES_THREADS")
    if cap is None:
        limit = os.cpu_count() or 1
    else:
        limit = _to_int({"MIXRES_THREADS": cap}, "MIXRES_THREADS")
        if limit < 1:
            raise UsageError("MIXRES_THREADS must be a positive integer")
    return max(1, min(limit, n_tasks))


def _ensure_out(opts: dict) -> str:
    out = opts.get("out")
    if not out:
        raise UsageError("--out is required for this subcommand")
    os.makedirs(out, exist_ok=True)
    return str(out)


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# train / evaluate
# ---------------------------------------------------------------------------


def _eval_row(method: str, act: str, dim: int, errors, nop: int) -> str:
    e0, e1, e2 = errors
    return ",".join(
        [method, act, str(dim), repr(float(e0)), repr(float(e1)),
         repr(float(e2)), repr(0.0), str(nop)]
    )


def cmd_train(ns: argparse.Namespace) -> int:
    opts = _gather(ns, _TRAIN_KEYS)
    config = build_train_config(opts)
    checkpoint_path = history_path = None
    if opts.get("out"):
        out = _ensure_out(opts)
        checkpoint_path = os.path.join(out, "checkpoint.json")
        history_path = os.path.join(out, "history.csv")
    try:
        _, history = train(config, checkpoint_path, history_path)
    except NonFiniteError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    last = history[-1]
    print(EVAL_HEADER)
    print(
        _eval_row(
            config.method, config.activation, config.dim,
            (last["e0"], last["e1"], last["e2"]), parameter_count(config),
        )
    )
    return EXIT_OK


def cmd_evaluate(ns: argparse.Namespace) -> int:
    try:
        e0, e1, e2, config, _ = evaluate_checkpoint(ns.checkpoint)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad checkpoint {ns.checkpoint!r}: {exc}") from exc
    if "width" in config:
        full = TrainConfig(**config)
        nop = parameter_count(full)
        method, act, dim = full.method, full.activation, full.dim
    else:
        nop = 0  # analytic-solution stub carries no parameters
        method = str(config["method"])
        act = str(config["activation"])
        dim = int(config["dim"])
    print(EVAL_HEADER)
    print(_eval_row(method, act, dim, (e0, e1, e2), nop))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    """A cross product of training runs sharing one budget and seed.

    Plan order is the nested loop methods > problems > activations > dims >
    widths; run ``i`` trains with seed ``derive_seed(seed, i)`` so results
    are independent of worker scheduling.
    """

    configs: tuple[TrainConfig, ...]
    iterations: int
    out_dir: str
    seed: int


_SWEEP_KEYS = _TRAIN_KEYS + ("methods", "problems", "dims", "widths", "activations")


def build_plan(opts: dict) -> ExperimentPlan:
    """ExperimentPlan from merged options; singular keys trump plural ones."""
    for singular, plural in (
        ("method", "methods"), ("problem", "problems"), ("dim", "dims"),
        ("width", "widths"), ("activation", "activations"),
    ):
        if singular in opts:
            opts[plural] = str(opts[singular])
    methods = _split_list(opts.get("methods", "mix,drm"))
    problems = _split_list(opts.get("problems", "dirichlet"))
    activations = _split_list(opts.get("activations", "requ"))
    dims = _split_list(opts.get("dims", "2"))
    widths = _split_list(opts.get("widths", "5,10,20"))
    iterations = _to_int(opts, "iters", 20_000)
    seed = _to_int(opts, "seed", 0)
    base = dict(opts)
    for key in ("methods", "problems", "dims", "widths", "activations", "seed"):
        base.pop(key, None)
    base["iters"] = iterations

    configs: list[TrainConfig] = []
    for method in methods:
        for problem in problems:
            for act in activations:
                for dim in dims:
                    for width in widths:
                        run = dict(
                            base, method=method, problem=problem,
                            activation=act, dim=dim, width=width,
                            seed=derive_seed(seed, len(configs)),
                        )
                        configs.append(build_train_config(run, default_blocks=2))
    return ExperimentPlan(
        configs=tuple(configs),
        iterations=iterations,
        out_dir=str(opts.get("out", "")),
        seed=seed,
    )


def _sanitize(message: str) -> str:
    return message.replace(",", ";").replace("\n", " ")


def _run_sweep_config(args: tuple[int, TrainConfig, str]):
    index, config, out_dir = args
    checkpoint = f"run{index:03d}_checkpoint.json"
    history = f"run{index:03d}_history.csv"
    try:
        _, rows = train(
            config,
            os.path.join(out_dir, checkpoint),
            os.path.join(out_dir, history),
        )
        last = rows[-1]
        errors = (last["e0"], last["e1"], last["e2"])
        status = "ok"
    except Exception as exc:  # noqa: BLE001 - a failed run must not kill the sweep
        errors = None
        status = _sanitize(f"failed: {type(exc).__name__}: {exc}")
    return index, errors, status, checkpoint, history


def cmd_sweep(ns: argparse.Namespace) -> int:
    opts = _gather(ns, _SWEEP_KEYS)
    plan = build_plan(opts)
    out_dir = _ensure_out(opts)
    tasks = [(i, cfg, out_dir) for i, cfg in enumerate(plan.configs)]

    results = []
    if tasks:
        with ThreadPoolExecutor(max_workers=_pool_size(len(tasks))) as pool:
            results = list(pool.map(_run_sweep_config, tasks))

    table = [TABLE_HEADER]
    figure = [FIGURE_HEADER]
    manifest_runs = []
    failures = 0
    for index, errors, status, checkpoint, history in results:
        config = plan.configs[index]
        nop = parameter_count(config)
        if errors is None:
            failures += 1
            e_cells = ["", "", ""]
        else:
            e_cells = [repr(float(e)) for e in errors]
        table.append(
            ",".join(
                [config.method, config.problem, config.activation,
                 str(config.dim), str(config.width), *e_cells, repr(0.0),
                 str(nop), status]
            )
        )
        if errors is not None and config.method in ("mix", "drm"):
            logs = [repr(math.log10(max(float(e), 1e-300))) for e in errors]
            figure.append(
                ",".join(
                    [config.method, config.problem, config.activation,
                     str(config.dim), str(config.width), *logs]
                )
            )
        manifest_runs.append(
            {
                "index": index,
                "method": config.method,
                "problem": config.problem,
                "activation": config.activation,
                "dim": config.dim,
                "width": config.width,
                "blocks": config.blocks,
                "iterations": config.iterations,
                "nop": nop,
                "seed": config.seed,
                "checkpoint": checkpoint,
                "history": history,
                "status": status,
            }
        )

    _write_lines(os.path.join(out_dir, "sweep_table.csv"), table)
    _write_lines(os.path.join(out_dir, "sweep_figure.csv"), figure)
    manifest = {
        "iterations": plan.iterations,
        "seed": plan.seed,
        "runs": manifest_runs,
    }
    with open(os.path.join(out_dir, "sweep_manifest.json"), "w") as handle:
        json.dump(manifest, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")
    print(f"sweep: {len(results)} runs, {failures} failed, tables in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def _kink_margins(net: Network, X: np.ndarray) -> np.ndarray:
    """Smallest |pre-activation| per sample; FD steps must not cross a kink."""
    power = net.spec.activation.power
    if isinstance(net.spec, ResNetSpec):
        A, W, b, U = unpack_resnet(net.spec, net.params)
        *_, tape = kernels_np.resnet_forward(X, A, W, b, U, power, 0, True)
        return np.min([np.abs(Z).min(axis=1) for Z in tape[4]], axis=0)
    c, a, Wm, bm = unpack_two_layer(net.spec, net.params)
    *_, tape = kernels_np.two_layer_forward(X, c, a, Wm, bm, power, 0, True)
    return np.abs(tape[1]).min(axis=1)


def _sample_clear_of_kinks(
    net: Network, rng: np.random.Generator, count: int, margin: float = 1e-3
) -> np.ndarray:
    dim = net.spec.input_dim
    X = rng.uniform(0.0, 1.0, size=(count, dim))
    for _ in range(200):
        bad = _kink_margins(net, X) <= margin
        if not bad.any():
            return X
        X[bad] = rng.uniform(0.0, 1.0, size=(int(bad.sum()), dim))
    raise UsageError("could not find finite-difference points away from kinks")


def _fd_jets(net: Network, X: np.ndarray, h: float = 1e-5):
    n, d = X.shape
    grad = np.zeros((n, d))
    lap = np.zeros(n)
    base = net.jet_batch(X, order=0).values
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        vp = net.jet_batch(X + e, order=0).values
        vm = net.jet_batch(X - e, order=0).values
        grad[:, k] = (vp - vm) / (2 * h)
        lap += (vp - 2 * base + vm) / h**2
    return grad, lap


def _synthetic_loss(field, X: np.ndarray, scales: tuple[float, float, float]):
    jets = field.jet_batch(X, order=2)
    loss = nmean(square(jets.values)) * (1.0 / scales[0])
    loss = loss + nmean(nsum(square(jets.gradients), axis=1)) * (1.0 / scales[1])
    return loss + nmean(square(jets.laplacians)) * (1.0 / scales[2])


def _loss_scales(net: Network, X: np.ndarray) -> tuple[float, float, float]:
    jets = net.jet_batch(X, order=2)
    return (
        max(1.0, float(np.mean(np.square(jets.values)))),
        max(1.0, float(np.mean(np.sum(np.square(jets.gradients), axis=1)))),
        max(1.0, float(np.mean(np.square(jets.laplacians)))),
    )


def _max_rel(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
    return float(np.max(np.abs(analytic - fd) / scale))


_GRADCHECK_KEYS = ("net", "activation", "dim", "width", "blocks", "seed")


def cmd_gradcheck(ns: argparse.Namespace) -> int:
    opts = _gather(ns, _GRADCHECK_KEYS)
    kind = _to_choice(opts, "net", ("resnet", "two-layer"), "resnet")
    act = get_activation(_to_choice(opts, "activation", _ACTIVATIONS, "requ"))
    dim = _to_int(opts, "dim", 2)
    width = _to_int(opts, "width", 8)
    blocks = _to_int(opts, "blocks", 2)
    seed = _to_int(opts, "seed", 0)
    try:
        if kind == "resnet":
            spec = ResNetSpec(dim, width, blocks, 1, act)
            theta = init_resnet(spec, np.random.default_rng(seed))
        else:
            spec = TwoLayerSpec(dim, width, 1.0, act)
            theta = init_two_layer(spec, np.random.default_rng(seed))
    except (ValueError, DimensionError) as exc:
        raise UsageError(str(exc)) from exc

    net = Network(spec, theta)
    X = _sample_clear_of_kinks(net, np.random.default_rng(derive_seed(seed, 1)), 16)

    jets = net.jet_batch(X, order=2)
    fd_grad, fd_lap = _fd_jets(net, X)
    rel_grad = _max_rel(jets.gradients, fd_grad)
    rel_lap = _max_rel(jets.laplacians, fd_lap)

    scales = _loss_scales(net, X)
    _, grad = loss_gradient(net, lambda f: _synthetic_loss(f, X, scales))
    h = 1e-4
    idx_rng = np.random.default_rng(derive_seed(seed, 2))
    indices = idx_rng.choice(theta.size, size=min(40, theta.size), replace=False)
    rel_param = 0.0
    for i in indices:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        vp, _ = loss_gradient(Network(spec, tp), lambda f: _synthetic_loss(f, X, scales))
        vm, _ = loss_gradient(Network(spec, tm), lambda f: _synthetic_loss(f, X, scales))
        fd = (vp - vm) / (2 * h)
        rel_param = max(
            rel_param, abs(fd - grad[i]) / max(1.0, abs(fd), abs(grad[i]))
        )

    zero_net = Network(spec, np.zeros_like(theta))
    zjets = zero_net.jet_batch(X, order=2)
    zfd_grad, zfd_lap = _fd_jets(zero_net, X)
    zero_gap = max(
        float(np.max(np.abs(zjets.values))),
        float(np.max(np.abs(zjets.gradients - zfd_grad))),
        float(np.max(np.abs(zjets.laplacians - zfd_lap))),
    )

    checks = [
        ("jet gradient vs fd", rel_grad, 1e-4),
        ("jet laplacian vs fd", rel_lap, 1e-4),
        ("parameter gradient vs fd", rel_param, 1e-5),
        ("zero network exact", zero_gap, 0.0),
    ]
    failed = 0
    print(f"gradcheck {kind} {act.name} dim={dim} width={width} seed={seed}")
    for name, value, tol in checks:
        ok = value <= tol
        failed += 0 if ok else 1
        print(f"  {name}: max rel err {value:.3e} (tol {tol:.0e}) "
              f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# approx
# ---------------------------------------------------------------------------


_APPROX_KEYS = ("dim", "seed", "out", "m_values", "atoms", "m_grid", "n_mc")


def cmd_approx(ns: argparse.Namespace) -> int:
    opts = _gather(ns, _APPROX_KEYS)
    dim = _to_int(opts, "dim", 2)
    seed = _to_int(opts, "seed", 0)
    out_dir = _ensure_out(opts)
    m_values = [_to_int({"m": m}, "m") for m in
                _split_list(opts.get("m_values", "8,16,32,64"))]
    atoms = [_to_int({"atoms": a}, "atoms") for a in
             _split_list(opts.get("atoms", "4,16,64,256"))]
    m_grid = _to_int(opts, "m_grid", 24)
    n_mc = _to_int(opts, "n_mc", 30_000)

    violations = 0
    ridge = cosine_ridge(1.0, math.pi)
    bound = ridge.bound
    cert_rows = [CERT_HEADER]
    for m in m_values:
        interp = relu_interpolant(ridge, m)
        net = relu_to_requ(interp)
        shifts = np.concatenate(
            [interp.knots, interp.knots - interp.h, interp.knots + interp.h]
        )
        val_gap, deriv_gap = w1inf_gap(ridge, net.values, net.derivatives, extra=shifts)
        w1inf_bound = 5.0 * bound / m
        checks = (
            max(val_gap, deriv_gap) <= w1inf_bound,
            interp.coeff_sum <= 4.0 * bound + 1e-12,
            net.coeff_sum <= 8.0 * bound + 1e-12,
            abs(net.c) <= bound,
        )
        violations += sum(0 if ok else 1 for ok in checks)
        cert_rows.append(
            ",".join(
                [str(m), repr(val_gap), repr(deriv_gap), repr(w1inf_bound),
                 repr(interp.coeff_sum), repr(4.0 * bound),
                 repr(net.coeff_sum), repr(8.0 * bound),
                 repr(abs(net.c)), repr(bound)]
            )
        )
    _write_lines(os.path.join(out_dir, "certificates.csv"), cert_rows)

    u = product_sine_fourier(dim)
    assembly_rows = [ASSEMBLY_HEADER]
    h1_errors = []
    for i, m_atoms in enumerate(atoms):
        result = assemble_requ_network(
            u, m_atoms, m_grid, seed=derive_seed(seed, i), n_mc=n_mc
        )
        if result.h1_error > result.h1_bound:
            violations += 1
        h1_errors.append(result.h1_error)
        assembly_rows.append(
            ",".join([str(m_atoms), repr(result.h1_error), repr(result.h1_bound)])
        )
    _write_lines(os.path.join(out_dir, "assembly.csv"), assembly_rows)

    slope = float("nan")
    if len(atoms) >= 2 and all(e > 0 for e in h1_errors):
        slope = float(
            np.polyfit(np.log(np.asarray(atoms, float)), np.log(h1_errors), 1)[0]
        )
    status = "PASS" if violations == 0 else f"FAIL ({violations} violations)"
    print(f"approx: certificates for m={m_values}, assembly for atoms={atoms}")
    print(f"  h1 log-log slope vs atoms: {slope:.3f}")
    print(f"  bound checks: {status}")
    return EXIT_OK if violations == 0 else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# rademacher
# ---------------------------------------------------------------------------


_RADEMACHER_KEYS = ("dim", "seed", "out", "trials", "n_eps")


def cmd_rademacher(ns: argparse.Namespace) -> int:
    opts = _gather(ns, _RADEMACHER_KEYS)
    dim = _to_int(opts, "dim", 2)
    seed = _to_int(opts, "seed", 0)
    trials = _to_int(opts, "trials", 64)
    n_eps = _to_int(opts, "n_eps", 2048)
    out_dir = _ensure_out(opts)

    violations = 0
    point_rng = np.random.default_rng(derive_seed(seed, 0))
    linear_rows = [LINEAR_HEADER]
    for i, n in enumerate(2**k for k in range(4, 13)):
        points = point_rng.uniform(0.0, 1.0, size=(n, dim))
        estimate = rc_linear_exact(
            points, n_eps=n_eps, rng=np.random.default_rng(derive_seed(seed, 100 + i))
        )
        upper = linear_class_bound(n, dim)
        if estimate.mean > upper + 1e-12:
            violations += 1
        linear_rows.append(
            ",".join([str(n), repr(estimate.mean), repr(estimate.std_err), repr(upper)])
        )
    _write_lines(os.path.join(out_dir, "linear.csv"), linear_rows)

    problem = make_problem("dirichlet", dim)
    phi_spec = ResNetSpec(dim, 10, 10, 1)
    psi_spec = ResNetSpec(dim, 20, 10, dim)
    phi = Network(phi_spec, init_resnet(phi_spec, np.random.default_rng(derive_seed(seed, 1))))
    psi = Network(psi_spec, init_resnet(psi_spec, np.random.default_rng(derive_seed(seed, 2))))
    curve = quadrature_gap(
        phi, psi, "mix", problem,
        n_values=[2**k for k in range(5, 13)],
        trials=trials,
        rng=np.random.default_rng(derive_seed(seed, 3)),
        weights=default_weights("mix", "dirichlet"),
    )
    gap_rows = [GAP_HEADER]
    for n, mean, stderr in zip(curve.ns, curve.gap_means, curve.gap_std_errs):
        gap_rows.append(",".join([str(int(n)), repr(float(mean)), repr(float(stderr))]))
    _write_lines(os.path.join(out_dir, "gaps.csv"), gap_rows)

    slope = curve.fitted_slope()
    status = "PASS" if violations == 0 else f"FAIL ({violations} violations)"
    print(f"rademacher: d={dim}, linear-class bound checks: {status}")
    print(f"  quadrature-gap log-log slope: {slope:.3f}")
    return EXIT_OK if violations == 0 else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output directory")


def _add_train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--method", choices=_METHODS)
    sub.add_argument("--problem", choices=_PROBLEMS)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--width", type=int)
    sub.add_argument("--blocks", type=int)
    sub.add_argument("--activation", choices=_ACTIVATIONS)
    sub.add_argument("--iters", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--lambda1", type=float)
    sub.add_argument("--lambda2", type=float)
    sub.add_argument("--lambda-b", dest="lambda_b", type=float)
    sub.add_argument("--n", type=int, help="interior batch size")
    sub.add_argument("--nbar", type=int, help="boundary batch size")
    sub.add_argument("--eval-every", dest="eval_every", type=int)
    sub.add_argument(
        "--fixed-dataset", dest="fixed_dataset", action="store_const", const=True
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixres",
        description="Elliptic-PDE solver lab: training runs, error tables, "
        "approximation and complexity diagnostics.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="run one training config")
    _add_common(p_train)
    _add_train_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = commands.add_parser("evaluate", help="error row for a checkpoint")
    p_eval.add_argument("checkpoint", help="checkpoint JSON path")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = commands.add_parser("sweep", help="run a cross product of configs")
    _add_common(p_sweep)
    _add_train_flags(p_sweep)
    for plural in ("methods", "problems", "dims", "widths", "activations"):
        p_sweep.add_argument(f"--{plural}", help=f"comma list of {plural}")
    p_sweep.set_defaults(func=cmd_sweep)

    p_grad = commands.add_parser("gradcheck", help="finite-difference audit")
    _add_common(p_grad)
    p_grad.add_argument("--net", choices=("resnet", "two-layer"))
    p_grad.add_argument("--activation", choices=_ACTIVATIONS)
    p_grad.add_argument("--dim", type=int)
    p_grad.add_argument("--width", type=int)
    p_grad.add_argument("--blocks", type=int)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_approx = commands.add_parser(
        "approx", help="hinge-rewrite certificates and sampled-network errors"
    )
    _add_common(p_approx)
    p_approx.add_argument("--dim", type=int)
    p_approx.add_argument("--m-values", dest="m_values", help="comma list of mesh sizes")
    p_approx.add_argument("--atoms", help="comma list of network widths")
    p_approx.add_argument("--m-grid", dest="m_grid", type=int)
    p_approx.add_argument("--n-mc", dest="n_mc", type=int)
    p_approx.set_defaults(func=cmd_approx)

    p_rad = commands.add_parser(
        "rademacher", help="sign-complexity estimates and quadrature gaps"
    )
    _add_common(p_rad)
    p_rad.add_argument("--dim", type=int)
    p_rad.add_argument("--trials", type=int)
    p_rad.add_argument("--n-eps", dest="n_eps", type=int)
    p_rad.set_defaults(func=cmd_rademacher)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return ns.func(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
