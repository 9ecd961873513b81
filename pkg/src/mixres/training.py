"""Adam training loop with deterministic seeding and JSON checkpoints.

One ``train(config)`` call runs the whole pipeline for a single
configuration: build networks, then repeat sample batch -> loss ->
gradient -> Adam step.  For the mixed method the two networks share a
single optimizer state over the concatenated parameter vector.

Everything emitted is a pure function of the config: the parameter
initialisation and every training batch come from one generator seeded
with ``config.seed`` (draw order: phi parameters, psi parameters, then
batches in iteration order), while error evaluations use a separate
generator seeded with ``config.eval_seed`` so the metric does not perturb
the training stream.  Histories and checkpoints are byte-identical across
repeated runs; the ``wall_ms`` history column is a schema placeholder
(always 0.0), since wall-clock measurements are deliberately not part of
any emitted artifact.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .activations import get_activation
from .autodiff import GradientTape, Network
from .domain import Problem, boundary_count_rule, make_problem, sample_pde_batch
from .exceptions import NonFiniteError
from .losses import LossBreakdown, Weights, default_weights, method_loss, relative_errors
from .networks import ResNetSpec, init_resnet

HISTORY_HEADER = "iter,r_g,r_e,r_b,total,e0,e1,e2,wall_ms"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Full recipe for one training run.

    ``width`` is the method's own base width: the scalar network's width,
    with the mixed method's flux network at twice that (output dim d).
    ``lambda2`` of None picks the per-method default boundary weight.
    ``n_boundary`` of None matches the interior batch size.
    """

    method: str = "mix"
    problem: str = "dirichlet"
    dim: int = 2
    width: int = 10
    blocks: int = 10
    activation: str = "requ"
    iterations: int = 20_000
    n_interior: int = 1000
    n_boundary: int | None = None
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda1: float = 1.0
    lambda2: float | None = None
    seed: int = 0
    eval_every: int = 1000
    eval_points: int = 10_000
    eval_seed: int = 97
    fixed_dataset: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.method not in ("mix", "drm", "dgm"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.problem not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown problem {self.problem!r}")
        floor = boundary_count_rule(self.n_interior, self.dim)
        if self.boundary_batch < floor:
            raise ValueError(
                f"boundary batch {self.boundary_batch} below the sampling "
                f"floor {floor} for n={self.n_interior}, d={self.dim}"
            )

    @property
    def boundary_batch(self) -> int:
        return self.n_interior if self.n_boundary is None else self.n_boundary

    def weights(self) -> Weights:
        base = default_weights(self.method, self.problem)
        lam2 = base.lambda2 if self.lambda2 is None else self.lambda2
        return Weights(lambda1=self.lambda1, lambda2=lam2)


def build_specs(config: TrainConfig) -> tuple[ResNetSpec, ResNetSpec | None]:
    """Network shapes for a config; the flux net exists only for "mix"."""
    act = get_activation(config.activation)
    phi = ResNetSpec(
        input_dim=config.dim,
        width=config.width,
        blocks=config.blocks,
        output_dim=1,
        activation=act,
    )
    if config.method != "mix":
        return phi, None
    psi = ResNetSpec(
        input_dim=config.dim,
        width=2 * config.width,
        blocks=config.blocks,
        output_dim=config.dim,
        activation=act,
    )
    return phi, psi


def parameter_count(config: TrainConfig) -> int:
    """Total trainable parameters across both networks."""
    phi, psi = build_specs(config)
    return phi.param_count + (psi.param_count if psi is not None else 0)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray


def adam_init(n_params: int) -> AdamState:
    return AdamState(step=0, m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(
    state: AdamState,
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns fresh state and parameters."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient, and state shapes must agree")
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * np.square(grad)
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(step=step, m=m, v=v), new_params


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    """Serializable snapshot of a run: config echo, iteration, parameters."""

    config: dict
    iteration: int
    params_phi: np.ndarray
    params_psi: np.ndarray | None
    final_loss: dict
    rng_cursor: dict
    version: int = CHECKPOINT_VERSION

    def to_json(self) -> str:
        payload = {
            "version": self.version,
            "config": self.config,
            "iteration": self.iteration,
            "params_phi": self.params_phi.tolist(),
            "params_psi": None if self.params_psi is None else self.params_psi.tolist(),
            "final_loss": self.final_loss,
            "rng_cursor": self.rng_cursor,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    with open(path, "w") as handle:
        handle.write(checkpoint.to_json())
        handle.write("\n")


def load_checkpoint(path: str) -> dict:
    """Raw checkpoint document; also accepts the exact-solution stub."""
    with open(path) as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError("checkpoint must be a JSON object")
    if data.get("oracle") == "exact":
        return data
    for key in ("config", "iteration", "params_phi"):
        if key not in data:
            raise ValueError(f"checkpoint missing field {key!r}")
    return data


def checkpoint_fields(data: dict):
    """(phi_field, psi_field_or_None, problem, config_dict) from a document.

    A document ``{"oracle": "exact", "problem": ..., "dim": ...}`` stands
    for the analytic solution itself, which is how zero-error evaluation
    paths are exercised end to end.
    """
    if data.get("oracle") == "exact":
        problem = make_problem(data["problem"], int(data["dim"]))
        method = data.get("method", "mix")
        psi = problem.flux if method == "mix" else None
        config = {
            "method": method,
            "problem": data["problem"],
            "dim": int(data["dim"]),
            "activation": data.get("activation", "requ"),
        }
        return problem.solution, psi, problem, config
    config = TrainConfig(**data["config"])
    problem = make_problem(config.problem, config.dim)
    phi_spec, psi_spec = build_specs(config)
    phi = Network(phi_spec, np.asarray(data["params_phi"], dtype=float))
    psi = None
    if psi_spec is not None:
        if data.get("params_psi") is None:
            raise ValueError("mixed-method checkpoint is missing flux parameters")
        psi = Network(psi_spec, np.asarray(data["params_psi"], dtype=float))
    return phi, psi, problem, data["config"]


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def history_csv(rows: list[dict]) -> str:
    """Render history rows in a stable column order."""
    lines = [HISTORY_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    str(row["iter"]),
                    repr(row["r_g"]),
                    repr(row["r_e"]),
                    repr(row["r_b"]),
                    repr(row["total"]),
                    repr(row["e0"]),
                    repr(row["e1"]),
                    repr(row["e2"]),
                    repr(row["wall_ms"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _evaluate_errors(config, problem, phi_net, psi_net):
    eval_rng = np.random.default_rng(config.eval_seed)
    return relative_errors(phi_net, psi_net, problem, config.eval_points, eval_rng)


def train(
    config: TrainConfig,
    checkpoint_path: str | None = None,
    history_path: str | None = None,
) -> tuple[Checkpoint, list[dict]]:
    """Run the configured loop and return (checkpoint, history rows).

    History rows are recorded at iteration 0 (initial parameters), every
    ``eval_every`` steps, and after the final step.  The row at iteration j
    reports the training-batch loss at the parameters after j steps plus
    relative errors on the fixed evaluation set.  A non-finite loss aborts
    with the last finite parameters saved as a diagnostic checkpoint.
    """
    problem = make_problem(config.problem, config.dim)
    phi_spec, psi_spec = build_specs(config)
    weights = config.weights()

    rng = np.random.default_rng(config.seed)
    theta_phi = init_resnet(phi_spec, rng)
    theta_psi = init_resnet(psi_spec, rng) if psi_spec is not None else None
    n_phi = theta_phi.size
    theta = theta_phi if theta_psi is None else np.concatenate([theta_phi, theta_psi])

    state = adam_init(theta.size)
    history: list[dict] = []

    fixed_batch = None
    if config.fixed_dataset:
        fixed_batch = sample_pde_batch(
            config.dim, config.n_interior, config.boundary_batch, rng
        )

    def split(vec):
        if theta_psi is None:
            return vec, None
        return vec[:n_phi], vec[n_phi:]

    def batch_loss(vec, batch, want_grad):
        p_phi, p_psi = split(vec)
        phi_net = Network(phi_spec, p_phi)
        psi_net = Network(psi_spec, p_psi) if p_psi is not None else None
        if not want_grad:
            bd = method_loss(config.method, phi_net, psi_net, problem, batch, weights)
            return bd.floats(), None
        tape = GradientTape()
        phi_field = tape.watch(phi_net)
        psi_field = tape.watch(psi_net) if psi_net is not None else None
        bd = method_loss(config.method, phi_field, psi_field, problem, batch, weights)
        grads = tape.gradient(bd.total)
        grad = grads[0] if len(grads) == 1 else np.concatenate(grads)
        return bd.floats(), grad

    def record(iteration, breakdown):
        p_phi, p_psi = split(theta)
        phi_net = Network(phi_spec, p_phi)
        psi_net = Network(psi_spec, p_psi) if p_psi is not None else None
        e0, e1, e2 = _evaluate_errors(config, problem, phi_net, psi_net)
        history.append(
            {
                "iter": iteration,
                "r_g": breakdown.r_g,
                "r_e": breakdown.r_e,
                "r_b": breakdown.r_b,
                "total": breakdown.total,
                "e0": e0,
                "e1": e1,
                "e2": e2,
                "wall_ms": 0.0,
            }
        )

    last_breakdown = None
    try:
        for i in range(1, config.iterations + 1):
            batch = fixed_batch
            if batch is None:
                batch = sample_pde_batch(
                    config.dim, config.n_interior, config.boundary_batch, rng
                )
            breakdown, grad = batch_loss(theta, batch, want_grad=True)
            if i == 1:
                record(0, breakdown)
            state, theta = adam_step(
                state, theta, grad, config.lr, config.beta1, config.beta2, config.eps
            )
            last_breakdown = breakdown
            if i % config.eval_every == 0 and i != config.iterations:
                post_batch = fixed_batch
                if post_batch is None:
                    post_batch = sample_pde_batch(
                        config.dim, config.n_interior, config.boundary_batch, rng
                    )
                post_breakdown, _ = batch_loss(theta, post_batch, want_grad=False)
                record(i, post_breakdown)
        final_batch = fixed_batch
        if final_batch is None:
            final_batch = sample_pde_batch(
                config.dim, config.n_interior, config.boundary_batch, rng
            )
        final_breakdown, _ = batch_loss(theta, final_batch, want_grad=False)
        record(config.iterations, final_breakdown)
        last_breakdown = final_breakdown
    except NonFiniteError:
        if checkpoint_path is not None:
            p_phi, p_psi = split(theta)
            diag = Checkpoint(
                config=asdict(config),
                iteration=history[-1]["iter"] if history else 0,
                params_phi=p_phi,
                params_psi=p_psi,
                final_loss={} if last_breakdown is None else asdict_breakdown(last_breakdown),
                rng_cursor=rng.bit_generator.state,
            )
            save_checkpoint(diag, checkpoint_path)
        raise

    p_phi, p_psi = split(theta)
    checkpoint = Checkpoint(
        config=asdict(config),
        iteration=config.iterations,
        params_phi=p_phi,
        params_psi=p_psi,
        final_loss=asdict_breakdown(last_breakdown),
        rng_cursor=rng.bit_generator.state,
    )
    if checkpoint_path is not None:
        save_checkpoint(checkpoint, checkpoint_path)
    if history_path is not None:
        with open(history_path, "w") as handle:
            handle.write(history_csv(history))
    return checkpoint, history


def asdict_breakdown(breakdown: LossBreakdown) -> dict:
    bd = breakdown.floats()
    return {"r_g": bd.r_g, "r_e": bd.r_e, "r_b": bd.r_b, "total": bd.total}


def evaluate_checkpoint(path: str, n_quad: int = 10_000, eval_seed: int = 97):
    """(e0, e1, e2, config, problem) for a stored checkpoint document."""
    data = load_checkpoint(path)
    phi, psi, problem, config = checkpoint_fields(data)
    rng = np.random.default_rng(eval_seed)
    e0, e1, e2 = relative_errors(phi, psi, problem, n_quad, rng)
    return e0, e1, e2, config, problem


def derive_seed(base_seed: int, run_index: int) -> int:
    """Decorrelated child seed for run ``run_index`` of a sweep."""
    return int(np.random.SeedSequence([base_seed, run_index]).generate_state(1)[0])
