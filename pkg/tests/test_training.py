"""Training loop: determinism, checkpoints, history format, Adam updates."""

import json
import math

import numpy as np
import pytest

from mixres.exceptions import NonFiniteError
from mixres.networks import matched_single_net_width
from mixres.training import (
    HISTORY_HEADER,
    Checkpoint,
    TrainConfig,
    adam_init,
    adam_step,
    build_specs,
    checkpoint_fields,
    derive_seed,
    evaluate_checkpoint,
    history_csv,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
    train,
)

TINY = TrainConfig(
    method="mix",
    problem="dirichlet",
    dim=2,
    width=4,
    blocks=2,
    iterations=40,
    n_interior=32,
    n_boundary=8,
    eval_every=20,
    eval_points=200,
    seed=3,
)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(iterations=0)
        with pytest.raises(ValueError):
            TrainConfig(lr=0.0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(method="fem")
        with pytest.raises(ValueError):
            TrainConfig(problem="robin")

    def test_boundary_batch_default_and_floor(self):
        assert TrainConfig().boundary_batch == 1000
        assert TrainConfig(n_boundary=250).boundary_batch == 250
        # Below ceil(n / d^2) the surface estimate is undersampled.
        with pytest.raises(ValueError, match="floor"):
            TrainConfig(n_interior=1000, n_boundary=100, dim=2)
        TrainConfig(n_interior=1000, n_boundary=10, dim=10)  # floor is 10

    def test_weights_resolution(self):
        assert TrainConfig(method="drm").weights().lambda2 == 500.0
        assert TrainConfig(method="drm", problem="neumann").weights().lambda2 == 1.0
        assert TrainConfig(method="drm", lambda2=7.0).weights().lambda2 == 7.0
        assert TrainConfig(method="mix", lambda1=0.5).weights().lambda1 == 0.5

    def test_build_specs(self):
        phi, psi = build_specs(TrainConfig(method="mix", dim=3, width=10))
        assert (phi.input_dim, phi.width, phi.output_dim) == (3, 10, 1)
        assert (psi.input_dim, psi.width, psi.output_dim) == (3, 20, 3)
        phi, psi = build_specs(TrainConfig(method="drm", dim=3, width=23))
        assert psi is None and phi.width == 23

    def test_parameter_count_tables(self):
        assert parameter_count(TrainConfig(method="mix", dim=2, width=10)) == 5410
        assert parameter_count(TrainConfig(method="drm", dim=2, width=23)) == 5589
        assert matched_single_net_width(10) == 23


class TestAdam:
    def test_first_step_moves_by_lr_against_gradient_sign(self):
        # After bias correction the first update is lr * sign(grad)
        # up to the epsilon regulariser.
        params = np.zeros(4)
        grad = np.array([1.0, -2.0, 0.5, -0.25])
        state, new = adam_step(adam_init(4), params, grad, lr=0.1)
        np.testing.assert_allclose(new, -0.1 * np.sign(grad), rtol=1e-6)
        assert state.step == 1

    def test_matches_reference_formula(self):
        rng = np.random.default_rng(0)
        params = rng.normal(size=6)
        state = adam_init(6)
        m = np.zeros(6)
        v = np.zeros(6)
        for step in range(1, 6):
            grad = rng.normal(size=6)
            state, params = adam_step(state, params, grad, lr=1e-2)
            m = 0.9 * m + 0.1 * grad
            v = 0.999 * v + 0.001 * grad**2
            ref = -1e-2 * (m / (1 - 0.9**step)) / (
                np.sqrt(v / (1 - 0.999**step)) + 1e-8
            )
            np.testing.assert_allclose(params - (params - ref), ref)
        assert state.step == 5

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_step(adam_init(3), np.zeros(4), np.zeros(4), lr=0.1)


class TestDeterminism:
    def test_history_and_checkpoint_bytes_repeat(self, tmp_path):
        a_ck, a_rows = train(TINY)
        b_ck, b_rows = train(TINY)
        assert history_csv(a_rows) == history_csv(b_rows)
        assert a_ck.to_json() == b_ck.to_json()

    def test_different_seed_differs(self):
        _, a_rows = train(TINY)
        _, b_rows = train(
            TrainConfig(**{**_config_dict(TINY), "seed": 4})
        )
        assert history_csv(a_rows) != history_csv(b_rows)

    def test_fixed_dataset_mode_changes_history(self):
        _, fresh = train(TINY)
        _, fixed = train(TrainConfig(**{**_config_dict(TINY), "fixed_dataset": True}))
        assert history_csv(fresh) != history_csv(fixed)

    def test_derive_seed_is_stable_and_spread(self):
        assert derive_seed(0, 0) == derive_seed(0, 0)
        seen = {derive_seed(0, k) for k in range(32)}
        assert len(seen) == 32
        assert derive_seed(1, 0) != derive_seed(0, 0)


class TestHistory:
    def test_row_schedule(self):
        _, rows = train(TINY)
        iters = [row["iter"] for row in rows]
        assert iters == [0, 20, 40]
        _, rows = train(TrainConfig(**{**_config_dict(TINY), "iterations": 50}))
        assert [row["iter"] for row in rows] == [0, 20, 40, 50]

    def test_csv_format(self):
        _, rows = train(TINY)
        text = history_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == HISTORY_HEADER == "iter,r_g,r_e,r_b,total,e0,e1,e2,wall_ms"
        assert len(lines) == len(rows) + 1
        for line in lines[1:]:
            cells = line.split(",")
            assert len(cells) == 9
            assert cells[-1] == "0.0"  # wall time column is a placeholder
            assert all(math.isfinite(float(cell)) for cell in cells)

    def test_round_trip_repr_precision(self):
        _, rows = train(TINY)
        text = history_csv(rows)
        cells = text.strip().split("\n")[-1].split(",")
        assert float(cells[4]) == rows[-1]["total"]


class TestCheckpoints:
    def test_save_load_round_trip(self, tmp_path):
        path = tmp_path / "ck.json"
        ck, rows = train(TINY, checkpoint_path=path)
        data = load_checkpoint(path)
        assert data["version"] == 1
        assert data["iteration"] == 40
        assert data["config"]["method"] == "mix"
        phi, psi, problem, config = checkpoint_fields(data)
        assert psi is not None and problem.kind == "dirichlet"
        np.testing.assert_array_equal(phi.params, ck.params_phi)
        np.testing.assert_array_equal(psi.params, ck.params_psi)

    def test_evaluation_matches_history_tail(self, tmp_path):
        path = tmp_path / "ck.json"
        _, rows = train(TINY, checkpoint_path=path, history_path=tmp_path / "h.csv")
        e0, e1, e2, config, problem = evaluate_checkpoint(
            path, n_quad=TINY.eval_points, eval_seed=TINY.eval_seed
        )
        last = rows[-1]
        assert (e0, e1, e2) == (last["e0"], last["e1"], last["e2"])
        assert (tmp_path / "h.csv").read_text() == history_csv(rows)

    def test_scalar_only_methods_store_null_flux(self, tmp_path):
        config = TrainConfig(**{**_config_dict(TINY), "method": "dgm", "width": 6})
        path = tmp_path / "ck.json"
        train(config, checkpoint_path=path)
        data = json.loads(path.read_text())
        assert data["params_psi"] is None
        phi, psi, _, _ = checkpoint_fields(data)
        assert psi is None

    def test_oracle_stub_evaluates_to_zero(self, tmp_path):
        path = tmp_path / "oracle.json"
        path.write_text(json.dumps({"oracle": "exact", "problem": "neumann", "dim": 3}))
        e0, e1, e2, config, problem = evaluate_checkpoint(path, n_quad=500)
        assert (e0, e1, e2) == (0.0, 0.0, 0.0)
        assert config["problem"] == "neumann" and problem.dim == 3

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"config": {}, "iteration": 0}))
        with pytest.raises(ValueError, match="params_phi"):
            load_checkpoint(path)
        path.write_text(json.dumps([1, 2, 3]))
        with pytest.raises(ValueError, match="JSON object"):
            load_checkpoint(path)

    def test_mixed_checkpoint_requires_flux_params(self, tmp_path):
        path = tmp_path / "ck.json"
        ck, _ = train(TINY, checkpoint_path=path)
        data = json.loads(path.read_text())
        data["params_psi"] = None
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError, match="flux"):
            checkpoint_fields(load_checkpoint(path))

    def test_checkpoint_json_is_canonical(self):
        ck = Checkpoint(
            config={"b": 1, "a": 2},
            iteration=1,
            params_phi=np.array([1.0]),
            params_psi=None,
            final_loss={"total": 0.0},
            rng_cursor={},
        )
        text = ck.to_json()
        assert text.index('"a"') < text.index('"b"')
        assert ": " not in text and ", " not in text


class TestTrainingBehaviour:
    def test_loss_decreases_on_tiny_problem(self):
        config = TrainConfig(**{**_config_dict(TINY), "iterations": 300, "lr": 1e-2})
        _, rows = train(config)
        assert rows[-1]["total"] < rows[0]["total"]

    def test_divergent_run_raises_and_saves_diagnostic(self, tmp_path):
        path = tmp_path / "diag.json"
        config = TrainConfig(**{**_config_dict(TINY), "lr": 1e80, "iterations": 200})
        with pytest.raises(NonFiniteError):
            train(config, checkpoint_path=path)
        data = load_checkpoint(path)  # last finite parameters were written
        assert np.all(np.isfinite(np.asarray(data["params_phi"], dtype=float)))

    @pytest.mark.parametrize("method", ["drm", "dgm"])
    @pytest.mark.parametrize("problem", ["dirichlet", "neumann"])
    def test_scalar_methods_run(self, method, problem):
        config = TrainConfig(
            method=method,
            problem=problem,
            dim=2,
            width=5,
            blocks=2,
            iterations=10,
            n_interior=16,
            n_boundary=4,
            eval_every=10,
            eval_points=100,
        )
        _, rows = train(config)
        assert len(rows) == 2
        assert all(math.isfinite(rows[-1][key]) for key in ("total", "e0", "e1", "e2"))


def _config_dict(config: TrainConfig) -> dict:
    from dataclasses import asdict

    return asdict(config)
