import numpy as np
import pytest

from krotov2.config import (
    build_problem,
    load_config,
    parse_config,
    problem_summary,
)
from krotov2.errors import ConfigError
from krotov2.runner import (
    SCANNABLE,
    apply_scan_value,
    execute_run,
    execute_scan,
    worker_count,
)


def tls_config(max_iter=5, **overrides):
    data = {
        "schema_version": 1,
        "model": {"kind": "tls", "omega": 2.0, "target": "flip"},
        "grid": {"total_time": 10.0, "n_steps": 100},
        "guess": {"eps0": 0.3},
        "stopping": {"max_iter": max_iter},
        "seed": 7,
    }
    data.update(overrides)
    return data


class TestSchema:
    def test_valid_config_parses(self):
        config = parse_config(tls_config())
        assert config.model.kind == "tls"
        assert config.stopping.max_iter == 5

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="mystery"):
            parse_config(tls_config(mystery=1))

    def test_nested_unknown_key_rejected(self):
        data = tls_config()
        data["grid"]["spacing"] = 0.1
        with pytest.raises(ConfigError, match="grid.spacing"):
            parse_config(data)

    def test_nonpositive_lambda_a_names_key(self):
        data = tls_config(running_cost={"lambda_a": -0.5})
        with pytest.raises(ConfigError, match="lambda_a"):
            parse_config(data)

    def test_wrong_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(tls_config(schema_version=2))

    def test_model_discriminator(self):
        data = tls_config()
        data["model"] = {"kind": "lambda"}
        config = parse_config(data)
        assert config.model.kind == "lambda"
        data["model"] = {"kind": "nonsense"}
        with pytest.raises(ConfigError):
            parse_config(data)

    def test_yaml_and_json_loading(self, tmp_path):
        import json

        import yaml

        data = tls_config()
        ypath = tmp_path / "c.yaml"
        ypath.write_text(yaml.safe_dump(data))
        jpath = tmp_path / "c.json"
        jpath.write_text(json.dumps(data))
        assert load_config(ypath) == load_config(jpath)


class TestAssembly:
    def test_tls_problem(self):
        problem = build_problem(parse_config(tls_config()))
        assert problem.hamiltonian.dim == 2
        assert problem.grid.n_steps == 100

    def test_lambda_problem_forbid(self):
        data = tls_config()
        data["model"] = {"kind": "lambda"}
        data["running_cost"] = {"lambda_a": 1.0, "lambda_b": 20.0,
                                "d_operator": "forbid"}
        data["grid"] = {"total_time": 2.0, "n_steps": 100}
        problem = build_problem(parse_config(data))
        assert problem.cost.lambda_b == 20.0
        assert problem.cost.curvature_sup() == pytest.approx(10.0, rel=1e-9)

    def test_lambda_b_without_operator_rejected(self):
        data = tls_config()
        data["model"] = {"kind": "lambda"}
        data["running_cost"] = {"lambda_b": 20.0}
        with pytest.raises(ConfigError, match="d_operator"):
            build_problem(parse_config(data))

    def test_spin_spin_with_tensor_file(self, tmp_path):
        tensor_path = tmp_path / "tensor.txt"
        np.savetxt(tensor_path, np.diag([0.0, 1.0, 0.5, 0.25]))
        data = tls_config()
        data["model"] = {"kind": "spin_spin",
                         "tensor_file": str(tensor_path)}
        data["grid"] = {"total_time": 4.0, "n_steps": 50}
        problem = build_problem(parse_config(data))
        assert problem.hamiltonian.dim == 4
        assert not problem.hamiltonian.linear_in_field

    def test_fourier_grid_with_potential_file(self, tmp_path):
        n_r = 32
        r = np.linspace(-6.0, 6.0, n_r, endpoint=False)
        pot_path = tmp_path / "v0.txt"
        np.savetxt(pot_path, np.column_stack([r, 0.5 * r**2]))
        data = tls_config()
        data["model"] = {"kind": "fourier_grid", "n_r": n_r, "r_min": -6.0,
                         "r_max": 6.0, "mass": 1.0, "mu": 0.0,
                         "potential_files": [str(pot_path)],
                         "initial_level": 0, "target_level": 0}
        data["grid"] = {"total_time": 1.0, "n_steps": 20}
        problem = build_problem(parse_config(data))
        assert problem.hamiltonian.dim == n_r
        assert problem.surface_energies[0] == pytest.approx(0.5, rel=1e-6)

    def test_const_shape_selector(self):
        data = tls_config()
        data["running_cost"] = {"lambda_a": 1.0, "shape": "const"}
        problem = build_problem(parse_config(data))
        np.testing.assert_array_equal(problem.guess_field.shape, 1.0)

    def test_summary_fields(self):
        summary = problem_summary(parse_config(tls_config()))
        assert summary["name"] == "tls-flip"
        assert summary["max_iter"] == 5
        assert summary["seed"] == 7


class TestRunner:
    def test_run_produces_artifacts(self):
        artifacts = execute_run(parse_config(tls_config()))
        assert artifacts.status == "ok"
        lines = artifacts.convergence_csv.splitlines()
        assert lines[0].startswith("iter,J,J_T")
        assert len(lines) == 2 + 5  # header + guess + iterations
        assert artifacts.field_text.count("\n") == 100
        assert artifacts.overlaps_text.startswith("# k ")
        assert artifacts.summary["violations"] == 0

    def test_monotone_j_column(self):
        artifacts = execute_run(parse_config(tls_config(max_iter=30)))
        rows = artifacts.convergence_csv.splitlines()[1:]
        js = [float(r.split(",")[1]) for r in rows]
        tol = [1e-12 * (1.0 + abs(j)) for j in js]
        assert all(b <= a + t for a, b, t in zip(js, js[1:], tol))

    def test_determinism_byte_identical(self):
        config = parse_config(tls_config(max_iter=12))
        first = execute_run(config)
        second = execute_run(config)
        assert first.convergence_csv == second.convergence_csv
        assert first.field_text == second.field_text
        assert first.overlaps_text == second.overlaps_text

    def test_scan_produces_per_value_runs(self):
        config = parse_config(tls_config(max_iter=3))
        result = execute_scan(config, "lambda_a", [0.5, 1.0, 2.0])
        assert len(result.runs) == 3
        summary_lines = result.summary_csv.splitlines()
        assert summary_lines[0].startswith("parameter,value")
        assert len(summary_lines) == 4

    def test_scan_single_value_matches_run(self):
        config = parse_config(tls_config(max_iter=4))
        alone = execute_run(apply_scan_value(config, "lambda_a", 1.0))
        scanned = execute_scan(config, "lambda_a", [1.0])
        assert scanned.runs[0].convergence_csv == alone.convergence_csv

    def test_scan_empty_values_noop_with_warning(self):
        config = parse_config(tls_config())
        result = execute_scan(config, "lambda_a", [])
        assert result.runs == []
        assert any("empty" in w for w in result.warnings)

    def test_scan_rejects_unknown_parameter(self):
        config = parse_config(tls_config())
        with pytest.raises(ConfigError, match="not scannable"):
            execute_scan(config, "n_steps", [1.0])

    def test_scan_parallel_matches_serial(self, monkeypatch):
        config = parse_config(tls_config(max_iter=4))
        serial = execute_scan(config, "lambda_a", [0.5, 1.0])
        monkeypatch.setenv("KROTOV_THREADS", "2")
        assert worker_count() == 2
        parallel = execute_scan(config, "lambda_a", [0.5, 1.0])
        assert parallel.summary_csv == serial.summary_csv
        for a, b in zip(parallel.runs, serial.runs):
            assert a.convergence_csv == b.convergence_csv

    def test_scannable_covers_documented_parameters(self):
        for name in ("lambda_a", "lambda_b", "a_bar", "eps0", "max_iter"):
            assert name in SCANNABLE

    def test_divergence_reports_last_good_iteration(self, monkeypatch):
        # runner surfaces a partial record when the engine aborts
        import krotov2.runner as runner_mod
        from krotov2.engine import OptimizationRecord, IterationEntry
        from krotov2.errors import DivergenceError

        partial = OptimizationRecord()
        partial.entries.append(IterationEntry(
            iteration=0, j_total=-0.5, j_final=-0.5, int_ga=0.0, int_gb=0.0,
            j_normalized=0.5, delta_j=0.0, monotonic=True, a_bar=0.0,
            b_bar=0.0, c_bar=0.0, retries=0))
        partial.message = "diverged at iteration 1; last good iteration 0"

        def fake_iterate(problem, options):
            raise DivergenceError(partial.message, partial)

        monkeypatch.setattr(runner_mod, "iterate", fake_iterate)
        artifacts = runner_mod.execute_run(parse_config(tls_config()))
        assert artifacts.status == "diverged"
        assert "last good iteration 0" in artifacts.warnings[0]
        assert artifacts.convergence_csv.count("\n") == 2  # header + row 0


def test_cost_operator_must_be_hermitian():
    from krotov2 import (ControlField, Krotov2Error, LinearFieldHamiltonian,
                         ProblemSpec, RunningCost, TimeGrid,
                         orthonormal_basis)

    grid = TimeGrid(n_steps=10, total_time=1.0)
    values = np.zeros(10)
    ham = LinearFieldHamiltonian(np.diag([0.0, 1.0, 2.0]), np.zeros((3, 3)))
    bad_d = np.zeros((3, 3))
    bad_d[0, 1] = 1.0
    cost = RunningCost(lambda_b=1.0, operator=bad_d, total_time=1.0,
                       n_states=1)
    with pytest.raises(Krotov2Error, match="Hermitian"):
        ProblemSpec(name="bad-cost", hamiltonian=ham,
                    initial=orthonormal_basis(3, [0]),
                    targets=orthonormal_basis(3, [1]), grid=grid,
                    guess_field=ControlField(values=values,
                                             shape=np.ones(10),
                                             reference=values),
                    cost=cost)
