import json
import os


from conftest import install_fixture_corpus, write_playbook
from forgekit.cli import EXIT_BUDGET, EXIT_ERROR, EXIT_OK, main

GOOD_EVAL = {
    "bug_need_fix": False,
    "script_complete": True,
    "further_simulation_needed": False,
    "result_complete": True,
    "next_step_needed": False,
    "next_step_plan": "Task complete; no further action needed",
}

RETRY_EVAL = {
    "bug_need_fix": False,
    "script_complete": False,
    "further_simulation_needed": False,
    "result_complete": False,
    "next_step_needed": True,
    "next_step_plan": "keep going",
}


def _solve_playbook(task_id="q01", complete=True):
    return {
        task_id: {
            "tool-analysis": {"*": {"plan": {"task_analysis": "", "reuse": [], "requirements": []}}},
            "task-execution": {"*": {"files": [{"path": "report.md", "content": "# ok\n"}]}},
            "evaluation": {"*": {"evaluation": GOOD_EVAL if complete else RETRY_EVAL}},
        }
    }


def _task_file(tmp_path, task_id="q01"):
    p = tmp_path / "task.json"
    p.write_text(json.dumps({"id": task_id, "prompt": "do it"}))
    return p


def test_solve_happy_path(tmp_path, capsys):
    playbook = write_playbook(tmp_path / "pb.json", _solve_playbook())
    base = tmp_path / "runs"
    base.mkdir()
    code = main(
        ["solve", str(_task_file(tmp_path)), "--mode", "tr", "--playbook", str(playbook), "--base-dir", str(base)]
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "complete" in out


def test_solve_budget_exhaustion_exit_2(tmp_path):
    playbook = write_playbook(tmp_path / "pb.json", _solve_playbook(complete=False))
    base = tmp_path / "runs"
    base.mkdir()
    code = main(
        ["solve", str(_task_file(tmp_path)), "--mode", "tr", "--playbook", str(playbook),
         "--base-dir", str(base), "--max-iterations", "2"]
    )
    assert code == EXIT_BUDGET


def test_solve_malformed_task_file(tmp_path, capsys):
    bad = tmp_path / "task.json"
    bad.write_text("{not json")
    code = main(["solve", str(bad), "--playbook", str(write_playbook(tmp_path / "pb.json", {}))])
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_solve_dry_run_spawns_nothing(tmp_path, capsys):
    base = tmp_path / "runs"
    base.mkdir()
    code = main(["solve", str(_task_file(tmp_path)), "--mode", "zs", "--dry-run", "--base-dir", str(base)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "tool-analysis" in out
    assert not (base / "q01").exists()


def test_config_precedence_flags_over_env_over_file(tmp_path, monkeypatch, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"mode": "eo"}))
    monkeypatch.setenv("FORGEKIT_MODE", "tr")
    base = tmp_path / "runs"
    base.mkdir()
    # Flag wins over env and file.
    main(["solve", str(_task_file(tmp_path)), "--mode", "zs", "--dry-run",
          "--config", str(config), "--base-dir", str(base)])
    assert "zero_shot" in capsys.readouterr().out
    # Env wins over file when no flag.
    main(["solve", str(_task_file(tmp_path)), "--dry-run", "--config", str(config), "--base-dir", str(base)])
    assert "tool_reuse" in capsys.readouterr().out
    # File wins over defaults when neither flag nor env.
    monkeypatch.delenv("FORGEKIT_MODE")
    main(["solve", str(_task_file(tmp_path)), "--dry-run", "--config", str(config), "--base-dir", str(base)])
    assert "evaluator_only" in capsys.readouterr().out


def test_curriculum_two_tasks(tmp_path, capsys):
    pb = {}
    pb.update(_solve_playbook("c01"))
    pb.update(_solve_playbook("c02"))
    playbook = write_playbook(tmp_path / "pb.json", pb)
    tasks = tmp_path / "tasks.json"
    tasks.write_text(json.dumps({"tasks": [{"id": "c01", "prompt": "a"}, {"id": "c02", "prompt": "b"}]}))
    base = tmp_path / "runs"
    base.mkdir()
    code = main(["curriculum", str(tasks), "--mode", "tr", "--playbook", str(playbook), "--base-dir", str(base)])
    assert code == EXIT_OK
    assert "toolset:" in capsys.readouterr().out


def test_curriculum_empty_list(tmp_path, capsys):
    tasks = tmp_path / "tasks.json"
    tasks.write_text(json.dumps({"tasks": []}))
    code = main(["curriculum", str(tasks), "--playbook", str(write_playbook(tmp_path / "pb.json", {}))])
    assert code == EXIT_OK
    assert "nothing to do" in capsys.readouterr().out


def test_curriculum_one_failing_task_nonzero_exit(tmp_path, capsys):
    pb = {}
    pb.update(_solve_playbook("c01"))
    pb.update(_solve_playbook("c02", complete=False))
    playbook = write_playbook(tmp_path / "pb.json", pb)
    tasks = tmp_path / "tasks.json"
    tasks.write_text(json.dumps([{"id": "c01", "prompt": "a"}, {"id": "c02", "prompt": "b"}]))
    base = tmp_path / "runs"
    base.mkdir()
    code = main(["curriculum", str(tasks), "--mode", "tr", "--playbook", str(playbook),
                 "--base-dir", str(base), "--max-iterations", "1"])
    assert code == EXIT_BUDGET
    out = capsys.readouterr().out
    assert "c01" in out and "c02" in out  # both outcomes reported


def test_bench_matrix(tmp_path, capsys):
    playbook = write_playbook(tmp_path / "pb.json", _solve_playbook())
    matrix = tmp_path / "matrix.json"
    matrix.write_text(
        json.dumps(
            {
                "tasks": [{"id": "q01", "prompt": "do it"}],
                "modes": ["zs", "tr"],
                "backends": ["mock"],
                "repetitions": 3,
                "playbook": str(playbook),
                "output_dir": str(tmp_path / "bench_out"),
            }
        )
    )
    code = main(["bench", str(matrix)])
    assert code == EXIT_OK
    out_dir = tmp_path / "bench_out"
    table = (out_dir / "tables.md").read_text()
    assert "mock" in table
    assert "Δ%" in table  # both zs and tr requested
    assert (out_dir / "tables.csv").exists()
    radar = (out_dir / "radar.csv").read_text()
    assert radar.splitlines()[0] == "axis,point,value"


def test_bench_invalid_matrix(tmp_path, capsys):
    matrix = tmp_path / "matrix.json"
    matrix.write_text(json.dumps({"modes": ["zs"]}))
    assert main(["bench", str(matrix)]) == EXIT_ERROR


def test_bench_parallel_jobs(tmp_path, capsys):
    playbook = write_playbook(tmp_path / "pb.json", _solve_playbook())
    matrix = tmp_path / "matrix.json"
    matrix.write_text(
        json.dumps(
            {
                "tasks": [{"id": "q01", "prompt": "do it"}],
                "modes": ["zs"],
                "backends": ["mock"],
                "repetitions": 4,
                "playbook": str(playbook),
                "output_dir": str(tmp_path / "bench_par"),
            }
        )
    )
    assert main(["bench", str(matrix), "--jobs", "3"]) == EXIT_OK
    assert (tmp_path / "bench_par" / "tables.md").exists()


def test_optimize_reorganizes(tmp_path, capsys):
    root = tmp_path / "toolset"
    install_fixture_corpus(root, core=True, pairs=3, fillers=15)  # 25 tools flat
    names = sorted(m["name"] for m in _manifests(root))
    groups = [
        {"name": "group_a", "members": names[:9]},
        {"name": "group_b", "members": names[9:17]},
        {"name": "group_c", "members": names[17:]},
    ]
    playbook = write_playbook(
        tmp_path / "pb.json",
        {"toolset": {"toolset-reorg": {"1": {"reorg": {"new_subcategories": groups}}}}},
    )
    code = main(["optimize", str(root), "--playbook", str(playbook)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "25 → 25" in out  # reorg conserves the tool count


def _manifests(root):
    return [json.loads(p.read_text()) for p in root.rglob("*.manifest.json")]


def _merge_playbook(root_name="toolset"):
    def payload(unified, supersedes, flag):
        inputs = [{"name": "value", "type": "number", "required": True}]
        arg = "value"
        if flag:
            inputs.append({"name": flag, "type": "boolean", "required": False})
            arg = f"value, {flag}=False"
        return {
            "merge": True,
            "unified_name": unified,
            "unified_source": f"def {unified}({arg}):\n    return {{'value': float(value)}}\n",
            "supersedes": supersedes,
            "manifest": {
                "name": unified,
                "description": f"Unified replacement for {' and '.join(supersedes)}.",
                "category_path": [],
                "version": 1,
                "inputs": inputs,
                "outputs": [{"name": "value", "type": "number", "required": True}],
                "entrypoint": {"source": f"{unified}.py", "callable": unified},
                "provenance": {"generated_by": "mock", "task_id": "merge", "created_at": "2026-01-02T00:00:00+00:00"},
                "tests_passed": True,
                "enforce_schemas": True,
                "probe_input": {"value": 1.0},
            },
        }

    # Clusters arrive sorted by member tuple; see the fixture pair names.
    proposals = [
        payload("optimize_geometry", ["optimize_geometry", "optimize_geometry_solvated"], "solvated"),
        payload("single_point_energy", ["single_point_energy", "single_point_energy_solvated"], "solvated"),
        payload("hessian_analysis", ["thermochemistry_report", "vibrational_frequencies"], None),
    ]
    merged_names = ["hessian_analysis", "optimize_geometry", "single_point_energy"]
    fillers = sorted(
        name
        for name in (
            "convert_line_notation plot_series_chart fit_decay_constant build_lattice_graph "
            "sample_random_state integrate_trajectory parse_table_file estimate_error_bars "
            "render_contour_map align_point_clouds expand_basis_functions schedule_retry_backoff"
        ).split()
    )
    names_after_merge = sorted(fillers + merged_names)
    return {
        root_name: {
            "tool-merge": {str(i + 1): {"proposal": p} for i, p in enumerate(proposals)},
            "tool-review": {"*": {"review": {"verdict": "approved"}}},
            "toolset-reorg": {
                "1": {
                    "reorg": {
                        "new_subcategories": [
                            {"name": "bucket_a", "members": names_after_merge[:8]},
                            {"name": "bucket_b", "members": names_after_merge[8:]},
                        ]
                    }
                }
            },
        }
    }


def test_optimize_merge_collapses_18_to_15(tmp_path, capsys):
    root = tmp_path / "toolset"
    install_fixture_corpus(root, core=False, pairs=3, fillers=12)  # 18 tools
    playbook = write_playbook(tmp_path / "pb.json", _merge_playbook())
    code = main(["optimize", str(root), "--merge", "--playbook", str(playbook)])
    assert code == EXIT_OK
    assert "18 → 15" in capsys.readouterr().out


def test_optimize_unwritable_toolset(tmp_path, monkeypatch, capsys):
    root = tmp_path / "toolset"
    install_fixture_corpus(root, core=True, pairs=0, fillers=0)
    # chmod is ineffective when tests run as root; simulate the access check.
    monkeypatch.setattr(os, "access", lambda p, mode: False)
    code = main(["optimize", str(root), "--playbook", "unused.json"])
    assert code == EXIT_ERROR
    assert "not writable" in capsys.readouterr().err


def test_score_full_marks(tmp_path, capsys):
    rubric = tmp_path / "rubric.json"
    rubric.write_text(
        json.dumps(
            {
                "criteria": [{"id": "c1", "kind": "range_check", "lo": 0, "hi": 10}],
                "methodology": [{"id": "s1", "description": "", "weight": 1.0}],
            }
        )
    )
    results = tmp_path / "results.json"
    results.write_text(json.dumps({"observed": {"c1": 5}, "stage_scores": {"s1": 10}}))
    code = main(["score", str(results), str(rubric)])
    assert code == EXIT_OK
    assert "combined 1.000" in capsys.readouterr().out


def test_score_partial_band(tmp_path, capsys):
    rubric = tmp_path / "rubric.json"
    rubric.write_text(
        json.dumps(
            {
                "criteria": [
                    {"id": "c1", "kind": "tolerance_band", "ref": 0.0, "full_tol": 0.001, "partial_tol": 0.010},
                    {"id": "c2", "kind": "tolerance_band", "ref": 0.0, "full_tol": 0.001, "partial_tol": 0.010},
                ],
                "methodology": [{"id": "s1", "description": "", "weight": 1.0}],
            }
        )
    )
    results = tmp_path / "results.json"
    results.write_text(json.dumps({"observed": {"c1": 0.0, "c2": 0.005}, "stage_scores": {"s1": 10}}))
    main(["score", str(results), str(rubric)])
    out = capsys.readouterr().out
    assert "accuracy 0.750" in out  # (1.0 + 0.5) / 2


def test_score_unknown_kind_exit_1(tmp_path, capsys):
    rubric = tmp_path / "rubric.json"
    rubric.write_text(json.dumps({"criteria": [{"id": "c1", "kind": "vibes"}], "methodology": []}))
    results = tmp_path / "results.json"
    results.write_text(json.dumps({"observed": {}}))
    assert main(["score", str(results), str(rubric)]) == EXIT_ERROR


def test_solve_rerun_with_overwrite_idempotent(tmp_path, capsys):
    playbook = write_playbook(tmp_path / "pb.json", _solve_playbook())
    base = tmp_path / "runs"
    base.mkdir()
    argv = ["solve", str(_task_file(tmp_path)), "--mode", "tr", "--playbook", str(playbook),
            "--base-dir", str(base), "--overwrite"]
    outcomes = []
    for _ in range(2):
        assert main(argv) == EXIT_OK
        doc = json.loads((base / "q01" / "run_outcome.json").read_text())
        doc["total_time"] = None
        for it in doc["iterations"]:
            it["wall_time"] = None
        outcomes.append(doc)
    assert outcomes[0] == outcomes[1]


def test_executor_env_var_selects_backend(tmp_path, monkeypatch):
    from forgekit.cli import _build_executor

    monkeypatch.setenv("FORGEKIT_EXECUTOR", "slurm")
    config = _build_executor({})
    assert config.backend == "slurm"
    assert config.force_local  # benchmark mode still simulates locally
    monkeypatch.delenv("FORGEKIT_EXECUTOR")
    assert _build_executor({}).backend == "local"


def test_score_missing_input_warns_not_errors(tmp_path, capsys):
    rubric = tmp_path / "rubric.json"
    rubric.write_text(
        json.dumps(
            {
                "criteria": [{"id": "c1", "kind": "range_check", "lo": 0, "hi": 1}],
                "methodology": [{"id": "s1", "description": "", "weight": 1.0}],
            }
        )
    )
    results = tmp_path / "results.json"
    results.write_text(json.dumps({"observed": {}, "stage_scores": {"s1": 10}}))
    code = main(["score", str(results), str(rubric)])
    assert code == EXIT_OK
    assert "accuracy 0.000" in capsys.readouterr().out
