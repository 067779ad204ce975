import json

import numpy as np
import pytest

from flowfield import (
    MotionParams,
    evaluate_mesh,
    load_assets,
    load_encoding,
    make_mini_model,
    save_camera,
    save_params,
)
from flowfield.cli import main
from flowfield.meshfiles import read_obj

from conftest import head_camera, zero_params


@pytest.fixture()
def workdir(tmp_path):
    """Asset, camera, params, and config files for CLI runs."""
    assets_path = tmp_path / "assets.fasc"
    rc = main(["gen-test-model", "--seed", "1", "--subdiv", "2", "--out", str(assets_path)])
    assert rc == 0
    assets = load_assets(assets_path)

    cam_path = tmp_path / "camera.json"
    save_camera(cam_path, head_camera(64))

    src_path = tmp_path / "src.json"
    save_params(src_path, zero_params(assets))
    rng = np.random.default_rng(5)
    dri = MotionParams(
        beta=0.3 * rng.normal(size=assets.num_shape),
        theta=0.15 * rng.normal(size=assets.theta_size),
        psi=0.4 * rng.normal(size=assets.num_expr),
    )
    dri_path = tmp_path / "dri.json"
    save_params(dri_path, dri)

    cfg_path = tmp_path / "config.json"
    cfg_path.write_text("{}")
    return tmp_path


def encode_args(workdir, out_name, *extra):
    return [
        "encode",
        "--assets", str(workdir / "assets.fasc"),
        "--src-params", str(workdir / "src.json"),
        "--dri-params", str(workdir / "dri.json"),
        "--camera", str(workdir / "camera.json"),
        "--config", str(workdir / "config.json"),
        "--out", str(workdir / out_name),
        *extra,
    ]


class TestGenTestModel:
    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.fasc", tmp_path / "b.fasc"
        assert main(["gen-test-model", "--seed", "3", "--subdiv", "1", "--out", str(a)]) == 0
        assert main(["gen-test-model", "--seed", "3", "--subdiv", "1", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_negative_subdiv_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen-test-model", "--seed", "1", "--subdiv", "-1", "--out", str(tmp_path / "x")])
        assert exc.value.code == 2

    def test_overwrite_needs_force(self, tmp_path):
        out = tmp_path / "a.fasc"
        assert main(["gen-test-model", "--seed", "1", "--subdiv", "1", "--out", str(out)]) == 0
        assert main(["gen-test-model", "--seed", "1", "--subdiv", "1", "--out", str(out)]) == 4
        assert (
            main(["gen-test-model", "--seed", "1", "--subdiv", "1", "--out", str(out), "--force"])
            == 0
        )


class TestEvalMesh:
    def test_zero_params_write_template(self, workdir):
        out = workdir / "mesh.obj"
        rc = main([
            "eval-mesh",
            "--assets", str(workdir / "assets.fasc"),
            "--params", str(workdir / "src.json"),
            "--out", str(out),
        ])
        assert rc == 0
        mesh = read_obj(out)
        assets = load_assets(workdir / "assets.fasc")
        assert np.max(np.abs(mesh.vertices - assets.template_vertices)) <= 1e-9
        assert np.array_equal(mesh.faces, assets.faces)

    def test_jaw_edit_moves_jaw_vertices(self, workdir):
        assets = load_assets(workdir / "assets.fasc")
        theta = np.zeros(assets.theta_size)
        theta[5] = 0.4
        jawed = MotionParams(
            beta=np.zeros(assets.num_shape), theta=theta, psi=np.zeros(assets.num_expr)
        )
        params_path = workdir / "jaw.json"
        save_params(params_path, jawed)
        out = workdir / "jaw.obj"
        rc = main([
            "eval-mesh",
            "--assets", str(workdir / "assets.fasc"),
            "--params", str(params_path),
            "--out", str(out),
        ])
        assert rc == 0
        mesh = read_obj(out)
        oracle = evaluate_mesh(assets, jawed)
        assert np.max(np.abs(mesh.vertices - oracle.vertices)) <= 1e-9
        moved = np.linalg.norm(mesh.vertices - assets.template_vertices, axis=1)
        jaw = assets.skin_weights[:, 1] > 0.5
        untouched = assets.skin_weights[:, 1] == 0.0
        assert moved[jaw].max() > 1e-3
        assert moved[untouched].max() <= 1e-9

    def test_validation_failure_exit_code(self, workdir):
        bad = workdir / "bad.json"
        bad.write_text(json.dumps({"beta": [0.0]}))
        rc = main([
            "eval-mesh",
            "--assets", str(workdir / "assets.fasc"),
            "--params", str(bad),
            "--out", str(workdir / "x.obj"),
        ])
        assert rc == 3


class TestEncode:
    def test_tensor_shape_and_roundtrip(self, workdir):
        rc = main(encode_args(workdir, "enc.ften"))
        assert rc == 0
        enc = load_encoding(workdir / "enc.ften")
        assert enc.data.shape == (64, 64, 60)  # N defaults to 20

    def test_identical_params_give_black_vis(self, workdir):
        args = encode_args(workdir, "zero.ften", "--emit-vis", str(workdir / "vis.ppm"))
        args[args.index("--dri-params") + 1] = str(workdir / "src.json")
        assert main(args) == 0
        data = (workdir / "vis.ppm").read_bytes()
        pixels = data.rpartition(b"255\n")[2]
        assert pixels == bytes(64 * 64 * 3)

    def test_uniform_mode_differs(self, workdir):
        assert main(encode_args(workdir, "guided.ften")) == 0
        assert main(encode_args(workdir, "uniform.ften", "--mode", "uniform")) == 0
        a = load_encoding(workdir / "guided.ften")
        b = load_encoding(workdir / "uniform.ften")
        assert a.data.tobytes() != b.data.tobytes()
        assert a.metadata["mode"] == "depth_guided"
        assert b.metadata["mode"] == "uniform"

    def test_emit_depth_writes_pgm(self, workdir):
        assert main(encode_args(workdir, "e.ften", "--emit-depth", str(workdir / "d.pgm"))) == 0
        head = (workdir / "d.pgm").read_bytes()[:40]
        assert head.startswith(b"P5\n")

    def test_deterministic_across_runs_and_threads(self, workdir):
        assert main(encode_args(workdir, "a.ften", "--threads", "1")) == 0
        assert main(encode_args(workdir, "b.ften", "--threads", "8")) == 0
        a = (workdir / "a.ften").read_bytes()
        b = (workdir / "b.ften").read_bytes()
        assert a == b

    def test_edit_flags_match_library_composition(self, workdir):
        dpsi = json.dumps([0.3, 0.0, 0.0, 0.0])
        assert main(encode_args(workdir, "edited.ften", "--delta-psi", dpsi)) == 0
        assert main(encode_args(workdir, "plain.ften")) == 0
        edited = load_encoding(workdir / "edited.ften")
        plain = load_encoding(workdir / "plain.ften")
        assert edited.data.tobytes() != plain.data.tobytes()

    def test_edit_vector_from_file(self, workdir):
        vec = workdir / "dpsi.json"
        vec.write_text(json.dumps([0.3, 0.0, 0.0, 0.0]))
        assert main(encode_args(workdir, "edited2.ften", "--delta-psi", str(vec))) == 0
        inline = json.dumps([0.3, 0.0, 0.0, 0.0])
        assert main(encode_args(workdir, "edited3.ften", "--delta-psi", inline)) == 0
        a = (workdir / "edited2.ften").read_bytes()
        b = (workdir / "edited3.ften").read_bytes()
        assert a == b

    def test_threads_env_fallback(self, workdir, monkeypatch):
        monkeypatch.setenv("FLOWFIELD_THREADS", "2")
        from flowfield.cli import build_parser

        args = build_parser().parse_args(encode_args(workdir, "x.ften"))
        assert args.threads == 2


class TestErrorExitCodes:
    def test_missing_file_is_io(self, workdir):
        args = encode_args(workdir, "x.ften")
        args[args.index("--assets") + 1] = str(workdir / "absent.fasc")
        assert main(args) == 4

    def test_truncated_assets_is_io(self, workdir):
        path = workdir / "assets.fasc"
        path.write_bytes(path.read_bytes()[:100])
        assert main(encode_args(workdir, "x.ften")) == 4

    def test_invalid_json_is_validation(self, workdir):
        (workdir / "src.json").write_text("{broken")
        assert main(encode_args(workdir, "x.ften")) == 3

    def test_nan_params_is_numeric(self, workdir):
        (workdir / "src.json").write_text(
            '{"beta": [NaN, 0, 0, 0], "theta": [0,0,0,0,0,0], "psi": [0,0,0,0]}'
        )
        assert main(encode_args(workdir, "x.ften")) == 5

    def test_unknown_flag_is_usage(self, workdir):
        with pytest.raises(SystemExit) as exc:
            main(encode_args(workdir, "x.ften", "--what"))
        assert exc.value.code == 2
