import os
import subprocess

import numpy as np
import pytest

import gemmlab

HEADER = (
    "Matrix_Size,Sequential_CPU_ms,Parallel_CPU_ms,Parallel_GPU_ms,"
    "Speedup_CPU_vs_Seq,Speedup_GPU_vs_CPU,Speedup_GPU_vs_Seq"
)


def test_random_matrix_is_deterministic_float32():
    a = gemmlab.random_matrix(33, 42)
    assert a.dtype == np.float32 and a.shape == (33, 33)
    assert np.array_equal(a, gemmlab.random_matrix(33, 42))
    assert not np.array_equal(a, gemmlab.random_matrix(33, 43))
    assert a.min() >= 0.0 and a.max() < 1.0


def test_matmul_matches_numpy_and_parallel_is_bitwise_equal():
    a = gemmlab.random_matrix(65, 1)
    b = gemmlab.random_matrix(65, 2)
    seq = gemmlab.matmul_sequential(a, b)
    np.testing.assert_allclose(seq, a.astype(np.float64) @ b.astype(np.float64), rtol=1e-5)
    for workers, chunk, schedule in [(1, None, "static"), (3, 7, "dynamic"), (None, None, "static")]:
        par = gemmlab.matmul_parallel_cpu(a, b, workers=workers, chunk=chunk, schedule=schedule)
        assert np.array_equal(par, seq)


def test_small_example_and_identity():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    b = np.array([[5, 6], [7, 8]], dtype=np.float32)
    assert gemmlab.matmul_sequential(a, b).tolist() == [[19, 22], [43, 50]]
    r = gemmlab.random_matrix(17, 5)
    assert np.array_equal(gemmlab.matmul_sequential(r, gemmlab.identity_matrix(17)), r)
    assert not gemmlab.matmul_sequential(gemmlab.zero_matrix(17), r).any()


def test_errors_map_to_exceptions():
    with pytest.raises(gemmlab.ShapeError):
        gemmlab.matmul_sequential(np.ones((2, 3), np.float32), np.ones((2, 3), np.float32))
    with pytest.raises(gemmlab.InvalidDimension):
        gemmlab.random_matrix(0, 1)
    with pytest.raises(gemmlab.ConfigError):
        gemmlab.matmul_parallel_cpu(np.ones((2, 2), np.float32), np.ones((2, 2), np.float32), workers=0)
    with pytest.raises(gemmlab.ParseError):
        gemmlab.parse_csv("nope\n")
    assert issubclass(gemmlab.ShapeError, gemmlab.GemmlabError)


def test_compare():
    a = gemmlab.random_matrix(8, 3)
    b = a.copy()
    b[2, 5] += 0.5
    r = gemmlab.compare(a, b)
    assert r["worst_index"] == (2, 5)
    assert r["max_abs_diff"] == pytest.approx(0.5, rel=1e-6)


def test_speedups_and_csv():
    assert gemmlab.CSV_HEADER == HEADER
    row = gemmlab.make_speedup_row(4096, 393280.52, 30332.07, 663.24)
    assert round(row.speedup_gpu_vs_seq, 2) == 592.97
    table = gemmlab.SpeedupTable([row])
    text = gemmlab.emit_csv(table)
    assert text.splitlines() == [HEADER, "4096x4096,393280.5200,30332.0700,663.2400,12.97x,45.73x,592.97x"]
    assert gemmlab.emit_csv(gemmlab.parse_csv(text)) == text


def test_run_plan_without_gpu(tmp_path):
    assert not gemmlab.probe_device().available
    ms = gemmlab.run_plan([16, 32], backends=["seq", "cpu", "gpu-tiled"], repetitions=2, warmup_runs=0)
    by = {(m.backend, m.n): m for m in ms}
    assert by[("seq", 32)].status == "ok" and len(by[("seq", 32)].times_ms) == 2
    assert by[("cpu", 16)].verified
    assert by[("gpu-tiled", 16)].status == "skipped"
    table = gemmlab.compute_speedups(ms)
    assert [r.n for r in table.rows] == [16, 32]
    assert table.rows[0].gpu_ms is None
    assert ",NA," in gemmlab.emit_csv(table)
    paths = gemmlab.emit_figures(table, str(tmp_path / "figs"))
    assert len(paths) == 3 and all(os.path.getsize(p) > 0 for p in paths)


@pytest.mark.skipif("GEMMLAB_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_bench_csv():
    out = subprocess.run(
        [os.environ["GEMMLAB_CLI"], "bench", "--sizes", "16,32", "--reps", "1", "--quiet"],
        capture_output=True, text=True, check=True,
    ).stdout
    table = gemmlab.parse_csv(out)
    assert [r.n for r in table.rows] == [16, 32]
