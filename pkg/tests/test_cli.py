import numpy as np
import pytest

from spinpulse.cli import main

PI = "3.14159265358979312"

PULSE_CONSTANT_PI = f"""schema_version = 1
kind = pulse
representation = fourier
tau_p = 1.0
tau_s = 0.5
theta = {PI}
fourier_order = 0
coeff.y.a.0 = -1.57079632679489656
"""

BATH_DYNAMIC = """schema_version = 1
kind = bath
preset = spin-dynamic
lambda = 1.0
omega_b = 1.0
"""

PROBLEM_S = f"""schema_version = 1
kind = problem
theta = {PI}
tau_s = 0.5
fourier_order = 2
components = y
targets = r1
symmetric = true
endpoint_zero_derivatives = 1
restarts = 8
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "pi.pulse").write_text(PULSE_CONSTANT_PI)
    (tmp_path / "dyn.bath").write_text(BATH_DYNAMIC)
    (tmp_path / "s.problem").write_text(PROBLEM_S)
    return tmp_path


class TestConvert:
    def test_trajectory_csv(self, workdir):
        out = workdir / "traj.csv"
        code = main(["convert", str(workdir / "pi.pulse"), "--grid", "128",
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema_version=1"
        assert lines[1].startswith("# manifest_sha256=")
        assert lines[2] == "t,ax,ay,az,psi,nx,ny,nz"
        first = [float(x) for x in lines[3].split(",")]
        assert first[0] == 0.0
        # angle sweep of a pi pulse: psi(tau_p) - psi(0) = -pi for the pinned mean
        last = [float(x) for x in lines[-1].split(",")]
        assert last[4] - first[4] == pytest.approx(np.pi, abs=1e-8)

    def test_amplitude_output_satisfies_projection(self, workdir, capsys):
        out = workdir / "amp.csv"
        code = main(["convert", str(workdir / "pi.pulse"), "--to", "amplitude",
                     "--grid", "128", "--out", str(out)])
        assert code == 0
        rows = np.loadtxt(out.read_text().splitlines()[3:], delimiter=",")
        assert np.abs(rows[:, 2] + np.pi / 2).max() < 1e-7

    def test_malformed_exits_2(self, workdir, capsys):
        bad = workdir / "bad.pulse"
        bad.write_text("schema_version = 1\nkind = pulse\nbroken\n")
        assert main(["convert", str(bad)]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_invariant_violation_exits_3(self, workdir):
        bad = workdir / "bad_axis.pulse"
        bad.write_text(
            "schema_version = 1\nkind = pulse\nrepresentation = axis_angle_samples\n"
            f"tau_p = 1\ntau_s = 0.5\ntheta = {PI}\n"
            "sample.0 = 0 0 2 0 0\nsample.1 = 1 0 1 0 1\n")
        assert main(["convert", str(bad)]) == 3

    def test_missing_file_exits_2(self, workdir):
        assert main(["convert", str(workdir / "nope.pulse")]) == 2


class TestCorrections:
    def test_uncorrected_pulse_fails_threshold(self, workdir, capsys):
        out = workdir / "report.txt"
        code = main(["corrections", str(workdir / "pi.pulse"), "--out", str(out)])
        assert code == 1
        text = out.read_text()
        fields = dict(line.split(" = ") for line in text.strip().splitlines())
        assert float(fields["r1_normalized"]) == pytest.approx(2 / np.pi, abs=1e-6)
        assert fields["pi_pulse"] == "true"

    def test_no_pulse_passes(self, workdir):
        quiet = workdir / "zero.pulse"
        quiet.write_text("schema_version = 1\nkind = pulse\nrepresentation = fourier\n"
                         "tau_p = 1.0\ntau_s = 1.0\ntheta = 0\nfourier_order = 0\n")
        assert main(["corrections", str(quiet), "--targets", "r1,r2a,r2b"]) == 0

    def test_threshold_override(self, workdir):
        code = main(["corrections", str(workdir / "pi.pulse"), "--threshold", "10.0"])
        assert code == 0


class TestSolveAndVerify:
    def test_solve_writes_reverifiable_solution(self, workdir):
        out = workdir / "solution.pulse"
        assert main(["solve", str(workdir / "s.problem"), "--seed", "1",
                     "--out", str(out)]) == 0
        text = out.read_text()
        assert "solution.converged = true" in text
        assert "manifest_sha256 = " in text
        # the solution file is itself a valid pulse file passing the r1 gate
        assert main(["corrections", str(out)]) == 0

    def test_verify_first_order_band(self, workdir):
        sol = workdir / "solution.pulse"
        main(["solve", str(workdir / "s.problem"), "--seed", "1", "--out", str(sol)])
        out = workdir / "sweep.csv"
        code = main(["verify", str(sol), str(workdir / "dyn.bath"),
                     "--sweep", "1e-2:1e-1:4", "--regime", "first-order",
                     "--out", str(out)])
        assert code == 0
        trailer = [l for l in out.read_text().splitlines() if l.startswith("#")]
        assert any("uf_slope=" in l for l in trailer)

    def test_verify_wrong_band_fails(self, workdir):
        out = workdir / "sweep.csv"
        code = main(["verify", str(workdir / "pi.pulse"), str(workdir / "dyn.bath"),
                     "--sweep", "1e-2:1e-1:4", "--regime", "first-order",
                     "--out", str(out)])
        assert code == 1   # an uncorrected pulse has slope ~1

    def test_bad_sweep_spec(self, workdir):
        assert main(["verify", str(workdir / "pi.pulse"), str(workdir / "dyn.bath"),
                     "--sweep", "nope"]) == 2


class TestNogo:
    def test_end_split_gaps_nonnegative(self, workdir):
        out = workdir / "gaps.csv"
        code = main(["nogo", "ts-eq-tp", "--samples", "20", "--grid", "128",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[2] == "sample,tau_s,gap"
        gaps = [float(l.split(",")[2]) for l in lines[3:] if not l.startswith("#")]
        assert min(gaps) >= -1e-9

    def test_unknown_check(self):
        assert main(["nogo", "bogus", "--samples", "5"]) == 2

    def test_zero_samples(self):
        assert main(["nogo", "ts-eq-tp", "--samples", "0"]) == 2


class TestDeterminism:
    def test_identical_manifest_identical_bytes(self, workdir):
        out1, out2 = workdir / "a.csv", workdir / "b.csv"
        for out in (out1, out2):
            main(["nogo", "pi-second-order", "--samples", "10", "--grid", "128",
                  "--seed", "11", "--out", str(out)])
        assert out1.read_bytes() == out2.read_bytes()
        out3 = workdir / "c.csv"
        main(["nogo", "pi-second-order", "--samples", "10", "--grid", "128",
              "--seed", "12", "--out", str(out3)])
        assert out1.read_bytes() != out3.read_bytes()

    def test_convert_deterministic(self, workdir):
        outs = []
        for name in ("x.csv", "y.csv"):
            out = workdir / name
            main(["convert", str(workdir / "pi.pulse"), "--grid", "256",
                  "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestAxisAngleInput:
    def test_sampled_input_to_amplitude_passes_projection_check(self, tmp_path):
        t = np.linspace(0.0, 1.0, 65)
        lines = ["schema_version = 1", "kind = pulse",
                 "representation = axis_angle_samples",
                 "tau_p = 1.0", "tau_s = 0.0", f"theta = {PI}"]
        for i, ti in enumerate(t):
            lines.append(f"sample.{i} = {ti} 0 1 0 {np.pi * ti}")
        src = tmp_path / "frame.pulse"
        src.write_text("\n".join(lines) + "\n")
        out = tmp_path / "amp.csv"
        assert main(["convert", str(src), "--to", "amplitude", "--grid", "256",
                     "--out", str(out)]) == 0
        rows = np.loadtxt(out.read_text().splitlines()[3:], delimiter=",")
        # v . a = psi'/2 with a = y and psi' = pi
        assert np.abs(rows[:, 2] - np.pi / 2).max() < 1e-6


class TestProbeCommand:
    def test_pi_second_order_problem_probes_automatically(self, tmp_path, capsys):
        prob = tmp_path / "pi2.problem"
        prob.write_text(
            f"schema_version = 1\nkind = problem\ntheta = {PI}\ntau_s = free\n"
            "fourier_order = 1\ncomponents = x y\ntargets = r1 r2a r2b\n"
            "symmetric = false\ngrid = 256\n")
        out = tmp_path / "probe.pulse"
        code = main(["solve", str(prob), "--restarts", "2", "--seed", "3",
                     "--out", str(out)])
        assert code == 0                      # certificate holds
        text = out.read_text()
        assert "solution.converged = false" in text
        assert "probe regime=pi-second-order" in text


class TestVerifyDegenerate:
    def test_zero_coupling_bath_exits_4(self, workdir):
        free_bath = workdir / "free.bath"
        free_bath.write_text("schema_version = 1\nkind = bath\n"
                             "preset = spin-dynamic\nlambda = 0.0\n")
        code = main(["verify", str(workdir / "pi.pulse"), str(free_bath),
                     "--sweep", "1e-2:1e-1:4"])
        assert code == 4
