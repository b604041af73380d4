# The same workflow through the command line: generate a lattice and a
# spiral, compare them at theta = pi/2, solve a one-edge target, render
# SVGs. Outputs land in demos/out/.

import json
import pathlib
import subprocess
import sys

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)


def run(*args):
    cmd = [sys.executable, "-m", "thetaconf.cli", *map(str, args)]
    print("$", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


lattice = out / "lattice.mesh.json"
spiral = out / "spiral.mesh.json"
run("gen", "lattice", write_json(out / "lattice.params.json",
    {"alpha": 1.1, "beta": 0.95, "rows": 8, "cols": 8}), lattice)
run("gen", "doyle", write_json(out / "spiral.params.json",
    {"angles": [0.9, 1.1, 1.1415926535897931, 0.75, 1.3, 1.0915926535897931],
     "rows": 8, "cols": 8}), spiral)

# The spiral against its own combinatorics: every flower closes, every
# cross-ratio is one of three class values.
run("analyze", spiral, out / "spiral.report.json")
rep = json.loads((out / "spiral.report.json").read_text())
print("  flowers ok:", all(f["ok"] for f in rep["flower_closing"]))
print("  all flowers symmetric:", all(f["symmetric"] for f in rep["conformal_symmetry"]))

# One-edge target on the lattice, solved at theta = pi/3 and rendered
# with residual coloring. The chosen edge has both endpoints on the
# boundary; a single nonzero target on an edge into the interior would
# violate the spoke sums and could only be matched approximately.
targets = write_json(out / "one_edge.targets.json",
                     {"edges": [[1, 8]], "values": [0.05]})
run("solve", lattice, targets, "--theta", 1.0471975511965976,
    "--out-prefix", out / "one_edge")
sol = json.loads((out / "one_edge.report.json").read_text())
print("  solve converged:", sol["solver"]["converged"],
      "in", sol["solver"]["iterations"], "steps;",
      "residual vs targets:", sol["layout"]["max_theta_residual_vs_targets"])

run("render", lattice, out / "lattice.svg")
run("render", out / "one_edge.mesh.json", out / "one_edge.svg",
    "--circumcircles", "--report", out / "one_edge.report.json")
print("wrote", sorted(p.name for p in out.glob("*.svg")))
